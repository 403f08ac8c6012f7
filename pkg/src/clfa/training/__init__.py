from .step import lr_at, enabled_encoders, ObjectiveTerms, forward_objective, train_step
from .loop import check_dataset, build_state, restore_state, fit, fit_seeds
