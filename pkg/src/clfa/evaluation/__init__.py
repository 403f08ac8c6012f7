from .metrics import resolve_model, evaluate
from .probe import feature_slice, fit_probe, linear_probe
from .export import embedding_frame, export_embeddings, export_meta_samples
from .report import collect_records, summarize, plot_loss_curves, report
from .protocols import (
    VARIANTS,
    single_dg,
    severity_sweep,
    leave_one_domain_out,
    variant_config,
    run_synthetic_shift_study,
)
