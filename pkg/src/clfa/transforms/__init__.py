from .bank import (
    ImageTensor,
    TransformSpec,
    TransformBank,
    DEFAULT_BANK,
    MAGNITUDE_TABLE,
    PRESETS,
    STRATEGY_NAMES,
    apply_transform,
    compose,
    default_spec,
    resolve_names,
    sample_strategy,
)
