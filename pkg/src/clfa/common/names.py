# DOC: names shared across the package components

# REGION: [Model components]

BACKBONE = "F.backbone"
PROJECTION = "F.proj"
CLASSIFIER = "H"
REDUCER = "M"
ENCODER_AG = "E_ag"
ENCODER_AP = "E_ap"
AUGMENTOR = "A"

COMPONENTS = (BACKBONE, PROJECTION, CLASSIFIER, REDUCER, ENCODER_AG, ENCODER_AP, AUGMENTOR)

# DOC: parameter groups of Ω, F counts once
PARAMETER_GROUPS = ("F", CLASSIFIER, REDUCER, ENCODER_AG, ENCODER_AP, AUGMENTOR)

# ENDREGION: [Model components]


# REGION: [Encoders and feature halves]

AG = "ag"
AP = "ap"
ENCODER_IDS = (AG, AP)

CAUSAL = "c"
NONCAUSAL = "b"
FEATURE_HALVES = (CAUSAL, NONCAUSAL)

# ENDREGION: [Encoders and feature halves]


# REGION: [Backbones]

TINY_CNN = "tiny_cnn"
CONVNET = "convnet"
WRN16_4 = "wrn16_4"
RESNET18 = "resnet18"

BACKBONES = (TINY_CNN, CONVNET, WRN16_4, RESNET18)

# ENDREGION: [Backbones]


# REGION: [Dataset tags]

PACS = "pacs"
DIGITS = "digits"
CIFAR10 = "cifar10"
OFFICE_HOME = "office_home"
DOMAINNET = "domainnet"
SYNTHETIC = "synthetic"

DATASET_TAGS = (PACS, DIGITS, CIFAR10, OFFICE_HOME, DOMAINNET, SYNTHETIC)
DIGIT_DATASETS = (DIGITS,)

SPLIT_ALL = "all"
SPLIT_TRAIN = "train"
SPLIT_VAL = "val"
SPLIT_TEST = "test"
SPLITS = (SPLIT_ALL, SPLIT_TRAIN, SPLIT_VAL, SPLIT_TEST)

# ENDREGION: [Dataset tags]


# REGION: [Transform strategies]

BRIGHTNESS = "Brightness"
CONTRAST = "Contrast"
COLOR = "Color"
SHARPNESS = "Sharpness"
AUTO_CONTRAST = "AutoContrast"
INVERT = "Invert"
EQUALIZE = "Equalize"
SOLARIZE = "Solarize"
SOLARIZE_ADD = "SolarizeAdd"
POSTERIZE = "Posterize"
NOISE_SALT = "NoiseSalt"
NOISE_GAUSSIAN = "NoiseGaussian"
SHEAR_X = "ShearX"
SHEAR_Y = "ShearY"
ROTATE = "Rotate"
FLIP = "Flip"

PHOTOMETRIC = "photometric"
GEOMETRIC = "geometric"

# ENDREGION: [Transform strategies]


# REGION: [Losses and protocols]

LOSS_CLS = "cls"
LOSS_IND = "ind"
LOSS_AUG = "aug"
LOSS_INT = "int"
LOSS_TOTAL = "total"

FULL_PRODUCT = "full_product"
SHUFFLED_K = "shuffled_k"

SINGLE_DG = "single_dg"
SEVERITY_SWEEP = "severity_sweep"
LEAVE_ONE_OUT = "leave_one_out"
SYNTHETIC_SHIFT = "synthetic_shift"
PROTOCOLS = (SINGLE_DG, SEVERITY_SWEEP, LEAVE_ONE_OUT, SYNTHETIC_SHIFT)

PROBE_FC = "f_c"
PROBE_FB = "f_b"
PROBE_FULL = "full"
PROBE_TARGETS = (PROBE_FC, PROBE_FB, PROBE_FULL)

# ENDREGION: [Losses and protocols]


# REGION: [Run directory layout]

CONFIG_SNAPSHOT = "config.json"
METRICS_LOG = "metrics.jsonl"
PROVENANCE_LOG = "provenance.jsonl"
RECORDS_LOG = "records.jsonl"
FINAL_CHECKPOINT = "final.pt"
BEST_CHECKPOINT = "best.pt"
CHECKPOINT_PREFIX = "ckpt_"

# ENDREGION: [Run directory layout]


# REGION: [Environment]

ENV_SEED = "CLFA_SEED"
ENV_DEVICE = "CLFA_DEVICE"
ENV_LOG_LEVEL = "CLFA_LOG_LEVEL"

# ENDREGION: [Environment]
