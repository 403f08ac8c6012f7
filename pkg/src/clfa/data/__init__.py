from .schema import LabeledSample, Triple, ImageDataset, concat_datasets, holdout_split
from .folder import load_folder_dataset, load_domains, load_corruption_levels, write_folder_dataset, decode_image
from .triples import sample_triple_batch, replay_generated
from .synthetic import SyntheticFactorSpec, load_synthetic_spec, generate_synthetic, make_synthetic_splits, empirical_mutual_information
