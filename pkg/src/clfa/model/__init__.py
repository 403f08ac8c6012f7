from .backbones import TinyCNN, ConvNet, WideResNet, ResNet18Trunk, build_backbone
from .core import FeaturePair, MetaKnowledge, MetaEncoder, Augmentor, CausalFeatureModel, build_model
from .checkpoint import save_checkpoint, read_checkpoint, restore_model, load_model
from .inference import predict_dataset, dataset_accuracy, dataset_features
