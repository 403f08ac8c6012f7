"""The learnable components and their forward operations.

F (backbone + projection) yields a d-length feature whose first half is the causal part f_c and
second half the non-causal part f_b. H classifies a half, M reduces a (f_c, f_b) concatenation back
to a half, the meta-knowledge encoders E_ag / E_ap map (anchor half, other half) pairs to a Gaussian
over implicit transformations, and one shared augmentor A applies a sampled transformation to a half.
"""

from typing import NamedTuple, Optional

import numpy as np
import torch
from torch import nn

from clfa.common import names as N
from clfa.common.config import ModelConfig
from clfa.common.errors import argument_error
from clfa.model.backbones import build_backbone



class FeaturePair(NamedTuple):
    f_c: torch.Tensor
    f_b: torch.Tensor

    @property
    def full(self) -> torch.Tensor:
        return torch.cat([self.f_c, self.f_b], dim=-1)


class MetaKnowledge(NamedTuple):
    mu: torch.Tensor
    log_var: torch.Tensor

    @property
    def std(self) -> torch.Tensor:
        return torch.exp(0.5 * self.log_var)



class MetaEncoder(nn.Module):
    """(anchor half ⊕ other half) -> hidden (ReLU) -> (mu, log_var). Heads start at zero: unit Gaussian at init."""

    def __init__(self, in_dim: int, hidden: int, z_dim: int):
        super().__init__()
        self.body = nn.Sequential(nn.Linear(in_dim, hidden), nn.ReLU())
        self.mu = nn.Linear(hidden, z_dim)
        self.log_var = nn.Linear(hidden, z_dim)
        for head in (self.mu, self.log_var):
            nn.init.zeros_(head.weight)
            nn.init.zeros_(head.bias)

    def forward(self, x) -> MetaKnowledge:
        h = self.body(x)
        return MetaKnowledge(self.mu(h), self.log_var(h))


class Augmentor(nn.Module):
    """(half ⊕ z) -> hidden (ReLU) -> half."""

    def __init__(self, half_dim: int, z_dim: int, hidden: int):
        super().__init__()
        self.body = nn.Sequential(
            nn.Linear(half_dim + z_dim, hidden), nn.ReLU(),
            nn.Linear(hidden, half_dim),
        )

    def forward(self, x):
        return self.body(x)



class CausalFeatureModel(nn.Module):

    def __init__(self, cfg: ModelConfig):
        super().__init__()
        self.cfg = cfg
        d, half, z = cfg.feature_dim, cfg.half_dim, cfg.z_dim

        self.backbone = build_backbone(cfg)
        self.proj = nn.Linear(self.backbone.out_dim, d)
        self.H = nn.Linear(half, cfg.num_classes)
        self.M = nn.Linear(d, half)
        self.E_ag = MetaEncoder(d, cfg.encoder_hidden, z)
        self.E_ap = MetaEncoder(d, cfg.encoder_hidden, z)
        self.A = Augmentor(half, z, cfg.augmentor_hidden)

        # DOC: class list of the training set, indexed like H's outputs; None until fit or load_model sets it
        self.class_names: Optional[tuple[str, ...]] = None

        self.register_buffer("input_mean", torch.tensor(cfg.input_mean[:cfg.in_channels]).view(1, -1, 1, 1))
        self.register_buffer("input_std", torch.tensor(cfg.input_std[:cfg.in_channels]).view(1, -1, 1, 1))

    # DOC: component name -> module, the keys of a checkpoint
    @property
    def components(self) -> dict[str, nn.Module]:
        return {
            N.BACKBONE: self.backbone,
            N.PROJECTION: self.proj,
            N.CLASSIFIER: self.H,
            N.REDUCER: self.M,
            N.ENCODER_AG: self.E_ag,
            N.ENCODER_AP: self.E_ap,
            N.AUGMENTOR: self.A,
        }

    # DOC: parameter groups of Ω, with F = backbone + projection
    @property
    def parameter_groups(self) -> dict[str, list[nn.Parameter]]:
        return {
            "F": list(self.backbone.parameters()) + list(self.proj.parameters()),
            N.CLASSIFIER: list(self.H.parameters()),
            N.REDUCER: list(self.M.parameters()),
            N.ENCODER_AG: list(self.E_ag.parameters()),
            N.ENCODER_AP: list(self.E_ap.parameters()),
            N.AUGMENTOR: list(self.A.parameters()),
        }

    @property
    def device(self) -> torch.device:
        return self.proj.weight.device

    @property
    def dtype(self) -> torch.dtype:
        return self.proj.weight.dtype


    # REGION: [Input handling]

    def to_input(self, images) -> torch.Tensor:
        """N x H x W x C float ndarray (or a list of H x W x C arrays) -> N x C x H x W tensor on the model device."""
        if isinstance(images, (list, tuple)):
            images = np.stack(images)
        if isinstance(images, np.ndarray):
            if images.ndim != 4:
                raise argument_error(f"Expected an N x H x W x C batch, got shape {images.shape}.")
            images = torch.from_numpy(np.ascontiguousarray(images)).permute(0, 3, 1, 2)
        return images.to(device=self.device, dtype=self.dtype)

    def _check_input(self, x: torch.Tensor):
        expected = (self.cfg.in_channels, self.cfg.image_size, self.cfg.image_size)
        if x.ndim != 4 or tuple(x.shape[1:]) != expected:
            raise argument_error(
                f"Input batch must be N x {expected[0]} x {expected[1]} x {expected[2]}, got {list(x.shape)}.",
                expected = list(expected), got = list(x.shape)
            )

    def _check_half(self, name: str, v: torch.Tensor, length: Optional[int] = None):
        length = length or self.cfg.half_dim
        if v.shape[-1] != length:
            raise argument_error(f"{name} must have length {length}, got {v.shape[-1]}.", name=name)

    # ENDREGION: [Input handling]


    # REGION: [Forward operations]

    def features(self, x: torch.Tensor) -> torch.Tensor:
        """Full d-length feature F(x) for an N x C x H x W batch with values in [0, 1]."""
        self._check_input(x)
        x = (x - self.input_mean) / self.input_std
        return self.proj(self.backbone(x))

    def extract(self, x: torch.Tensor) -> FeaturePair:
        feature = self.features(x)
        half = self.cfg.half_dim
        return FeaturePair(feature[..., :half], feature[..., half:])

    def encode_meta(self, e: str, f_t_a: torch.Tensor, f_t_other: torch.Tensor) -> MetaKnowledge:
        """Meta-knowledge of encoder e (ag or ap) from the ordered pair (anchor half, other half)."""
        if e not in N.ENCODER_IDS:
            raise argument_error(f"Unknown encoder '{e}', expected one of {list(N.ENCODER_IDS)}.")
        self._check_half("f_t_a", f_t_a)
        self._check_half("f_t_other", f_t_other)
        encoder = self.E_ag if e == N.AG else self.E_ap
        return encoder(torch.cat([f_t_a, f_t_other], dim=-1))

    @staticmethod
    def reparameterize(mk: MetaKnowledge, eps: torch.Tensor) -> torch.Tensor:
        if eps.shape != mk.mu.shape:
            raise argument_error(f"eps must have shape {list(mk.mu.shape)}, got {list(eps.shape)}.")
        return mk.mu + eps * mk.std

    def sample_eps(self, mk: MetaKnowledge, generator: Optional[torch.Generator] = None) -> torch.Tensor:
        eps = torch.randn(mk.mu.shape, generator=generator, dtype=mk.mu.dtype)
        return eps.to(mk.mu.device)

    def augment(self, f_t_a: torch.Tensor, z: torch.Tensor) -> torch.Tensor:
        self._check_half("f_t_a", f_t_a)
        self._check_half("z", z, self.cfg.z_dim)
        return self.A(torch.cat([f_t_a, z], dim=-1))

    def classify_logits(self, f: torch.Tensor) -> torch.Tensor:
        self._check_half("f", f)
        return self.H(f)

    def intervene_logits(self, f_c: torch.Tensor, f_b: torch.Tensor) -> torch.Tensor:
        """H(M(f_c ⊕ f_b)) before the softmax."""
        self._check_half("f_c", f_c)
        self._check_half("f_b", f_b)
        return self.H(self.M(torch.cat([f_c, f_b], dim=-1)))

    def intervene_classify(self, f_c: torch.Tensor, f_b: torch.Tensor) -> torch.Tensor:
        return torch.softmax(self.intervene_logits(f_c, f_b), dim=-1)

    # ENDREGION: [Forward operations]


    # REGION: [Inference]

    def predict_proba(self, x: torch.Tensor) -> torch.Tensor:
        """Class probabilities H(f_c). Only F and H take part."""
        return torch.softmax(self.classify_logits(self.extract(x).f_c), dim=-1)

    @torch.no_grad()
    def predict(self, x: torch.Tensor) -> torch.Tensor:
        return self.classify_logits(self.extract(x).f_c).argmax(dim=-1)

    # ENDREGION: [Inference]



def build_model(cfg: ModelConfig, dtype: str = "float32", device: str = "cpu") -> CausalFeatureModel:
    model = CausalFeatureModel(cfg)
    return model.to(device=torch.device(device), dtype=getattr(torch, dtype))
