# DOC: Image-level strategy implementations on CHW float tensors in [0, 1]

import math

import numpy as np
import torch
from torchvision.transforms import InterpolationMode
from torchvision.transforms import functional as TF


# DOC: SolarizeAdd only touches pixels below this level (128/255 on the 8-bit scale)
SOLARIZE_ADD_THRESHOLD = 128.0 / 255.0


def _to_uint8(img: torch.Tensor) -> torch.Tensor:
    return (img * 255.0).round().clamp(0, 255).to(torch.uint8)

def _from_uint8(img: torch.Tensor, dtype) -> torch.Tensor:
    return img.to(dtype) / 255.0

def _fill(img: torch.Tensor) -> list[float]:
    return [0.0] * img.shape[0]


# REGION: [Photometric]

def brightness(img, m, rng=None):
    return TF.adjust_brightness(img, m)

def contrast(img, m, rng=None):
    return TF.adjust_contrast(img, m)

def color(img, m, rng=None):
    if img.shape[0] != 3:
        return img.clone()
    return TF.adjust_saturation(img, m)

def sharpness(img, m, rng=None):
    return TF.adjust_sharpness(img, m)

def auto_contrast(img, m=0.0, rng=None):
    return TF.autocontrast(img)

def invert(img, m=0.0, rng=None):
    return 1.0 - img

def equalize(img, m=0.0, rng=None):
    return _from_uint8(TF.equalize(_to_uint8(img)), img.dtype)

def solarize(img, m, rng=None):
    # DOC: threshold 1.0 is the top of the scale and leaves every pixel as is
    if m >= 1.0:
        return img.clone()
    return torch.where(img >= m, 1.0 - img, img)

def solarize_add(img, m, rng=None):
    added = (img + m).clamp(0.0, 1.0)
    return torch.where(img < SOLARIZE_ADD_THRESHOLD, added, img)

def posterize(img, m, rng=None):
    bits = int(round(m))
    return _from_uint8(TF.posterize(_to_uint8(img), bits), img.dtype)

def noise_salt(img, m, rng: np.random.Generator = None):
    mask = torch.from_numpy(rng.random(img.shape[1:]) < m)
    return torch.where(mask.unsqueeze(0), torch.ones_like(img), img)

def noise_gaussian(img, m, rng: np.random.Generator = None):
    noise = torch.from_numpy(rng.normal(0.0, 1.0, size=img.shape)).to(img.dtype)
    return img + m * noise

# ENDREGION: [Photometric]


# REGION: [Geometric]

def shear_x(img, m, rng=None):
    if m == 0:
        return img.clone()
    return TF.affine(img, angle=0.0, translate=[0, 0], scale=1.0, shear=[math.degrees(math.atan(m)), 0.0],
                     interpolation=InterpolationMode.BILINEAR, fill=_fill(img))

def shear_y(img, m, rng=None):
    if m == 0:
        return img.clone()
    return TF.affine(img, angle=0.0, translate=[0, 0], scale=1.0, shear=[0.0, math.degrees(math.atan(m))],
                     interpolation=InterpolationMode.BILINEAR, fill=_fill(img))

def rotate(img, m, rng=None):
    if m == 0:
        return img.clone()
    return TF.rotate(img, m, interpolation=InterpolationMode.BILINEAR, fill=_fill(img))

def flip(img, m=0.0, rng=None):
    return TF.hflip(img)

# ENDREGION: [Geometric]
