# DOC: Feature trunks. Each one maps N x C x H x W images to N x out_dim pooled features.

import logging

import torch
from torch import nn
from torchvision import models

from clfa.common import names as N
from clfa.common.errors import config_error, io_error
from clfa.common.logger import fmsg

logger = logging.getLogger(__name__)



class TinyCNN(nn.Module):
    """Three conv blocks (width w, 2w, 4w) with average pooling, for desk-scale runs and tests."""

    def __init__(self, in_channels: int = 3, width: int = 32):
        super().__init__()
        self.body = nn.Sequential(
            nn.Conv2d(in_channels, width, 3, padding=1), nn.ReLU(), nn.AvgPool2d(2),
            nn.Conv2d(width, 2 * width, 3, padding=1), nn.ReLU(), nn.AvgPool2d(2),
            nn.Conv2d(2 * width, 4 * width, 3, padding=1), nn.ReLU(),
            nn.AdaptiveAvgPool2d(1), nn.Flatten(),
        )
        self.out_dim = 4 * width

    def forward(self, x):
        return self.body(x)


class ConvNet(nn.Module):
    """conv-pool-conv-pool-fc-fc trunk used for the digits benchmark."""

    def __init__(self, in_channels: int = 3, image_size: int = 32):
        super().__init__()
        self.body = nn.Sequential(
            nn.Conv2d(in_channels, 64, 5), nn.ReLU(), nn.MaxPool2d(2),
            nn.Conv2d(64, 128, 5), nn.ReLU(), nn.MaxPool2d(2),
            nn.Flatten(),
        )
        side = ((image_size - 4) // 2 - 4) // 2
        if side < 1:
            raise config_error(f"image_size {image_size} is too small for the convnet backbone.")
        self.head = nn.Sequential(
            nn.Linear(128 * side * side, 1024), nn.ReLU(),
            nn.Linear(1024, 1024), nn.ReLU(),
        )
        self.out_dim = 1024

    def forward(self, x):
        return self.head(self.body(x))



# REGION: [Wide residual network]

class _WideBlock(nn.Module):

    def __init__(self, in_planes: int, planes: int, stride: int):
        super().__init__()
        self.bn1 = nn.BatchNorm2d(in_planes)
        self.conv1 = nn.Conv2d(in_planes, planes, 3, stride=stride, padding=1, bias=False)
        self.bn2 = nn.BatchNorm2d(planes)
        self.conv2 = nn.Conv2d(planes, planes, 3, stride=1, padding=1, bias=False)
        self.shortcut = None
        if stride != 1 or in_planes != planes:
            self.shortcut = nn.Conv2d(in_planes, planes, 1, stride=stride, bias=False)

    def forward(self, x):
        out = torch.relu(self.bn1(x))
        residual = x if self.shortcut is None else self.shortcut(out)
        out = self.conv1(out)
        out = self.conv2(torch.relu(self.bn2(out)))
        return out + residual


class WideResNet(nn.Module):

    def __init__(self, depth: int = 16, widen_factor: int = 4, in_channels: int = 3):
        super().__init__()
        if (depth - 4) % 6 != 0:
            raise config_error(f"WideResNet depth must be 6n + 4, got {depth}.")
        n = (depth - 4) // 6
        widths = [16, 16 * widen_factor, 32 * widen_factor, 64 * widen_factor]
        layers = [nn.Conv2d(in_channels, widths[0], 3, padding=1, bias=False)]
        in_planes = widths[0]
        for stage, planes in enumerate(widths[1:]):
            for i in range(n):
                layers.append(_WideBlock(in_planes, planes, stride=(1 if stage == 0 or i > 0 else 2)))
                in_planes = planes
        layers += [nn.BatchNorm2d(in_planes), nn.ReLU(), nn.AdaptiveAvgPool2d(1), nn.Flatten()]
        self.body = nn.Sequential(*layers)
        self.out_dim = in_planes

    def forward(self, x):
        return self.body(x)

# ENDREGION: [Wide residual network]



class ResNet18Trunk(nn.Module):
    """torchvision ResNet18 without its classification layer (512-d pooled output)."""

    def __init__(self, pretrained_path: str | None = None):
        super().__init__()
        net = models.resnet18(weights=None)
        if pretrained_path is not None:
            try:
                state = torch.load(pretrained_path, map_location="cpu", weights_only=True)
            except (OSError, RuntimeError) as e:
                raise io_error(f"Cannot load pretrained weights {pretrained_path}: {e}", path=pretrained_path)
            state = { k: v for k, v in state.items() if not k.startswith("fc.") }
            missing, unexpected = net.load_state_dict(state, strict=False)
            logger.info(fmsg("Loaded pretrained backbone", path=pretrained_path, missing=len(missing), unexpected=len(unexpected)))
        net.fc = nn.Identity()
        self.body = net
        self.out_dim = 512

    def forward(self, x):
        return self.body(x)



def build_backbone(model_cfg) -> nn.Module:
    """Instantiate the trunk named by model_cfg.backbone."""
    if model_cfg.backbone == N.TINY_CNN:
        return TinyCNN(model_cfg.in_channels, model_cfg.backbone_width)
    if model_cfg.backbone == N.CONVNET:
        return ConvNet(model_cfg.in_channels, model_cfg.image_size)
    if model_cfg.backbone == N.WRN16_4:
        return WideResNet(16, 4, model_cfg.in_channels)
    if model_cfg.backbone == N.RESNET18:
        return ResNet18Trunk(model_cfg.pretrained_path)
    raise config_error(f"Unknown backbone '{model_cfg.backbone}'.", backbone=model_cfg.backbone)
