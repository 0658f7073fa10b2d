"""Backbone registry.

Per architecture family, "the" embedding is a documented choice rather
than anything canonical:

- resnet18 / resnet34 / resnet50: the global-average-pooled output of
  the last residual stage (the penultimate layer, input of ``fc``).
  Widths 512 / 512 / 2048. Dense mode uses the un-pooled stage-4
  feature map instead.

Weights default to a deterministically seeded random initialization so
extraction works offline; pass a local ``state_dict`` checkpoint to use
real pretrained weights.
"""

from dataclasses import dataclass

import torch
from torchvision import models

_RESNETS = {
    "resnet18": (models.resnet18, 512),
    "resnet34": (models.resnet34, 512),
    "resnet50": (models.resnet50, 2048),
}

BACKBONES = tuple(sorted(_RESNETS))

# ImageNet preprocessing statistics, used for all backbones.
NORM_MEAN = (0.485, 0.456, 0.406)
NORM_STD = (0.229, 0.224, 0.225)


@dataclass(frozen=True)
class Backbone:
    """A ready-to-run feature extractor plus its classification head."""

    name: str
    model: torch.nn.Module
    feature_dim: int
    num_classes: int

    def features(self, batch):
        """Penultimate-layer embeddings, shape (n, feature_dim)."""
        maps = self.feature_maps(batch)
        pooled = self.model.avgpool(maps)
        return torch.flatten(pooled, 1)

    def feature_maps(self, batch):
        """Dense stage-4 feature maps, shape (n, feature_dim, h, w)."""
        m = self.model
        x = m.maxpool(m.relu(m.bn1(m.conv1(batch))))
        x = m.layer4(m.layer3(m.layer2(m.layer1(x))))
        return x

    def logits(self, feats):
        return self.model.fc(feats)


def build_backbone(name, weights_path=None, num_classes=1000, seed=0):
    """Construct a backbone in eval mode.

    With no checkpoint the parameters are randomly initialized from a
    fixed torch seed, so repeated builds are bit-identical.
    """
    if name not in _RESNETS:
        raise ValueError(
            "unknown backbone %r, available: %s" % (name, ", ".join(BACKBONES))
        )
    ctor, dim = _RESNETS[name]
    torch.manual_seed(seed)
    model = ctor(weights=None, num_classes=num_classes)
    if weights_path is not None:
        state = torch.load(weights_path, map_location="cpu", weights_only=True)
        model.load_state_dict(state)
    model.eval()
    return Backbone(name=name, model=model, feature_dim=dim, num_classes=num_classes)
