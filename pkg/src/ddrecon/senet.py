"""Squeeze-excitation network with a contraction-expansion backbone.

Every level embeds a dual-branch SE module: a channel gate driven by
global average pooling through two fully connected layers, and a spatial
gate driven by a 1x1 convolution. The two recalibrated copies of the
input are summed. Downsampling uses 2x2 average pooling, upsampling is
nearest-neighbour followed by convolutions after skip concatenation.
"""

from dataclasses import dataclass

import numpy as np

from . import nn
from .autograd import add
from .errors import ShapeMismatchError
from .nn import Conv2d, Linear, Module, ModuleList


@dataclass
class SENetConfig:
    in_channels: int
    out_channels: int
    base_width: int = 32
    depth: int = 3
    reduction_ratio: int = 8

    def __post_init__(self):
        if self.depth < 1:
            raise ShapeMismatchError(f"depth must be >= 1, got {self.depth}")
        if self.base_width < self.reduction_ratio:
            raise ShapeMismatchError(
                f"base_width {self.base_width} must be >= reduction_ratio {self.reduction_ratio}"
            )
        if self.base_width % self.reduction_ratio:
            raise ShapeMismatchError(
                f"reduction_ratio {self.reduction_ratio} must divide base_width {self.base_width}"
            )

    def level_width(self, level):
        return self.base_width * (2 ** level)


class SEModule(Module):
    """Dual-branch feature recalibration; both gates are sigmoids in (0,1)."""

    def __init__(self, channels, reduction_ratio, rng):
        super().__init__()
        if channels % reduction_ratio:
            raise ShapeMismatchError(
                f"reduction_ratio {reduction_ratio} must divide channel count {channels}"
            )
        self.channels = channels
        self.fc1 = Linear(channels, channels // reduction_ratio, rng)
        self.fc2 = Linear(channels // reduction_ratio, channels, rng)
        self.spatial = Conv2d(channels, 1, 1, 0, rng)

    def forward(self, x):
        if x.data.shape[1] != self.channels:
            raise ShapeMismatchError(
                f"SE module built for {self.channels} channels, got {x.data.shape[1]}"
            )
        gate = nn.sigmoid(self.fc2(nn.relu(self.fc1(nn.global_avg_pool(x)))))
        channel_branch = nn.channelwise_scale(x, gate)
        spatial_gate = nn.sigmoid(self.spatial(x))
        spatial_branch = nn.pointwise_scale(x, spatial_gate)
        return add(channel_branch, spatial_branch)


class _LevelBlock(Module):
    """Two 3x3 conv+relu stages followed by an SE module."""

    def __init__(self, in_channels, width, reduction_ratio, rng):
        super().__init__()
        self.conv1 = Conv2d(in_channels, width, 3, 1, rng)
        self.conv2 = Conv2d(width, width, 3, 1, rng)
        self.se = SEModule(width, reduction_ratio, rng)

    def forward(self, x):
        x = nn.relu(self.conv1(x))
        x = nn.relu(self.conv2(x))
        return self.se(x)


class SENet(Module):
    def __init__(self, config: SENetConfig, rng):
        super().__init__()
        self.config = config
        enc = []
        prev = config.in_channels
        for level in range(config.depth):
            width = config.level_width(level)
            enc.append(_LevelBlock(prev, width, config.reduction_ratio, rng))
            prev = width
        self.encoder = ModuleList(enc)
        dec = []
        for level in range(config.depth - 2, -1, -1):
            width = config.level_width(level)
            dec.append(
                _LevelBlock(config.level_width(level + 1) + width, width,
                            config.reduction_ratio, rng)
            )
        self.decoder = ModuleList(dec)
        self.final = Conv2d(config.base_width, config.out_channels, 1, 0, rng)
        # Zero start: every block begins as the identity (under the global
        # residual), so an untrained cascade reproduces zero-filling.
        self.final.weight.data[:] = 0.0
        self.final.bias.data[:] = 0.0

    def forward(self, x):
        cfg = self.config
        n, c, h, w = x.data.shape
        if c != cfg.in_channels:
            raise ShapeMismatchError(
                f"network expects {cfg.in_channels} input channels, got {c}"
            )
        divisor = 2 ** (cfg.depth - 1)
        if h % divisor or w % divisor:
            raise ShapeMismatchError(
                f"spatial dims {h}x{w} must be divisible by {divisor} at depth {cfg.depth}"
            )
        skips = []
        cur = x
        for level, block in enumerate(self.encoder):
            cur = block(cur)
            if level < cfg.depth - 1:
                skips.append(cur)
                cur = nn.avg_pool2(cur)
        for block, skip in zip(self.decoder, reversed(skips)):
            cur = nn.concat_channels(nn.upsample_nearest2(cur), skip)
            cur = block(cur)
        out = self.final(cur)
        if cfg.in_channels == cfg.out_channels:
            out = add(out, x)
        return out
