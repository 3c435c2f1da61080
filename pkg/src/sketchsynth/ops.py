"""Differentiable tensor ops shared by every network in the pipeline.

All ops accept either a single feature map (C, H, W) or a batch
(B, C, H, W) and are pure functions of their inputs: no hidden state,
safe to call from any number of workers.
"""

from __future__ import annotations

from dataclasses import dataclass

import torch
import torch.nn.functional as F

VAR_EPS = 1e-5


def _check_map(f: torch.Tensor, name: str = "input") -> None:
    if not torch.is_tensor(f):
        raise ValueError(f"{name} must be a tensor, got {type(f).__name__}")
    if f.dim() not in (3, 4):
        raise ValueError(f"{name} must be (C,H,W) or (B,C,H,W), got shape {tuple(f.shape)}")
    if f.numel() == 0 or min(f.shape) < 1:
        raise ValueError(f"{name} has an empty dimension: {tuple(f.shape)}")
    if not torch.isfinite(f).all():
        raise ValueError(f"{name} contains non-finite values")


@dataclass
class GramMatrix:
    """Channel-by-channel spatial covariance of a feature map.

    data is (C, C) or (B, C, C); normalizer is the number of spatial
    positions folded into each entry.
    """

    data: torch.Tensor
    normalizer: int

    @property
    def channels(self) -> int:
        return self.data.shape[-1]


@dataclass
class ChannelStats:
    """Per-channel mean and (eps-stabilized) std of a feature map.

    Shapes are (C,) or (B, C). std is the exact divisor used by
    instance_norm, so adain(instance_norm-ed input, stats) round-trips.
    """

    mean: torch.Tensor
    std: torch.Tensor

    def __post_init__(self):
        if self.mean.shape != self.std.shape:
            raise ValueError(
                f"mean/std shape mismatch: {tuple(self.mean.shape)} vs {tuple(self.std.shape)}"
            )

    @property
    def channels(self) -> int:
        return self.mean.shape[-1]


@dataclass
class DmiParams:
    """Learnable affines for the two mask regions of feature_dmi.

    All four vectors have length = channel count of the map being
    shifted. threshold_mode picks the mask rule: "abs_mean" marks
    positions whose |value| exceeds the channel's spatial mean of
    |value| (default, scale-invariant); "positive" marks values > 0.
    """

    edge_scale: torch.Tensor
    edge_shift: torch.Tensor
    plain_scale: torch.Tensor
    plain_shift: torch.Tensor
    threshold_mode: str = "abs_mean"

    def __post_init__(self):
        vecs = (self.edge_scale, self.edge_shift, self.plain_scale, self.plain_shift)
        lengths = {v.shape[-1] for v in vecs}
        if any(v.dim() != 1 for v in vecs) or len(lengths) != 1:
            raise ValueError("DmiParams vectors must be 1-d and same length")
        for v in vecs:
            if not torch.isfinite(v).all():
                raise ValueError("DmiParams contains non-finite values")
        if self.threshold_mode not in ("abs_mean", "positive"):
            raise ValueError(f"unknown threshold_mode {self.threshold_mode!r}")

    @property
    def channels(self) -> int:
        return self.edge_scale.shape[-1]

    @classmethod
    def identity(cls, channels: int, threshold_mode: str = "abs_mean", **kw) -> "DmiParams":
        one = torch.ones(channels, **kw)
        zero = torch.zeros(channels, **kw)
        return cls(one, zero, one.clone(), zero.clone(), threshold_mode)


def gram_matrix(f: torch.Tensor) -> GramMatrix:
    """G = F·Fᵀ / (h·w) with F the map flattened to (C, h·w).

    Dividing by the spatial position count keeps the output scale
    independent of resolution. Result is symmetric PSD.
    """
    _check_map(f, "gram_matrix input")
    h, w = f.shape[-2], f.shape[-1]
    flat = f.reshape(*f.shape[:-2], h * w)
    gram = flat @ flat.transpose(-1, -2) / (h * w)
    return GramMatrix(data=gram, normalizer=h * w)


def channel_stats(f: torch.Tensor, eps: float = VAR_EPS) -> ChannelStats:
    """Spatial mean and stabilized std per channel.

    std = sqrt(var + eps) with the biased (population) variance, so a
    constant channel yields std = sqrt(eps) rather than an error.
    """
    _check_map(f, "channel_stats input")
    mean = f.mean(dim=(-2, -1))
    var = f.var(dim=(-2, -1), unbiased=False)
    return ChannelStats(mean=mean, std=torch.sqrt(var + eps))


def instance_norm(f: torch.Tensor, eps: float = VAR_EPS) -> tuple[torch.Tensor, ChannelStats]:
    """Zero-mean unit-std per channel over spatial dims; returns the removed stats."""
    stats = channel_stats(f, eps)
    out = (f - stats.mean[..., None, None]) / stats.std[..., None, None]
    return out, stats


def adain(f_c: torch.Tensor, stats: ChannelStats) -> torch.Tensor:
    """Re-impose target channel stats onto a normalized content map.

    out = IN(f_c)·σ + μ per channel; the output's channel stats match
    `stats` up to the normalization eps.
    """
    _check_map(f_c, "adain input")
    if stats.channels != f_c.shape[-3]:
        raise ValueError(
            f"stats have {stats.channels} channels, map has {f_c.shape[-3]}"
        )
    normed, _ = instance_norm(f_c)
    return normed * stats.std[..., None, None] + stats.mean[..., None, None]


def channel_scale(f_c: torch.Tensor, style: torch.Tensor) -> torch.Tensor:
    """Per-channel multiplication by a style vector; no normalization, no shift.

    style is (C,) or (B, C) matching f_c's channel count.
    """
    _check_map(f_c, "channel_scale input")
    if not torch.is_tensor(style) or style.dim() not in (1, 2):
        raise ValueError("style must be a (C,) or (B,C) tensor")
    if style.shape[-1] != f_c.shape[-3]:
        raise ValueError(
            f"style length {style.shape[-1]} != channel count {f_c.shape[-3]}"
        )
    if style.dim() == 2 and f_c.dim() == 3:
        raise ValueError("batched style requires a batched feature map")
    if not torch.isfinite(style).all():
        raise ValueError("style contains non-finite values")
    return f_c * style[..., None, None]


def derive_mask(content: torch.Tensor, mode: str = "abs_mean") -> torch.Tensor:
    """Binary contour-vs-plain mask from a (resampled) content map.

    Per channel: "abs_mean" marks |x| > spatial mean of |x|;
    "positive" marks x > 0. No gradient flows through the mask.
    """
    _check_map(content, "mask content")
    c = content.detach()
    if mode == "abs_mean":
        mag = c.abs()
        thresh = mag.mean(dim=(-2, -1), keepdim=True)
        mask = mag > thresh
    elif mode == "positive":
        mask = c > 0
    else:
        raise ValueError(f"unknown threshold_mode {mode!r}")
    return mask.to(content.dtype)


def feature_dmi(f: torch.Tensor, content: torch.Tensor, params: DmiParams) -> torch.Tensor:
    """Dual-region affine shift of f, masked by a content feature map.

    content is nearest-resampled to f's spatial size, turned into a
    per-channel binary mask M (see DmiParams.threshold_mode), and
    out = M⊙(edge_scale·f + edge_shift) + (1−M)⊙(plain_scale·f + plain_shift).

    content must have 1 channel (broadcast) or f's channel count.
    """
    _check_map(f, "feature_dmi input")
    _check_map(content, "feature_dmi content")
    c_f = f.shape[-3]
    if params.channels != c_f:
        raise ValueError(f"params have {params.channels} channels, map has {c_f}")
    if content.shape[-3] not in (1, c_f):
        raise ValueError(
            f"content must have 1 or {c_f} channels, got {content.shape[-3]}"
        )
    if content.shape[-2:] != f.shape[-2:]:
        squeeze = content.dim() == 3
        resampled = F.interpolate(
            content[None] if squeeze else content, size=f.shape[-2:], mode="nearest"
        )
        content = resampled[0] if squeeze else resampled
    mask = derive_mask(content, params.threshold_mode)

    def _aff(scale, shift):
        return f * scale[..., None, None] + shift[..., None, None]

    return mask * _aff(params.edge_scale, params.edge_shift) + (1.0 - mask) * _aff(
        params.plain_scale, params.plain_shift
    )
