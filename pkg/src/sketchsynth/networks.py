"""Network building blocks for the sketcher, the auto-encoder, and the refiner.

Everything is resolution-driven: encoders/decoders derive their depth
from the configured image size, so desk-scale (64²) and paper-scale
(1024²) models share one code path.
"""

from __future__ import annotations

import hashlib
import math

import torch
import torch.nn as nn
import torch.nn.functional as F

from .ops import DmiParams, GramMatrix, channel_scale, feature_dmi


def _log2_exact(value: float, what: str) -> int:
    n = int(round(math.log2(value)))
    if 2 ** n != value:
        raise ValueError(f"{what} must be a power-of-two ratio, got {value}")
    return n


def as_rgb(t: torch.Tensor) -> torch.Tensor:
    """Repeat a single-channel map to 3 channels (for the feature extractor)."""
    if t.shape[-3] == 1:
        reps = [1] * t.dim()
        reps[-3] = 3
        return t.repeat(*reps)
    return t


class FeatureExtractor(nn.Module):
    """Frozen convolutional feature pyramid with named tap layers.

    Weights are drawn from a dedicated seeded generator and never
    trained, so the extractor is bit-reproducible and immutable: the
    fixed reference both the sketcher and the metrics rely on. A
    pretrained backbone with the same (forward, tap) contract can be
    substituted where its weights are available.
    """

    def __init__(self, in_channels: int = 3, widths=(16, 32, 64, 128),
                 tap: str = "block3", seed: int = 0):
        super().__init__()
        self.in_channels = in_channels
        self.widths = tuple(widths)
        self.tap = tap
        self.seed = seed
        blocks = []
        prev = in_channels
        for i, w in enumerate(self.widths):
            stride = 1 if i == 0 else 2  # block k (k>=2) opens with downsampling k-1
            # leaky activations (no dead channels) and parameter-free
            # whitening at block inputs keep every tap channel's spatial
            # variance well above the normalization eps, so AdaIN targets
            # stay well-posed; the tap output itself is never normalized,
            # so per-input feature statistics remain informative. The large
            # whitening eps bounds the Jacobian (<=1/sqrt(eps)) for
            # near-constant inputs such as early generator outputs.
            blocks.append(nn.Sequential(
                nn.InstanceNorm2d(prev, affine=False, eps=1e-2) if i > 0 else nn.Identity(),
                nn.Conv2d(prev, w, 3, stride=stride, padding=1),
                nn.LeakyReLU(0.2, inplace=True),
            ))
            prev = w
        self.blocks = nn.ModuleList(blocks)
        if tap not in self.tap_names():
            raise ValueError(f"unknown tap {tap!r}, have {self.tap_names()}")

        gen = torch.Generator().manual_seed(seed)
        for p in self.parameters():
            if p.dim() > 1:
                fan_in = p.shape[1] * p.shape[2] * p.shape[3]
                p.data.normal_(0.0, math.sqrt(2.0 / fan_in), generator=gen)
            else:
                p.data.zero_()
        for p in self.parameters():
            p.requires_grad_(False)
        self.eval()

    def tap_names(self) -> list[str]:
        return [f"block{i + 1}" for i in range(len(self.widths))]

    @property
    def tap_channels(self) -> int:
        return self.widths[self.tap_names().index(self.tap)]

    def tap_resolution(self, resolution: int) -> int:
        return resolution // 2 ** self.tap_names().index(self.tap)

    @property
    def extractor_id(self) -> str:
        key = f"seeded-lrelu-conv:{self.in_channels}:{self.widths}:{self.tap}:{self.seed}"
        return hashlib.sha256(key.encode()).hexdigest()[:12]

    def train(self, mode: bool = True):  # noqa: ARG002 - frozen by contract
        return super().train(False)

    def forward(self, x: torch.Tensor, tap: str | None = None) -> torch.Tensor:
        tap = tap or self.tap
        x = as_rgb(x)
        for name, block in zip(self.tap_names(), self.blocks):
            x = block(x)
            if name == tap:
                return x
        raise ValueError(f"unknown tap {tap!r}")


class SketchDecoder(nn.Module):
    """Decodes tapped perceptual features back to a 1-channel line image.

    Output bias starts strongly positive so untrained outputs are
    white-background, matching the sketch domain's pixel statistics.
    """

    def __init__(self, in_channels: int, in_res: int, out_res: int, base: int = 32):
        super().__init__()
        n_up = _log2_exact(out_res / in_res, "out_res/in_res")
        layers: list[nn.Module] = []
        prev = in_channels
        for i in range(n_up):
            w = max(base // 2 ** i, 8)
            layers += [
                nn.Upsample(scale_factor=2, mode="nearest"),
                nn.Conv2d(prev, w, 3, padding=1),
                nn.LeakyReLU(0.2, inplace=True),
            ]
            prev = w
        self.body = nn.Sequential(*layers)
        self.head = nn.Conv2d(prev, 1, 3, padding=1)
        # white-leaning but unsaturated: tanh(1) ~ 0.76, gradient ~ 0.42
        nn.init.constant_(self.head.bias, 1.0)

    def forward(self, features: torch.Tensor) -> torch.Tensor:
        return torch.tanh(self.head(self.body(features)))


class GramCritic(nn.Module):
    """MLP discriminator over flattened Gram matrices.

    Only accepts GramMatrix inputs: the raw-feature-map path structurally
    does not exist.
    """

    def __init__(self, channels: int, hidden=(256, 64)):
        super().__init__()
        self.channels = channels
        dims = [channels * channels, *hidden]
        layers: list[nn.Module] = []
        for a, b in zip(dims, dims[1:]):
            layers += [nn.Linear(a, b), nn.LeakyReLU(0.2, inplace=True)]
        layers.append(nn.Linear(dims[-1], 1))
        self.mlp = nn.Sequential(*layers)

    def forward(self, gram: GramMatrix) -> torch.Tensor:
        if not isinstance(gram, GramMatrix):
            raise TypeError("GramCritic scores GramMatrix inputs only")
        d = gram.data
        if d.shape[-1] != self.channels:
            raise ValueError(f"gram has {d.shape[-1]} channels, critic expects {self.channels}")
        if d.dim() == 2:
            d = d[None]
        return self.mlp(d.reshape(d.shape[0], -1)).reshape(-1)

    def scores(self, gram: GramMatrix) -> torch.Tensor:
        return torch.sigmoid(self(gram))


def _down_stack(in_channels: int, n_down: int, base: int, max_width: int) -> tuple[nn.Sequential, int]:
    layers: list[nn.Module] = []
    prev = in_channels
    width = base
    for _ in range(n_down):
        width = min(width, max_width)
        layers += [nn.Conv2d(prev, width, 3, stride=2, padding=1),
                   nn.LeakyReLU(0.2, inplace=True)]
        prev = width
        width *= 2
    return nn.Sequential(*layers), prev


class StyleEncoder(nn.Module):
    """RGB image -> style vector. Rejects off-resolution inputs (no silent resize)."""

    def __init__(self, resolution: int = 64, style_dim: int = 128,
                 base: int = 16, max_width: int = 256):
        super().__init__()
        self.resolution = resolution
        self.style_dim = style_dim
        n_down = _log2_exact(resolution / 4, "resolution/4")
        self.body, last = _down_stack(3, n_down, base, max_width)
        self.head = nn.Linear(last, style_dim)
        # near-identity channel gates at init: codes start around one
        nn.init.constant_(self.head.bias, 1.0)

    def forward(self, img: torch.Tensor) -> torch.Tensor:
        if img.dim() != 4 or img.shape[1] != 3:
            raise ValueError(f"expected (B,3,{self.resolution},{self.resolution}), got {tuple(img.shape)}")
        if img.shape[-2:] != (self.resolution, self.resolution):
            raise ValueError(
                f"style encoder trained at {self.resolution}², got {tuple(img.shape[-2:])}"
            )
        h = self.body(img)
        h = F.adaptive_avg_pool2d(h, 1).flatten(1)
        return self.head(h)


class ContentEncoder(nn.Module):
    """Sketch -> content grid (content_channels × grid × grid)."""

    def __init__(self, resolution: int = 64, grid: int = 8,
                 content_channels: int = 128, base: int = 16, max_width: int = 256):
        super().__init__()
        self.resolution = resolution
        self.grid = grid
        self.content_channels = content_channels
        n_down = _log2_exact(resolution / grid, "resolution/grid")
        self.body, last = _down_stack(1, n_down, base, max_width)
        self.proj = nn.Conv2d(last, content_channels, 1)

    def forward(self, skt: torch.Tensor) -> torch.Tensor:
        if skt.dim() != 4 or skt.shape[1] != 1:
            raise ValueError(f"expected (B,1,{self.resolution},{self.resolution}), got {tuple(skt.shape)}")
        if skt.shape[-2:] != (self.resolution, self.resolution):
            raise ValueError(
                f"content encoder trained at {self.resolution}², got {tuple(skt.shape[-2:])}"
            )
        return self.proj(self.body(skt))


class DmiLayer(nn.Module):
    """Per-level dual-mask injection: project the content grid to this
    level's channel count, then apply the masked region affines."""

    def __init__(self, content_channels: int, channels: int, threshold_mode: str = "abs_mean"):
        super().__init__()
        self.proj = nn.Conv2d(content_channels, channels, 1)
        self.edge_scale = nn.Parameter(torch.ones(channels))
        self.edge_shift = nn.Parameter(torch.zeros(channels))
        self.plain_scale = nn.Parameter(torch.ones(channels))
        self.plain_shift = nn.Parameter(torch.zeros(channels))
        self.threshold_mode = threshold_mode

    def forward(self, f: torch.Tensor, content: torch.Tensor) -> torch.Tensor:
        params = DmiParams(self.edge_scale, self.edge_shift,
                           self.plain_scale, self.plain_shift, self.threshold_mode)
        return feature_dmi(f, self.proj(content), params)


class ImageDecoder(nn.Module):
    """Decoder from (style vector, content grid) to an RGB image in [-1,1].

    Content enters through the stem and a DMI site at every level; style
    enters ONLY through channel-wise multiplication by a slice of the
    style vector, at levels whose resolution falls inside style_band
    (fractions of the output resolution).
    """

    def __init__(self, resolution: int = 64, style_dim: int = 128,
                 content_channels: int = 128, grid: int = 8,
                 base_width: int = 128, min_width: int = 16,
                 style_band: tuple[float, float] = (1 / 16, 1 / 2),
                 threshold_mode: str = "abs_mean"):
        super().__init__()
        self.resolution = resolution
        self.style_dim = style_dim
        self.content_channels = content_channels
        self.grid = grid
        n_up = _log2_exact(resolution / grid, "resolution/grid")

        self.level_res = [grid * 2 ** i for i in range(n_up + 1)]
        self.level_width = [max(base_width // 2 ** i, min_width) for i in range(n_up + 1)]
        lo, hi = resolution * style_band[0], resolution * style_band[1]
        self.style_levels = [i for i, r in enumerate(self.level_res) if lo <= r <= hi]
        for i in self.style_levels:
            if self.level_width[i] > style_dim:
                raise ValueError(
                    f"level width {self.level_width[i]} exceeds style_dim {style_dim}; "
                    "style slices cannot gate this level"
                )

        self.stem = nn.Conv2d(content_channels, self.level_width[0], 3, padding=1)
        self.ups = nn.ModuleList([
            nn.Conv2d(self.level_width[i], self.level_width[i + 1], 3, padding=1)
            for i in range(n_up)
        ])
        self.dmi = nn.ModuleList([
            DmiLayer(content_channels, w, threshold_mode) for w in self.level_width
        ])
        self.head = nn.Conv2d(self.level_width[-1], 3, 3, padding=1)

    def forward(self, style: torch.Tensor, content: torch.Tensor) -> torch.Tensor:
        if style.dim() != 2 or style.shape[1] != self.style_dim:
            raise ValueError(f"expected style (B,{self.style_dim}), got {tuple(style.shape)}")
        if content.dim() != 4 or content.shape[1:] != (self.content_channels, self.grid, self.grid):
            raise ValueError(
                f"expected content (B,{self.content_channels},{self.grid},{self.grid}), "
                f"got {tuple(content.shape)}"
            )
        if style.shape[0] != content.shape[0]:
            raise ValueError("style/content batch sizes differ")

        x = F.leaky_relu(self.stem(content), 0.2)
        for i, _ in enumerate(self.level_res):
            if i > 0:
                x = F.interpolate(x, scale_factor=2, mode="nearest")
                x = F.leaky_relu(self.ups[i - 1](x), 0.2)
            x = self.dmi[i](x, content)
            if i in self.style_levels:
                x = channel_scale(x, style[:, : x.shape[1]])
        return torch.tanh(self.head(x))


class RefineGenerator(nn.Module):
    """Encoder-decoder revising the auto-encoder's output image.

    Optionally gates its bottleneck with a style-vector slice and adds
    seeded noise at each decoder level through per-site learnable gains.
    """

    def __init__(self, resolution: int = 64, base: int = 32, style_dim: int | None = None):
        super().__init__()
        self.resolution = resolution
        self.style_dim = style_dim
        w1, w2 = base, base * 2
        self.enc = nn.Sequential(
            nn.Conv2d(3, w1, 3, stride=2, padding=1), nn.LeakyReLU(0.2, inplace=True),
            nn.Conv2d(w1, w2, 3, stride=2, padding=1), nn.LeakyReLU(0.2, inplace=True),
        )
        if style_dim is not None and w2 > style_dim:
            raise ValueError(f"bottleneck width {w2} exceeds style_dim {style_dim}")
        self.mid = nn.Conv2d(w2, w2, 3, padding=1)
        self.dec1 = nn.Conv2d(w2, w1, 3, padding=1)
        self.dec2 = nn.Conv2d(w1, w1 // 2, 3, padding=1)
        self.noise_gain = nn.Parameter(torch.ones(2))
        self.head = nn.Conv2d(w1 // 2, 3, 3, padding=1)

    def _add_noise(self, x: torch.Tensor, scale: float, gain: torch.Tensor,
                   generator: torch.Generator | None) -> torch.Tensor:
        if scale <= 0:
            return x
        n = torch.randn(x.shape, generator=generator, dtype=x.dtype, device=x.device)
        return x + n * (scale * gain)

    def forward(self, img: torch.Tensor, style: torch.Tensor | None = None,
                noise_scale: float = 0.0,
                generator: torch.Generator | None = None) -> torch.Tensor:
        if img.dim() != 4 or img.shape[1] != 3 or img.shape[-2:] != (self.resolution, self.resolution):
            raise ValueError(
                f"expected (B,3,{self.resolution},{self.resolution}), got {tuple(img.shape)}"
            )
        x = self.enc(img)
        x = F.leaky_relu(self.mid(x), 0.2)
        if style is not None:
            if self.style_dim is None:
                raise ValueError("refiner was built without a style path")
            x = channel_scale(x, style[:, : x.shape[1]])
        x = F.interpolate(x, scale_factor=2, mode="nearest")
        x = F.leaky_relu(self.dec1(x), 0.2)
        x = self._add_noise(x, noise_scale, self.noise_gain[0], generator)
        x = F.interpolate(x, scale_factor=2, mode="nearest")
        x = F.leaky_relu(self.dec2(x), 0.2)
        x = self._add_noise(x, noise_scale, self.noise_gain[1], generator)
        return torch.tanh(self.head(x))


class ScoreCritic(nn.Module):
    """Strided-conv discriminator to a scalar score per image; unconditional."""

    def __init__(self, resolution: int = 64, base: int = 32):
        super().__init__()
        self.resolution = resolution
        self.net = nn.Sequential(
            nn.Conv2d(3, base, 3, stride=2, padding=1), nn.LeakyReLU(0.2, inplace=True),
            nn.Conv2d(base, base * 2, 3, stride=2, padding=1), nn.LeakyReLU(0.2, inplace=True),
            nn.Conv2d(base * 2, base * 4, 3, stride=2, padding=1), nn.LeakyReLU(0.2, inplace=True),
            nn.Conv2d(base * 4, 1, 3, padding=1),
        )

    def forward(self, img: torch.Tensor) -> torch.Tensor:
        return self.net(img).mean(dim=(-3, -2, -1))


def state_dict_digest(module: nn.Module) -> str:
    """Order-stable byte digest of all parameters and buffers; bit-exact
    equality check for the frozen-weights invariants."""
    h = hashlib.sha256()
    sd = module.state_dict()
    for key in sorted(sd):
        h.update(key.encode())
        h.update(sd[key].detach().cpu().numpy().tobytes())
    return h.hexdigest()
