"""Tour of the shared tensor ops: what each one computes, on numbers small
enough to check by eye."""

import torch

from sketchsynth.ops import (
    DmiParams,
    adain,
    channel_scale,
    channel_stats,
    feature_dmi,
    gram_matrix,
    instance_norm,
)

torch.set_printoptions(precision=3, sci_mode=False)

print("== gram matrix ==")
f = torch.tensor([[[1.0, 0.0]], [[0.0, 1.0]]])  # 2 channels, flattened rows [1,0] / [0,1]
g = gram_matrix(f)
print("channel covariance of orthogonal rows (I/2):\n", g.data)
print("normalizer (spatial positions):", g.normalizer)

print("\n== instance norm ==")
f = torch.tensor([[[1.0, 1.0], [3.0, 3.0]]])
out, stats = instance_norm(f)
print("channel {1,1,3,3} ->", out.flatten().tolist())
print("removed stats: mean", stats.mean.tolist(), "std", [round(v, 3) for v in stats.std.tolist()])

print("\n== adaptive instance norm ==")
content = torch.randn(2, 4, 4)
style = torch.randn(2, 4, 4) * 3 + 1
blended = adain(content, channel_stats(style))
print("target stats:", channel_stats(style).mean.tolist())
print("result stats:", channel_stats(blended).mean.tolist(), "(means match the style map)")

print("\n== channel-wise multiplication (simplified style injection) ==")
f = torch.tensor([[[1.0, 2.0]], [[3.0, 4.0]]])
print("gates [2, -1] ->", channel_scale(f, torch.tensor([2.0, -1.0])).flatten().tolist())

print("\n== dual-mask injection ==")
f = torch.ones(1, 2, 2)
content_mask = torch.tensor([[[1.0, -1.0], [-1.0, 1.0]]])  # diagonal 'contour'
params = DmiParams(edge_scale=torch.tensor([10.0]), edge_shift=torch.tensor([0.0]),
                   plain_scale=torch.tensor([1.0]), plain_shift=torch.tensor([0.0]),
                   threshold_mode="positive")
print("contour cells scaled x10:\n", feature_dmi(f, content_mask, params))
