"""Every training objective evaluated at hand-checkable points."""

import math

import torch

from sketchsynth.losses import (
    TripletMargins,
    UniformTarget,
    ae_total,
    content_declass_loss,
    content_triplet,
    refiner_d_loss,
    refiner_g_loss,
    style_class_loss,
    style_triplet,
)

m = TripletMargins(alpha=0.3, beta=0.5)

print("== style triplet (cosine) ==")
anchor = torch.tensor([1.0, 0.0])
orthogonal = torch.tensor([0.0, 1.0])
print("anchor == positive, margin 0.3     ->", float(style_triplet(anchor, anchor.clone(), orthogonal, m)))
print("anchor == NEGATIVE, margin 0.3     ->", float(style_triplet(anchor, orthogonal, anchor.clone(), m)))

print("\n== content triplet (mean-squared distance) ==")
t = torch.zeros(1, 2, 2)
print("d+=1.0, d-=0.2, margin 0.5         ->",
      float(content_triplet(t, torch.ones(1, 2, 2), torch.full((1, 2, 2), math.sqrt(0.2)), m)))

print("\n== style classification (cross-entropy) ==")
print("uniform logits over 4 classes      ->", float(style_class_loss(torch.zeros(4), 1)),
      "(= ln 4 =", round(math.log(4), 4), ")")

print("\n== content de-classification (toward uniform) ==")
print("logits [ln 3, 0], k=2              ->",
      float(content_declass_loss(torch.tensor([math.log(3.0), 0.0]), UniformTarget(k=2))),
      "(softmax [0.75, 0.25] vs [0.5, 0.5])")
print("uniform logits                     ->",
      float(content_declass_loss(torch.ones(5), UniformTarget(k=5))))

print("\n== summed auto-encoder objective ==")
img = torch.randn(3, 4, 4)
parts = {"content_triplet": torch.tensor(0.1), "style_triplet": torch.tensor(0.2),
         "style_class": torch.tensor(0.3), "content_declass": torch.tensor(0.4)}
report = ae_total(img, img.clone(), parts)
print("perfect recon + parts 0.1..0.4     ->", report.scalars())

print("\n== hinge losses (stage 2) ==")
print("D at margins (real=+1, fake=-1)    ->", float(refiner_d_loss(torch.ones(2), -torch.ones(2))))
print("D at zero scores                   ->", float(refiner_d_loss(torch.zeros(2), torch.zeros(2))))
g = refiner_g_loss(torch.ones(3), torch.zeros(1, 2, 2), torch.full((1, 2, 2), math.sqrt(0.5)), lam=10.0)
print("G with mse=0.5, lam=10, scores=1   ->", g.scalars(), "(rec term = 10 x mse)")
