"""Every training objective as a pure, differentiable scalar function.

Each composite loss returns a LossReport with named terms whose sum is
the total; single-term losses return a scalar tensor. Sign conventions:
every term is >= 0 except adversarial generator terms, which are
unbounded below by design.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Callable, Mapping, Sequence

import torch
import torch.nn.functional as F

from .ops import GramMatrix

# sigmoid outputs are clamped to [LOG_EPS, 1 - LOG_EPS] before any log
LOG_EPS = 1e-7

AE_PART_NAMES = ("content_triplet", "style_triplet", "style_class", "content_declass")


@dataclass
class LossReport:
    """Named scalar loss terms for one step; total is their sum."""

    terms: dict[str, torch.Tensor]
    total: torch.Tensor

    def __post_init__(self):
        for name, t in self.terms.items():
            if not torch.isfinite(t):
                raise ValueError(f"loss term {name!r} is non-finite: {t}")
        if not torch.isfinite(self.total):
            raise ValueError(f"loss total is non-finite: {self.total}")

    @classmethod
    def from_terms(cls, terms: Mapping[str, torch.Tensor]) -> "LossReport":
        terms = {k: torch.as_tensor(v, dtype=torch.get_default_dtype()) if not torch.is_tensor(v) else v
                 for k, v in terms.items()}
        total = sum(terms.values())
        return cls(terms=dict(terms), total=total)

    def scalars(self) -> dict[str, float]:
        """Detached float view for logging; includes 'total'."""
        out = {k: float(v.detach()) for k, v in self.terms.items()}
        out["total"] = float(self.total.detach())
        return out


@dataclass
class TripletMargins:
    alpha: float = 0.3  # style margin
    beta: float = 0.5   # content margin

    def __post_init__(self):
        for name in ("alpha", "beta"):
            v = getattr(self, name)
            if not (math.isfinite(v) and v >= 0):
                raise ValueError(f"margin {name} must be finite and >= 0, got {v}")


@dataclass
class UniformTarget:
    """The all-equal class distribution the content logits are pushed toward."""

    k: int
    v: torch.Tensor = field(init=False)

    def __post_init__(self):
        if self.k < 2:
            raise ValueError(f"class count must be >= 2, got {self.k}")
        self.v = torch.full((self.k,), 1.0 / self.k)


def _clamped_log(p: torch.Tensor) -> torch.Tensor:
    return torch.log(p.clamp(LOG_EPS, 1.0 - LOG_EPS))


def _scores(d_scores_fn, grams: Sequence[GramMatrix]) -> torch.Tensor:
    scores = d_scores_fn(grams)
    if not torch.is_tensor(scores):
        scores = torch.as_tensor(scores)
    return scores.reshape(-1)


def tom_d_loss(
    real_grams: Sequence[GramMatrix],
    fake_grams: Sequence[GramMatrix],
    d_scores_fn: Callable[[Sequence[GramMatrix]], torch.Tensor],
) -> LossReport:
    """Discriminator BCE on Gram statistics of real vs generated sketches.

    terms: d_real = -mean log D(real), d_fake = -mean log(1 - D(fake)).
    d_scores_fn maps a gram batch to sigmoid scores; they are clamped so
    saturated outputs never produce NaN.
    """
    if len(real_grams) == 0 or len(fake_grams) == 0:
        raise ValueError("tom_d_loss requires non-empty real and fake batches")
    d_real = -_clamped_log(_scores(d_scores_fn, real_grams)).mean()
    d_fake = -_clamped_log(1.0 - _scores(d_scores_fn, fake_grams)).mean()
    return LossReport.from_terms({"d_real": d_real, "d_fake": d_fake})


def tom_g_loss(
    fake_gram_scores: torch.Tensor,
    f_target: torch.Tensor,
    f_hat_sketch: torch.Tensor,
) -> LossReport:
    """Sketch-generator objective: fool D plus match the blended target features.

    terms: adv = -mean log D(fake), match = mean squared error between the
    style-matched target features and the generated sketch's features.
    """
    if f_target.shape != f_hat_sketch.shape:
        raise ValueError(
            f"feature shape mismatch: {tuple(f_target.shape)} vs {tuple(f_hat_sketch.shape)}"
        )
    adv = -_clamped_log(fake_gram_scores.reshape(-1)).mean()
    match = F.mse_loss(f_hat_sketch, f_target)
    return LossReport.from_terms({"adv": adv, "match": match})


def _cosine(a: torch.Tensor, b: torch.Tensor) -> torch.Tensor:
    na = a.norm(dim=-1)
    nb = b.norm(dim=-1)
    if (na == 0).any() or (nb == 0).any():
        raise ValueError("cosine similarity undefined for zero-norm vectors")
    return (a * b).sum(dim=-1) / (na * nb)


def style_triplet(
    f_t: torch.Tensor,
    f_org: torch.Tensor,
    f_neg: torch.Tensor,
    margins: TripletMargins,
    paper_sign: bool = False,
) -> torch.Tensor:
    """Cosine triplet pulling translations of one image together in style space.

    max(cos(f_t, f_neg) - cos(f_t, f_org) + alpha, 0): minimizing drives
    positive-pair similarity up. paper_sign=True flips the orientation to
    max(cos(f_t, f_org) - cos(f_t, f_neg) + alpha, 0).
    """
    pos = _cosine(f_t, f_org)
    neg = _cosine(f_t, f_neg)
    gap = (pos - neg) if paper_sign else (neg - pos)
    return F.relu(gap + margins.alpha).mean()


def content_triplet(
    f_t: torch.Tensor,
    f_pos: torch.Tensor,
    f_neg: torch.Tensor,
    margins: TripletMargins,
) -> torch.Tensor:
    """Mean-squared-distance triplet over content grids: max(d+ - d- + beta, 0)."""
    if not (f_t.shape == f_pos.shape == f_neg.shape):
        raise ValueError("content_triplet requires identical shapes")
    dims = tuple(range(1, f_t.dim())) if f_t.dim() > 1 else (0,)
    d_pos = ((f_t - f_pos) ** 2).mean(dim=dims)
    d_neg = ((f_t - f_neg) ** 2).mean(dim=dims)
    return F.relu(d_pos - d_neg + margins.beta).mean()


def style_class_loss(logits: torch.Tensor, label) -> torch.Tensor:
    """Cross-entropy of the auxiliary style classifier: -log softmax(logits)[label]."""
    if logits.dim() == 1:
        logits = logits[None]
        label = torch.as_tensor([label])
    else:
        label = torch.as_tensor(label)
    if (label < 0).any() or (label >= logits.shape[-1]).any():
        raise ValueError(f"label out of range for {logits.shape[-1]} classes")
    return F.cross_entropy(logits, label.to(logits.device))


def content_declass_loss(content_logits: torch.Tensor, target: UniformTarget) -> torch.Tensor:
    """Squared distance from the content logits' softmax to the uniform vector.

    Zero (with zero gradient) exactly when the softmax is uniform, i.e.
    when the content features predict no style class at all.
    """
    if content_logits.shape[-1] != target.k:
        raise ValueError(
            f"logit length {content_logits.shape[-1]} != class count {target.k}"
        )
    p = F.softmax(content_logits, dim=-1)
    v = target.v.to(p.device, p.dtype)
    sq = ((p - v) ** 2).sum(dim=-1)
    return sq.mean()


def ae_total(
    recon_in: torch.Tensor,
    recon_target: torch.Tensor,
    parts: Mapping[str, torch.Tensor] | LossReport,
    weights: Mapping[str, float] | None = None,
) -> LossReport:
    """Summed auto-encoder objective: reconstruction MSE plus the four
    self-supervision terms, each weighted 1.0 unless overridden.
    """
    if recon_in.shape != recon_target.shape:
        raise ValueError("reconstruction shapes differ")
    terms_in = parts.terms if isinstance(parts, LossReport) else dict(parts)
    missing = [n for n in AE_PART_NAMES if n not in terms_in]
    if missing:
        raise ValueError(f"missing self-supervision terms: {missing}")
    weights = dict(weights or {})
    terms: dict[str, torch.Tensor] = {"recon": F.mse_loss(recon_in, recon_target)}
    for name in AE_PART_NAMES:
        w = weights.get(name, 1.0)
        t = terms_in[name]
        terms[name] = t * w if torch.is_tensor(t) else torch.as_tensor(float(t) * w)
    return LossReport.from_terms(terms)


def refiner_d_loss(real_scores: torch.Tensor, fake_scores: torch.Tensor) -> torch.Tensor:
    """Hinge discriminator loss; zero when real >= 1 and fake <= -1."""
    real_scores = torch.as_tensor(real_scores).reshape(-1)
    fake_scores = torch.as_tensor(fake_scores).reshape(-1)
    if real_scores.numel() == 0 or fake_scores.numel() == 0:
        raise ValueError("refiner_d_loss requires non-empty score batches")
    return F.relu(1.0 - real_scores).mean() + F.relu(1.0 + fake_scores).mean()


def refiner_g_loss(
    fake_scores: torch.Tensor,
    g_out: torch.Tensor,
    style_img: torch.Tensor,
    lam: float = 10.0,
) -> LossReport:
    """Refiner generator objective: -mean(D scores) + lam * reconstruction MSE.

    terms: adv (unbounded below), rec (the weighted lam*mse term).
    """
    if g_out.shape != style_img.shape:
        raise ValueError("refiner output / target shapes differ")
    adv = -torch.as_tensor(fake_scores).reshape(-1).mean()
    rec = lam * F.mse_loss(g_out, style_img)
    return LossReport.from_terms({"adv": adv, "rec": rec})
