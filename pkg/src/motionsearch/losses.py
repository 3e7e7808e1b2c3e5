"""Training objectives: smooth-L1 reconstruction, Gaussian KL terms,
cross-modal embedding loss, filtered InfoNCE, and the weighted total.

All functions accept autograd Tensors and return scalar Tensors, so every
loss is differentiable end to end.  The filter mask excludes wrong negatives
(near-duplicate texts) from the contrastive denominators only; filtered
items still contribute to the synthesis losses.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from . import autograd as ag
from .autograd import Tensor

NEG_INF = -1e9
COSINE_EPS = 1e-8


@dataclass
class LossWeights:
    lambda_kl: float = 1e-5
    lambda_e: float = 1e-5
    lambda_nce: float = 0.1
    temperature: float = 0.1
    filter_threshold: float = 0.8
    smooth_l1_beta: float = 1.0
    margin: float = 1.0          # only for the margin-loss ablation variant

    def __post_init__(self):
        if self.temperature <= 0:
            raise ValueError("temperature must be positive")
        if min(self.lambda_kl, self.lambda_e, self.lambda_nce) < 0:
            raise ValueError("loss weights must be non-negative")


def smooth_l1(a: Tensor, b: Tensor, beta: float = 1.0) -> Tensor:
    """Mean over elements of the Huber-style penalty of a - b."""
    if beta <= 0:
        raise ValueError("beta must be positive")
    if a.shape != b.shape:
        raise ag.GraphError(f"smooth_l1 shape mismatch: {a.shape} vs {b.shape}")
    return ag.mean(ag.smooth_l1_elem(a - b, beta))


def masked_smooth_l1(a: Tensor, b: Tensor, mask: np.ndarray,
                     beta: float = 1.0) -> Tensor:
    """smooth_l1 averaged over valid positions only; mask broadcasts to a."""
    if a.shape != b.shape:
        raise ag.GraphError(f"smooth_l1 shape mismatch: {a.shape} vs {b.shape}")
    elem = ag.smooth_l1_elem((a - b) * Tensor(mask), beta)
    denom = float(np.broadcast_to(mask, a.shape).sum())
    return ag.sum_(elem) * (1.0 / denom)


def kl_gaussian(mu_p: Tensor, logvar_p: Tensor,
                mu_q: Tensor | None = None,
                logvar_q: Tensor | None = None) -> Tensor:
    """Closed-form KL(p || q) for diagonal Gaussians, summed over dims.

    With mu_q/logvar_q omitted, q is the standard normal.  Batched inputs
    (B, d) return the batch mean of the per-sample sums.
    """
    if mu_q is None:
        inner = (ag.exp(logvar_p) + ag.square(mu_p) - 1.0 - logvar_p)
    else:
        var_ratio = ag.exp(logvar_p - logvar_q)
        inner = (var_ratio + ag.square(mu_p - mu_q) / ag.exp(logvar_q)
                 - 1.0 - (logvar_p - logvar_q))
    per_sample = ag.sum_(inner * 0.5, axis=-1)
    if len(per_sample.shape) == 0:
        return per_sample
    return ag.mean(per_sample)


def cosine_similarity_matrix(a: Tensor, b: Tensor) -> Tensor:
    """S[i, j] = cos(a_i, b_j) for row embeddings a (N, d) and b (N, d)."""
    na = ag.sqrt(ag.sum_(ag.square(a), axis=-1, keepdims=True) + COSINE_EPS)
    nb = ag.sqrt(ag.sum_(ag.square(b), axis=-1, keepdims=True) + COSINE_EPS)
    return (a / na) @ ag.swapaxes(b / nb, -1, -2)


def filter_mask(text_sim: np.ndarray, threshold: float) -> np.ndarray:
    """Boolean keep-matrix: diagonal always kept, pairs above the text
    similarity threshold dropped from the contrastive loss."""
    keep = text_sim <= threshold
    np.fill_diagonal(keep, True)
    return keep


def info_nce(s: Tensor, tau: float, mask: np.ndarray | None = None) -> Tensor:
    """Bidirectional InfoNCE over a similarity matrix.

    Masked-out entries are pushed to -inf before the row/column softmax so
    they contribute nothing to the denominators.
    """
    if tau <= 0:
        raise ValueError("temperature must be positive")
    n = s.shape[0]
    logits = s * (1.0 / tau)
    if mask is not None:
        if not mask.diagonal().all():
            raise ValueError("filter mask must keep the diagonal")
        logits = logits + Tensor(np.where(mask, 0.0, NEG_INF))
    rows = ag.log_softmax(logits, axis=1)
    cols = ag.log_softmax(logits, axis=0)
    diag = np.arange(n)
    picked = rows[diag, diag] + cols[diag, diag]
    return ag.sum_(picked) * (-1.0 / (2.0 * n))


def margin_contrastive(zt: Tensor, zm: Tensor, margin: float,
                       mask: np.ndarray | None = None) -> Tensor:
    """Euclidean margin loss baseline: pull positives, push unmasked
    negatives beyond the margin."""
    n = zt.shape[0]
    diff = ag.reshape(zt, (n, 1, -1)) - ag.reshape(zm, (1, n, -1))
    d = ag.sqrt(ag.sum_(ag.square(diff), axis=-1) + COSINE_EPS)
    pos = ag.mean(d[np.arange(n), np.arange(n)])
    keep = np.ones((n, n), dtype=bool) if mask is None else mask.copy()
    np.fill_diagonal(keep, False)
    if not keep.any():
        return pos
    hinge = ag.relu(margin - d)
    neg = ag.sum_(ag.square(hinge) * Tensor(keep.astype(np.float64)))
    return pos + neg * (1.0 / keep.sum())


def temos_loss(gt_batch: Tensor, frame_mask: np.ndarray,
               text_mu: Tensor, text_logvar: Tensor | None,
               motion_mu: Tensor, motion_logvar: Tensor | None,
               decoded_from_text: Tensor, decoded_from_motion: Tensor,
               z_text: Tensor, z_motion: Tensor,
               weights: LossWeights) -> tuple[Tensor, dict]:
    """Synthesis objective: reconstruction + 4 KL terms + embedding loss.

    gt_batch is (B, T, dim) padded; frame_mask is (B, T, 1) with ones on
    valid frames.  Returns the scalar total and a float breakdown.
    """
    if decoded_from_text.shape != gt_batch.shape:
        raise ag.GraphError("decoded/ground-truth length mismatch")
    beta = weights.smooth_l1_beta
    l_r = (masked_smooth_l1(decoded_from_text, gt_batch, frame_mask, beta)
           + masked_smooth_l1(decoded_from_motion, gt_batch, frame_mask, beta))
    terms = {"L_R": float(l_r.value)}
    total = l_r
    if text_logvar is not None and motion_logvar is not None:
        l_kl = (kl_gaussian(text_mu, text_logvar)
                + kl_gaussian(motion_mu, motion_logvar)
                + kl_gaussian(text_mu, text_logvar, motion_mu, motion_logvar)
                + kl_gaussian(motion_mu, motion_logvar, text_mu, text_logvar))
        terms["L_KL"] = float(l_kl.value)
        total = total + l_kl * weights.lambda_kl
    else:
        terms["L_KL"] = 0.0
    l_e = smooth_l1(z_text, z_motion, beta)
    terms["L_E"] = float(l_e.value)
    total = total + l_e * weights.lambda_e
    terms["L_TEMOS"] = float(total.value)
    return total, terms


def total_loss(temos: Tensor | None, nce: Tensor | None,
               weights: LossWeights) -> Tensor:
    if temos is None and nce is None:
        raise ValueError("at least one loss branch required")
    if temos is None:
        return nce * weights.lambda_nce
    if nce is None:
        return temos
    return temos + nce * weights.lambda_nce
