"""Training loop: batch assembly, AdamW, checkpointing, ablation grid.

One text per motion is picked uniformly at random each epoch; the filter
mask for the contrastive loss is derived from the sentence embeddings of
the texts actually used in the batch.
"""

from __future__ import annotations

import json
from dataclasses import dataclass, field, asdict
from pathlib import Path

import numpy as np

from . import autograd as ag
from .autograd import Tensor
from . import losses as L
from .dataio import Dataset, DatasetItem
from .losses import LossWeights
from .model import ModelConfig, TextMotionModel
from .retrieval import ProtocolConfig, encode_split, evaluate


@dataclass
class TrainConfig:
    batch_size: int = 32
    learning_rate: float = 1e-4
    weight_decay: float = 1e-4
    epochs: int = 100
    seed: int = 0
    scale_lr_with_batch: bool = False   # lr *= batch_size / 32 when set
    weights: LossWeights = field(default_factory=LossWeights)
    model: ModelConfig = field(default_factory=ModelConfig)
    contrastive: str = "infonce"        # infonce | margin | none
    use_reconstruction: bool = True
    use_filtering: bool = True
    val_every: int = 0                  # 0: keep final weights
    precision: str = "float32"          # gradient checks need float64
    beta1: float = 0.9
    beta2: float = 0.999
    adam_eps: float = 1e-8

    def __post_init__(self):
        if self.batch_size < 1:
            raise ValueError("batch_size must be >= 1")
        if self.learning_rate <= 0:
            raise ValueError("learning rate must be positive")
        if self.contrastive not in ("infonce", "margin", "none"):
            raise ValueError(f"unknown contrastive mode {self.contrastive!r}")
        if isinstance(self.weights, dict):
            self.weights = LossWeights(**self.weights)
        if isinstance(self.model, dict):
            self.model = ModelConfig(**self.model)

    @property
    def effective_lr(self) -> float:
        if self.scale_lr_with_batch:
            return self.learning_rate * self.batch_size / 32.0
        return self.learning_rate

    @classmethod
    def from_json(cls, path) -> "TrainConfig":
        return cls(**json.loads(Path(path).read_text()))


class AdamW:
    """Adaptive moments with decoupled weight decay."""

    def __init__(self, params, lr, weight_decay=0.0, beta1=0.9, beta2=0.999,
                 eps=1e-8):
        self.params = list(params)
        self.lr = lr
        self.wd = weight_decay
        self.b1, self.b2, self.eps = beta1, beta2, eps
        self.t = 0
        self.m = [np.zeros_like(p.value) for p in self.params]
        self.v = [np.zeros_like(p.value) for p in self.params]

    def step(self) -> None:
        self.t += 1
        b1t = 1.0 - self.b1 ** self.t
        b2t = 1.0 - self.b2 ** self.t
        for p, m, v in zip(self.params, self.m, self.v):
            g = p.grad
            if g is None:
                g = np.zeros_like(p.value)
            m *= self.b1
            m += (1.0 - self.b1) * g
            v *= self.b2
            v += (1.0 - self.b2) * g * g
            update = (m / b1t) / (np.sqrt(v / b2t) + self.eps)
            p.value -= self.lr * (update + self.wd * p.value)


def _batch_loss(model: TextMotionModel, items: list[DatasetItem],
                text_choice: list[int], cfg: TrainConfig,
                rng: np.random.Generator) -> tuple[Tensor, dict]:
    w = cfg.weights
    texts = [it.texts[k] for it, k in zip(items, text_choice)]
    motions = [it.motion for it in items]
    lengths = np.array([m.frames for m in motions])

    text_mu, text_logvar = model.encode_text_batch(texts)
    motion_mu, motion_logvar = model.encode_motion_batch(motions)

    if text_logvar is not None:
        eps_t = rng.standard_normal(text_mu.shape)
        eps_m = rng.standard_normal(motion_mu.shape)
        z_text = text_mu + ag.exp(text_logvar * 0.5) * Tensor(eps_t)
        z_motion = motion_mu + ag.exp(motion_logvar * 0.5) * Tensor(eps_m)
    else:
        z_text, z_motion = text_mu, motion_mu

    # wrong-negative mask from the batch's sentence embeddings
    sent = np.stack([t.sent_emb for t in texts])
    sim = np.clip(sent @ sent.T, -1.0, 1.0)
    np.fill_diagonal(sim, 1.0)
    if cfg.use_filtering:
        mask = L.filter_mask(sim, w.filter_threshold)
    else:
        mask = np.ones_like(sim, dtype=bool)
    n = len(items)
    off = n * (n - 1)
    filtered_pct = 100.0 * (off - (mask.sum() - n)) / off if off else 0.0

    terms = {"filtered_pct": float(filtered_pct)}
    temos = None
    if cfg.use_reconstruction:
        tmax = int(lengths.max())
        gt = np.zeros((n, tmax, model.config.motion_dim))
        fmask = np.zeros((n, tmax, 1))
        for i, m in enumerate(motions):
            gt[i, : m.frames] = m.data
            fmask[i, : m.frames] = 1.0
        dec_text = model.decode_batch(z_text, lengths)
        dec_motion = model.decode_batch(z_motion, lengths)
        temos, tterms = L.temos_loss(Tensor(gt), fmask, text_mu, text_logvar,
                                     motion_mu, motion_logvar, dec_text,
                                     dec_motion, z_text, z_motion, w)
        terms.update(tterms)

    # the contrastive term acts on the retrieval embeddings (the means);
    # sampled latents feed the decoder and the embedding loss
    nce = None
    if cfg.contrastive == "infonce":
        s = L.cosine_similarity_matrix(text_mu, motion_mu)
        nce = L.info_nce(s, w.temperature, mask)
        terms["L_NCE"] = float(nce.value)
    elif cfg.contrastive == "margin":
        nce = L.margin_contrastive(text_mu, motion_mu, w.margin, mask)
        terms["L_NCE"] = float(nce.value)

    total = L.total_loss(temos, nce, w)
    terms["total"] = float(total.value)
    return total, terms


@dataclass
class TrainResult:
    model: TextMotionModel
    log: list[dict]
    aborted: bool = False


def train(dataset: Dataset, cfg: TrainConfig,
          log_path=None) -> TrainResult:
    """Run the configured number of epochs; deterministic given the seed."""
    train_items = dataset.split_items("train")
    if not train_items:
        raise ValueError("dataset has no train split")
    val_items = dataset.split_items("val")

    prev_dtype = ag.default_dtype()
    ag.set_default_dtype(np.float32 if cfg.precision == "float32"
                         else np.float64)
    model = TextMotionModel(cfg.model, seed=cfg.seed)
    opt = AdamW(model.parameters(), cfg.effective_lr, cfg.weight_decay,
                cfg.beta1, cfg.beta2, cfg.adam_eps)
    rng = np.random.default_rng(cfg.seed + 1)

    log: list[dict] = []
    logf = open(log_path, "w") if log_path else None
    step = 0
    best_val = -1.0
    best_snapshot = None
    snapshot = {n: p.value.copy() for n, p in model.params.items()}
    aborted = False
    try:
        for epoch in range(cfg.epochs):
            order = rng.permutation(len(train_items))
            choices = [int(rng.integers(len(train_items[i].texts)))
                       for i in range(len(train_items))]
            for start in range(0, len(order), cfg.batch_size):
                idx = order[start:start + cfg.batch_size]
                if len(idx) < 2:
                    continue
                batch = [train_items[i] for i in idx]
                picks = [choices[i] for i in idx]
                ag.zero_grads(model.parameters())
                loss, terms = _batch_loss(model, batch, picks, cfg, rng)
                if not np.isfinite(loss.value):
                    for nname, p in model.params.items():
                        p.value[...] = snapshot[nname]
                    aborted = True
                    break
                snapshot = {n: p.value.copy()
                            for n, p in model.params.items()}
                ag.backward(loss)
                opt.step()
                entry = {"step": step, "epoch": epoch, **terms}
                log.append(entry)
                if logf:
                    logf.write(json.dumps(entry) + "\n")
                step += 1
            if aborted:
                break
            if (cfg.val_every and val_items
                    and (epoch + 1) % cfg.val_every == 0):
                split = encode_split(model, val_items)
                rep = evaluate(split, ProtocolConfig(
                    kind="all_with_threshold"), "t2m")
                if rep.recalls[10] > best_val:
                    best_val = rep.recalls[10]
                    best_snapshot = {n: p.value.copy()
                                     for n, p in model.params.items()}
    finally:
        if logf:
            logf.close()
        ag.set_default_dtype(prev_dtype)
    if best_snapshot is not None:
        final = encode_split(model, val_items)
        rep = evaluate(final, ProtocolConfig(kind="all_with_threshold"),
                       "t2m")
        if rep.recalls[10] < best_val:
            for nname, p in model.params.items():
                p.value[...] = best_snapshot[nname]
    model.check_finite()
    return TrainResult(model=model, log=log, aborted=aborted)


def ablate(dataset: Dataset, base_cfg: TrainConfig,
           grid: dict[str, dict], split: str = "test",
           direction: str = "t2m") -> list[dict]:
    """Train one model per variant and evaluate it with protocol (b)."""
    rows = []
    for name, overrides in grid.items():
        cfg_dict = asdict(base_cfg)
        weights = cfg_dict.pop("weights")
        model_cfg = cfg_dict.pop("model")
        for k, v in overrides.items():
            if k in weights:
                weights[k] = v
            elif k in model_cfg:
                model_cfg[k] = v
            else:
                cfg_dict[k] = v
        cfg = TrainConfig(weights=weights, model=model_cfg, **cfg_dict)
        result = train(dataset, cfg)
        emb = encode_split(result.model, dataset.split_items(split))
        rep = evaluate(emb, ProtocolConfig(kind="all_with_threshold"),
                       direction)
        rows.append({"variant": name, "direction": direction,
                     "recalls": {f"R@{k}": v
                                 for k, v in sorted(rep.recalls.items())},
                     "MedR": rep.med_rank})
    return rows
