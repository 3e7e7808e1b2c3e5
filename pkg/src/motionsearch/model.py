"""Dual probabilistic sequence encoders and the non-autoregressive decoder.

Both encoders are small pre-norm transformer stacks.  Two learnable
distribution tokens are prepended to the embedded input sequence; after the
stack, their states are projected to the latent mean and log-variance.  The
decoder turns a latent vector plus sinusoidal positional encodings of the
requested duration into a motion feature sequence in a single forward pass.
"""

from __future__ import annotations

import json
from dataclasses import dataclass, asdict
from pathlib import Path

import numpy as np

from . import autograd as ag
from .autograd import Parameter, Tensor
from .dataio import MotionFeatureSequence, TextEntry

NEG_INF = -1e9


@dataclass
class ModelConfig:
    latent_dim: int = 256
    width: int = 64
    depth: int = 2
    dec_depth: int = 1
    heads: int = 4
    ff_mult: int = 2
    max_len: int = 512
    motion_dim: int = 16
    vocab_size: int | None = None       # built-in trainable token embedding
    text_feat_dim: int | None = None    # ingested external token features
    probabilistic: bool = True          # False: single deterministic token

    def __post_init__(self):
        if min(self.latent_dim, self.depth, self.dec_depth) < 1:
            raise ValueError("latent_dim and depths must be >= 1")
        if self.width % self.heads != 0:
            raise ValueError("width must be divisible by heads")


@dataclass
class LatentDistribution:
    mu: np.ndarray
    log_var: np.ndarray | None = None


def positional_encoding(length: int, width: int) -> np.ndarray:
    """Sinusoidal table: PE[t, 2i] = sin(t / 10000^(2i/width)), cos for odd."""
    if length < 1 or width < 1:
        raise ValueError("length and width must be >= 1")
    pos = np.arange(length, dtype=np.float64)[:, None]
    i = np.arange(0, width, 2, dtype=np.float64)
    angles = pos / np.power(10000.0, i / width)
    pe = np.zeros((length, width), dtype=np.float64)
    pe[:, 0::2] = np.sin(angles)
    pe[:, 1::2] = np.cos(angles[:, : pe[:, 1::2].shape[1]])
    return pe


def sample_latent(dist: LatentDistribution,
                  eps: np.ndarray | None = None) -> np.ndarray:
    """Reparameterized draw z = mu + exp(log_var / 2) * eps."""
    if eps is None or dist.log_var is None:
        return dist.mu.copy()
    return dist.mu + np.exp(dist.log_var / 2.0) * eps


def retrieval_embedding(dist: LatentDistribution) -> np.ndarray:
    """The retrieval embedding is the mean token output."""
    return dist.mu


class TextMotionModel:
    """Parameter container plus batched differentiable forward passes."""

    def __init__(self, config: ModelConfig, seed: int = 0):
        if config.vocab_size is None and config.text_feat_dim is None:
            raise ValueError("need vocab_size or text_feat_dim for text input")
        self.config = config
        self.seed = seed
        self.params: dict[str, Parameter] = {}
        self._init_params(np.random.default_rng(seed))

    # parameter setup ----------------------------------------------------
    def _add(self, name: str, value: np.ndarray) -> None:
        if name in self.params:
            raise ValueError(f"duplicate parameter id {name}")
        self.params[name] = Parameter(name, value)

    def _linear_init(self, rng, fan_in, fan_out):
        scale = np.sqrt(2.0 / (fan_in + fan_out))
        return rng.normal(scale=scale, size=(fan_in, fan_out))

    def _init_block(self, rng, prefix: str) -> None:
        w, ff = self.config.width, self.config.width * self.config.ff_mult
        self._add(f"{prefix}.ln1_g", np.ones(w))
        self._add(f"{prefix}.ln1_b", np.zeros(w))
        for nm in ("wq", "wk", "wv", "wo"):
            self._add(f"{prefix}.{nm}", self._linear_init(rng, w, w))
            self._add(f"{prefix}.{nm}_b", np.zeros(w))
        self._add(f"{prefix}.ln2_g", np.ones(w))
        self._add(f"{prefix}.ln2_b", np.zeros(w))
        self._add(f"{prefix}.ff1", self._linear_init(rng, w, ff))
        self._add(f"{prefix}.ff1_b", np.zeros(ff))
        self._add(f"{prefix}.ff2", self._linear_init(rng, ff, w))
        self._add(f"{prefix}.ff2_b", np.zeros(w))

    def _init_stack(self, rng, prefix: str, depth: int) -> None:
        for layer in range(depth):
            self._init_block(rng, f"{prefix}.block{layer}")
        self._add(f"{prefix}.lnf_g", np.ones(self.config.width))
        self._add(f"{prefix}.lnf_b", np.zeros(self.config.width))

    def _init_params(self, rng) -> None:
        cfg = self.config
        w, d = cfg.width, cfg.latent_dim
        ntok = 2 if cfg.probabilistic else 1
        if cfg.vocab_size is not None:
            self._add("text.embed",
                      rng.normal(scale=1.0, size=(cfg.vocab_size, w)))
        if cfg.text_feat_dim is not None:
            self._add("text.lift", self._linear_init(rng, cfg.text_feat_dim, w))
            self._add("text.lift_b", np.zeros(w))
        self._add("motion.lift", self._linear_init(rng, cfg.motion_dim, w))
        self._add("motion.lift_b", np.zeros(w))
        for enc in ("text", "motion"):
            self._add(f"{enc}.dist_tokens",
                      rng.normal(scale=0.5, size=(ntok, w)))
            self._init_stack(rng, f"{enc}.enc", cfg.depth)
            self._add(f"{enc}.mu", self._linear_init(rng, w, d))
            self._add(f"{enc}.mu_b", np.zeros(d))
            if cfg.probabilistic:
                self._add(f"{enc}.logvar", self._linear_init(rng, w, d))
                self._add(f"{enc}.logvar_b", np.zeros(d))
        self._add("dec.z_proj", self._linear_init(rng, d, w))
        self._add("dec.z_proj_b", np.zeros(w))
        self._init_stack(rng, "dec.stack", cfg.dec_depth)
        self._add("dec.out", self._linear_init(rng, w, cfg.motion_dim))
        self._add("dec.out_b", np.zeros(cfg.motion_dim))
        self._pe = positional_encoding(cfg.max_len, w)

    def parameters(self) -> list[Parameter]:
        return list(self.params.values())

    def check_finite(self) -> None:
        for p in self.parameters():
            if not np.isfinite(p.value).all():
                raise FloatingPointError(f"parameter {p.name} is non-finite")

    # forward pieces -----------------------------------------------------
    def _block(self, x: Tensor, prefix: str, mask: np.ndarray | None) -> Tensor:
        p = self.params
        cfg = self.config
        b, t, w = x.shape
        h, dh = cfg.heads, cfg.width // cfg.heads

        normed = ag.layer_norm(x, p[f"{prefix}.ln1_g"], p[f"{prefix}.ln1_b"])
        q = ag.linear(normed, p[f"{prefix}.wq"], p[f"{prefix}.wq_b"])
        k = ag.linear(normed, p[f"{prefix}.wk"], p[f"{prefix}.wk_b"])
        v = ag.linear(normed, p[f"{prefix}.wv"], p[f"{prefix}.wv_b"])
        q = ag.swapaxes(ag.reshape(q, (b, t, h, dh)), 1, 2)
        k = ag.swapaxes(ag.reshape(k, (b, t, h, dh)), 1, 2)
        v = ag.swapaxes(ag.reshape(v, (b, t, h, dh)), 1, 2)
        scores = (q @ ag.swapaxes(k, -1, -2)) * (1.0 / np.sqrt(dh))
        if mask is not None:
            scores = scores + Tensor(mask)
        attn = ag.softmax(scores, axis=-1)
        ctx = ag.reshape(ag.swapaxes(attn @ v, 1, 2), (b, t, w))
        x = x + ag.linear(ctx, p[f"{prefix}.wo"], p[f"{prefix}.wo_b"])

        normed = ag.layer_norm(x, p[f"{prefix}.ln2_g"], p[f"{prefix}.ln2_b"])
        hmid = ag.relu(ag.linear(normed, p[f"{prefix}.ff1"],
                                 p[f"{prefix}.ff1_b"]))
        return x + ag.linear(hmid, p[f"{prefix}.ff2"], p[f"{prefix}.ff2_b"])

    def _stack(self, x: Tensor, prefix: str, mask: np.ndarray | None,
               depth: int) -> Tensor:
        for layer in range(depth):
            x = self._block(x, f"{prefix}.block{layer}", mask)
        return ag.layer_norm(x, self.params[f"{prefix}.lnf_g"],
                             self.params[f"{prefix}.lnf_b"])

    def _encode(self, seq: Tensor, lengths: np.ndarray,
                which: str) -> tuple[Tensor, Tensor | None]:
        """Shared encoder body: prepend distribution tokens, mix, read out."""
        p = self.params
        cfg = self.config
        b, t, w = seq.shape
        ntok = 2 if cfg.probabilistic else 1
        tokens = ag.expand(ag.reshape(p[f"{which}.dist_tokens"],
                                      (1, ntok, w)), (b, ntok, w))
        x = ag.concat([tokens, seq], axis=1)
        full = t + ntok
        x = x + Tensor(self._pe[:full][None, :, :])

        # additive key mask: padded positions beyond each length blocked
        key_valid = np.arange(full)[None, :] < (lengths + ntok)[:, None]
        mask = np.where(key_valid, 0.0, NEG_INF)[:, None, None, :]
        out = self._stack(x, f"{which}.enc", mask, cfg.depth)
        mu = ag.linear(out[:, 0, :], p[f"{which}.mu"], p[f"{which}.mu_b"])
        if not cfg.probabilistic:
            return mu, None
        log_var = ag.linear(out[:, 1, :], p[f"{which}.logvar"],
                            p[f"{which}.logvar_b"])
        return mu, log_var

    def encode_text_batch(self, texts: list[TextEntry]
                          ) -> tuple[Tensor, Tensor | None]:
        if not texts:
            raise ValueError("empty batch")
        cfg = self.config
        if cfg.vocab_size is not None and texts[0].token_ids is not None:
            lengths = np.array([len(t.token_ids) for t in texts])
            if (lengths < 1).any():
                raise ValueError("empty token sequence")
            tmax = int(lengths.max())
            ids = np.zeros((len(texts), tmax), dtype=np.intp)
            for i, t in enumerate(texts):
                clipped = np.clip(t.token_ids, 0, cfg.vocab_size - 1)
                ids[i, : len(t.token_ids)] = clipped
            seq = ag.take(self.params["text.embed"], ids)
        else:
            if cfg.text_feat_dim is None:
                raise ValueError("model has no token-feature path")
            lengths = np.array([t.token_feats.shape[0] for t in texts])
            if (lengths < 1).any():
                raise ValueError("empty token sequence")
            tmax = int(lengths.max())
            feats = np.zeros((len(texts), tmax, cfg.text_feat_dim))
            for i, t in enumerate(texts):
                feats[i, : t.token_feats.shape[0]] = t.token_feats
            seq = ag.linear(Tensor(feats), self.params["text.lift"],
                            self.params["text.lift_b"])
        return self._encode(seq, lengths, "text")

    def encode_motion_batch(self, motions: list[MotionFeatureSequence]
                            ) -> tuple[Tensor, Tensor | None]:
        if not motions:
            raise ValueError("empty batch")
        lengths = np.array([m.frames for m in motions])
        tmax = int(lengths.max())
        feats = np.zeros((len(motions), tmax, self.config.motion_dim))
        for i, m in enumerate(motions):
            feats[i, : m.frames] = m.data
        seq = ag.linear(Tensor(feats), self.params["motion.lift"],
                        self.params["motion.lift_b"])
        return self._encode(seq, lengths, "motion")

    def decode_batch(self, z: Tensor, durations: np.ndarray) -> Tensor:
        """(B, d) latents -> (B, Tmax, motion_dim); padded rows are garbage."""
        durations = np.asarray(durations)
        if (durations < 1).any():
            raise ValueError("duration must be >= 1")
        p = self.params
        b = z.shape[0]
        tmax = int(durations.max())
        zw = ag.reshape(ag.linear(z, p["dec.z_proj"], p["dec.z_proj_b"]),
                        (b, 1, self.config.width))
        x = Tensor(np.broadcast_to(self._pe[:tmax][None, :, :],
                                   (b, tmax, self.config.width)).copy()) + zw
        key_valid = np.arange(tmax)[None, :] < durations[:, None]
        mask = np.where(key_valid, 0.0, NEG_INF)[:, None, None, :]
        out = self._stack(x, "dec.stack", mask, self.config.dec_depth)
        return ag.linear(out, p["dec.out"], p["dec.out_b"])

    # single-item inference API ------------------------------------------
    def encode_text(self, text: TextEntry) -> LatentDistribution:
        mu, log_var = self.encode_text_batch([text])
        return LatentDistribution(
            mu=mu.value[0].copy(),
            log_var=None if log_var is None else log_var.value[0].copy())

    def encode_motion(self, motion: MotionFeatureSequence
                      ) -> LatentDistribution:
        mu, log_var = self.encode_motion_batch([motion])
        return LatentDistribution(
            mu=mu.value[0].copy(),
            log_var=None if log_var is None else log_var.value[0].copy())

    def decode(self, z: np.ndarray, duration: int) -> MotionFeatureSequence:
        if duration < 1:
            raise ValueError("duration must be >= 1")
        out = self.decode_batch(Tensor(z[None, :]), np.array([duration]))
        return MotionFeatureSequence(data=out.value[0].copy())

    # checkpoints --------------------------------------------------------
    def save(self, path, extra_meta: dict | None = None) -> None:
        path = Path(path)
        path.mkdir(parents=True, exist_ok=True)
        names = sorted(self.params)
        manifest = {
            "model_config": asdict(self.config),
            "seed": self.seed,
            "params": [{"name": n, "shape": list(self.params[n].value.shape)}
                       for n in names],
        }
        if extra_meta:
            manifest["meta"] = extra_meta
        (path / "manifest.json").write_text(json.dumps(manifest, indent=2))
        with open(path / "weights.bin", "wb") as f:
            for n in names:
                f.write(np.ascontiguousarray(
                    self.params[n].value, dtype="<f4").tobytes())

    @classmethod
    def load(cls, path) -> "TextMotionModel":
        path = Path(path)
        manifest = json.loads((path / "manifest.json").read_text())
        model = cls(ModelConfig(**manifest["model_config"]),
                    seed=manifest.get("seed", 0))
        blob = (path / "weights.bin").read_bytes()
        offset = 0
        for rec in manifest["params"]:
            shape = tuple(rec["shape"])
            count = int(np.prod(shape)) if shape else 1
            arr = np.frombuffer(blob, dtype="<f4", count=count,
                                offset=offset).reshape(shape)
            offset += count * 4
            model.params[rec["name"]].value[...] = arr.astype(np.float64)
        if offset != len(blob):
            raise ValueError(f"{path}: weights.bin has trailing bytes")
        return model
