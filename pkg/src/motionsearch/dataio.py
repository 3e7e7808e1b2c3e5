"""Dataset ingestion, binary matrix files, and the synthetic paired corpus.

Directory layout of a dataset:

* ``meta.json`` -- feature_dim, joint_count?, text_feat_dim?, sent_emb_dim,
  splits, vocab_size?
* ``motions/<id>.mtx`` and optional ``joints/<id>.mtx`` /
  ``text_feats/<id>_<k>.mtx``
* ``texts.jsonl`` -- one object per motion: {"id", "split", "texts": [...],
  "token_ids": [[...], ...]?}
* ``sent_emb.mtx`` -- one row per text in file order
* optional ``text_sim.mtx``

Matrix files are binary: magic ``TMRM``, version u8, rows u32, cols u32,
then row-major little-endian f32.
"""

from __future__ import annotations

import json
import struct
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

MAGIC = b"TMRM"
FORMAT_VERSION = 1


class FormatError(ValueError):
    """Raised when a dataset file is malformed."""


def save_matrix(path, mat: np.ndarray) -> None:
    mat = np.ascontiguousarray(mat, dtype="<f4")
    if mat.ndim != 2:
        raise FormatError(f"matrix files are 2-D, got shape {mat.shape}")
    with open(path, "wb") as f:
        f.write(MAGIC)
        f.write(struct.pack("<BII", FORMAT_VERSION, mat.shape[0],
                            mat.shape[1]))
        f.write(mat.tobytes())


def load_matrix(path) -> np.ndarray:
    path = Path(path)
    data = path.read_bytes()
    if data[:4] != MAGIC:
        raise FormatError(f"{path}: bad magic {data[:4]!r}")
    version, rows, cols = struct.unpack("<BII", data[4:13])
    if version != FORMAT_VERSION:
        raise FormatError(f"{path}: unsupported version {version}")
    body = np.frombuffer(data[13:], dtype="<f4")
    if body.size != rows * cols:
        raise FormatError(f"{path}: expected {rows * cols} values, "
                          f"got {body.size}")
    mat = body.reshape(rows, cols).astype(np.float64)
    if not np.isfinite(mat).all():
        raise FormatError(f"{path}: non-finite values")
    return mat


@dataclass
class MotionFeatureSequence:
    data: np.ndarray                     # frames x dim
    joints: np.ndarray | None = None     # frames x J x 3, for rendering

    def __post_init__(self):
        self.data = np.asarray(self.data, dtype=np.float64)
        if self.data.ndim != 2 or self.data.shape[0] < 1:
            raise FormatError(f"motion must be frames x dim with frames >= 1,"
                              f" got {self.data.shape}")
        if not np.isfinite(self.data).all():
            raise FormatError("motion contains non-finite values")

    @property
    def frames(self) -> int:
        return self.data.shape[0]

    @property
    def dim(self) -> int:
        return self.data.shape[1]


@dataclass
class TextEntry:
    text: str
    token_ids: list[int] | None = None
    token_feats: np.ndarray | None = None
    sent_emb: np.ndarray | None = None

    def __post_init__(self):
        if self.token_ids is None and self.token_feats is None:
            raise FormatError(f"text {self.text!r} has neither token_ids nor "
                              "token_feats")
        if self.sent_emb is not None:
            self.sent_emb = np.asarray(self.sent_emb, dtype=np.float64)
            norm = np.linalg.norm(self.sent_emb)
            if norm == 0:
                raise FormatError(f"text {self.text!r} has a zero-norm "
                                  "sentence embedding")
            self.sent_emb = self.sent_emb / norm


@dataclass
class DatasetItem:
    id: str
    split: str
    motion: MotionFeatureSequence
    texts: list[TextEntry]


@dataclass
class Dataset:
    items: list[DatasetItem]
    feature_dim: int
    sent_emb_dim: int
    vocab_size: int | None = None
    joint_count: int | None = None
    text_feat_dim: int | None = None
    bones: list[list[int]] | None = None
    vocab: dict[str, int] | None = None   # word -> token id; OOV maps to 0
    text_sim: np.ndarray | None = None

    def __post_init__(self):
        if not self.items:
            raise FormatError("no items")
        for item in self.items:
            if item.motion.dim != self.feature_dim:
                raise FormatError(f"item {item.id}: feature dim "
                                  f"{item.motion.dim} != {self.feature_dim}")
            if not item.texts:
                raise FormatError(f"item {item.id}: no texts")
        if self.text_sim is not None:
            n = self.text_sim.shape[0]
            if self.text_sim.shape != (n, n):
                raise FormatError("text_sim must be square")
            if not np.allclose(self.text_sim, self.text_sim.T, atol=1e-5):
                raise FormatError("text_sim must be symmetric")
            if not np.allclose(np.diag(self.text_sim), 1.0, atol=1e-5):
                raise FormatError("text_sim must have unit diagonal")

    def split_items(self, split: str) -> list[DatasetItem]:
        return [it for it in self.items if it.split == split]


@dataclass
class SyntheticConfig:
    n_items: int = 1000
    latent_factors: int = 8
    motion_dim: int = 16
    vocab_size: int = 64
    frames_min: int = 20
    frames_max: int = 40
    paraphrase_rate: float = 0.0
    noise: float = 0.05
    seed: int = 0
    splits: dict = field(default_factory=lambda: {"train": 0.7, "val": 0.1,
                                                  "test": 0.2})
    with_joints: bool = True

    def __post_init__(self):
        if min(self.n_items, self.latent_factors, self.motion_dim,
               self.vocab_size, self.frames_min) < 1:
            raise ValueError("all counts must be >= 1")
        if not 0.0 <= self.paraphrase_rate <= 1.0:
            raise ValueError("paraphrase_rate must be in [0, 1]")
        if self.frames_max < self.frames_min:
            raise ValueError("frames_max < frames_min")


# A toy 9-joint stick figure: head, neck, pelvis, two arms, two legs.
STICK_BONES = [[0, 1], [1, 2], [1, 3], [3, 4], [1, 5], [5, 6],
               [2, 7], [2, 8]]


def _synthetic_joints(factors: np.ndarray, frames: int,
                      rng: np.random.Generator) -> np.ndarray:
    """Cosmetic stick-figure rollout driven by the first few factors."""
    t = np.arange(frames)[:, None]
    phase = 2 * np.pi * (0.02 + 0.06 * (factors[0] % 1.0)) * t
    sway = 0.3 * np.sin(phase + np.pi * factors[: min(4, factors.size)].sum())
    base = np.array([
        [0.0, 1.7, 0.0],   # head
        [0.0, 1.4, 0.0],   # neck
        [0.0, 0.9, 0.0],   # pelvis
        [-0.3, 1.3, 0.0],  # l shoulder/arm
        [-0.4, 0.9, 0.0],  # l hand
        [0.3, 1.3, 0.0],   # r arm
        [0.4, 0.9, 0.0],   # r hand
        [-0.15, 0.0, 0.0],  # l foot
        [0.15, 0.0, 0.0],  # r foot
    ])
    joints = np.repeat(base[None, :, :], frames, axis=0)
    joints[:, [4, 6], 0] += sway
    joints[:, [7, 8], 2] += np.concatenate([sway, -sway], axis=1)
    drift = 0.01 * (factors[1] if factors.size > 1 else 0.0) * t
    joints[:, :, 2] += drift
    return joints


def generate_synthetic(cfg: SyntheticConfig) -> Dataset:
    """Reproducible paired text-motion corpus from a shared factor model.

    Each item draws a k-dim factor vector.  The motion is a smooth sinusoidal
    rollout whose frequencies/amplitudes depend on the factors, plus noise.
    Token ids are factor-quantized codewords and the sentence embedding is
    the normalized factor vector, so items sharing factors are exact text
    paraphrases by construction.
    """
    rng = np.random.default_rng(cfg.seed)
    k = cfg.latent_factors
    levels = max(2, cfg.vocab_size // k)

    factor_list: list[np.ndarray] = []
    paraphrase_of: list[int | None] = []
    for i in range(cfg.n_items):
        if i > 0 and rng.random() < cfg.paraphrase_rate:
            src = int(rng.integers(0, i))
            factor_list.append(factor_list[src])
            paraphrase_of.append(src)
        else:
            factor_list.append(rng.normal(size=k))
            paraphrase_of.append(None)

    # Fixed random projection from factors to per-feature sinusoid params.
    # The offset term keeps the factors linearly readable from the features;
    # amplitude, frequency and phase add factor-dependent temporal texture.
    proj_amp = rng.normal(size=(k, cfg.motion_dim)) / np.sqrt(k)
    proj_freq = rng.normal(size=(k, cfg.motion_dim)) / np.sqrt(k)
    proj_phase = rng.normal(size=(k, cfg.motion_dim)) / np.sqrt(k)
    proj_offset = rng.normal(size=(k, cfg.motion_dim)) / np.sqrt(k)

    split_names = list(cfg.splits)
    bounds = np.cumsum([cfg.splits[s] for s in split_names])
    bounds = bounds / bounds[-1]

    items: list[DatasetItem] = []
    for i, f in enumerate(factor_list):
        frames = int(rng.integers(cfg.frames_min, cfg.frames_max + 1))
        t = np.arange(frames)[:, None]
        amp = f @ proj_amp
        freq = 0.05 + 0.2 * (1.0 / (1.0 + np.exp(-(f @ proj_freq))))
        phase = np.pi * (f @ proj_phase)
        data = (f @ proj_offset) + 0.3 * amp * np.sin(freq * t + phase)
        data = data + cfg.noise * rng.normal(size=data.shape)

        # quantile-based codewords: factor j at level q -> token j*levels+q+1
        qf = np.clip(((1.0 / (1.0 + np.exp(-f))) * levels).astype(int),
                     0, levels - 1)
        token_ids = [int(j * levels + qf[j] + 1) for j in range(k)]
        text = " ".join(f"f{j}l{qf[j]}" for j in range(k))

        u = i / cfg.n_items
        split = split_names[int(np.searchsorted(bounds, u, side="right"))]
        joints = _synthetic_joints(f, frames, rng) if cfg.with_joints else None
        entry = TextEntry(text=text, token_ids=token_ids, sent_emb=f.copy())
        items.append(DatasetItem(
            id=f"syn{i:05d}", split=split,
            motion=MotionFeatureSequence(data=data, joints=joints),
            texts=[entry]))

    vocab = {f"f{j}l{q}": j * levels + q + 1
             for j in range(k) for q in range(levels)}
    return Dataset(items=items, feature_dim=cfg.motion_dim,
                   sent_emb_dim=k, vocab_size=k * levels + 1,
                   joint_count=9 if cfg.with_joints else None,
                   bones=STICK_BONES if cfg.with_joints else None,
                   vocab=vocab)


# disk format ------------------------------------------------------------

def save_dataset(dataset: Dataset, path) -> None:
    path = Path(path)
    (path / "motions").mkdir(parents=True, exist_ok=True)
    meta = {
        "feature_dim": dataset.feature_dim,
        "sent_emb_dim": dataset.sent_emb_dim,
        "splits": sorted({it.split for it in dataset.items}),
    }
    if dataset.vocab_size is not None:
        meta["vocab_size"] = dataset.vocab_size
    if dataset.vocab is not None:
        meta["vocab"] = dataset.vocab
    if dataset.joint_count is not None:
        meta["joint_count"] = dataset.joint_count
        meta["bones"] = dataset.bones
        (path / "joints").mkdir(exist_ok=True)
    if dataset.text_feat_dim is not None:
        meta["text_feat_dim"] = dataset.text_feat_dim
        (path / "text_feats").mkdir(exist_ok=True)
    (path / "meta.json").write_text(json.dumps(meta, indent=2))

    sent_rows = []
    with open(path / "texts.jsonl", "w") as f:
        for item in dataset.items:
            rec = {"id": item.id, "split": item.split,
                   "texts": [t.text for t in item.texts]}
            if all(t.token_ids is not None for t in item.texts):
                rec["token_ids"] = [t.token_ids for t in item.texts]
            f.write(json.dumps(rec) + "\n")
            save_matrix(path / "motions" / f"{item.id}.mtx",
                        item.motion.data)
            if item.motion.joints is not None:
                frames, j, _ = item.motion.joints.shape
                save_matrix(path / "joints" / f"{item.id}.mtx",
                            item.motion.joints.reshape(frames, j * 3))
            for kk, t in enumerate(item.texts):
                if t.token_feats is not None:
                    save_matrix(path / "text_feats" / f"{item.id}_{kk}.mtx",
                                t.token_feats)
                sent_rows.append(t.sent_emb)
    save_matrix(path / "sent_emb.mtx", np.stack(sent_rows))
    if dataset.text_sim is not None:
        save_matrix(path / "text_sim.mtx", dataset.text_sim)


def load_dataset(path) -> Dataset:
    path = Path(path)
    meta_path = path / "meta.json"
    if not meta_path.exists():
        raise FormatError(f"{meta_path}: missing")
    meta = json.loads(meta_path.read_text())

    texts_path = path / "texts.jsonl"
    if not texts_path.exists():
        raise FormatError(f"{texts_path}: missing")
    records = [json.loads(line) for line in
               texts_path.read_text().splitlines() if line.strip()]
    if not records:
        raise FormatError(f"{path}: no items")

    sent = load_matrix(path / "sent_emb.mtx")
    joint_count = meta.get("joint_count")
    items = []
    row = 0
    for rec in records:
        mid = rec["id"]
        data = load_matrix(path / "motions" / f"{mid}.mtx")
        joints = None
        jpath = path / "joints" / f"{mid}.mtx"
        if joint_count and jpath.exists():
            jm = load_matrix(jpath)
            joints = jm.reshape(jm.shape[0], joint_count, 3)
        texts = []
        for kk, text in enumerate(rec["texts"]):
            token_ids = None
            if "token_ids" in rec:
                token_ids = [int(x) for x in rec["token_ids"][kk]]
            token_feats = None
            fpath = path / "text_feats" / f"{mid}_{kk}.mtx"
            if fpath.exists():
                token_feats = load_matrix(fpath)
            if row >= sent.shape[0]:
                raise FormatError(f"sent_emb.mtx has {sent.shape[0]} rows, "
                                  "fewer than texts.jsonl references")
            texts.append(TextEntry(text=text, token_ids=token_ids,
                                   token_feats=token_feats,
                                   sent_emb=sent[row]))
            row += 1
        items.append(DatasetItem(
            id=mid, split=rec["split"],
            motion=MotionFeatureSequence(data=data, joints=joints),
            texts=texts))
    if row != sent.shape[0]:
        raise FormatError(f"sent_emb.mtx has {sent.shape[0]} rows, "
                          f"texts.jsonl references {row}")

    text_sim = None
    sim_path = path / "text_sim.mtx"
    if sim_path.exists():
        text_sim = load_matrix(sim_path)
    return Dataset(items=items, feature_dim=meta["feature_dim"],
                   sent_emb_dim=meta["sent_emb_dim"],
                   vocab_size=meta.get("vocab_size"),
                   joint_count=joint_count,
                   text_feat_dim=meta.get("text_feat_dim"),
                   bones=meta.get("bones"),
                   vocab=meta.get("vocab"),
                   text_sim=text_sim)


# sentence similarity ----------------------------------------------------

def text_similarity_matrix(entries: list[TextEntry]) -> np.ndarray:
    """Pairwise cosine of sentence embeddings; unit diagonal, symmetric."""
    embs = []
    for e in entries:
        if e.sent_emb is None:
            raise ValueError(f"text {e.text!r} has no sentence embedding")
        embs.append(e.sent_emb)
    m = np.stack(embs)
    norms = np.linalg.norm(m, axis=1)
    if (norms == 0).any():
        raise ValueError("zero-norm sentence embedding")
    m = m / norms[:, None]
    sim = m @ m.T
    np.fill_diagonal(sim, 1.0)
    return np.clip((sim + sim.T) / 2.0, -1.0, 1.0)


def similarity_stats(matrix: np.ndarray,
                     thresholds: list[float]) -> dict[float, float]:
    """Fraction of unique off-diagonal pairs above each threshold.

    Counts unordered pairs i < j out of n(n-1)/2.
    """
    n = matrix.shape[0]
    iu = np.triu_indices(n, k=1)
    vals = matrix[iu]
    total = n * (n - 1) // 2
    return {float(t): (float(np.count_nonzero(vals > t)) / total
                       if total else 0.0)
            for t in thresholds}


def unique_pair_count(n: int) -> int:
    return n * (n - 1) // 2


def tokenize(text: str, vocab: dict[str, int]) -> list[int]:
    """Whitespace tokenizer over a fixed vocabulary; OOV words map to id 0."""
    words = text.split()
    if not words:
        raise ValueError("empty query text")
    return [vocab.get(w, 0) for w in words]
