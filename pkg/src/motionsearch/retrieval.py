"""Embedding gallery, cosine ranking, R@k / MedR, and the four evaluation
protocols: (a) full gallery exact match, (b) full gallery with a 0.95 text
similarity acceptance threshold, (c) a maximally-dissimilar 100-item subset,
(d) averaged disjoint 32-item batches.
"""

from __future__ import annotations

import json
import struct
from dataclasses import dataclass, asdict
from pathlib import Path

import numpy as np

from .dataio import MAGIC, FORMAT_VERSION, DatasetItem, FormatError
from .kernels import dissimilar_subset

RECALL_KS = (1, 2, 3, 5, 10)


@dataclass
class ProtocolConfig:
    kind: str = "all"                  # all | all_with_threshold |
    #                                    dissimilar_subset | small_batches
    correctness_threshold: float = 0.95
    subset_size: int = 100
    batch_size: int = 32
    seed: int = 0

    def __post_init__(self):
        kinds = {"all", "all_with_threshold", "dissimilar_subset",
                 "small_batches"}
        if self.kind not in kinds:
            raise ValueError(f"unknown protocol kind {self.kind!r}")
        if not 0.0 <= self.correctness_threshold <= 1.0:
            raise ValueError("correctness_threshold must be in [0, 1]")


PROTOCOL_LETTERS = {"a": "all", "b": "all_with_threshold",
                    "c": "dissimilar_subset", "d": "small_batches"}


@dataclass
class RetrievalReport:
    direction: str
    protocol: dict
    ranks: list[float]
    recalls: dict[int, float]
    med_rank: float

    def to_json(self) -> dict:
        return {
            "direction": self.direction,
            "protocol": self.protocol,
            "ranks": self.ranks,
            "recalls": {f"R@{k}": v for k, v in sorted(self.recalls.items())},
            "MedR": self.med_rank,
        }


class Gallery:
    """Immutable L2-normalized embedding matrix with aligned metadata."""

    def __init__(self, ids: list[str], embeddings: np.ndarray,
                 texts: list[str], sent_emb: np.ndarray):
        if not (len(ids) == embeddings.shape[0] == len(texts)
                == sent_emb.shape[0]):
            raise ValueError("inconsistent gallery lengths")
        if len(set(ids)) != len(ids):
            raise ValueError("duplicate gallery ids")
        norms = np.linalg.norm(embeddings, axis=1)
        zero = np.where(norms == 0)[0]
        if zero.size:
            raise ValueError(f"zero-norm embedding for id {ids[zero[0]]}")
        self.ids = list(ids)
        self.embeddings = embeddings / norms[:, None]
        self.texts = list(texts)
        self.sent_emb = np.asarray(sent_emb, dtype=np.float64)

    def __len__(self):
        return len(self.ids)

    # persistence: index.json + index.bin (two TMRM blocks back to back)
    def save(self, path) -> None:
        path = Path(path)
        path.mkdir(parents=True, exist_ok=True)
        (path / "index.json").write_text(json.dumps({
            "ids": self.ids,
            "texts": self.texts,
            "d": int(self.embeddings.shape[1]),
            "count": len(self.ids),
        }, indent=2))
        with open(path / "index.bin", "wb") as f:
            for mat in (self.embeddings, self.sent_emb):
                mat = np.ascontiguousarray(mat, dtype="<f4")
                f.write(MAGIC)
                f.write(struct.pack("<BII", FORMAT_VERSION,
                                    mat.shape[0], mat.shape[1]))
                f.write(mat.tobytes())

    @classmethod
    def load(cls, path) -> "Gallery":
        path = Path(path)
        meta = json.loads((path / "index.json").read_text())
        blob = (path / "index.bin").read_bytes()
        mats = []
        offset = 0
        for _ in range(2):
            if blob[offset:offset + 4] != MAGIC:
                raise FormatError(f"{path / 'index.bin'}: bad magic")
            version, rows, cols = struct.unpack(
                "<BII", blob[offset + 4:offset + 13])
            count = rows * cols
            mats.append(np.frombuffer(
                blob, dtype="<f4", count=count,
                offset=offset + 13).reshape(rows, cols).astype(np.float64))
            offset += 13 + count * 4
        return cls(meta["ids"], mats[0], meta["texts"], mats[1])


def build_index(embeddings: np.ndarray, ids: list[str], texts: list[str],
                sent_emb: np.ndarray) -> Gallery:
    return Gallery(ids, embeddings, texts, sent_emb)


def rank(query: np.ndarray, gallery: Gallery) -> list[tuple[str, float]]:
    """Descending cosine scores; ties broken by ascending id."""
    if len(gallery) == 0:
        raise ValueError("empty gallery")
    qn = np.linalg.norm(query)
    if qn == 0:
        raise ValueError("zero query vector")
    scores = gallery.embeddings @ (query / qn)
    id_order = np.argsort(np.argsort(gallery.ids))
    order = np.lexsort((id_order, -scores))
    return [(gallery.ids[i], float(scores[i])) for i in order]


def recall_at_k(ranks, k: int) -> float:
    ranks = np.asarray(ranks)
    return float(100.0 * np.count_nonzero(ranks <= k) / len(ranks))


def median_rank(ranks) -> float:
    return float(np.median(np.asarray(ranks, dtype=np.float64)))


@dataclass
class SplitEmbeddings:
    """Paired text/motion retrieval embeddings for one dataset split."""
    ids: list[str]
    text_emb: np.ndarray      # (n, d) text-side mean embeddings
    motion_emb: np.ndarray    # (n, d) motion-side mean embeddings
    texts: list[str]
    sent_emb: np.ndarray      # (n, ds) sentence embeddings of the used text


def encode_split(model, items: list[DatasetItem],
                 chunk: int = 64) -> SplitEmbeddings:
    """Encode every item's motion and its first text (test-time rule)."""
    ids, texts, sent = [], [], []
    text_emb, motion_emb = [], []
    for start in range(0, len(items), chunk):
        part = items[start:start + chunk]
        tmu, _ = model.encode_text_batch([it.texts[0] for it in part])
        mmu, _ = model.encode_motion_batch([it.motion for it in part])
        text_emb.append(tmu.value)
        motion_emb.append(mmu.value)
        for it in part:
            ids.append(it.id)
            texts.append(it.texts[0].text)
            sent.append(it.texts[0].sent_emb)
    return SplitEmbeddings(ids=ids,
                           text_emb=np.concatenate(text_emb),
                           motion_emb=np.concatenate(motion_emb),
                           texts=texts, sent_emb=np.stack(sent))


def _pair_ranks(queries: np.ndarray, gallery: np.ndarray,
                correct: list[np.ndarray]) -> np.ndarray:
    """Rank of the best-ranked correct item per query, ties by ascending
    gallery position."""
    qn = queries / np.maximum(np.linalg.norm(queries, axis=1,
                                             keepdims=True), 1e-12)
    gn = gallery / np.maximum(np.linalg.norm(gallery, axis=1,
                                             keepdims=True), 1e-12)
    scores = qn @ gn.T
    n = gallery.shape[0]
    pos = np.arange(n)
    out = np.empty(len(correct), dtype=np.float64)
    for i, corr in enumerate(correct):
        s = scores[i]
        best = np.inf
        for j in corr:
            sj = s[j]
            r = 1 + np.count_nonzero(s > sj) \
                + np.count_nonzero((s == sj) & (pos < j))
            best = min(best, r)
        out[i] = best
    return out


def _metrics(ranks: np.ndarray) -> tuple[dict[int, float], float]:
    recalls = {k: recall_at_k(ranks, k) for k in RECALL_KS}
    return recalls, median_rank(ranks)


def evaluate(split: SplitEmbeddings, cfg: ProtocolConfig,
             direction: str = "t2m") -> RetrievalReport:
    if direction not in ("t2m", "m2t"):
        raise ValueError("direction must be 't2m' or 'm2t'")
    n = len(split.ids)
    queries = split.text_emb if direction == "t2m" else split.motion_emb
    gallery = split.motion_emb if direction == "t2m" else split.text_emb

    sent = split.sent_emb / np.maximum(
        np.linalg.norm(split.sent_emb, axis=1, keepdims=True), 1e-12)
    text_sim = np.clip(sent @ sent.T, -1.0, 1.0)
    np.fill_diagonal(text_sim, 1.0)

    if cfg.kind == "all":
        correct = [np.array([i]) for i in range(n)]
        ranks = _pair_ranks(queries, gallery, correct)
        recalls, medr = _metrics(ranks)
    elif cfg.kind == "all_with_threshold":
        correct = [np.where(text_sim[i] >= cfg.correctness_threshold)[0]
                   for i in range(n)]
        ranks = _pair_ranks(queries, gallery, correct)
        recalls, medr = _metrics(ranks)
    elif cfg.kind == "dissimilar_subset":
        if cfg.subset_size > n:
            raise ValueError(f"subset size {cfg.subset_size} > {n} items")
        subset = dissimilar_subset(text_sim, cfg.subset_size)
        correct = [np.array([i]) for i in range(len(subset))]
        ranks = _pair_ranks(queries[subset], gallery[subset], correct)
        recalls, medr = _metrics(ranks)
    else:  # small_batches: disjoint seeded partition, remainder dropped
        rng = np.random.default_rng(cfg.seed)
        perm = rng.permutation(n)
        nb = n // cfg.batch_size
        if nb == 0:
            raise ValueError("fewer items than one batch")
        batch_recalls, batch_medr, ranks_all = [], [], []
        for b in range(nb):
            idx = perm[b * cfg.batch_size:(b + 1) * cfg.batch_size]
            correct = [np.array([i]) for i in range(len(idx))]
            r = _pair_ranks(queries[idx], gallery[idx], correct)
            rec, med = _metrics(r)
            batch_recalls.append(rec)
            batch_medr.append(med)
            ranks_all.extend(r.tolist())
        recalls = {k: float(np.mean([br[k] for br in batch_recalls]))
                   for k in RECALL_KS}
        medr = float(np.mean(batch_medr))
        ranks = np.asarray(ranks_all)

    return RetrievalReport(direction=direction, protocol=asdict(cfg),
                           ranks=[float(r) for r in ranks],
                           recalls=recalls, med_rank=medr)
