"""HTTP search service over an immutable index snapshot.

The snapshot (gallery, checkpoint, source dataset pointers) is loaded once
at startup and never mutated, so concurrent read handlers are safe and two
processes over identical files return byte-identical responses.  JSON is
rendered with sorted keys and fixed separators for that reason.
"""

from __future__ import annotations

import json
from pathlib import Path

import numpy as np
from fastapi import FastAPI
from fastapi.responses import Response
from fastapi.staticfiles import StaticFiles

from .dataio import MotionFeatureSequence, TextEntry, load_matrix, tokenize
from .localization import localize_pyramid, sliding_similarity
from .model import TextMotionModel
from .retrieval import Gallery, rank

DEFAULT_FPS = 20


def _json(payload, status_code: int = 200) -> Response:
    body = json.dumps(payload, sort_keys=True, separators=(",", ":"))
    return Response(content=body, media_type="application/json",
                    status_code=status_code)


class Snapshot:
    """Everything a request handler needs, loaded once and read-only."""

    def __init__(self, index_dir, ckpt_dir):
        index_dir = Path(index_dir)
        self.gallery = Gallery.load(index_dir)
        self.model = TextMotionModel.load(ckpt_dir)
        manifest = json.loads((Path(ckpt_dir) / "manifest.json").read_text())
        self.vocab = (manifest.get("meta") or {}).get("vocab") or {}
        source_path = index_dir / "source.json"
        self.source = (json.loads(source_path.read_text())
                       if source_path.exists() else {})
        self.text_by_id = dict(zip(self.gallery.ids, self.gallery.texts))

    def encode_query(self, query: str) -> np.ndarray:
        ids = tokenize(query, self.vocab)
        dist = self.model.encode_text(TextEntry(text=query, token_ids=ids))
        return dist.mu

    def search(self, query: str, k: int) -> list[dict]:
        k = max(0, min(k, len(self.gallery)))
        ranked = rank(self.encode_query(query), self.gallery)[:k]
        return [{"id": rid, "score": round(score, 6),
                 "text": self.text_by_id[rid]}
                for rid, score in ranked]

    def _motion_path(self, motion_id: str, kind: str) -> Path | None:
        data_dir = self.source.get("data_dir")
        if not data_dir:
            return None
        p = Path(data_dir) / kind / f"{motion_id}.mtx"
        return p if p.exists() else None

    def load_motion(self, motion_id: str) -> MotionFeatureSequence | None:
        p = self._motion_path(motion_id, "motions")
        if p is None:
            return None
        return MotionFeatureSequence(data=load_matrix(p))

    def load_joints(self, motion_id: str) -> np.ndarray | None:
        p = self._motion_path(motion_id, "joints")
        jc = self.source.get("joint_count")
        if p is None or not jc:
            return None
        flat = load_matrix(p)
        return flat.reshape(flat.shape[0], jc, 3)


def create_app(index_dir, ckpt_dir, static_dir=None) -> FastAPI:
    snap = Snapshot(index_dir, ckpt_dir)
    app = FastAPI(title="motionsearch")

    @app.get("/api/search")
    def api_search(q: str = "", k: int = 10):
        if not q.strip():
            return _json({"error": "empty query"}, status_code=400)
        return _json(snap.search(q, k))

    @app.get("/api/motion/{motion_id}")
    def api_motion(motion_id: str):
        if motion_id not in snap.text_by_id:
            return _json({"error": f"unknown id {motion_id}"},
                         status_code=404)
        joints = snap.load_joints(motion_id)
        if joints is None:
            return _json({"error": f"no stored joints for {motion_id}"},
                         status_code=404)
        return _json({"fps": snap.source.get("fps", DEFAULT_FPS),
                      "joints": np.round(joints, 5).tolist()})

    @app.post("/api/localize")
    def api_localize(payload: dict):
        motion_id = payload.get("motion_id", "")
        query = payload.get("query", "")
        if not query.strip():
            return _json({"error": "empty query"}, status_code=400)
        motion = snap.load_motion(motion_id)
        if motion is None:
            return _json({"error": f"unknown id {motion_id}"},
                         status_code=404)
        window = int(payload.get("window", 20))
        stride = int(payload.get("stride", 1))
        if window > motion.frames:
            return _json({"error": "window exceeds motion length"},
                         status_code=400)
        emb = snap.encode_query(query)
        curve = sliding_similarity(snap.model, emb, motion, window, stride)
        seg, score = localize_pyramid(snap.model, emb, motion)
        return _json({
            "curve": np.round(curve.values, 6).tolist(),
            "window": curve.window,
            "stride": curve.stride,
            "best": {"start": seg.start, "end": seg.end,
                     "score": round(score, 6)},
        })

    @app.get("/api/meta")
    def api_meta():
        return _json({
            "count": len(snap.gallery),
            "d": int(snap.gallery.embeddings.shape[1]),
            "fps": snap.source.get("fps", DEFAULT_FPS),
            "joint_count": snap.source.get("joint_count"),
            "bones": snap.source.get("bones"),
            "split": snap.source.get("split"),
        })

    if static_dir and Path(static_dir).is_dir():
        app.mount("/", StaticFiles(directory=static_dir, html=True),
                  name="ui")
    return app
