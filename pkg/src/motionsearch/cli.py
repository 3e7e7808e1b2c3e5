"""Command-line entry points: train, eval, index, search, localize, ablate,
synth, serve."""

from __future__ import annotations

import argparse
import json
import sys
from dataclasses import asdict
from pathlib import Path

import numpy as np

from .dataio import (Dataset, MotionFeatureSequence, SyntheticConfig,
                     TextEntry, generate_synthetic, load_dataset, load_matrix,
                     save_dataset, tokenize)
from .localization import Segment, localize_pyramid, sliding_similarity
from .model import TextMotionModel
from .retrieval import (Gallery, PROTOCOL_LETTERS, ProtocolConfig,
                        encode_split, evaluate, rank)
from .trainer import TrainConfig, ablate, train

SCHEMA_PATH = Path(__file__).parent / "schemas" / "report_schema.json"


class CliError(SystemExit):
    def __init__(self, message):
        print(f"error: {message}", file=sys.stderr)
        super().__init__(2)


def _load_dataset(path) -> Dataset:
    try:
        return load_dataset(path)
    except (OSError, ValueError) as exc:
        raise CliError(f"cannot load dataset {path}: {exc}")


def _train_config(path, dataset: Dataset) -> TrainConfig:
    cfg = TrainConfig.from_json(path) if path else TrainConfig()
    # fill data-determined model dims unless the config pinned them
    cfg.model.motion_dim = dataset.feature_dim
    if cfg.model.vocab_size is None and cfg.model.text_feat_dim is None:
        if dataset.vocab_size:
            cfg.model.vocab_size = dataset.vocab_size
        elif dataset.text_feat_dim:
            cfg.model.text_feat_dim = dataset.text_feat_dim
        else:
            raise CliError("dataset provides neither token ids nor features")
    return cfg


def cmd_train(args) -> int:
    dataset = _load_dataset(args.data)
    cfg = _train_config(args.config, dataset)
    if args.seed is not None:
        cfg.seed = args.seed
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    result = train(dataset, cfg, log_path=out / "train_log.jsonl")
    meta = {"train_config": asdict(cfg), "aborted": result.aborted}
    if dataset.vocab is not None:
        meta["vocab"] = dataset.vocab
    result.model.save(out, extra_meta=meta)
    if result.aborted:
        print("training aborted on non-finite loss; "
              "last good checkpoint saved", file=sys.stderr)
        return 1
    print(f"checkpoint written to {out}")
    return 0


def cmd_eval(args) -> int:
    dataset = _load_dataset(args.data)
    model = TextMotionModel.load(args.ckpt)
    items = dataset.split_items(args.split)
    if not items:
        raise CliError(f"split {args.split!r} is empty")
    cfg = ProtocolConfig(kind=PROTOCOL_LETTERS[args.protocol],
                         seed=args.seed)
    split = encode_split(model, items)
    report = evaluate(split, cfg, args.direction).to_json()

    import jsonschema
    jsonschema.validate(report, json.loads(SCHEMA_PATH.read_text()))
    text = json.dumps(report, indent=2)
    if args.out:
        Path(args.out).write_text(text)
    print(text)
    return 0


def _ckpt_vocab(ckpt_dir) -> dict:
    manifest = json.loads((Path(ckpt_dir) / "manifest.json").read_text())
    return (manifest.get("meta") or {}).get("vocab") or {}


def cmd_index(args) -> int:
    dataset = _load_dataset(args.data)
    model = TextMotionModel.load(args.ckpt)
    items = dataset.split_items(args.split)
    if not items:
        raise CliError(f"split {args.split!r} is empty")
    split = encode_split(model, items)
    gallery = Gallery(split.ids, split.motion_emb, split.texts,
                      split.sent_emb)
    out = Path(args.out)
    gallery.save(out)
    (out / "source.json").write_text(json.dumps({
        "data_dir": str(Path(args.data).resolve()),
        "ckpt_dir": str(Path(args.ckpt).resolve()),
        "split": args.split,
        "fps": 20,
        "joint_count": dataset.joint_count,
        "bones": dataset.bones,
    }, indent=2))
    print(f"index with {len(gallery)} items written to {out}")
    return 0


def cmd_search(args) -> int:
    gallery = Gallery.load(args.index)
    source = json.loads((Path(args.index) / "source.json").read_text())
    ckpt = args.ckpt or source.get("ckpt_dir")
    if not ckpt:
        raise CliError("no checkpoint: pass --ckpt")
    model = TextMotionModel.load(ckpt)
    vocab = _ckpt_vocab(ckpt)
    dist = model.encode_text(TextEntry(text=args.query,
                                       token_ids=tokenize(args.query, vocab)))
    results = rank(dist.mu, gallery)[: args.k]
    text_by_id = dict(zip(gallery.ids, gallery.texts))
    print(json.dumps([{"id": rid, "score": round(score, 6),
                       "text": text_by_id[rid]}
                      for rid, score in results], indent=2))
    return 0


def _curve_svg(values: np.ndarray, best: Segment, stride: int,
               gt: Segment | None) -> str:
    w, h, pad = 640, 200, 10
    n = len(values)
    lo, hi = float(values.min()), float(values.max())
    span = (hi - lo) or 1.0
    xs = pad + (w - 2 * pad) * np.arange(n) / max(1, n - 1)
    ys = h - pad - (h - 2 * pad) * (values - lo) / span
    pts = " ".join(f"{x:.1f},{y:.1f}" for x, y in zip(xs, ys))

    def frame_x(f):
        return pad + (w - 2 * pad) * (f / stride) / max(1, n - 1)

    parts = [f'<svg xmlns="http://www.w3.org/2000/svg" width="{w}" '
             f'height="{h}">']
    if gt is not None:
        parts.append(f'<rect x="{frame_x(gt.start):.1f}" y="{pad}" '
                     f'width="{frame_x(gt.end) - frame_x(gt.start):.1f}" '
                     f'height="{h - 2 * pad}" fill="#9f9" opacity="0.5"/>')
    parts.append(f'<polyline points="{pts}" fill="none" stroke="#36c" '
                 'stroke-width="1.5"/>')
    cx = (frame_x(best.start) + frame_x(best.end)) / 2
    parts.append(f'<line x1="{cx:.1f}" y1="{pad}" x2="{cx:.1f}" '
                 f'y2="{h - pad}" stroke="red" stroke-dasharray="4"/>')
    parts.append("</svg>")
    return "".join(parts)


def cmd_localize(args) -> int:
    model = TextMotionModel.load(args.ckpt)
    vocab = _ckpt_vocab(args.ckpt)
    try:
        motion = MotionFeatureSequence(data=load_matrix(args.motion))
    except (OSError, ValueError) as exc:
        raise CliError(f"cannot load motion {args.motion}: {exc}")
    dist = model.encode_text(TextEntry(text=args.query,
                                       token_ids=tokenize(args.query, vocab)))
    curve = sliding_similarity(model, dist.mu, motion,
                               window=min(args.window, motion.frames),
                               stride=args.stride)
    seg, score = localize_pyramid(model, dist.mu, motion)
    payload = {
        "curve": np.round(curve.values, 6).tolist(),
        "window": curve.window,
        "stride": curve.stride,
        "best": {"start": seg.start, "end": seg.end,
                 "score": round(score, 6)},
    }
    print(json.dumps(payload, indent=2))
    if args.svg:
        gt = (Segment(args.gt_start, args.gt_end)
              if args.gt_start is not None and args.gt_end is not None
              else None)
        Path(args.svg).write_text(
            _curve_svg(curve.values, seg, curve.stride, gt))
    return 0


def cmd_ablate(args) -> int:
    dataset = _load_dataset(args.data)
    cfg = _train_config(args.config, dataset)
    grid = json.loads(Path(args.grid).read_text())
    rows = ablate(dataset, cfg, grid, split=args.split)
    text = json.dumps(rows, indent=2)
    if args.out:
        Path(args.out).write_text(text)
    print(text)
    return 0


def cmd_synth(args) -> int:
    cfg = SyntheticConfig(**json.loads(Path(args.config).read_text())) \
        if args.config else SyntheticConfig()
    if args.seed is not None:
        cfg.seed = args.seed
    dataset = generate_synthetic(cfg)
    save_dataset(dataset, args.out)
    print(f"synthetic dataset with {len(dataset.items)} items "
          f"written to {args.out}")
    return 0


def cmd_serve(args) -> int:
    from .service import create_app
    import uvicorn
    host, _, port = args.addr.rpartition(":")
    app = create_app(args.index, args.ckpt, static_dir=args.static)
    uvicorn.run(app, host=host or "127.0.0.1", port=int(port),
                log_level="warning")
    return 0


def build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(prog="motionsearch")
    sub = p.add_subparsers(dest="command", required=True)

    t = sub.add_parser("train", help="train a model on a dataset directory")
    t.add_argument("--config", help="TrainConfig JSON")
    t.add_argument("--data", required=True)
    t.add_argument("--out", required=True)
    t.add_argument("--seed", type=int)
    t.set_defaults(fn=cmd_train)

    e = sub.add_parser("eval", help="evaluate a checkpoint under a protocol")
    e.add_argument("--ckpt", required=True)
    e.add_argument("--data", required=True)
    e.add_argument("--protocol", choices=sorted(PROTOCOL_LETTERS),
                   default="a")
    e.add_argument("--direction", choices=["t2m", "m2t"], default="t2m")
    e.add_argument("--split", default="test")
    e.add_argument("--seed", type=int, default=0)
    e.add_argument("--out")
    e.set_defaults(fn=cmd_eval)

    i = sub.add_parser("index", help="build a search index from a split")
    i.add_argument("--ckpt", required=True)
    i.add_argument("--data", required=True)
    i.add_argument("--split", default="test")
    i.add_argument("--out", required=True)
    i.set_defaults(fn=cmd_index)

    s = sub.add_parser("search", help="query an index with free text")
    s.add_argument("--index", required=True)
    s.add_argument("--ckpt")
    s.add_argument("--query", required=True)
    s.add_argument("--k", type=int, default=10)
    s.set_defaults(fn=cmd_search)

    l = sub.add_parser("localize", help="locate a query inside a motion")
    l.add_argument("--ckpt", required=True)
    l.add_argument("--motion", required=True, help="matrix file")
    l.add_argument("--query", required=True)
    l.add_argument("--window", type=int, default=20)
    l.add_argument("--stride", type=int, default=1)
    l.add_argument("--svg", help="write an SVG similarity plot here")
    l.add_argument("--gt-start", type=int)
    l.add_argument("--gt-end", type=int)
    l.set_defaults(fn=cmd_localize)

    a = sub.add_parser("ablate", help="train/evaluate a grid of variants")
    a.add_argument("--data", required=True)
    a.add_argument("--config")
    a.add_argument("--grid", required=True,
                   help="JSON: variant name -> config overrides")
    a.add_argument("--split", default="test")
    a.add_argument("--out")
    a.set_defaults(fn=cmd_ablate)

    y = sub.add_parser("synth", help="generate a synthetic dataset")
    y.add_argument("--config", help="SyntheticConfig JSON")
    y.add_argument("--out", required=True)
    y.add_argument("--seed", type=int)
    y.set_defaults(fn=cmd_synth)

    v = sub.add_parser("serve", help="run the HTTP search service")
    v.add_argument("--index", required=True)
    v.add_argument("--ckpt", required=True)
    v.add_argument("--addr", default="127.0.0.1:8080")
    v.add_argument("--static", help="directory with the web UI build")
    v.set_defaults(fn=cmd_serve)
    return p


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    try:
        return args.fn(args)
    except FileNotFoundError as exc:
        raise CliError(str(exc))


if __name__ == "__main__":
    sys.exit(main())
