"""Shared fixtures: a small synthetic dataset trained just long enough to
exercise the CLI, index, and service plumbing end to end."""

import pytest

from motionsearch import autograd as ag
from motionsearch.dataio import SyntheticConfig, generate_synthetic, \
    save_dataset
from motionsearch.model import ModelConfig
from motionsearch.trainer import TrainConfig, train


@pytest.fixture(autouse=True)
def _reset_default_dtype():
    prev = ag.default_dtype()
    yield
    ag.set_default_dtype(prev)


@pytest.fixture(scope="session")
def pipeline(tmp_path_factory):
    """Dataset on disk, a briefly trained checkpoint, and their paths."""
    root = tmp_path_factory.mktemp("pipeline")
    ds = generate_synthetic(SyntheticConfig(
        n_items=40, latent_factors=4, motion_dim=6, vocab_size=24,
        frames_min=12, frames_max=20, seed=11))
    data_dir = root / "data"
    save_dataset(ds, data_dir)

    cfg = TrainConfig(
        model=ModelConfig(latent_dim=8, width=16, depth=1, heads=2,
                          motion_dim=ds.feature_dim,
                          vocab_size=ds.vocab_size),
        batch_size=8, epochs=2, seed=0)
    result = train(ds, cfg)
    ckpt_dir = root / "ckpt"
    meta = {"vocab": ds.vocab}
    result.model.save(ckpt_dir, extra_meta=meta)
    return {"dataset": ds, "data_dir": data_dir, "ckpt_dir": ckpt_dir,
            "model": result.model, "root": root}
