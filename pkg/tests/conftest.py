"""Shared fixtures: a tiny dataset and a short training run, reused across
modules so the expensive pieces happen once per session. Also collects the
acceptance suite's per-criterion lines and prints them after the run."""

import pytest

ACCEPTANCE_LINES: list[str] = []


def pytest_terminal_summary(terminalreporter):
    if ACCEPTANCE_LINES:
        terminalreporter.section("acceptance criteria")
        for line in ACCEPTANCE_LINES:
            terminalreporter.write_line(line)

from trimodal import config as cfg_mod
from trimodal.data import generate_synthetic, load_manifest
from trimodal.train import pretrain

TINY_OVERRIDES = {
    "data": {
        "n_samples": 48, "n_classes": 3, "seed": 5,
        "t_video": 4, "d_video": 8, "t_audio": 4, "d_audio": 6,
        "l_text": 4, "vocab": 12, "p_available": 0.7,
    },
    "model": {"d_model": 16, "n_heads": 2, "n_layers": 1, "d_proj": 8},
    "train": {"seed": 11, "epochs": 2, "batch_size": 8},
    "eval": {"probe_epochs": 20, "clips_per_video": 2},
}


@pytest.fixture(scope="session")
def tiny_cfg():
    return cfg_mod.resolve_config(overrides=TINY_OVERRIDES)


@pytest.fixture(scope="session")
def tiny_dataset(tmp_path_factory, tiny_cfg):
    root = tmp_path_factory.mktemp("tiny-ds")
    return generate_synthetic(cfg_mod.synthetic_config(tiny_cfg), root)


@pytest.fixture(scope="session")
def tiny_run(tmp_path_factory, tiny_cfg, tiny_dataset):
    out = tmp_path_factory.mktemp("tiny-run")
    return pretrain(tiny_cfg, tiny_dataset.root, out / "ck.lavc")


@pytest.fixture()
def fresh_manifest(tiny_dataset):
    """Reload from disk so cache state never leaks between tests."""
    return load_manifest(tiny_dataset.root)
