import numpy as np
import pytest

from minirpm.generator import generate_dataset


@pytest.fixture(scope="session")
def center_puzzles():
    """A small shared Center-config dataset (16x16 panels, with provenance)."""
    return generate_dataset(24, "center", 16, seed=7)


@pytest.fixture(scope="session")
def grid_puzzles():
    return generate_dataset(24, "grid2x2", 16, seed=8)


@pytest.fixture(scope="session")
def raven_fixture_dir(tmp_path_factory):
    """Three synthetic RAVEN-style .npz records (160x160) plus one bad one."""
    d = tmp_path_factory.mktemp("raven_npz")
    rng = np.random.default_rng(123)
    answers = [2, 5, 7]
    for i, ans in enumerate(answers):
        stack = rng.integers(0, 256, size=(16, 160, 160)).astype(np.uint8)
        np.savez(d / f"rec_{i:03d}.npz", image=stack, target=np.int64(ans))
    bad = rng.integers(0, 256, size=(15, 160, 160)).astype(np.uint8)
    np.savez(d / "rec_bad.npz", image=bad, target=np.int64(0))
    return d, answers
