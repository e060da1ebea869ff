import numpy as np
import pytest

from rainsim.pipeline import SimConfig
from rainsim.scene import load_scene
from rainsim.synthetic import make_synthetic_scene, mirror_wall_fixture


@pytest.fixture(scope="session")
def scene_dir(tmp_path_factory):
    """Small synthetic scene written to disk once per session."""
    root = tmp_path_factory.mktemp("scene") / "synthetic"
    make_synthetic_scene(root, n=48, width=160, height=120)
    return root


@pytest.fixture(scope="session")
def scene(scene_dir):
    return load_scene(scene_dir)


@pytest.fixture(scope="session")
def mirror_scene():
    """Flat reflective pool in front of a red wall, analytic depth buffer."""
    return mirror_wall_fixture()


@pytest.fixture()
def quick_config():
    return SimConfig(frame_count=3, seed=11)


@pytest.fixture(scope="session", autouse=True)
def _warm_numba(scene):
    """Compile the jitted kernels once so timing-sensitive tests see steady state."""
    from rainsim.pipeline import active_view, init_state, run_frame

    cfg = SimConfig(frame_count=1, seed=0)
    state = init_state(scene, cfg)
    _, view = active_view(scene, cfg)
    run_frame(scene, state, cfg, view=view)
