import pytest
from hypothesis import HealthCheck, settings

from spatialsim.nav_trace import build_navgrid, make_trajectories
from spatialsim.observer import annotate_trajectory
from spatialsim.qa import finalize_pool, generate_candidates
from spatialsim.qa.gates import QualityConfig
from spatialsim.scene_forge import SceneParams, generate_scene

settings.register_profile("default", deadline=None, suppress_health_check=[HealthCheck.too_slow])
settings.load_profile("default")


class World:
    """One generated scene with two annotated tours and their QA pool."""

    def __init__(self, seed: int):
        self.scene = generate_scene(SceneParams(seed=seed))
        self.grid = build_navgrid(self.scene)
        self.trajectories = make_trajectories(self.scene, 2, seed, grid=self.grid)
        self.annotations = [annotate_trajectory(self.scene, t) for t in self.trajectories]
        self.open_ended, self.rejections = [], []
        for t, a in zip(self.trajectories, self.annotations):
            items, rej = generate_candidates(self.scene, t, a, QualityConfig(), seed, grid=self.grid)
            self.open_ended += items
            self.rejections += rej
        self.pool, self.mc_rejections = finalize_pool(self.open_ended, seed)

    @property
    def scenes(self):
        return {self.scene.id: self.scene}

    @property
    def ann_by_id(self):
        return {a.trajectory_id: a for a in self.annotations}

    @property
    def traj_by_id(self):
        return {t.id: t for t in self.trajectories}


@pytest.fixture(scope="session")
def world():
    return World(11)


@pytest.fixture(scope="session")
def world2():
    return World(12)
