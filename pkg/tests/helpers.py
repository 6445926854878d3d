"""Small scene and trajectory builders shared by the tests."""

import numpy as np

from pdmlab.geometry import rectangle
from pdmlab.scene import Centerline, ObstacleTrack, Pose2D, Scene, Trajectory

# filled by test_acceptance, printed by conftest at the end of the run
ACCEPTANCE_LINES: list = []


def straight_traj(x0=0.0, y=0.0, step=1.0, T=8, dt=0.5):
    xs = x0 + step * np.arange(1, T + 1)
    return Trajectory(np.column_stack([xs, np.full(T, y), np.zeros(T)]), dt)


def open_road(obstacles=(), human=None, half_width=10.0, speed=2.0, T=8, dt=0.5, scene_id="open"):
    """Straight +x road from x=-10 to 90 with the ego at the origin."""
    cl = Centerline([[-10.0, 0.0], [90.0, 0.0]])
    drivable = [np.array([[-10, -half_width], [90, -half_width], [90, half_width], [-10, half_width]], float)]
    if human is None:
        human = straight_traj(step=speed * dt, T=T, dt=dt)
    return Scene.build(scene_id, Pose2D(0.0, 0.0, 0.0), speed, cl, drivable, obstacles, human, dt=dt,
                       horizon_steps=T)


def static_box(x, y, T=8, length=4.6, width=1.9):
    return ObstacleTrack(tuple(rectangle(x, y, 0.0, length, width) for _ in range(T)), is_static=True)
