"""Scoring a few hand-made plans against one scene.

A copy of the logged human drive scores perfectly. Crawling forward loses
progress. Swerving off the corridor zeroes the drivable-area gate, and the
gate takes the whole composed score down with it.
"""
import numpy as np

from pdmlab import Trajectory, compose_pdms, compute_subscores
from pdmlab.demo_scenes import make_scene

scene = make_scene("straight", 0)
human = scene.human_trajectory

slow = Trajectory(human.poses * np.array([0.3, 1.0, 1.0]), scene.dt)
swerve = human.poses.copy()
swerve[:, 1] += np.linspace(0, 12, len(swerve))
plans = {"human copy": human, "crawl": slow, "swerve off road": Trajectory(swerve, scene.dt)}

for name, plan in plans.items():
    s = compute_subscores(scene, plan)
    print(f"{name:16s} nc={s.nc:.1f} dac={s.dac:.1f} ep={s.ep:.2f} ttc={s.ttc:.1f} "
          f"pdms={compose_pdms(s):.3f}")
