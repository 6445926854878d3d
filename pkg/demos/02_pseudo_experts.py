"""From one scene to a handful of diverse, safe pseudo-expert plans.

The generator enumerates six motion families, throws out plans that obviously
fail, scores a subset, keeps a coverage-balanced set of 50, adds a few plans
that sit on score boundaries and finally samples up to eight diverse
high-scoring targets with farthest-point sampling.
"""
from pdmlab.demo_scenes import make_scene
from pdmlab.pseudo_expert import run_pipeline

scene = make_scene("curve", 1)
res = run_pipeline(scene, seed=0)

print(f"scene {scene.id}: {len(res.generated)} generated, {len(res.scored)} scored, "
      f"{len(res.retained)} retained, {len(res.interpolated)} boundary plans")
sample = res.sample
print(f"training targets: {int(sample.mask.sum())} valid of {len(sample.mask)} slots")
for traj, src, valid in zip(sample.trajectories, sample.sources, sample.mask):
    if valid:
        end = traj.xy[-1]
        print(f"  {str(src):>8s}  endpoint=({end[0]:6.2f}, {end[1]:5.2f})")
