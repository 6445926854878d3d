"""Picking one plan from a pool with an imperfect learned scorer.

A noisy scorer stands in for a trained critic. We compare its pick with the
oracle pick, pull the top-k and Pareto target sets a student would be trained
on, and show how anchoring to a previous plan trades a little score for
stability.
"""
from pdmlab.demo_scenes import make_scene
from pdmlab.evaluator import DEPLOYMENT, compose
from pdmlab.pseudo_expert import run_pipeline
from pdmlab.selection import (
    NoisyScorer, OracleScorer, PoolEntry, anchor_rerank, pareto_targets, rank, topk_targets,
)

scene = make_scene("lateral_squeeze", 0)
res = run_pipeline(scene, seed=0)
pool = [PoolEntry(scene.id, s.candidate.index, s.candidate.trajectory, s.subscores) for s in res.final_pool]
truth = [compose(e.truth, DEPLOYMENT) for e in pool]

noisy = NoisyScorer(0.1, seed=7, p_flip=0.05)
picked = rank(pool, noisy)
print(f"oracle best {max(truth):.3f}, noisy pick {truth[picked.top1]:.3f}, "
      f"oracle pick {truth[rank(pool, OracleScorer()).top1]:.3f}")

print("top-8 targets:", [pool[i].candidate_id for i in topk_targets(pool, noisy, k=8)])
par = pareto_targets(pool, noisy)
print(f"pareto front of {len(par.front)} -> {len(par.members)} targets (truncated={par.truncated})")

anchored = anchor_rerank(pool, picked.scores, scene.human_trajectory)
print(f"anchored pick {truth[anchored.top1]:.3f} with q={anchored.q[anchored.top1]:.3f}")
