"""How diverse and how good is a candidate pool?

Diversity is measured on trajectory geometry (pairwise displacement, endpoint
spread, effective rank, endpoint clusters). Quality-aware variants restrict
the same measures to plans that score well.
"""
from pdmlab.analytics import pool_stats
from pdmlab.demo_scenes import demo_scenes
from pdmlab.evaluator import compose_pdms
from pdmlab.pseudo_expert import run_pipeline
from pdmlab.selection import OracleScorer, PoolEntry, rank

for scene in demo_scenes()[:4]:
    res = run_pipeline(scene, seed=0)
    pool = [PoolEntry(scene.id, s.candidate.index, s.candidate.trajectory, s.subscores) for s in res.final_pool]
    scores = [compose_pdms(e.truth) for e in pool]
    st = pool_stats([e.trajectory for e in pool], scores, rank(pool, OracleScorer()).top1)
    print(f"{scene.id:12s} n={st.pool_size:2d} ade={st.pairwise_ade:5.2f} rank={st.effective_rank:4.2f} "
          f">0.95={st.count_gt_095:2d} gap={st.gap:.3f}")
