"""Command-line entry point: ``python -m pdmlab <command>``."""

from __future__ import annotations

import argparse
import csv
import hashlib
import io
import json
import sys
from collections import Counter, OrderedDict
from concurrent.futures import ProcessPoolExecutor
from pathlib import Path
from typing import Callable, Iterable, Optional, Sequence

import numpy as np

from . import __version__
from .analytics import POOL_STATS_FIELDS, aggregate_stats, pool_stats
from .config import RunConfig, load_config
from .demo_scenes import demo_scenes
from .evaluator import SubScores, compose, compose_epdms, compose_pdms, compute_subscores, \
    extended_comfort, human_subscores
from .io import (
    SceneFormatError, atomic_write, dumps, load_scenes, read_jsonl, save_scene, scene_to_dict,
    subscores_from_record, write_json, write_jsonl,
)
from .pseudo_expert import pseudo_experts_record, run_pipeline, scored_record
from .refinement import enrichment_report
from .scene import Scene, Trajectory
from .selection import (
    AnchorConfig, InvalidInput, NoisyScorer, OracleScorer, PoolEntry, Scorer, TabularScorer, anchor_rerank,
    pareto_targets, rank, selection_report, switch_count, topk_targets,
)
from .simulation import CHECKS, run_check

SCORE_CACHE_VERSION = 1
SWEEP_GRID = ((2.00, 0.20, 0.50), (1.75, 0.20, 0.75), (2.00, 0.20, 0.75), (2.25, 0.20, 0.75),
              (1.75, 0.20, 1.00), (2.00, 0.20, 1.00), (2.25, 0.20, 1.00), (2.00, 0.25, 0.50),
              (2.00, 0.25, 0.75), (1.75, 0.35, 0.75), (2.00, 0.35, 0.75), (2.25, 0.35, 0.75),
              (1.75, 0.35, 1.00), (2.00, 0.35, 1.00), (2.25, 0.35, 1.00))


class CliError(Exception):
    pass


def parallel_map(fn: Callable, items: Sequence, jobs: int) -> list:
    """Ordered map; results never depend on ``jobs``."""
    if jobs <= 1 or len(items) <= 1:
        return [fn(x) for x in items]
    with ProcessPoolExecutor(max_workers=min(jobs, len(items))) as ex:
        return list(ex.map(fn, items, chunksize=1))


def csv_text(header: Sequence[str], rows: Iterable[Sequence]) -> str:
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(header)
    for r in rows:
        w.writerow(["" if v is None else (repr(v) if isinstance(v, float) else v) for v in r])
    return buf.getvalue()


def _config(args) -> RunConfig:
    cfg = load_config(getattr(args, "config", None))
    if getattr(args, "seed", None) is not None:
        cfg = cfg.override({"seed": int(args.seed)})
    return cfg


# pseudo-expert generation

def _pipeline_job(job) -> dict:
    scene, cfg_dict, seed = job
    cfg = RunConfig.from_dict(cfg_dict)
    res = run_pipeline(scene, cfg.families, cfg.evaluator, seed)
    retained = {s.candidate.index for s in res.retained}
    records = [scored_record(scene.id, s, s.candidate.index in retained) for s in res.scored]
    records += [scored_record(scene.id, s, True) for s in res.interpolated]
    return {
        "scene_id": scene.id,
        "records": records,
        "pseudo_experts": pseudo_experts_record(scene.id, res.sample),
        "summary": {
            "generated": len(res.generated),
            "families": dict(sorted(Counter(c.family.value for c in res.generated).items())),
            "feasibility": dict(sorted(Counter(c.feasibility.value for c in res.labelled).items())),
            "scored": len(res.scored), "retained": len(res.retained), "interpolated": len(res.interpolated),
            "pseudo_experts": int(res.sample.mask.sum()),
        },
    }


def generate_pseudo_experts(scenes: Sequence[Scene], cfg: RunConfig, out: Path, jobs: int = 1) -> list[dict]:
    results = parallel_map(_pipeline_job, [(s, cfg.to_dict(), cfg.seed) for s in scenes], jobs)
    for r in results:
        write_jsonl(out / "candidates" / f"{r['scene_id']}.jsonl", r["records"])
    write_json(out / "pseudo_experts.json", {r["scene_id"]: r["pseudo_experts"] for r in results})
    write_json(out / "generation_summary.json", {r["scene_id"]: r["summary"] for r in results})
    return results


def cmd_gen_pseudo_experts(args) -> int:
    cfg = _config(args)
    scenes = load_scenes(args.scenes)
    if not scenes:
        raise CliError(f"no scene files in {args.scenes}")
    generate_pseudo_experts(scenes, cfg, Path(args.out), args.jobs)
    return 0


# scoring with cache

def _scene_hash(scene: Scene) -> str:
    return hashlib.sha256(dumps(scene_to_dict(scene)).encode()).hexdigest()[:16]


def _config_hash(cfg: RunConfig) -> str:
    return hashlib.sha256(dumps(cfg.to_dict()["evaluator"]).encode()).hexdigest()[:16]


def load_score_cache(path: Path, scene_hash: str, config_hash: str) -> dict:
    """Cached sub-scores, or an empty table when missing, unreadable or stale."""
    try:
        data = json.loads(path.read_text())
    except (OSError, ValueError):
        return {}
    if (data.get("version") != SCORE_CACHE_VERSION or data.get("scene_hash") != scene_hash
            or data.get("config_hash") != config_hash):
        return {}
    return dict(data.get("entries", {}))


def score_records(scene: Scene, records: Sequence[dict], cfg: RunConfig, cache_dir: Optional[Path] = None
                  ) -> tuple[list[dict], dict]:
    sh, ch = _scene_hash(scene), _config_hash(cfg)
    cache_path = cache_dir / f"{scene.id}.json" if cache_dir else None
    entries = load_score_cache(cache_path, sh, ch) if cache_path else {}
    hits = 0
    human = human_subscores(scene, cfg.evaluator)
    out = []
    for r in records:
        traj = Trajectory(r["trajectory"], scene.dt)
        key = traj.content_hash()
        if key in entries:
            s = SubScores.from_mapping(entries[key])
            hits += 1
        else:
            s = compute_subscores(scene, traj, cfg.evaluator)
            entries[key] = s.as_dict()
        out.append({**r, **s.as_dict(), "pdms": compose_pdms(s), "epdms": compose_epdms(s, human)})
    if cache_path:
        write_json(cache_path, {"version": SCORE_CACHE_VERSION, "scene_hash": sh, "config_hash": ch,
                                "entries": dict(sorted(entries.items()))})
    return out, {"hits": hits, "misses": len(records) - hits}


def cmd_score(args) -> int:
    cfg = _config(args)
    scenes = {s.id: s for s in load_scenes(args.scenes)}
    records = list(read_jsonl(args.pool))
    by_scene = OrderedDict()
    for r in records:
        by_scene.setdefault(r["scene_id"], []).append(r)
    out, stats = [], {}
    for sid, recs in by_scene.items():
        if sid not in scenes:
            raise CliError(f"pool references unknown scene {sid!r}")
        scored, st = score_records(scenes[sid], recs, cfg, Path(args.cache) if args.cache else None)
        out += scored
        stats[sid] = st
    write_jsonl(args.out, out)
    print(json.dumps({"version": __version__, "cache": stats}, sort_keys=True))
    return 0


# ranking and targets

def parse_scorer(spec: str) -> Scorer:
    """``oracle`` | ``noisy:<eps>:<seed>[:<p_flip>]`` | ``tabular:<file.jsonl>``."""
    if spec == "oracle":
        return OracleScorer()
    if spec.startswith("noisy:"):
        parts = spec.split(":")
        if len(parts) not in (3, 4):
            raise CliError("noisy scorer spec is noisy:<eps>:<seed>[:<p_flip>]")
        p_flip = float(parts[3]) if len(parts) == 4 else 0.0
        return NoisyScorer(float(parts[1]), int(parts[2]), p_flip)
    if spec.startswith("tabular:"):
        return TabularScorer.from_records(read_jsonl(spec.split(":", 1)[1]))
    raise CliError(f"unknown scorer {spec!r}")


def pool_from_records(records: Iterable[dict], retained_only: bool = False) -> "OrderedDict[str, list[PoolEntry]]":
    pools: OrderedDict = OrderedDict()
    for r in records:
        if retained_only and not r.get("retained", True):
            continue
        entry = PoolEntry(r["scene_id"], int(r["candidate_id"]), Trajectory(r["trajectory"], r.get("dt", 0.5)),
                          subscores_from_record(r))
        pools.setdefault(r["scene_id"], []).append(entry)
    return pools


def _load_anchor(path: Optional[str]) -> Optional[dict]:
    if not path:
        return None
    data = json.loads(Path(path).read_text())
    return data if isinstance(data, dict) else {"*": data}


def rank_pools(pools, scorer: Scorer, cfg: RunConfig, anchors: Optional[dict] = None,
               anchor_cfg: Optional[AnchorConfig] = None) -> tuple[list, dict]:
    rows, reports = [], {}
    for sid, entries in pools.items():
        res = rank(entries, scorer, None, cfg.weights)
        order = list(res.order)
        q = [None] * len(entries)
        anchor = None if anchors is None else anchors.get(sid, anchors.get("*"))
        if anchor is not None:
            ar = anchor_rerank(entries, res.scores, Trajectory(anchor, entries[0].trajectory.dt),
                               anchor_cfg or cfg.anchor)
            order, q = list(ar.order), list(ar.q)
        true = [compose(e.truth, cfg.weights) for e in entries]
        pos = {i: k for k, i in enumerate(order)}
        for i, e in enumerate(entries):
            rows.append((sid, e.candidate_id, res.scores[i], true[i], q[i], pos[i] + 1))
        reports[sid] = {**selection_report(true, order).as_dict(),
                        "selected_candidate_id": entries[order[0]].candidate_id}
    return rows, reports


def cmd_rank(args) -> int:
    cfg = _config(args)
    pools = pool_from_records(read_jsonl(args.pool), args.retained_only)
    anchor_cfg = AnchorConfig(args.lambda_s, args.lambda_xy, args.lambda_psi)
    rows, reports = rank_pools(pools, parse_scorer(args.scorer), cfg, _load_anchor(args.anchor), anchor_cfg)
    out = Path(args.out)
    atomic_write(out / "rank.csv", csv_text(("scene_id", "candidate_id", "predicted", "true", "q", "rank"), rows))
    write_json(out / "selection_report.json", reports)
    return 0


def distill_targets(pools, scorer: Scorer, cfg: RunConfig, k: int, pmax: int, pmin: int) -> dict:
    out = {}
    for sid, entries in pools.items():
        ranked = rank(entries, scorer, None, cfg.weights)
        top = topk_targets(entries, scorer, None, k, cfg.weights, ranked)
        par = pareto_targets(entries, scorer, None, pmax, pmin, cfg.weights, ranked=ranked)
        out[sid] = {
            "topk": [entries[i].candidate_id for i in top],
            "pareto": [entries[i].candidate_id for i in par.members],
            "pareto_front": [entries[i].candidate_id for i in par.front],
            "pareto_truncated": par.truncated, "pareto_padded": par.padded,
            "topk_trajectories": [entries[i].trajectory.to_list() for i in top],
            "pareto_trajectories": [entries[i].trajectory.to_list() for i in par.members],
        }
    return out


def cmd_distill_targets(args) -> int:
    cfg = _config(args)
    pools = pool_from_records(read_jsonl(args.pool), args.retained_only)
    write_json(args.out, distill_targets(pools, parse_scorer(args.scorer), cfg, args.k, args.pareto_max,
                                         args.pareto_min))
    return 0


# simulation

def cmd_simulate(args) -> int:
    params = json.loads(Path(args.params).read_text()) if args.params else None
    summary, rows = run_check(args.check, args.trials, args.seed or 0, params)
    out = Path(args.out)
    write_json(out / f"simulate_{args.check}.json", summary)
    if rows:
        header = list(rows[0].keys())
        atomic_write(out / f"simulate_{args.check}.csv", csv_text(header, ([r.get(h) for h in header] for r in rows)))
    print(json.dumps({"check": args.check, "trials": args.trials, "violations": summary["violations"]}))
    return 0 if summary["violations"] == 0 else 1


# analytics

def _pool_files(path: Path) -> list[Path]:
    sub = path / "candidates"
    return sorted((sub if sub.is_dir() else path).glob("*.jsonl"))


def analyze_pools(pools, scorer: Scorer, cfg: RunConfig) -> tuple[list, dict]:
    rows, stats = [], []
    for sid, entries in pools.items():
        res = rank(entries, scorer, None, cfg.weights)
        true = [compose_pdms(e.truth) for e in entries]
        st = pool_stats([e.trajectory for e in entries], true, res.top1)
        stats.append(st)
        rows.append((sid, *[getattr(st, f) for f in POOL_STATS_FIELDS]))
    agg = aggregate_stats(stats)
    rows.append(("aggregate", *[agg[f] for f in POOL_STATS_FIELDS]))
    return rows, agg


def cmd_analyze(args) -> int:
    cfg = _config(args)
    files = _pool_files(Path(args.pools))
    if not files:
        raise CliError(f"no pool JSONL files under {args.pools}")
    pools = OrderedDict()
    for f in files:
        pools.update(pool_from_records(read_jsonl(f), args.retained_only))
    rows, _ = analyze_pools(pools, parse_scorer(args.scorer), cfg)
    atomic_write(args.out, csv_text(("scene_id",) + POOL_STATS_FIELDS, rows))
    return 0


# anchor sweep

def _sweep_job(job) -> dict:
    scene, entries, cfg_dict, seed, frames, eps = job
    cfg = RunConfig.from_dict(cfg_dict)
    if entries is None:
        res = run_pipeline(scene, cfg.families, cfg.evaluator, seed)
        entries = [PoolEntry(scene.id, s.candidate.index, s.candidate.trajectory, s.subscores)
                   for s in res.final_pool]
    human = human_subscores(scene, cfg.evaluator)
    preds = []
    for f in range(frames):
        scorer = NoisyScorer(eps, seed=seed * 1009 + f, level="composed")
        preds.append(rank(entries, scorer, None, cfg.weights).scores)
    settings = [None] + [AnchorConfig(*g) for g in SWEEP_GRID]
    out = []
    for a in settings:
        picks = []
        for f in range(frames):
            if a is None:
                picks.append(int(np.lexsort((np.arange(len(entries)), -np.asarray(preds[f])))[0]))
            else:
                picks.append(anchor_rerank(entries, preds[f], scene.human_trajectory, a).top1)
        vals = {"score": [], "ep": [], "ec": [], "hc": []}
        for f, i in enumerate(picks):
            ec = 1.0 if f == 0 else extended_comfort(entries[picks[f - 1]].trajectory, entries[i].trajectory,
                                                     cfg.evaluator.ec_pos_threshold, cfg.evaluator.ec_head_threshold)
            s = entries[i].truth.replace(ec=ec)
            vals["score"].append(compose_epdms(s, human))
            vals["ep"].append(s.ep)
            vals["ec"].append(ec)
            vals["hc"].append(s.hc)
        out.append({k: float(np.mean(v)) for k, v in vals.items()} | {"switches": switch_count(picks)})
    return {"scene_id": scene.id, "rows": out}


def sweep_anchor(scenes: Sequence[Scene], cfg: RunConfig, frames: int, eps: float, jobs: int = 1,
                 pools: Optional[dict] = None) -> str:
    """Anchor-weight grid over multi-frame selections; ``pools`` maps scene id to final-pool entries."""
    pools = pools or {}
    per_scene = parallel_map(_sweep_job, [(s, pools.get(s.id), cfg.to_dict(), cfg.seed, frames, eps)
                                          for s in scenes], jobs)
    settings = [None] + list(SWEEP_GRID)
    rows = []
    for j, g in enumerate(settings):
        cols = [r["rows"][j] for r in per_scene]
        agg = {k: float(np.mean([c[k] for c in cols])) for k in ("score", "ep", "ec", "hc")}
        sw = int(sum(c["switches"] for c in cols))
        lam = ("", "", "") if g is None else g
        rows.append((*lam, agg["score"], agg["ep"], agg["ec"], agg["hc"], sw))
    return csv_text(("lambda_s", "lambda_xy", "lambda_psi", "score", "ep", "ec", "hc", "switches"), rows)


def cmd_sweep_anchor(args) -> int:
    cfg = _config(args)
    scenes = load_scenes(args.scenes) if args.scenes else demo_scenes()
    atomic_write(args.out, sweep_anchor(scenes, cfg, args.frames, args.eps, args.jobs))
    return 0


# end-to-end demo

DEMO_CHECKS = {"enrichment": 500, "expected": 500, "multiround": 100, "monotone": 500, "drift": 3,
               "pareto": 50, "margin": 100, "report": 50}


def run_demo(out: Path, seed: int = 1, jobs: int = 1, cfg: Optional[RunConfig] = None) -> dict:
    cfg = (cfg or RunConfig()).override({"seed": int(seed)})
    scenes = demo_scenes()
    for s in scenes:
        save_scene(s, out / "scenes" / f"{s.id}.json")
    gen = generate_pseudo_experts(scenes, cfg, out, jobs)
    pools = OrderedDict()
    for r in gen:
        pools.update(pool_from_records(r["records"]))
    scorer = NoisyScorer(0.05, seed=seed, p_flip=0.02)
    rows, reports = rank_pools(pools, scorer, cfg)
    atomic_write(out / "rank.csv", csv_text(("scene_id", "candidate_id", "predicted", "true", "q", "rank"), rows))
    write_json(out / "selection_report.json", reports)
    write_json(out / "targets.json", distill_targets(pools, scorer, cfg, cfg.topk, cfg.pareto_max, cfg.pareto_min))
    arows, agg = analyze_pools(pools, scorer, cfg)
    atomic_write(out / "analysis.csv", csv_text(("scene_id",) + POOL_STATS_FIELDS, arows))
    enrich = enrichment_report([
        ([compose(e.truth, cfg.weights) for e in entries], list(rank(entries, scorer, None, cfg.weights).scores))
        for entries in pools.values()])
    write_json(out / "enrichment_report.json", enrich)
    checks = {}
    for check, trials in DEMO_CHECKS.items():
        summary, _ = run_check(check, trials, seed)
        checks[check] = summary
    write_json(out / "simulation_checks.json", checks)
    final = {r["scene_id"]: list(pool_from_records(r["records"], retained_only=True).values())[0] for r in gen}
    atomic_write(out / "sweep_anchor.csv", sweep_anchor(scenes, cfg, 6, 0.05, jobs, final))
    report = {
        "version": __version__, "seed": seed, "scenes": [s.id for s in scenes],
        "generation": {r["scene_id"]: r["summary"] for r in gen},
        "selection": {k: {"selected": v["selected_true_score"], "oracle": v["oracle_true_score"],
                          "regret": v["regret"]} for k, v in reports.items()},
        "analysis_aggregate": agg,
        "simulation_violations": {k: v["violations"] for k, v in checks.items()},
    }
    write_json(out / "demo_report.json", report)
    return report


def cmd_demo(args) -> int:
    cfg = load_config(args.config)
    report = run_demo(Path(args.out), args.seed if args.seed is not None else 1, args.jobs, cfg)
    bad = sum(report["simulation_violations"].values())
    print(json.dumps({"scenes": len(report["scenes"]), "simulation_violations": bad}))
    return 0 if bad == 0 else 1


def build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(prog="pdmlab", description="Evaluator-driven proposal generation and selection toolkit.")
    p.add_argument("--version", action="version", version=f"%(prog)s {__version__}")
    sub = p.add_subparsers(dest="command", required=True)

    def common(sp, seed=True):
        sp.add_argument("--config", help="JSON run config (default: $PDMLAB_CONFIG or built-in defaults)")
        if seed:
            sp.add_argument("--seed", type=int, default=None)

    sp = sub.add_parser("gen-pseudo-experts", help="generate, pre-check, score and select pseudo-experts")
    common(sp)
    sp.add_argument("--scenes", required=True)
    sp.add_argument("--out", required=True)
    sp.add_argument("--jobs", type=int, default=1)
    sp.set_defaults(func=cmd_gen_pseudo_experts)

    sp = sub.add_parser("score", help="re-score a candidate pool with the rule-based evaluator")
    common(sp, seed=False)
    sp.add_argument("--scenes", required=True)
    sp.add_argument("--pool", required=True)
    sp.add_argument("--out", required=True)
    sp.add_argument("--cache", help="directory for per-scene score caches")
    sp.set_defaults(func=cmd_score)

    def ranking(sp):
        sp.add_argument("--pool", required=True)
        sp.add_argument("--scorer", default="oracle", help="oracle | noisy:<eps>:<seed>[:<p_flip>] | tabular:<file>")
        sp.add_argument("--retained-only", action="store_true")

    sp = sub.add_parser("rank", help="rank pools and report selected vs oracle scores")
    common(sp, seed=False)
    ranking(sp)
    sp.add_argument("--anchor", help="JSON trajectory, or {scene_id: trajectory}")
    sp.add_argument("--lambda-s", type=float, default=2.0)
    sp.add_argument("--lambda-xy", type=float, default=0.2)
    sp.add_argument("--lambda-psi", type=float, default=0.5)
    sp.add_argument("--out", required=True)
    sp.set_defaults(func=cmd_rank)

    sp = sub.add_parser("distill-targets", help="top-k and Pareto target sets")
    common(sp, seed=False)
    ranking(sp)
    sp.add_argument("--k", type=int, default=8)
    sp.add_argument("--pareto-max", type=int, default=8)
    sp.add_argument("--pareto-min", type=int, default=2)
    sp.add_argument("--out", required=True)
    sp.set_defaults(func=cmd_distill_targets)

    sp = sub.add_parser("simulate", help="seeded bound checks")
    sp.add_argument("--check", required=True, choices=CHECKS)
    sp.add_argument("--trials", type=int, default=1000)
    sp.add_argument("--seed", type=int, default=0)
    sp.add_argument("--params", help="JSON overrides for the check parameters")
    sp.add_argument("--out", required=True)
    sp.set_defaults(func=cmd_simulate)

    sp = sub.add_parser("analyze", help="quality and diversity metrics per scene")
    common(sp, seed=False)
    sp.add_argument("--pools", required=True)
    sp.add_argument("--scorer", default="oracle")
    sp.add_argument("--retained-only", action="store_true")
    sp.add_argument("--out", required=True)
    sp.set_defaults(func=cmd_analyze)

    sp = sub.add_parser("sweep-anchor", help="grid over anchor reranking weights")
    common(sp)
    sp.add_argument("--scenes", help="scene directory (default: built-in demo scenes)")
    sp.add_argument("--frames", type=int, default=6)
    sp.add_argument("--eps", type=float, default=0.05)
    sp.add_argument("--jobs", type=int, default=1)
    sp.add_argument("--out", required=True)
    sp.set_defaults(func=cmd_sweep_anchor)

    sp = sub.add_parser("demo", help="run every stage on the built-in scenes")
    common(sp)
    sp.add_argument("--jobs", type=int, default=1)
    sp.add_argument("--out", default="demo_out")
    sp.set_defaults(func=cmd_demo)
    return p


def main(argv: Optional[Sequence[str]] = None) -> int:
    args = build_parser().parse_args(argv)
    try:
        return args.func(args)
    except (CliError, SceneFormatError, InvalidInput, ValueError, OSError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2


if __name__ == "__main__":
    sys.exit(main())
