"""Experiment recipes: seed sweeps that write curves, summaries, a manifest and plots."""

from __future__ import annotations

import hashlib
import json
import subprocess
from dataclasses import dataclass, replace
from pathlib import Path

import numpy as np

from .config import EXPERIMENTS, ExperimentConfig, LearnerConfig, learner_params
from .evaluation import CHANCE, CurveTask, RiskCurve, curves_to_csv, run_curve, run_tasks, summary_to_csv
from .foraging.agent import action_plan, chance_risk, departure_phase, train_run
from .foraging.env import ForagingEnv
from .foraging.oracle import optimal_policy, rollout_table
from .mlp import MlpLearner, OnlineMlpLearner
from .plotting import Series, svg_plot
from .processes import bayes_prospective_risk, simulate
from .trees import ForestLearner, GbtLearner

DESCRIPTIONS = {
    "periodic-sampling": "FTL vs Prospective-MLP on the periodic process under homogeneous and Poisson sampling",
    "embedding-crossover": "Fourier vs monomial time embeddings on periodic and linearly drifting processes",
    "online-vs-batch": "Prospective-MLP trained online (one SGD step per sample) vs retrained in batch",
    "trees-vs-mlp": "Prospective and time-agnostic GBT vs Prospective-MLP on periodic (with noise) and hhmm",
    "foraging": "retrospective, prospective and prospective-time actor-critic foragers vs the optimal policy",
}
assert set(DESCRIPTIONS) == set(EXPERIMENTS)


def build_learner(lc: LearnerConfig, seed: int):
    params = learner_params(lc, seed)
    emb = lc.embedding_spec()
    if lc.type == "mlp":
        return MlpLearner(params, emb)
    if lc.type == "online-mlp":
        return OnlineMlpLearner(params, emb)
    if lc.type == "gbt":
        return GbtLearner(params, emb)
    return ForestLearner(params, emb)


def curve_name(process: str, learner: str, schedule: str | None = None) -> str:
    return "/".join(x for x in (process, learner, schedule) if x)


def curve_tasks(cfg: ExperimentConfig) -> list[CurveTask]:
    tasks = []
    multi = len(cfg.schedules) > 1
    for proc in cfg.processes:
        for schedule in cfg.schedules:
            for lc in cfg.learners:
                for seed in cfg.seeds:
                    name = curve_name(proc.name, lc.name, schedule if multi else None)
                    times = lc.eval_times or cfg.eval_times
                    spec = replace(proc.spec, seed=seed)
                    tasks.append(CurveTask(name, build_learner(lc, seed), spec, schedule, times, cfg.scheme, cfg.n_mc, seed))
    return tasks


def bayes_reference(cfg: ExperimentConfig, process) -> float:
    """Bayes prospective risk averaged over seeds and evaluation times."""
    times = sorted({t for lc in cfg.learners for t in (lc.eval_times or cfg.eval_times)})
    vals = []
    for seed in cfg.seeds:
        spec = replace(process.spec, seed=seed)
        sim = simulate(spec, "homogeneous", max(times)) if spec.kind == "hhmm" else None
        for t in times:
            chain = sim.state_at(t)["chain_state"] if sim is not None else None
            vals.append(bayes_prospective_risk(spec, t, cfg.scheme, chain))
    return float(np.mean(vals))


# -- foraging ------------------------------------------------------------------


@dataclass(frozen=True)
class ForagingTask:
    variant: str
    seed: int
    cfg: ExperimentConfig


def run_foraging_task(task: ForagingTask) -> dict:
    sec = task.cfg.foraging
    agent_cfg = replace(sec.agent, seed=task.seed)
    run = train_run(task.variant, sec.env, sec.steps, agent_cfg)
    run.curve.learner = curve_name("foraging", task.variant)
    oracle = optimal_policy(sec.env)
    horizon = 200
    plan = action_plan(run.agent, run.env, 100, horizon - 100)
    best = rollout_table(sec.env, oracle.table, run.env.t, run.env.pos, horizon)[0][horizon - 100 :]
    tail = 1000
    traj = run.trajectory
    log = type(traj)(traj.pos[-tail:], traj.action[-tail:], traj.reward[-tail:], traj.value[-tail:],
                     traj.advantage[-tail:], sec.steps - min(tail, sec.steps) + 1)
    return {
        "curve": run.curve,
        "checkpoint": run.agent.to_bytes(),
        "trajectory": log.to_csv(),
        "departure_phase": departure_phase(run.agent, run.env),
        "matches_optimal_plan": bool(np.array_equal(plan, best)),
    }


# -- analysis helpers ----------------------------------------------------------


def mean_curve(curves: list[RiskCurve], name: str, column: str = "prosp_risk"):
    """Across-seed mean of one named curve; returns ``(t, mean)``."""
    sel = [c for c in curves if c.learner == name]
    if not sel:
        raise KeyError(name)
    t = sel[0].t
    if any(c.t != t for c in sel):
        raise ValueError("seeds were evaluated at different times")
    return np.asarray(t), np.mean([getattr(c, column) for c in sel], axis=0)


def first_crossing(t, risk, level: float):
    """First time at which ``risk <= level``, or ``None``."""
    for ti, r in zip(t, risk):
        if r <= level:
            return int(ti)
    return None


def converged_risk(risk, last: int = 1) -> float:
    return float(np.mean(np.asarray(risk)[-last:]))


# -- running -------------------------------------------------------------------


def _git_describe() -> str:
    try:
        out = subprocess.run(["git", "describe", "--always", "--dirty", "--tags"], capture_output=True, text=True,
                             cwd=Path(__file__).parent, timeout=10)
        return out.stdout.strip() or "unknown"
    except (OSError, subprocess.SubprocessError):
        return "unknown"


def _sha256(path: Path) -> str:
    return hashlib.sha256(path.read_bytes()).hexdigest()


@dataclass
class ExperimentResult:
    curves: list
    references: dict
    diagnostics: dict
    out_dir: Path


def _plot_groups(curves: list[RiskCurve], references: dict, out_dir: Path, experiment: str) -> list[Path]:
    from .evaluation import read_curves_csv, summarize

    rows = read_curves_csv(curves_to_csv(curves))
    summary = summarize(rows)
    paths = []
    for group in sorted({r["learner"].split("/")[0] for r in summary}):
        series = []
        for learner in sorted({r["learner"] for r in summary if r["learner"].split("/")[0] == group}):
            pts = [r for r in summary if r["learner"] == learner]
            series.append(Series(learner.split("/", 1)[1] if "/" in learner else learner,
                                 [p["t"] for p in pts], [p["mean"] for p in pts], [p["stderr"] for p in pts]))
        ref = references.get(group, {})
        svg = svg_plot(series, bayes=ref.get("bayes"), chance=ref.get("chance"), title=f"{experiment}: {group}",
                       xlabel="steps" if group == "foraging" else "training samples (t)")
        path = out_dir / f"{experiment}-{group}.svg"
        path.write_text(svg)
        paths.append(path)
    return paths


def run_experiment(cfg: ExperimentConfig, out_dir=None, workers: int = 1) -> ExperimentResult:
    """Run every (condition, seed) cell, then write outputs in a fixed order.

    ``curves.csv`` depends only on the config, so reruns are byte-identical.
    On failure a manifest flagged ``partial`` is written before re-raising.
    """
    out = Path(out_dir or cfg.output_dir)
    out.mkdir(parents=True, exist_ok=True)
    manifest = {
        "experiment": cfg.experiment,
        "config": cfg.to_dict(),
        "git_describe": _git_describe(),
        "seeds": list(cfg.seeds),
        "status": "running",
        "files": {},
    }
    written: list[Path] = []
    try:
        diagnostics: dict = {}
        if cfg.experiment == "foraging":
            tasks = [ForagingTask(v, s, cfg) for v in cfg.foraging.variants for s in cfg.seeds]
            results = run_tasks(run_foraging_task, tasks, workers)
            curves = [r["curve"] for r in results]
            ck = out / "checkpoints"
            tr = out / "trajectories"
            ck.mkdir(exist_ok=True)
            tr.mkdir(exist_ok=True)
            for task, r in zip(tasks, results):
                stem = f"{task.variant}-seed{task.seed}"
                (ck / f"{stem}.bin").write_bytes(r["checkpoint"])
                (tr / f"{stem}.csv").write_text(r["trajectory"])
                written += [ck / f"{stem}.bin", tr / f"{stem}.csv"]
                diagnostics[stem] = {"departure_phase": r["departure_phase"], "matches_optimal_plan": r["matches_optimal_plan"]}
            chance, chance_se = chance_risk(ForagingEnv(cfg.foraging.env), 200, cfg.foraging.chance_seeds)
            references = {"foraging": {"bayes": 0.0, "chance": chance, "chance_stderr": chance_se}}
        else:
            curves = run_tasks(run_curve, curve_tasks(cfg), workers)
            references = {p.name: {"bayes": bayes_reference(cfg, p), "chance": CHANCE} for p in cfg.processes}
        for name, text in (("curves.csv", curves_to_csv(curves)), ("summary.csv", summary_to_csv(curves))):
            (out / name).write_text(text)
            written.append(out / name)
        written += _plot_groups(curves, references, out, cfg.experiment)
        manifest.update(status="complete", references=references, diagnostics=diagnostics)
        return ExperimentResult(curves, references, diagnostics, out)
    except BaseException as e:
        manifest.update(status="partial", error=f"{type(e).__name__}: {e}")
        raise
    finally:
        manifest["files"] = {str(p.relative_to(out)): _sha256(p) for p in sorted(written)}
        (out / "manifest.json").write_text(json.dumps(manifest, indent=2, sort_keys=True) + "\n")
