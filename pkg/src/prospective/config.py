"""Experiment configuration files (YAML) with field-level validation."""

from __future__ import annotations

from dataclasses import dataclass, field
from pathlib import Path

import yaml

from .core import WeightingScheme
from .embeddings import EmbeddingSpec
from .foraging.agent import VARIANTS, AgentConfig
from .foraging.env import ForagingParams
from .mlp import MlpConfig
from .processes import HhmmConfig, ProcessSpec
from .trees import ForestParams, GbtParams

EXPERIMENTS = ("periodic-sampling", "embedding-crossover", "online-vs-batch", "trees-vs-mlp", "foraging")
LEARNER_TYPES = ("mlp", "online-mlp", "gbt", "forest")
SCHEDULES = ("homogeneous", "poisson")


class ConfigError(ValueError):
    """Invalid configuration; ``field`` names the offending entry."""

    def __init__(self, field: str, message: str):
        super().__init__(f"{field}: {message}")
        self.field = field


@dataclass(frozen=True)
class LearnerConfig:
    name: str
    type: str
    embedding: dict = field(default_factory=lambda: {"kind": "none"})
    params: dict = field(default_factory=dict)
    eval_times: tuple | None = None  # overrides the experiment grid

    def embedding_spec(self) -> EmbeddingSpec:
        e = dict(self.embedding)
        if e.get("kind") == "none":
            e.setdefault("d", 0)
        return EmbeddingSpec(**e)

    def to_dict(self) -> dict:
        d = {"name": self.name, "type": self.type, "embedding": dict(self.embedding), "params": _plain(self.params)}
        if self.eval_times is not None:
            d["eval_times"] = list(self.eval_times)
        return d


@dataclass(frozen=True)
class ProcessEntry:
    name: str
    spec: ProcessSpec

    def to_dict(self) -> dict:
        d = _plain(self.spec.to_dict())
        d.pop("seed")
        if self.spec.kind != "hhmm":
            d.pop("hhmm")
        return {"name": self.name, **d}


@dataclass(frozen=True)
class ForagingSection:
    env: ForagingParams = ForagingParams()
    agent: AgentConfig = AgentConfig()
    steps: int = 100_000
    variants: tuple = VARIANTS
    chance_seeds: int = 100

    def to_dict(self) -> dict:
        agent = _plain(self.agent.__dict__)
        agent.pop("seed")
        agent["embedding"] = self.agent.embedding.to_dict()
        return {
            "env": self.env.to_dict(),
            "agent": agent,
            "steps": self.steps,
            "variants": list(self.variants),
            "chance_seeds": self.chance_seeds,
        }


@dataclass(frozen=True)
class ExperimentConfig:
    experiment: str
    seeds: tuple = (0, 1, 2, 3, 4)
    eval_times: tuple = ()
    n_mc: int = 100
    scheme: WeightingScheme = WeightingScheme()
    schedules: tuple = ("homogeneous",)
    processes: tuple = ()
    learners: tuple = ()
    foraging: ForagingSection | None = None
    output_dir: str = "results"

    def to_dict(self) -> dict:
        d = {
            "experiment": self.experiment,
            "seeds": list(self.seeds),
            "output_dir": self.output_dir,
        }
        if self.experiment == "foraging":
            d["foraging"] = self.foraging.to_dict()
            return d
        d.update(
            eval_times=list(self.eval_times),
            n_mc=self.n_mc,
            scheme={"kind": self.scheme.kind, "horizon": self.scheme.horizon, "decay": self.scheme.decay},
            schedules=list(self.schedules),
            processes=[p.to_dict() for p in self.processes],
            learners=[l.to_dict() for l in self.learners],
        )
        return d


def _plain(v):
    """Tuples to lists, recursively, for YAML output."""
    if isinstance(v, dict):
        return {k: _plain(x) for k, x in v.items()}
    if isinstance(v, (list, tuple)):
        return [_plain(x) for x in v]
    return v


def _tuples(v):
    if isinstance(v, list):
        return tuple(_tuples(x) for x in v)
    if isinstance(v, dict):
        return {k: _tuples(x) for k, x in v.items()}
    return v


def _check(where: str, fn, *args, **kwargs):
    try:
        return fn(*args, **kwargs)
    except ConfigError:
        raise
    except (TypeError, ValueError) as e:
        raise ConfigError(where, str(e)) from None


def _times(where: str, v) -> tuple:
    if not isinstance(v, (list, tuple)) or not v:
        raise ConfigError(where, "must be a non-empty list of times")
    if any(not isinstance(t, int) or isinstance(t, bool) or t < 1 for t in v):
        raise ConfigError(where, "times must be positive integers")
    if list(v) != sorted(set(v)):
        raise ConfigError(where, "times must be strictly increasing")
    return tuple(v)


def _unknown(where: str, d: dict, allowed) -> None:
    extra = sorted(set(d) - set(allowed))
    if extra:
        raise ConfigError(where, f"unknown field(s) {', '.join(extra)}")


def _learner(i: int, d) -> LearnerConfig:
    where = f"learners[{i}]"
    if not isinstance(d, dict):
        raise ConfigError(where, "must be a mapping")
    _unknown(where, d, ("name", "type", "embedding", "params", "eval_times"))
    for key in ("name", "type"):
        if key not in d:
            raise ConfigError(f"{where}.{key}", "is required")
    if d["type"] not in LEARNER_TYPES:
        raise ConfigError(f"{where}.type", f"must be one of {', '.join(LEARNER_TYPES)}")
    emb = d.get("embedding", {"kind": "none"})
    params = d.get("params", {}) or {}
    lc = LearnerConfig(str(d["name"]), d["type"], dict(emb), dict(params),
                       _times(f"{where}.eval_times", d["eval_times"]) if "eval_times" in d else None)
    _check(f"{where}.embedding", lc.embedding_spec)
    _check(f"{where}.params", learner_params, lc)
    return lc


def learner_params(lc: LearnerConfig, seed: int = 0):
    """The module-level parameter object for a learner entry."""
    p = _tuples(lc.params)
    if lc.type in ("mlp", "online-mlp"):
        return MlpConfig(**{**p, "seed": seed})
    if lc.type == "gbt":
        return GbtParams(**p)
    return ForestParams(**{**p, "seed": seed})


def _process(i: int, d) -> ProcessEntry:
    where = f"processes[{i}]"
    if not isinstance(d, dict) or "name" not in d:
        raise ConfigError(where, "must be a mapping with a name")
    d = dict(d)
    name = str(d.pop("name"))
    if "seed" in d:
        raise ConfigError(f"{where}.seed", "process seeds come from the seed list")
    hh = d.pop("hhmm", None)
    if hh is not None:
        d["hhmm"] = _check(f"{where}.hhmm", lambda: HhmmConfig(**_tuples(hh)))
    return ProcessEntry(name, _check(where, ProcessSpec, **d))


def _foraging(d) -> ForagingSection:
    if not isinstance(d, dict):
        raise ConfigError("foraging", "must be a mapping")
    _unknown("foraging", d, ("env", "agent", "steps", "variants", "chance_seeds"))
    env = _check("foraging.env", lambda: ForagingParams(**(d.get("env") or {})))
    agent = dict(d.get("agent") or {})
    if "seed" in agent:
        raise ConfigError("foraging.agent.seed", "agent seeds come from the seed list")
    if "embedding" in agent:
        agent["embedding"] = _check("foraging.agent.embedding", lambda: EmbeddingSpec(**agent["embedding"]))
    agent = _check("foraging.agent", lambda: AgentConfig(**_tuples(agent)))
    steps = d.get("steps", 100_000)
    if not isinstance(steps, int) or steps < 1:
        raise ConfigError("foraging.steps", "must be a positive integer")
    variants = tuple(d.get("variants", VARIANTS))
    bad = [v for v in variants if v not in VARIANTS]
    if bad or not variants:
        raise ConfigError("foraging.variants", f"must be a non-empty subset of {', '.join(VARIANTS)}")
    chance = d.get("chance_seeds", 100)
    if not isinstance(chance, int) or chance < 2:
        raise ConfigError("foraging.chance_seeds", "must be an integer >= 2")
    return ForagingSection(env, agent, steps, variants, chance)


def from_dict(d) -> ExperimentConfig:
    """Validate a parsed config; raises :class:`ConfigError` naming the bad field."""
    if not isinstance(d, dict):
        raise ConfigError("<root>", "config must be a mapping")
    exp = d.get("experiment")
    if exp not in EXPERIMENTS:
        raise ConfigError("experiment", f"must be one of {', '.join(EXPERIMENTS)}")
    seeds = d.get("seeds", [0, 1, 2, 3, 4])
    if not isinstance(seeds, list) or not seeds or any(not isinstance(s, int) or s < 0 for s in seeds):
        raise ConfigError("seeds", "must be a non-empty list of non-negative integers")
    if len(set(seeds)) != len(seeds):
        raise ConfigError("seeds", "must not repeat")
    out_dir = str(d.get("output_dir", "results"))
    if exp == "foraging":
        _unknown("<root>", d, ("experiment", "seeds", "output_dir", "foraging"))
        return ExperimentConfig(exp, tuple(seeds), foraging=_foraging(d.get("foraging", {})), output_dir=out_dir)
    _unknown("<root>", d, ("experiment", "seeds", "output_dir", "eval_times", "n_mc", "scheme", "schedules", "processes", "learners"))
    eval_times = _times("eval_times", d.get("eval_times"))
    n_mc = d.get("n_mc", 100)
    if not isinstance(n_mc, int) or n_mc < 1:
        raise ConfigError("n_mc", "must be a positive integer")
    scheme = _check("scheme", lambda: WeightingScheme(**(d.get("scheme") or {})))
    schedules = d.get("schedules", ["homogeneous"])
    if not isinstance(schedules, list) or not schedules or any(s not in SCHEDULES for s in schedules):
        raise ConfigError("schedules", f"must be a non-empty list drawn from {', '.join(SCHEDULES)}")
    procs = d.get("processes")
    if not isinstance(procs, list) or not procs:
        raise ConfigError("processes", "must be a non-empty list")
    processes = tuple(_process(i, p) for i, p in enumerate(procs))
    learners_raw = d.get("learners")
    if not isinstance(learners_raw, list) or not learners_raw:
        raise ConfigError("learners", "must be a non-empty list")
    learners = tuple(_learner(i, l) for i, l in enumerate(learners_raw))
    for names, what in (([p.name for p in processes], "processes"), ([l.name for l in learners], "learners")):
        if len(set(names)) != len(names):
            raise ConfigError(what, "names must be unique")
        if any("/" in n for n in names):
            raise ConfigError(what, "names must not contain '/'")
    return ExperimentConfig(exp, tuple(seeds), eval_times, n_mc, scheme, tuple(schedules), processes, learners, None, out_dir)


def loads(text: str) -> ExperimentConfig:
    try:
        data = yaml.safe_load(text)
    except yaml.YAMLError as e:
        raise ConfigError("<syntax>", str(e)) from None
    return from_dict(data)


def load(path) -> ExperimentConfig:
    return loads(Path(path).read_text())


def dumps(config: ExperimentConfig) -> str:
    return yaml.safe_dump(config.to_dict(), sort_keys=False, default_flow_style=None)
