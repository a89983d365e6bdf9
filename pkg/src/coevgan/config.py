"""Experiment configuration: a flat ``key = value`` file plus CLI overrides."""
from __future__ import annotations

import dataclasses
import os
from dataclasses import dataclass, fields

EXPERIMENTS = ("converge", "mode-collapse", "disc-collapse", "grid-run", "baseline")
OUT_ENV = "COEVGAN_OUT"


class ConfigError(ValueError):
    pass


@dataclass
class ExperimentConfig:
    experiment: str = "converge"
    runs: int = 120
    generations: int = 100
    pop_size: int = 10
    mutation_step: float = 1.0
    mutation_kind: str = "gaussian"
    selection_prob: float = 1.0
    mutation_prob: float = 1.0
    initial_lr: float = 0.1
    lr_mutation_sigma: float = 1e-7
    fitness_weighting: str = "uniform"
    target_mu1: float = -3.0
    target_mu2: float = 3.0
    gen_init_lo: float = -10.0
    gen_init_hi: float = 10.0
    disc_init_lo: float = -10.0
    disc_init_hi: float = 10.0
    success_threshold: float = 0.1
    # simultaneous-gradient baseline
    baseline_lr_gen: float = 1.0
    baseline_lr_disc: float = 1.0
    baseline_steps_per_generation: int = 20
    baseline_alternating: bool = False
    baseline_constraint: str = "project"
    # generator-initialization heatmap
    heatmap_lo: float = -10.0
    heatmap_hi: float = 10.0
    heatmap_step: float = 2.0
    heatmap_runs: int = 20
    heatmap_generations: int = 50
    # discriminator-initialization heatmap
    fixed_mu1: float = -1.0
    fixed_mu2: float = 2.5
    disc_bound_lo: float = -10.0
    disc_bound_hi: float = 10.0
    disc_max_width: float = 0.0  # 0 = no width limit
    disc_runs: int = 50
    disc_margin: float = 0.1
    quadrant_attempts: int = 10000
    trace: bool = False
    collapse_bound_lo: float = -1.5
    collapse_bound_hi: float = 2.0
    collapse_max_width: float = 0.5
    # spatial grid
    grid_m: int = 2
    per_cell: int = 1
    execution: str = "sync"
    max_skew: int = 0  # 0 = unbounded
    workers: int = 1
    es_sigma: float = 0.01
    es_adapt: bool = False
    es_schedule: str = "per_cell"
    stagnation_window: int = 0  # 0 = disabled
    metric_lo: float = -15.0
    metric_hi: float = 15.0
    metric_step: float = 0.01
    # output
    master_seed: int = 0
    paper_scale: bool = False
    image_scale: int = 8
    svg: bool = False

    def validate(self) -> "ExperimentConfig":
        def need(cond, key, msg):
            if not cond:
                raise ConfigError(f"{key}: {msg} (got {getattr(self, key)!r})")

        need(self.experiment in EXPERIMENTS, "experiment", f"must be one of {EXPERIMENTS}")
        for key in ("runs", "pop_size", "heatmap_runs", "disc_runs", "grid_m", "per_cell", "workers",
                    "quadrant_attempts", "image_scale", "baseline_steps_per_generation"):
            need(getattr(self, key) >= 1, key, "must be a positive integer")
        for key in ("generations", "heatmap_generations", "max_skew", "stagnation_window", "master_seed"):
            need(getattr(self, key) >= 0, key, "must be >= 0")
        for key in ("mutation_step", "initial_lr", "success_threshold", "heatmap_step", "metric_step",
                    "baseline_lr_gen", "baseline_lr_disc"):
            need(getattr(self, key) > 0, key, "must be positive")
        for key in ("lr_mutation_sigma", "es_sigma", "disc_margin", "disc_max_width", "collapse_max_width"):
            need(getattr(self, key) >= 0, key, "must be >= 0")
        for key in ("selection_prob", "mutation_prob"):
            need(0.0 <= getattr(self, key) <= 1.0, key, "must lie in [0, 1]")
        need(self.mutation_kind in ("gaussian", "gradient"), "mutation_kind", "must be gaussian or gradient")
        need(self.fitness_weighting in ("uniform", "weighted"), "fitness_weighting", "must be uniform or weighted")
        need(self.execution in ("sync", "async"), "execution", "must be sync or async")
        need(self.es_schedule in ("per_cell", "per_generation"), "es_schedule", "must be per_cell or per_generation")
        need(self.es_schedule == "per_cell" or self.execution == "sync", "es_schedule",
             "per_generation needs execution = sync")
        need(self.baseline_constraint in ("project", "sort"), "baseline_constraint", "must be project or sort")
        for lo, hi in (("gen_init_lo", "gen_init_hi"), ("disc_init_lo", "disc_init_hi"), ("heatmap_lo", "heatmap_hi"),
                       ("disc_bound_lo", "disc_bound_hi"), ("metric_lo", "metric_hi"),
                       ("collapse_bound_lo", "collapse_bound_hi")):
            need(getattr(self, lo) < getattr(self, hi), lo, f"must be < {hi}")
        return self

    def with_paper_scale(self) -> "ExperimentConfig":
        """The full sweep: 0.1 steps over [-10, 10], 120 runs, 100 generations."""
        return dataclasses.replace(self, heatmap_step=0.1, heatmap_runs=120, heatmap_generations=100,
                                   disc_runs=120, paper_scale=True)

    @property
    def target(self) -> tuple[float, float]:
        return (self.target_mu1, self.target_mu2)


FIELD_TYPES = {f.name: f.type for f in fields(ExperimentConfig)}


def parse_value(key: str, raw: str):
    kind = FIELD_TYPES[key]
    raw = raw.strip()
    try:
        if kind == "bool":
            low = raw.lower()
            if low in ("1", "true", "yes", "on"):
                return True
            if low in ("0", "false", "no", "off"):
                return False
            raise ValueError(raw)
        if kind == "int":
            return int(raw)
        if kind == "float":
            return float(raw)
    except ValueError:
        raise ConfigError(f"{key}: cannot parse {raw!r} as {kind}") from None
    return raw


def read_config_file(path) -> dict:
    values = {}
    with open(path, encoding="utf-8") as fh:
        for lineno, line in enumerate(fh, 1):
            line = line.split("#", 1)[0].strip()
            if not line:
                continue
            if "=" not in line:
                raise ConfigError(f"{path}:{lineno}: expected 'key = value', got {line!r}")
            key, raw = (part.strip() for part in line.split("=", 1))
            if key not in FIELD_TYPES:
                raise ConfigError(f"{path}:{lineno}: unknown key {key!r}")
            try:
                values[key] = parse_value(key, raw)
            except ConfigError as exc:
                raise ConfigError(f"{path}:{lineno}: {exc}") from None
    return values


def load_config(path=None, overrides: dict | None = None) -> ExperimentConfig:
    """Defaults, then the file (if any), then ``overrides``; validated."""
    values = read_config_file(path) if path else {}
    for key, val in (overrides or {}).items():
        if key not in FIELD_TYPES:
            raise ConfigError(f"unknown key {key!r}")
        values[key] = parse_value(key, val) if isinstance(val, str) else val
    cfg = ExperimentConfig(**values)
    if cfg.paper_scale:
        cfg = cfg.with_paper_scale()
    return cfg.validate()


def default_out_dir() -> str:
    return os.environ.get(OUT_ENV, "results")
