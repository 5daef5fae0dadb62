"""Command-line front end.

Configuration is a flat ``key = value`` document; ``#`` starts a comment.
Command-line flags override the file. Every command writes CSV (to --out or
stdout) and prints a one-line summary on stderr; failures print a single
JSON error line and exit non-zero.
"""
from __future__ import annotations

import argparse
import csv
import dataclasses
import json
import math
import sys
from dataclasses import dataclass, field

import numpy as np

from .channel import ChannelError, SystemParams, compute_cir, effective_memory, validate_gaussian
from .detection import Detector, build_transition_table
from .mutual_info import SCENARIOS, Scenario, mutual_information
from .optimize import (ThresholdSearch, air, air_surface, capacity_sweep,
                       optimize_threshold)
from .sources import IndependentSource, MarkovSource

COMMANDS = ("cir", "memory", "transitions", "mi", "capacity", "sweep", "surface", "simulate",
            "validate")

_PHYSICAL = {f.name: f.type for f in dataclasses.fields(SystemParams)}


class ConfigError(ValueError):
    pass


@dataclass(frozen=True)
class RunConfig:
    params: SystemParams = field(default_factory=SystemParams)
    scenario: str | None = None
    t_sym: float = 0.4
    t_sym_min: float = 0.2
    t_sym_max: float = 1.5
    t_sym_step: float = 0.05
    grid_step: float = 0.01
    coarse_steps: int = 256
    refine_rounds: int = 3
    refine_steps: int | None = 5
    tau_lo: float | None = None
    tau_hi: float | None = None
    threshold: float | None = None
    p: float = 0.5
    q: float = 0.5
    lambda0: float = 0.5
    memory_cap: int = 22
    n_symbols: int = 1_000_000
    truncate: bool = False
    out: str | None = None
    seed: int = 0
    workers: int = 1

    @property
    def search(self) -> ThresholdSearch:
        return ThresholdSearch(lo=self.tau_lo, hi=self.tau_hi, coarse_steps=self.coarse_steps,
                               refine_rounds=self.refine_rounds, refine_steps=self.refine_steps)

    def scenario_obj(self, default="crr-isia") -> Scenario:
        return Scenario.parse(self.scenario or default)

    def source(self, scenario: Scenario):
        if scenario.markov:
            return MarkovSource(self.p, self.q)
        return IndependentSource(self.lambda0)


_RUN_FIELDS = {f.name: f for f in dataclasses.fields(RunConfig) if f.name != "params"}


def _convert(key: str, raw: str):
    typ = str(_PHYSICAL.get(key) or _RUN_FIELDS[key].type)
    if raw.lower() in ("", "none") and "None" in typ:
        return None
    try:
        if typ.startswith("int"):
            return int(raw)
        if typ.startswith("float"):
            return float(raw)
        if typ.startswith("bool"):
            if raw.lower() in ("1", "true", "yes", "on"):
                return True
            if raw.lower() in ("0", "false", "no", "off"):
                return False
            raise ValueError(raw)
    except ValueError:
        raise ConfigError(f"{key}: cannot parse {raw!r} as {typ}") from None
    return raw


def _build(values: dict) -> RunConfig:
    phys = {k: v for k, v in values.items() if k in _PHYSICAL}
    rest = {k: v for k, v in values.items() if k not in _PHYSICAL}
    try:
        params = SystemParams(**phys)
    except ChannelError as exc:
        raise ConfigError(str(exc)) from None
    cfg = RunConfig(params=params, **rest)
    _validate(cfg)
    return cfg


def _validate(cfg: RunConfig):
    def need(ok, msg):
        if not ok:
            raise ConfigError(msg)

    if cfg.scenario is not None:
        need(cfg.scenario.lower() in SCENARIOS, f"scenario must be one of {SCENARIOS}")
    need(cfg.t_sym > 0, "t_sym must be > 0")
    need(0 < cfg.t_sym_min <= cfg.t_sym_max, "need 0 < t_sym_min <= t_sym_max")
    need(cfg.t_sym_step > 0, "t_sym_step must be > 0")
    n = round(1 / cfg.grid_step) if cfg.grid_step > 0 else 0
    need(n >= 2 and abs(n * cfg.grid_step - 1) < 1e-9, "grid_step must divide 1")
    need(cfg.coarse_steps >= 16, "coarse_steps must be >= 16")
    need(cfg.refine_rounds >= 0, "refine_rounds must be >= 0")
    need(cfg.refine_steps is None or cfg.refine_steps >= 2, "refine_steps must be >= 2")
    if cfg.tau_lo is not None and cfg.tau_hi is not None:
        need(cfg.tau_lo < cfg.tau_hi, "tau_lo must be < tau_hi")
    need(cfg.threshold is None or math.isfinite(cfg.threshold), "threshold must be finite")
    for k in ("p", "q", "lambda0"):
        need(0 <= getattr(cfg, k) <= 1, f"{k} must lie in [0, 1]")
    need(cfg.p + cfg.q > 0, "p + q must be > 0")
    need(cfg.memory_cap >= 1, "memory_cap must be >= 1")
    need(cfg.n_symbols >= 1, "n_symbols must be >= 1")
    need(cfg.workers >= 1, "workers must be >= 1")


def parse_config(text: str, overrides: dict | None = None) -> RunConfig:
    """Parse a ``key = value`` document; omitted physical fields keep their defaults."""
    values = {}
    for lineno, line in enumerate(text.splitlines(), 1):
        line = line.split("#", 1)[0].strip()
        if not line:
            continue
        if "=" not in line:
            raise ConfigError(f"line {lineno}: expected 'key = value'")
        key, raw = (s.strip() for s in line.split("=", 1))
        if key not in _PHYSICAL and key not in _RUN_FIELDS:
            raise ConfigError(f"line {lineno}: unknown key {key!r}")
        if key in values:
            raise ConfigError(f"line {lineno}: duplicate key {key!r}")
        values[key] = _convert(key, raw)
    values.update({k: v for k, v in (overrides or {}).items() if v is not None})
    return _build(values)


# -- output helpers --------------------------------------------------------

def fmt(x) -> str:
    if x is None:
        return ""
    if isinstance(x, (int, np.integer, str)):
        return str(x)
    return f"{float(x):.9g}"


class _Output:
    def __init__(self, path):
        self.path = path
        self.fh = None

    def __enter__(self):
        self.fh = open(self.path, "w", newline="") if self.path else sys.stdout
        return csv.writer(self.fh, lineterminator="\n")

    def __exit__(self, *exc):
        if self.path:
            self.fh.close()


def _summary(msg: str):
    print(msg, file=sys.stderr)


def _threshold(cfg: RunConfig, scenario, cir, src) -> float:
    if cfg.threshold is not None:
        return cfg.threshold
    tau, _ = optimize_threshold(scenario, cir, cfg.params, src, cfg.search)
    return tau


# -- commands --------------------------------------------------------------

def cmd_cir(cfg: RunConfig):
    cir = compute_cir(cfg.params, cfg.t_sym, cfg.memory_cap)
    val = validate_gaussian(cfg.params, cir)
    with _Output(cfg.out) as w:
        w.writerow(["i", "h", "gaussian_ratio", "gaussian_valid"])
        for i, (h, r, ok) in enumerate(zip(cir.h, val.ratios, val.tap_valid), 1):
            w.writerow([i, fmt(h), fmt(r), int(ok)])
    _summary(f"cir t_sym={fmt(cir.t_sym)} M={cir.memory} sum_h={fmt(cir.h.sum())} "
             f"gaussian_valid={val.valid}")


def cmd_memory(cfg: RunConfig):
    est = effective_memory(cfg.params, cfg.t_sym, cfg.memory_cap)
    with _Output(cfg.out) as w:
        w.writerow(["t_sym", "t_alpha", "M", "degenerate"])
        w.writerow([fmt(cfg.t_sym), fmt(est.t_alpha), est.memory, int(est.degenerate)])
    _summary(f"M = {est.memory} (t_sym={fmt(cfg.t_sym)}, t_alpha={fmt(est.t_alpha)})")


def cmd_transitions(cfg: RunConfig):
    sc = cfg.scenario_obj()
    cir = compute_cir(cfg.params, cfg.t_sym, cfg.memory_cap)
    tau = _threshold(cfg, sc, cir, cfg.source(sc))
    table = build_transition_table(cir, cfg.params, Detector(tau), cfg.memory_cap)
    if cfg.out:
        with open(cfg.out, "w", newline="") as fh:
            table.to_csv(fh)
    else:
        table.to_csv(sys.stdout)
    _summary(f"transitions M={cir.memory} tau={fmt(tau)} rows={2 * table.p1.shape[0]}")


def cmd_mi(cfg: RunConfig):
    sc = cfg.scenario_obj()
    cir = compute_cir(cfg.params, cfg.t_sym, cfg.memory_cap)
    src = cfg.source(sc)
    tau = _threshold(cfg, sc, cir, src)
    res = mutual_information(sc, cir, cfg.params, Detector(tau), src)
    with _Output(cfg.out) as w:
        w.writerow(["scenario", "t_sym", "M", "tau", "mi_bits_per_use", "air_bits_per_s",
                    "clipped"])
        w.writerow([sc.name, fmt(cfg.t_sym), cir.memory, fmt(tau), fmt(res.mi),
                    fmt(air(res.mi, cfg.t_sym)), int(res.clipped)])
    _summary(f"mi {sc.name} M={cir.memory} tau={fmt(tau)} mi={fmt(res.mi)} bit/use")


SWEEP_HEADER = ["t_sym", "scenario", "M", "capacity_bits_per_s", "mi_bits_per_use", "tau",
                "param1", "param2"]


def _sweep_row(res):
    return [fmt(res.t_sym), res.scenario, res.memory, fmt(res.air), fmt(res.mi), fmt(res.tau),
            fmt(res.param1), fmt(res.param2)]


def cmd_capacity(cfg: RunConfig):
    sc = cfg.scenario_obj()
    surf = air_surface(sc, cfg.params, cfg.t_sym, cfg.grid_step, cfg.search, cfg.workers,
                       memory_cap=cfg.memory_cap)
    res = surf.capacity()
    with _Output(cfg.out) as w:
        w.writerow(SWEEP_HEADER)
        w.writerow(_sweep_row(res))
    _summary(f"capacity {sc.name} t_sym={fmt(res.t_sym)} C={fmt(res.air)} bit/s "
             f"at {tuple(res.argmax)} tau={fmt(res.tau)}")


def cmd_sweep(cfg: RunConfig):
    names = [cfg.scenario] if cfg.scenario else list(SCENARIOS)
    best = {}
    skipped = 0
    with _Output(cfg.out) as w:
        w.writerow(SWEEP_HEADER)
        for name in names:
            pts = capacity_sweep(name, cfg.params, (cfg.t_sym_min, cfg.t_sym_max),
                                 cfg.t_sym_step, cfg.grid_step, cfg.search, cfg.workers,
                                 cfg.memory_cap)
            for pt in pts:
                if pt.result is None:
                    skipped += 1
                    continue
                w.writerow(_sweep_row(pt.result))
                if name not in best or pt.result.air > best[name].air:
                    best[name] = pt.result
    peaks = " ".join(f"{k}:C={fmt(v.air)}@{fmt(v.t_sym)}" for k, v in best.items())
    _summary(f"sweep {peaks} skipped={skipped}")


def cmd_surface(cfg: RunConfig):
    sc = cfg.scenario_obj()
    surf = air_surface(sc, cfg.params, cfg.t_sym, cfg.grid_step, cfg.search, cfg.workers,
                       memory_cap=cfg.memory_cap)
    with _Output(cfg.out) as w:
        w.writerow(["param1", "param2", "tau", "air"])
        for p1, p2, tau, a in surf.rows():
            w.writerow([fmt(p1), fmt(p2), fmt(tau), fmt(a)])
    res = surf.capacity()
    _summary(f"surface {sc.name} t_sym={fmt(cfg.t_sym)} M={surf.memory} max={fmt(res.air)} "
             f"at {tuple(res.argmax)}")


def cmd_simulate(cfg: RunConfig):
    from .montecarlo import SimConfig, empirical_mi, simulate_stream

    sc = cfg.scenario_obj()
    cir = compute_cir(cfg.params, cfg.t_sym, cfg.memory_cap)
    src = cfg.source(sc)
    tau = _threshold(cfg, sc, cir, src)
    sim = SimConfig(n_symbols=cfg.n_symbols, seed=cfg.seed, truncate=cfg.truncate,
                    workers=cfg.workers)
    counts = simulate_stream(cfg.params, cfg.t_sym, src, Detector(tau), sim, memory=cir.memory)
    if cfg.out:
        with open(cfg.out, "w", newline="") as fh:
            counts.to_csv(fh)
    else:
        counts.to_csv(sys.stdout)
    est = empirical_mi(counts, counts.symbols, sc, cir.memory)
    _summary(f"simulate {sc.name} n={cfg.n_symbols} M={cir.memory} tau={fmt(tau)} "
             f"plugin_mi={fmt(est.mi)}")


def cmd_validate(cfg: RunConfig):
    from .montecarlo import SimConfig, run_validation

    sc = cfg.scenario_obj()
    cir = compute_cir(cfg.params, cfg.t_sym, cfg.memory_cap)
    src = cfg.source(sc)
    tau = _threshold(cfg, sc, cir, src)
    sim = SimConfig(n_symbols=cfg.n_symbols, seed=cfg.seed, workers=cfg.workers)
    checks = run_validation(cfg.params, cir, src, Detector(tau), sim, scenario=sc.name)
    with _Output(cfg.out) as w:
        w.writerow(["check", "value", "limit", "pass"])
        for c in checks:
            w.writerow([c.name, fmt(c.value), fmt(c.limit), int(c.passed)])
    for c in checks:
        _summary(f"{'PASS' if c.passed else 'FAIL'} {c.name} value={fmt(c.value)} "
                 f"limit={fmt(c.limit)}")
    n_fail = sum(not c.passed for c in checks)
    _summary(f"validate {len(checks) - n_fail}/{len(checks)} passed")
    return 1 if n_fail else 0


HANDLERS = {name: globals()[f"cmd_{name}"] for name in COMMANDS}


def build_parser() -> argparse.ArgumentParser:
    ap = argparse.ArgumentParser(prog="mcair", description=__doc__.splitlines()[0])
    ap.add_argument("command", choices=COMMANDS)
    ap.add_argument("--config", metavar="PATH")
    ap.add_argument("--out", metavar="PATH")
    ap.add_argument("--seed", type=int)
    ap.add_argument("--workers", type=int)
    ap.add_argument("--t-sym", type=float, dest="t_sym")
    ap.add_argument("--scenario", choices=SCENARIOS)
    ap.add_argument("--grid-step", type=float, dest="grid_step")
    return ap


def _error(kind: str, msg: str, code: int = 2) -> int:
    print(json.dumps({"error": kind, "message": msg}), file=sys.stderr)
    return code


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    overrides = {k: getattr(args, k) for k in ("out", "seed", "workers", "t_sym", "scenario",
                                               "grid_step")}
    try:
        text = ""
        if args.config:
            with open(args.config) as fh:
                text = fh.read()
        cfg = parse_config(text, overrides)
        return HANDLERS[args.command](cfg) or 0
    except ConfigError as exc:
        return _error("config", str(exc))
    except ChannelError as exc:
        return _error(type(exc).__name__, str(exc))
    except (OSError, ValueError, TypeError) as exc:
        return _error(type(exc).__name__, str(exc))


if __name__ == "__main__":
    sys.exit(main())
