"""Batch experiment runner: ``wave-lab <scenario> --config FILE [--key value ...]``.

Each scenario writes ``ledger.csv``, ``report.json`` and ``manifest.json`` to
the output directory and exits 0 iff all of its checks pass.  Configuration
precedence, lowest first: built-in defaults, scenario defaults, config file,
``--key value`` overrides.  The output directory is ``--out`` if given, else
``$WAVE_LAB_OUT``, else the ``out`` key.
"""

from __future__ import annotations

import argparse
import dataclasses
import hashlib
import json
import math
import os
import sys
import time
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, replace
from pathlib import Path

import numpy as np

from . import analysis, gfun, norms, profiles, propagator
from .errors import WaveLabError
from .gfun import GLadder
from .norms import AdmissiblePair, NormLedger
from .propagator import SolverConfig
from .spectral import RadialGrid, WaveState, sobolev_norm, sp_exponent

EXIT_OK, EXIT_FAIL, EXIT_USAGE = 0, 1, 2


class ConfigError(WaveLabError, ValueError):
    def __init__(self, field_name: str, message: str):
        super().__init__(message)
        self.field = field_name


@dataclass
class ExperimentConfig:
    scenario: str = ""
    p: float = 5.0
    g: str = "const:1.0"
    ladder_file: str = ""
    dt: float = 1e-3
    T: float = 1.0
    dt_out: float = 0.01
    R: float = 20.0
    N: int = 1024
    sign: float = -1.0
    data: str = "gaussian-bump:1.0,1.0,0.0"
    out: str = "wave-lab-out"
    margin: float = 10.0
    eps: float = 0.1
    A: float = 10.0
    C: float = 0.0  # 0 means: measure with the (4,4,1/2) Strichartz probe
    eta: float = 1.0
    delta: float = 1.0
    window: float = 0.1
    ensemble: int = 10
    rungs: int = 5
    seed: int = 0

    @property
    def grid(self) -> RadialGrid:
        return RadialGrid(self.R, self.N)

    def ladder(self) -> GLadder | None:
        return GLadder.load(self.ladder_file) if self.ladder_file else None

    def g_function(self) -> gfun.GFunction:
        return gfun.parse_g(self.g, self.ladder())

    def solver(self, **over) -> SolverConfig:
        base = dict(p=self.p, g=self.g_function(), dt=self.dt, T=self.T,
                    dt_out=self.dt_out, grid=self.grid, sign=self.sign)
        base.update(over)
        return SolverConfig(**base)

    def initial_data(self, grid: RadialGrid | None = None) -> WaveState:
        return parse_data(self.data, grid or self.grid)

    def echo(self) -> dict:
        return dataclasses.asdict(self)


SCENARIO_DEFAULTS: dict[str, dict] = {
    "linear-exactness": {"data": "eigenmode:1", "sign": 0.0},
    "energy-conservation": {},
    "scaling-covariance": {"N": 256, "T": 0.48, "dt": 4e-3, "dt_out": 0.04},
    "picard-contraction": {"T": 2.0},
    "prop-1-3-bound": {"T": 1.0, "dt": 2e-3, "dt_out": 0.01, "N": 512,
                       "data": "random-smooth:0,0.2"},
    "gwp-criterion": {"T": 3.0, "data": "gaussian-bump:2.0,1.0,0.0"},
    "scattering": {"T": 10.0, "data": "gaussian-bump:0.5,1.0,0.0"},
    "strichartz-probe": {"T": 5.0, "ensemble": 50, "data": "random-smooth:0,1.0"},
    "ladder-validate": {},
    "perturbation-compare": {"T": 0.5, "data": "gaussian-bump:0.5,1.0,0.0"},
}


def parse_data(text: str, grid: RadialGrid) -> WaveState:
    name, _, arg = text.partition(":")
    args = [a for a in arg.split(",") if a]
    try:
        if name == "gaussian-bump":
            return profiles.gaussian_bump(grid, *map(float, args))
        if name == "eigenmode":
            return profiles.eigenmode(grid, int(args[0]) if args else 1)
        if name == "random-smooth":
            seed = int(args[0]) if args else 0
            scale = float(args[1]) if len(args) > 1 else 1.0
            return profiles.random_smooth(grid, seed, scale)
    except (ValueError, TypeError, IndexError) as exc:
        raise ConfigError("data", f"bad data specification {text!r}: {exc}") from None
    raise ConfigError("data", f"unknown data profile {name!r}")


def _coerce(name: str, raw: str):
    ftype = {f.name: f.type for f in dataclasses.fields(ExperimentConfig)}.get(name)
    if ftype is None:
        raise ConfigError(name, f"unknown configuration key {name!r}")
    try:
        if ftype == "int":
            return int(raw)
        if ftype == "float":
            return float(raw)
    except ValueError:
        raise ConfigError(name, f"key {name!r} expects {ftype}, got {raw!r}") from None
    return raw


def read_config_file(path) -> dict[str, str]:
    out = {}
    try:
        lines = Path(path).read_text().splitlines()
    except OSError as exc:
        raise ConfigError("config", f"cannot read config file: {exc}") from None
    for n, line in enumerate(lines, 1):
        line = line.split("#", 1)[0].strip()
        if not line:
            continue
        if "=" not in line:
            raise ConfigError("config", f"line {n}: expected key=value, got {line!r}")
        key, value = (s.strip() for s in line.split("=", 1))
        out[key] = value
    return out


def make_config(scenario: str, file_values: dict[str, str] | None = None,
                overrides: dict[str, str] | None = None) -> ExperimentConfig:
    if scenario not in SCENARIOS:
        raise ConfigError("scenario", f"unknown scenario {scenario!r}")
    values = dict(SCENARIO_DEFAULTS.get(scenario, {}))
    for src in (file_values or {}, overrides or {}):
        for k, v in src.items():
            values[k] = _coerce(k, v) if isinstance(v, str) else v
    values["scenario"] = scenario
    cfg = ExperimentConfig(**values)
    if cfg.ladder_file and not Path(cfg.ladder_file).exists():
        raise ConfigError("ladder_file", f"ladder file {cfg.ladder_file!r} does not exist")
    try:
        cfg.solver()
    except WaveLabError as exc:
        raise ConfigError(_guess_field(str(exc)), str(exc)) from None
    parse_data(cfg.data, RadialGrid(cfg.R, 8))
    return cfg


def _guess_field(msg: str) -> str:
    for name in ("dt_out", "dt", "N", "R", "sign", "p", "g", "T"):
        if f"{name}=" in msg or msg.startswith(name):
            return name
    return "config"


# -- scenarios ------------------------------------------------------------------------

@dataclass
class ScenarioResult:
    report: dict
    checks: dict[str, bool]
    ledger: NormLedger | None = None

    @property
    def ok(self) -> bool:
        return all(self.checks.values())


def _scn_linear_exactness(cfg: ExperimentConfig, jobs: int) -> ScenarioResult:
    grid = cfg.grid
    state = profiles.eigenmode(grid, 1)
    k1 = grid.k[0]
    errs = []
    for t in np.linspace(0.0, 1.0, 101):
        u = propagator.linear_flow(state, t).u
        exact = math.cos(k1 * t) * state.u.values
        errs.append(float(np.max(np.abs(u.values - exact)) / np.max(np.abs(state.u.values))))
    d = profiles.random_smooth(grid, cfg.seed)
    s, t = 0.37, 0.61
    lhs = propagator.linear_flow(propagator.linear_flow(d, t), s)
    rhs = propagator.linear_flow(d, s + t)
    back = propagator.linear_flow(propagator.linear_flow(d, t), -t)
    scale = np.max(np.abs(d.u.coeffs)) + np.max(np.abs(d.ut.coeffs))
    group = float((np.max(np.abs(lhs.u.coeffs - rhs.u.coeffs))
                   + np.max(np.abs(lhs.ut.coeffs - rhs.ut.coeffs))) / scale)
    rev = float((np.max(np.abs(back.u.coeffs - d.u.coeffs))
                 + np.max(np.abs(back.ut.coeffs - d.ut.coeffs))) / scale)
    _, ledger = propagator.evolve(cfg.initial_data(), cfg.solver(sign=0.0), cfg.eps)
    report = {"max_eigenmode_error": max(errs), "group_law_error": group,
              "reversibility_error": rev}
    checks = {"eigenmode": max(errs) <= 1e-10, "group_law": group <= 1e-12,
              "reversibility": rev <= 1e-12}
    return ScenarioResult(report, checks, ledger)


def _scn_energy(cfg: ExperimentConfig, jobs: int) -> ScenarioResult:
    data = cfg.initial_data()
    g = cfg.g_function()
    drifts = []
    ledger = None
    for dt in (cfg.dt, cfg.dt / 2):
        traj, led = propagator.evolve(data, cfg.solver(dt=dt), cfg.eps)
        ledger = ledger or led
        drifts.append(analysis.energy_drift(traj, cfg.p, g))
    ratio = drifts[0] / drifts[1] if drifts[1] > 0 else math.inf
    report = {"drift": drifts[0], "drift_half_dt": drifts[1], "ratio": ratio}
    checks = {"drift": drifts[0] <= 1e-6, "order2": 3.5 <= ratio <= 4.5}
    return ScenarioResult(report, checks, ledger)


def covariance_discrepancy(data_spec: str, grid: RadialGrid, dt: float, lam: float,
                           t: float, p: float = 5.0) -> float:
    """Relative H^{s_p} gap between evolve(scaled data, t) and scaled(evolve(data, t / lam))."""
    g = gfun.ConstantG(1.0)
    data = parse_data(data_spec, grid)
    scaled = analysis.scaling_transform(data, lam, p)
    sp = sp_exponent(p)
    c1 = SolverConfig(p, g, dt, t, t, grid)
    c2 = SolverConfig(p, g, dt, t / lam, t / lam, grid)
    path1 = propagator.evolve(scaled, c1, with_ledger=False)[0].state(-1)
    path2 = analysis.scaling_transform(
        propagator.evolve(data, c2, with_ledger=False)[0].state(-1), lam, p)
    return float(sobolev_norm(path1.u - path2.u, sp) / sobolev_norm(path1.u, sp))


def _scn_scaling(cfg: ExperimentConfig, jobs: int) -> ScenarioResult:
    lam = 2.0
    data = cfg.initial_data()
    sp = sp_exponent(cfg.p)
    scaled = analysis.scaling_transform(data, lam, cfg.p)
    inv = abs(float(sobolev_norm(scaled.u, sp) / sobolev_norm(data.u, sp)) - 1.0)
    gaps = []
    N, dt = cfg.N, cfg.dt
    for _ in range(3):
        gaps.append(covariance_discrepancy(cfg.data, RadialGrid(cfg.R, N), dt, lam, cfg.T, cfg.p))
        N, dt = 2 * N, dt / 2
    _, ledger = propagator.evolve(data, cfg.solver(), cfg.eps)
    report = {"norm_invariance_deviation": inv, "covariance_gaps": gaps}
    checks = {"invariance": inv <= 1e-8,
              "covariance_decreasing": all(b < a for a, b in zip(gaps, gaps[1:]))}
    return ScenarioResult(report, checks, ledger)


def contraction_experiment(data: WaveState, config: SolverConfig, delta: float,
                           max_halvings: int = 20):
    """Halve delta until Picard on [0, T_l] contracts with every ratio <= 0.5."""
    for _ in range(max_halvings):
        st = propagator.smallness_time(data, delta, config)
        try:
            traj, ratios = propagator.picard_solve(data, st.T_l, config)
        except WaveLabError:
            delta /= 2
            continue
        if not ratios or max(ratios) <= 0.5:
            return delta, st, traj, ratios
        delta /= 2
    raise WaveLabError(f"no contraction after {max_halvings} halvings of delta")


def strang_reference(data: WaveState, config: SolverConfig, traj) -> "propagator.Trajectory":
    """Strang run on the Picard time grid (same step, every step sampled)."""
    h = float(traj.times[1] - traj.times[0])
    conf = replace(config, dt=h, T=float(traj.times[-1]), dt_out=h)
    return propagator.evolve(data, conf, with_ledger=False)[0]


def _scn_picard(cfg: ExperimentConfig, jobs: int) -> ScenarioResult:
    data = cfg.initial_data()
    conf = cfg.solver()
    tol = 1e-10
    delta, st, traj, ratios = contraction_experiment(data, conf, cfg.delta)
    ref = strang_reference(data, conf, traj)
    gap = float(np.max(np.abs(ref.values() - traj.values())))
    other, _ = propagator.picard_solve(data, st.T_l, conf, tol=tol, initial="zero")
    uniq = float(np.max(np.abs(other.values() - traj.values())))
    ledger = norms.build_ledger(traj.times, traj.a, traj.b, conf.grid, conf.p, cfg.eps)
    report = {"delta": delta, "T_l": st.T_l, "saturated": st.saturated, "ratios": ratios,
              "strang_discrepancy": gap, "uniqueness_gap": uniq,
              "duhamel_residual": propagator.duhamel_residual(traj, conf.p, conf.g, conf.sign)}
    checks = {"contraction": all(r <= 0.5 for r in ratios), "vs_strang": gap <= 1e-4,
              "uniqueness": uniq <= tol}
    return ScenarioResult(report, checks, ledger)


def measured_strichartz_constant(grid: RadialGrid, n: int = 50, T: float = 5.0,
                                 seed: int = 0, jobs: int = 1) -> float:
    pair = AdmissiblePair(4, 4, 0.5)
    seeds = list(range(seed, seed + n))
    if jobs > 1:
        with ProcessPoolExecutor(jobs) as ex:
            vals = list(ex.map(_probe_one, [(grid, s, pair, T) for s in seeds]))
        return max(vals)
    return max(_probe_one((grid, s, pair, T)) for s in seeds)


def _probe_one(args) -> float:
    grid, s, pair, T = args
    return norms.strichartz_probe([profiles.random_smooth(grid, s)], pair, T)


def _apriori_member(args):
    cfg, seed, C = args
    grid = cfg.grid
    name, _, rest = cfg.data.partition(":")
    scale = float(rest.split(",")[1]) if name == "random-smooth" and "," in rest else 0.2
    data = profiles.random_smooth(grid, seed, scale)
    traj, ledger = propagator.evolve(data, cfg.solver(), cfg.eps)
    A = max(cfg.A, float(norms.htilde_series(ledger)[0]))
    rep = norms.apriori_bound_check(ledger, None, A, C, cfg.g_function(), cfg.eta, cfg.p,
                                    cfg.margin)
    return rep.to_dict(), ledger


def _scn_prop13(cfg: ExperimentConfig, jobs: int) -> ScenarioResult:
    C_probe = measured_strichartz_constant(cfg.grid, seed=cfg.seed, jobs=jobs)
    C = cfg.C if cfg.C > 0 else 1.0 + C_probe
    members = [(cfg, cfg.seed + m, C) for m in range(cfg.ensemble)]
    if jobs > 1:
        with ProcessPoolExecutor(jobs) as ex:
            results = list(ex.map(_apriori_member, members))
    else:
        results = [_apriori_member(m) for m in members]
    reports = [r for r, _ in results]
    report = {"C_probe": C_probe, "C": C, "members": reports}
    checks = {"bound_holds_all": all(r["holds"] for r in reports)}
    return ScenarioResult(report, checks, results[0][1])


def _scn_gwp(cfg: ExperimentConfig, jobs: int) -> ScenarioResult:
    data = cfg.initial_data()
    _, foc = propagator.evolve(data, cfg.solver(sign=1.0), cfg.eps)
    rep_f = analysis.blowup_monitor(foc, cfg.window)
    small = profiles.gaussian_bump(cfg.grid, 0.5, 1.0)
    _, defoc = propagator.evolve(small, cfg.solver(sign=-1.0), cfg.eps)
    rep_d = analysis.blowup_monitor(defoc, 0.5)
    report = {"focusing": dataclasses.asdict(rep_f), "defocusing": dataclasses.asdict(rep_d)}
    checks = {"focusing_blowup": rep_f.verdict == "blow-up-suspected" and rep_f.accelerating,
              "defocusing_quiescent": rep_d.verdict == "quiescent"}
    return ScenarioResult(report, checks, foc)


def _scn_scattering(cfg: ExperimentConfig, jobs: int) -> ScenarioResult:
    data = cfg.initial_data()
    traj, ledger = propagator.evolve(data, cfg.solver(), cfg.eps)
    sc = analysis.scattering_extract(traj, cfg.p)
    lin, _ = propagator.evolve(data, cfg.solver(sign=0.0), with_ledger=False)
    sl = analysis.scattering_extract(lin, cfg.p)
    report = {"differences": sc.differences, "checkpoints": sc.checkpoint_times,
              "linear_differences": sl.differences}
    checks = {"decreasing": sc.scatter_detected, "linear_constant": max(sl.differences) <= 1e-12}
    return ScenarioResult(report, checks, ledger)


def _scn_strichartz(cfg: ExperimentConfig, jobs: int) -> ScenarioResult:
    vals = {}
    for N in (cfg.N // 2, cfg.N):
        vals[N] = measured_strichartz_constant(RadialGrid(cfg.R, N), cfg.ensemble, cfg.T,
                                               cfg.seed, jobs)
    lo, hi = min(vals.values()), max(vals.values())
    _, ledger = propagator.evolve(cfg.initial_data(), cfg.solver(sign=0.0, T=cfg.T), cfg.eps)
    report = {"max_ratio": {str(k): v for k, v in vals.items()}}
    checks = {"finite": all(math.isfinite(v) for v in vals.values()),
              "stable_factor_2": hi <= 2 * lo}
    return ScenarioResult(report, checks, ledger)


def _scn_ladder(cfg: ExperimentConfig, jobs: int) -> ScenarioResult:
    ladder = cfg.ladder() or gfun.build_ladder(cfg.A, cfg.rungs)
    bad = gfun.check_ladder(ladder)
    roundtrip = GLadder.from_json(ladder.to_json()).to_json() == ladder.to_json()
    named = {}
    for g in (gfun.ConstantG(1.0), gfun.LogG(), gfun.LogLogG()):
        named[g.spec()] = gfun.validate_conditions(g, 1e9).to_dict()
    top = gfun.validate_conditions(ladder.g(ladder.depth), ladder.Cp(ladder.depth))
    integrals = [gfun.rung_integral(ladder.g(r.i), r.start, r.Cp) for r in ladder.rungs]
    report = {"ladder": ladder.to_dict(), "violations": bad, "rung_integrals": integrals,
              "named": named, "ladder_conditions": top.to_dict()}
    checks = {
        "ladder_invariants": not bad, "roundtrip": roundtrip,
        "const_passes": all(named["const:1.0"][k] for k in ("passes_c2", "passes_c3", "passes_c4")),
        "log_fails_c4": named["log"]["c4_verdict"] == "converges",
        "loglog_diverges": named[gfun.LogLogG().spec()]["c4_verdict"] == "diverges",
        "rung_integrals": all(v >= r.i * (1 - 1e-6) for v, r in zip(integrals, ladder.rungs)),
    }
    return ScenarioResult(report, checks, None)


def _scn_perturbation(cfg: ExperimentConfig, jobs: int) -> ScenarioResult:
    ladder = cfg.ladder() or gfun.build_ladder(cfg.A, max(cfg.rungs, 1))
    i = 1
    grid = cfg.grid
    small = analysis.perturbation_compare(cfg.initial_data(), i, ladder, cfg.p, cfg.T,
                                          cfg.solver())
    plateau = plateau_comparison(ladder, i, grid, cfg.p)
    res = []
    for dt_out in (2 * cfg.dt_out, cfg.dt_out):
        r = analysis.perturbation_compare(cfg.initial_data(), i, ladder, cfg.p, cfg.T,
                                          cfg.solver(dt_out=dt_out),
                                          estimate_stepper_error=False)
        res.append(r.rescaled_residual)
    ratio = res[0] / res[1]
    _, ledger = propagator.evolve(cfg.initial_data(), cfg.solver(g=ladder.g(i)), cfg.eps)
    report = {"small_data": dataclasses.asdict(small), "plateau": dataclasses.asdict(plateau),
              "rescaled_residuals": res, "rescaled_residual_ratio": ratio}
    checks = {"plateau_within_stepper_error": plateau.htilde_difference <= plateau.stepper_error,
              "rescaling_order2": 3.5 <= ratio <= 4.5}
    return ScenarioResult(report, checks, ledger)


def plateau_comparison(ladder: GLadder, i: int, grid: RadialGrid, p: float = 5.0,
                       amplitude: float = 1000.0, T: float = 4e-6, dt: float = 4e-9):
    """u_[i] vs v_[i] for a bump whose core sits far above C'_i, over a few nonlinear periods."""
    data = profiles.gaussian_bump(grid, amplitude, 1.0)
    conf = SolverConfig(p, gfun.ConstantG(1.0), dt, T, 10 * dt, grid)
    return analysis.perturbation_compare(data, i, ladder, p, T, conf)


SCENARIOS = {
    "linear-exactness": _scn_linear_exactness,
    "energy-conservation": _scn_energy,
    "scaling-covariance": _scn_scaling,
    "picard-contraction": _scn_picard,
    "prop-1-3-bound": _scn_prop13,
    "gwp-criterion": _scn_gwp,
    "scattering": _scn_scattering,
    "strichartz-probe": _scn_strichartz,
    "ladder-validate": _scn_ladder,
    "perturbation-compare": _scn_perturbation,
}


# -- running and writing ------------------------------------------------------------------

def _write_outputs(out: Path, cfg: ExperimentConfig, result: ScenarioResult,
                   runtime: float) -> None:
    out.mkdir(parents=True, exist_ok=True)
    ledger_text = result.ledger.to_csv() if result.ledger is not None else "t\n"
    report_doc = {"scenario": cfg.scenario, "ok": result.ok, "checks": result.checks,
                  **result.report}
    report_text = analysis.report_json(report_doc)
    (out / "ledger.csv").write_text(ledger_text)
    (out / "report.json").write_text(report_text)
    digest = hashlib.sha256((ledger_text + report_text).encode()).hexdigest()
    manifest = {"schema_version": analysis.REPORT_SCHEMA_VERSION, "config": cfg.echo(),
                "content_hash": digest,
                "volatile": {"timestamp": time.strftime("%Y-%m-%dT%H:%M:%S%z"),
                             "runtime_s": runtime}}
    (out / "manifest.json").write_text(json.dumps(manifest, indent=2, sort_keys=True) + "\n")


def run_scenario(cfg: ExperimentConfig, out: Path | None = None, jobs: int = 1) -> int:
    out = Path(out or cfg.out)
    t0 = time.perf_counter()
    try:
        result = SCENARIOS[cfg.scenario](cfg, jobs)
    except WaveLabError as exc:
        _emit_error(out, type(exc).__name__, str(exc), getattr(exc, "field", None))
        return EXIT_FAIL
    _write_outputs(out, cfg, result, time.perf_counter() - t0)
    for name, ok in result.checks.items():
        print(f"{'PASS' if ok else 'FAIL'} {cfg.scenario}:{name}")
    return EXIT_OK if result.ok else EXIT_FAIL


def _emit_error(out: Path | None, kind: str, message: str, field_name: str | None) -> None:
    doc = {"error": kind, "message": message}
    if field_name:
        doc["field"] = field_name
    text = json.dumps(doc, sort_keys=True)
    print(text)
    if out is not None:
        try:
            out.mkdir(parents=True, exist_ok=True)
            (out / "error.json").write_text(text + "\n")
        except OSError:
            pass


def build_ladder_command(A: float, count: int, C_source=None, extend: str | None = None,
                         measure_config: SolverConfig | None = None) -> GLadder:
    """Build (or extend) a ladder.

    ``C_source`` is a path to a text table of ``i C_i`` lines, ``"measured"``
    (ensemble surrogate, needs ``measure_config``) or None for max(i, C'_i).
    """
    if count < 1:
        raise ConfigError("rungs", f"rung count must be >= 1, got {count}")
    base = GLadder.load(extend) if extend else None
    if C_source == "measured":
        if measure_config is None:
            raise ConfigError("certificate", "measured C_i needs a solver configuration")
        C_values = lambda lad, i: analysis.measure_rung_constant(lad, i, measure_config)  # noqa: E731
    elif C_source:
        C_values = {}
        for line in Path(C_source).read_text().splitlines():
            line = line.split("#", 1)[0].split()
            if line:
                C_values[int(line[0])] = float(line[1])
    else:
        C_values = None
    return gfun.build_ladder(A if base is None else base.A, count, C_values, base)


def _parse_overrides(tokens: list[str]) -> dict[str, str]:
    out = {}
    it = iter(tokens)
    for tok in it:
        if not tok.startswith("--"):
            raise ConfigError("arguments", f"unexpected argument {tok!r}")
        key = tok[2:]
        if "=" in key:
            key, value = key.split("=", 1)
        else:
            try:
                value = next(it)
            except StopIteration:
                raise ConfigError(key, f"option --{key} needs a value") from None
        out[key.replace("-", "_")] = value
    return out


def main(argv: list[str] | None = None) -> int:
    argv = list(sys.argv[1:] if argv is None else argv)
    if argv and argv[0] == "build-ladder":
        return _main_build_ladder(argv[1:])
    ap = argparse.ArgumentParser(prog="wave-lab", description=__doc__.splitlines()[0])
    ap.add_argument("scenario", help="one of: " + ", ".join(SCENARIOS) + ", build-ladder")
    ap.add_argument("--config", default=None)
    ap.add_argument("--jobs", type=int, default=1)
    ap.add_argument("--out", default=None)
    args, rest = ap.parse_known_args(argv)
    env_out = os.environ.get("WAVE_LAB_OUT")
    out = Path(args.out or env_out) if (args.out or env_out) else None
    try:
        file_values = read_config_file(args.config) if args.config else {}
        cfg = make_config(args.scenario, file_values, _parse_overrides(rest))
    except ConfigError as exc:
        _emit_error(out, "ConfigError", str(exc), exc.field)
        return EXIT_USAGE
    return run_scenario(cfg, out or Path(cfg.out), max(1, args.jobs))


def _main_build_ladder(argv: list[str]) -> int:
    ap = argparse.ArgumentParser(prog="wave-lab build-ladder")
    ap.add_argument("--A", type=float, default=10.0)
    ap.add_argument("--rungs", type=int, required=True)
    ap.add_argument("--certificate", default=None,
                    help="C_i table file, or 'measured'; default C_i = max(i, C'_i)")
    ap.add_argument("--extend", default=None, help="existing ladder JSON to extend")
    ap.add_argument("--out", required=True)
    args = ap.parse_args(argv)
    try:
        measure = None
        if args.certificate == "measured":
            measure = SolverConfig(5.0, gfun.ConstantG(1.0), 2e-3, 1.0, 0.02, RadialGrid(20.0, 256))
        ladder = build_ladder_command(args.A, args.rungs, args.certificate, args.extend, measure)
    except WaveLabError as exc:
        _emit_error(None, type(exc).__name__, str(exc), getattr(exc, "field", None))
        return EXIT_USAGE if isinstance(exc, ConfigError) else EXIT_FAIL
    ladder.save(args.out)
    print(json.dumps({"ladder": args.out, "rungs": ladder.depth}))
    return EXIT_OK


if __name__ == "__main__":
    sys.exit(main())
