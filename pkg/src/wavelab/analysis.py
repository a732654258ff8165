"""Physics-level diagnostics on trajectories and ledgers."""

from __future__ import annotations

import json
import math
from dataclasses import asdict, dataclass, field, replace

import numpy as np
from scipy import integrate

from .errors import DomainError, GeometryError
from .gfun import ConstantG, GFunction, GLadder, LadderG
from .norms import (DEFAULT_EPS, NormLedger, _interval, _interval_max, build_ledger,
                    hdot_key, hdot_ut_key, q_quantity, s_norm, x_norm)
from .propagator import (SolverConfig, Trajectory, duhamel_residual, evolve,
                         free_coeffs)
from .spectral import (RadialField, WaveState, _sobolev_from_coeffs, radial_integral,
                       sp_exponent)

REPORT_SCHEMA_VERSION = 1

_GL_X, _GL_W = np.polynomial.legendre.leggauss(48)


def report_json(report) -> str:
    """Serialize a report dataclass (or dict) with its schema version."""
    doc = asdict(report) if hasattr(report, "__dataclass_fields__") else dict(report)
    doc = {"schema_version": REPORT_SCHEMA_VERSION, **doc}
    return json.dumps(_plain(doc), indent=2, sort_keys=True) + "\n"


def _plain(obj):
    if isinstance(obj, dict):
        return {str(k): _plain(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [_plain(v) for v in obj]
    if isinstance(obj, np.ndarray):
        return [_plain(v) for v in obj.tolist()]
    if isinstance(obj, (np.floating, float)):
        v = float(obj)
        return v if math.isfinite(v) else repr(v)
    if isinstance(obj, (np.integer,)):
        return int(obj)
    if isinstance(obj, (np.bool_,)):
        return bool(obj)
    return obj


# -- energy -------------------------------------------------------------------------

def potential_density(z, p: float, g: GFunction) -> np.ndarray:
    """F(z) = int_0^z s^p g(s) ds for z >= 0 (vectorized)."""
    z = np.asarray(z, dtype=float)
    if g.is_constant():
        return float(g(1.0)) * z ** (p + 1.0) / (p + 1.0)
    bps = np.array([0.0] + sorted(math.exp(b) for b in g.log_breakpoints()
                                  if b < 700))
    f = lambda s: s**p * float(g(s))  # noqa: E731
    Fb = np.zeros(len(bps))
    for j in range(1, len(bps)):
        Fb[j] = Fb[j - 1] + integrate.quad(f, bps[j - 1], bps[j], epsabs=0, epsrel=1e-13)[0]
    j = np.searchsorted(bps, z, side="right") - 1
    lo = bps[j]
    half = 0.5 * (z - lo)
    s = lo[..., None] + half[..., None] * (_GL_X + 1.0)
    return Fb[j] + half * np.sum(_GL_W * s**p * g(s), axis=-1)


def energy(state: WaveState, p: float, g: GFunction) -> float:
    """1/2 |u_t|_2^2 + 1/2 |D u|_2^2 + 4 pi int F(|u|) r^2 dr."""
    grid = state.grid
    kinetic = 0.5 * _sobolev_from_coeffs(state.ut.coeffs, grid, 0.0) ** 2
    gradient = 0.5 * _sobolev_from_coeffs(state.u.coeffs, grid, 1.0) ** 2
    potential = radial_integral(potential_density(np.abs(state.u.values), p, g), grid)
    return float(kinetic + gradient + potential)


def energy_series(traj: Trajectory, p: float, g: GFunction) -> np.ndarray:
    return np.array([energy(traj.state(k), p, g) for k in range(len(traj))])


def energy_drift(traj: Trajectory, p: float, g: GFunction) -> float:
    """max_k |E(t_k) - E(t_0)| / max(E(t_0), 1e-30)."""
    E = energy_series(traj, p, g)
    return float(np.max(np.abs(E - E[0])) / max(E[0], 1e-30))


# -- scaling ------------------------------------------------------------------------

def support_radius(field_: RadialField, rel_tol: float = 1e-10) -> float:
    mod = np.abs(field_.values)
    peak = mod.max()
    if peak == 0:
        return 0.0
    return float(field_.grid.nodes[np.nonzero(mod > rel_tol * peak)[0][-1]])


def _stretch(f: RadialField, lam: float) -> np.ndarray:
    """Nodal values of u(r / lam), evaluated through the sine series."""
    grid = f.grid
    r = grid.nodes
    M = np.sin(np.outer(r / lam, grid.k))
    return (M @ f.coeffs) * lam / r


def scaling_transform(state: WaveState, lam: float, p: float) -> WaveState:
    """u_lam(x) = lam^(-2/(p-1)) u(x / lam), u_t picks up one more 1/lam."""
    if not lam > 0:
        raise DomainError(f"scale factor must be positive, got {lam}")
    if lam == 1:
        return state
    grid = state.grid
    support = max(support_radius(state.u), support_radius(state.ut))
    if lam * support > grid.R:
        raise GeometryError(f"scaled support {lam * support:.3g} exceeds R = {grid.R}")
    e = 2.0 / (p - 1.0)
    u = RadialField.from_values(lam**-e * _stretch(state.u, lam), grid)
    ut = RadialField.from_values(lam ** (-e - 1.0) * _stretch(state.ut, lam), grid)
    return WaveState(u, ut)


# -- blow-up criterion ---------------------------------------------------------------

@dataclass
class BlowupReport:
    verdict: str
    truncated: bool
    window: float
    window_ends: list[float]
    window_s_norms: list[float]
    window_q: list[float]
    growth_rate: float
    growth_factor: float
    accelerating: bool
    total_s_norm: float


def blowup_monitor(ledger: NormLedger, window: float, growth_threshold: float = 2.0) -> BlowupReport:
    """S-norm and Q over trailing windows, an exponential growth fit, and a verdict.

    A truncated ledger is always 'blow-up-suspected'.  Otherwise the verdict is
    'growing' when the last window's S-norm exceeds ``growth_threshold`` times
    the first window's, and 'quiescent' otherwise.
    """
    t = ledger.times
    t_end = float(t[-1])
    n = max(1, int(math.floor((t_end - t[0]) / window + 1e-9)))
    ends = [t_end - j * window for j in range(n - 1, -1, -1)]
    s_vals, q_vals = [], []
    for b in ends:
        a = max(float(t[0]), b - window)
        s_vals.append(s_norm(ledger, (a, b)) if len(t) > 1 else 0.0)
        q_vals.append(q_quantity(ledger, (a, b)) if len(t) > 1 else 0.0)
    s_arr = np.array(s_vals)
    positive = s_arr > 0
    if positive.sum() >= 2:
        rate = float(np.polyfit(np.array(ends)[positive], np.log(s_arr[positive]), 1)[0])
    else:
        rate = 0.0
    factor = float(s_arr[-1] / s_arr[0]) if s_arr[0] > 0 else (math.inf if s_arr[-1] > 0 else 1.0)
    accel = bool(len(s_arr) >= 3 and np.all(np.diff(s_arr[-3:]) > 0))
    if ledger.truncated:
        verdict = "blow-up-suspected"
    elif factor > growth_threshold:
        verdict = "growing"
    else:
        verdict = "quiescent"
    return BlowupReport(verdict, ledger.truncated, float(window), ends, s_vals, q_vals,
                        rate, factor, accel, s_norm(ledger) if len(t) > 1 else 0.0)


# -- scattering ----------------------------------------------------------------------

@dataclass
class ScatterCandidate:
    u_plus: np.ndarray = field(repr=False)
    ut_plus: np.ndarray = field(repr=False)
    checkpoint_times: list[float]
    differences: list[float]
    scatter_detected: bool

    def state(self, grid) -> WaveState:
        return WaveState.from_coeffs(self.u_plus, self.ut_plus, grid)


def default_checkpoints(T: float) -> list[float]:
    return [T / 2, 3 * T / 4, 7 * T / 8, T]


def htilde_pair_norm(a, b, grid, p) -> np.ndarray:
    """H~^2 x H~^1 norm of coefficient pairs, matching norms.htilde_series."""
    sp = sp_exponent(p)
    u = _sobolev_from_coeffs(a, grid, 2.0) + _sobolev_from_coeffs(a, grid, sp)
    ut = _sobolev_from_coeffs(b, grid, 1.0) + _sobolev_from_coeffs(b, grid, sp - 1.0)
    return np.hypot(u, ut)


def scattering_extract(traj: Trajectory, p: float, checkpoints=None) -> ScatterCandidate:
    """Pull back each checkpoint state by the inverse free flow and form Cauchy differences."""
    if checkpoints is None:
        checkpoints = default_checkpoints(float(traj.times[-1]))
    checkpoints = [float(c) for c in checkpoints]
    if len(checkpoints) < 4:
        raise DomainError("at least 4 checkpoints are required")
    if any(b <= a for a, b in zip(checkpoints, checkpoints[1:])):
        raise DomainError(f"checkpoints must be strictly increasing: {checkpoints}")
    idx = [int(np.argmin(np.abs(traj.times - c))) for c in checkpoints]
    tol = 1e-9 * max(1.0, float(traj.times[-1]))
    for c, k in zip(checkpoints, idx):
        if abs(traj.times[k] - c) > tol:
            raise DomainError(f"checkpoint {c} is not a trajectory sample time")
    pulled = []
    for k in idx:
        a, b = free_coeffs(traj.a[k], traj.b[k], traj.grid, [-traj.times[k]])
        pulled.append((a[0], b[0]))
    d = [float(htilde_pair_norm(a1 - a2, b1 - b2, traj.grid, p))
         for (a1, b1), (a2, b2) in zip(pulled[:-1], pulled[1:])]
    tail = d[-3:]
    detected = all(y < x for x, y in zip(tail, tail[1:]))
    return ScatterCandidate(pulled[-1][0], pulled[-1][1], checkpoints, d, detected)


# -- Kenig-Merle monitor ---------------------------------------------------------------

@dataclass
class KenigMerleReport:
    sup: float
    last_value: float
    truncated: bool


def kenig_merle_monitor(ledger: NormLedger, I=None) -> KenigMerleReport:
    """Measured sup over I of ||(u, u_t)||_{H^{s_p} x H^{s_p-1}}; a monitor, not a certificate."""
    sp = ledger.sp
    series = np.hypot(ledger.channel(hdot_key(sp)), ledger.channel(hdot_ut_key(sp - 1.0)))
    a, b = _interval(ledger, I)
    return KenigMerleReport(_interval_max(ledger.times, series, a, b), float(series[-1]),
                            ledger.truncated)


# -- rung-i versus constant comparison -------------------------------------------------------

@dataclass
class PerturbationReport:
    i: int
    T: float
    x_norm_difference: float
    htilde_difference: float
    relative_htilde_difference: float
    rescaled_residual: float
    stepper_error: float | None
    blowup: bool
    notes: list[str] = field(default_factory=list)


def perturbation_compare(data: WaveState, i: int, ladder: GLadder, p: float, T: float,
                         config: SolverConfig, eps: float = DEFAULT_EPS,
                         estimate_stepper_error: bool = True) -> PerturbationReport:
    """Evolve u with g_i and v with g = i + 1 from the same data and compare them.

    Also checks that w = (i+1)^(1/(p-1)) v satisfies the g = 1 equation through
    its Duhamel residual, and (optionally) estimates the stepper error of the
    u run by rerunning it at dt/2.
    """
    if not 1 <= i <= ladder.depth:
        raise DomainError(f"rung {i} not built")
    base = replace(config, p=p, T=T)
    cfg_u = replace(base, g=LadderG(ladder, i))
    cfg_v = replace(base, g=ConstantG(i + 1.0))
    tu, _ = evolve(data, cfg_u, with_ledger=False)
    tv, _ = evolve(data, cfg_v, with_ledger=False)
    notes = []
    K = min(len(tu), len(tv))
    blowup = tu.blowup or tv.blowup
    if blowup:
        notes.append(f"blow-up in {'u' if tu.blowup else 'v'} run; report covers first {K} samples")
    grid = data.grid
    dA, dB = tu.a[:K] - tv.a[:K], tu.b[:K] - tv.b[:K]
    diff_ledger = build_ledger(tu.times[:K], dA, dB, grid, p, eps)
    xn = x_norm(diff_ledger) if K > 1 else 0.0
    sp = sp_exponent(p)
    hd = float(np.max(_sobolev_from_coeffs(dA, grid, 2.0) + _sobolev_from_coeffs(dA, grid, sp)))
    hv = float(np.max(_sobolev_from_coeffs(tv.a[:K], grid, 2.0)
                      + _sobolev_from_coeffs(tv.a[:K], grid, sp)))
    scale = (i + 1.0) ** (1.0 / (p - 1.0))
    w = Trajectory(tv.times, scale * tv.a, scale * tv.b, grid)
    res = duhamel_residual(w, p, ConstantG(1.0), config.sign)
    step_err = None
    if estimate_stepper_error:
        fine = replace(cfg_u, dt=config.dt / 2)
        tf, _ = evolve(data, fine, with_ledger=False)
        Kf = min(K, len(tf))
        dF = tu.a[:Kf] - tf.a[:Kf]
        step_err = float(np.max(_sobolev_from_coeffs(dF, grid, 2.0)
                                + _sobolev_from_coeffs(dF, grid, sp)))
    return PerturbationReport(i, float(T), float(xn), hd, hd / hv if hv else 0.0, float(res),
                              step_err, blowup, notes)


def measure_rung_constant(ladder: GLadder, i: int, config: SolverConfig, n_members: int = 4,
                          seed: int = 0) -> float:
    """Surrogate for C_i: max(i, C'_i, sup Q over an ensemble with data norm <= i).

    Each member is a random smooth datum rescaled to H~^2 x H~^1 norm i and
    evolved with g_i on [0, min(i, config.T)].
    """
    from .profiles import random_smooth

    g = LadderG(ladder, i)
    cfg = replace(config, g=g, T=min(float(i), config.T))
    worst = 0.0
    for m in range(n_members):
        d = random_smooth(config.grid, seed=seed + m)
        nrm = float(htilde_pair_norm(d.u.coeffs, d.ut.coeffs, config.grid, config.p))
        d = d.scaled(i / nrm)
        _, led = evolve(d, cfg)
        worst = max(worst, q_quantity(led), s_norm(led))
    return max(float(i), ladder.Cp(i), worst)
