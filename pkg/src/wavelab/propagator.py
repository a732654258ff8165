"""Time evolution for u_tt - Lap u = sign |u|^(p-1) u g(|u|).

sign = -1 is the defocusing equation, +1 a focusing control, 0 switches the
nonlinearity off.  The linear part is propagated exactly per sine mode; the
nonlinearity enters through kicks of u_t at the collocation nodes (Strang
splitting).  During a kick u is frozen, so each kick is exact.
"""

from __future__ import annotations

import hashlib
import json
import math
from dataclasses import dataclass, field
from pathlib import Path
from typing import NamedTuple

import numpy as np
from scipy.integrate import cumulative_trapezoid

from .errors import DomainError, NoContractionError, StructuralError
from .gfun import GFunction, LadderG
from .norms import DEFAULT_EPS, NormLedger, build_ledger
from .spectral import (RadialGrid, WaveState, _lebesgue_from_values,
                       _sobolev_from_coeffs, sine_analyze, sine_synthesize,
                       sp_exponent)

BLOWUP_AMPLITUDE = 1e8
CHECKPOINT_VERSION = 1


@dataclass(frozen=True)
class SolverConfig:
    p: float
    g: GFunction
    dt: float
    T: float
    dt_out: float
    grid: RadialGrid = field(default_factory=RadialGrid)
    sign: float = -1.0

    def __post_init__(self):
        sp_exponent(self.p)
        if self.sign not in (-1.0, 0.0, 1.0):
            raise DomainError(f"sign must be -1, 0 or +1, got {self.sign}")
        if not self.dt > 0 or not self.T >= 0:
            raise DomainError(f"need dt > 0 and T >= 0, got dt={self.dt}, T={self.T}")
        if self.dt > 0.5 * self.grid.h * (1 + 1e-12):
            raise DomainError(f"dt={self.dt} exceeds guard 0.5 R/(N+1) = {0.5 * self.grid.h}")
        ratio = self.dt_out / self.dt
        if ratio < 1 - 1e-9 or abs(ratio - round(ratio)) > 1e-9 * ratio:
            raise DomainError(f"dt_out={self.dt_out} is not an integer multiple of dt={self.dt}")

    @property
    def stride(self) -> int:
        return int(round(self.dt_out / self.dt))

    @property
    def n_steps(self) -> int:
        return int(round(self.T / self.dt))

    def fingerprint(self) -> str:
        doc = {"p": self.p, "g": self.g.spec(), "dt": self.dt, "T": self.T,
               "dt_out": self.dt_out, "R": self.grid.R, "N": self.grid.N, "sign": self.sign}
        if isinstance(self.g, LadderG):
            doc["ladder"] = self.g.ladder.to_dict()
        blob = json.dumps(doc, sort_keys=True).encode()
        return hashlib.sha256(blob).hexdigest()[:16]


@dataclass(eq=False)
class Trajectory:
    """Sampled states: row k of ``a`` / ``b`` holds the u / u_t coefficients at times[k]."""

    times: np.ndarray
    a: np.ndarray
    b: np.ndarray
    grid: RadialGrid
    fingerprint: str = ""
    blowup: bool = False

    def __post_init__(self):
        self.times = np.asarray(self.times, dtype=float)
        if self.a.shape != self.b.shape or self.a.shape != (self.times.size, self.grid.N):
            raise StructuralError("trajectory arrays do not match times and grid")
        if self.times.size > 1 and np.any(np.diff(self.times) <= 0):
            raise DomainError("trajectory times must be strictly increasing")

    def __len__(self):
        return self.times.size

    def state(self, k: int) -> WaveState:
        return WaveState.from_coeffs(self.a[k], self.b[k], self.grid)

    @property
    def states(self) -> list[WaveState]:
        return [self.state(k) for k in range(len(self))]

    def values(self) -> np.ndarray:
        return sine_synthesize(self.a, self.grid)

    def save(self, path) -> None:
        np.savez(Path(path), version=CHECKPOINT_VERSION, fingerprint=self.fingerprint,
                 times=self.times, a=self.a, b=self.b, R=self.grid.R, N=self.grid.N,
                 blowup=self.blowup)

    @classmethod
    def load(cls, path) -> "Trajectory":
        with np.load(Path(path)) as z:
            if int(z["version"]) != CHECKPOINT_VERSION:
                raise DomainError(f"unsupported checkpoint version {int(z['version'])}")
            grid = RadialGrid(float(z["R"]), int(z["N"]))
            return cls(z["times"], z["a"], z["b"], grid, str(z["fingerprint"]),
                       bool(z["blowup"]))


# -- linear flow ------------------------------------------------------------------

def free_coeffs(a0, b0, grid: RadialGrid, times) -> tuple[np.ndarray, np.ndarray]:
    """Free-wave coefficients at each of ``times``: shape (len(times), N)."""
    kt = np.outer(np.atleast_1d(times), grid.k)
    c, s = np.cos(kt), np.sin(kt)
    return c * a0 + s / grid.k * b0, -grid.k * s * a0 + c * b0


def linear_flow(state: WaveState, t: float) -> WaveState:
    """Exact free evolution K(t) of (u, u_t) by time t (t may be negative)."""
    a, b = free_coeffs(state.u.coeffs, state.ut.coeffs, state.grid, [t])
    return WaveState.from_coeffs(a[0], b[0], state.grid)


# -- nonlinearity -------------------------------------------------------------------

def nonlinearity(u: np.ndarray, p: float, g: GFunction) -> np.ndarray:
    """|u|^(p-1) u g(|u|) at nodal values."""
    with np.errstate(over="ignore", invalid="ignore"):
        mod = np.abs(u)
        if g.is_constant():
            gv = float(g(1.0))
        else:
            gv = g(mod)
        return mod ** (p - 1.0) * u * gv


def _kick_coeffs(a, grid, p, g, sign):
    """Sine coefficients of sign * N(u), plus the nodal values of u."""
    u = sine_synthesize(a, grid)
    if sign == 0:
        return np.zeros_like(a, dtype=complex), u
    with np.errstate(over="ignore", invalid="ignore"):
        return sine_analyze(sign * nonlinearity(u, p, g), grid), u


def _blown_up(u: np.ndarray, b: np.ndarray) -> bool:
    with np.errstate(invalid="ignore"):
        return (not np.all(np.isfinite(u)) or not np.all(np.isfinite(b))
                or float(np.max(np.abs(u))) > BLOWUP_AMPLITUDE)


def step_strang(state: WaveState, dt: float, p: float, g: GFunction,
                sign: float = -1.0) -> WaveState:
    """Half kick, exact linear flow over dt, half kick."""
    grid = state.grid
    cos_, sin_ = np.cos(grid.k * dt), np.sin(grid.k * dt)
    a, b = state.u.coeffs.copy(), state.ut.coeffs.copy()
    kick, _ = _kick_coeffs(a, grid, p, g, sign)
    b = b + 0.5 * dt * kick
    a, b = cos_ * a + sin_ / grid.k * b, -grid.k * sin_ * a + cos_ * b
    kick, _ = _kick_coeffs(a, grid, p, g, sign)
    b = b + 0.5 * dt * kick
    return WaveState.from_coeffs(a, b, grid)


def _integrate(a, b, config: SolverConfig):
    """Strang loop; returns sampled coefficient stacks and the blow-up flag."""
    grid, dt = config.grid, config.dt
    cos_, sin_ = np.cos(grid.k * dt), np.sin(grid.k * dt)
    kvec = grid.k
    p, g, sign = config.p, config.g, config.sign
    A, B = [a.copy()], [b.copy()]
    kick, u = _kick_coeffs(a, grid, p, g, sign)
    if _blown_up(u, b):
        return A, B, True
    for n in range(config.n_steps):
        b = b + 0.5 * dt * kick
        a, b = cos_ * a + sin_ / kvec * b, -kvec * sin_ * a + cos_ * b
        kick, u = _kick_coeffs(a, grid, p, g, sign)
        b = b + 0.5 * dt * kick
        if _blown_up(u, b):
            return A, B, True
        if (n + 1) % config.stride == 0:
            A.append(a.copy())
            B.append(b.copy())
    return A, B, False


def evolve(state0: WaveState, config: SolverConfig, eps: float = DEFAULT_EPS,
           with_ledger: bool = True) -> tuple[Trajectory, NormLedger | None]:
    """Fixed-step integration to config.T, sampled every dt_out.

    Stops early (trajectory truncated, ``blowup`` set) once max|u| exceeds
    1e8 or a value is non-finite.
    """
    if state0.grid != config.grid:
        raise StructuralError("initial state and solver config use different grids")
    n_out = config.n_steps // config.stride
    times_all = np.arange(n_out + 1) * config.dt_out
    if config.sign == 0:
        A, B = free_coeffs(state0.u.coeffs, state0.ut.coeffs, config.grid, times_all)
        blowup = False
    else:
        A, B, blowup = _integrate(np.array(state0.u.coeffs), np.array(state0.ut.coeffs), config)
        A, B = np.array(A), np.array(B)
    times = times_all[: len(A)]
    traj = Trajectory(times, A, B, config.grid, config.fingerprint(), blowup)
    ledger = None
    if with_ledger:
        ledger = build_ledger(times, A, B, config.grid, config.p, eps, truncated=blowup)
    return traj, ledger


# -- Duhamel machinery ------------------------------------------------------------

def _duhamel(times, a0, b0, C, grid: RadialGrid):
    """Free term plus int_0^t K(t - s) (0, C(s)) ds, trapezoid over the samples.

    C is the (K, N) coefficient stack of sign * N(u) at the samples.
    """
    af, bf = free_coeffs(a0, b0, grid, times)
    kt = np.outer(times, grid.k)
    c, s = np.cos(kt), np.sin(kt)
    P = cumulative_trapezoid(c * C, times, axis=0, initial=0)
    Q = cumulative_trapezoid(s * C, times, axis=0, initial=0)
    return af + (s * P - c * Q) / grid.k, bf + c * P + s * Q


def _nl_stack(A, grid, p, g, sign):
    u = sine_synthesize(A, grid)
    with np.errstate(over="ignore", invalid="ignore"):
        return sine_analyze(sign * nonlinearity(u, p, g), grid)


def duhamel_residual(traj: Trajectory, p: float, g: GFunction, sign: float = -1.0) -> float:
    """max_k ||u(t_k) - Duhamel(u)(t_k)||_{H^{s_p}} with trapezoid time quadrature."""
    if len(traj) == 0:
        raise DomainError("empty trajectory")
    if len(traj) == 1:
        return 0.0
    C = _nl_stack(traj.a, traj.grid, p, g, sign)
    a_d, _ = _duhamel(traj.times, traj.a[0], traj.b[0], C, traj.grid)
    return float(np.max(_sobolev_from_coeffs(traj.a - a_d, traj.grid, sp_exponent(p))))


def _contraction_norm(dA, times, grid, p):
    """L^inf_t H~^2 plus S-norm of a coefficient-stack difference."""
    sp = sp_exponent(p)
    sup = np.max(_sobolev_from_coeffs(dA, grid, 2.0) + _sobolev_from_coeffs(dA, grid, sp))
    q = 2.0 * (p - 1.0)
    spatial = _lebesgue_from_values(sine_synthesize(dA, grid), grid, q)
    s = np.trapezoid(spatial**q, times) ** (1.0 / q) if len(times) > 1 else 0.0
    return float(sup + s)


def picard_solve(state0: WaveState, T_l: float, config: SolverConfig, max_iter: int = 200,
                 tol: float = 1e-10, initial="free",
                 min_steps: int = 16) -> tuple[Trajectory, list[float]]:
    """Fixed point of the Duhamel map on [0, T_l].

    The time grid has K = max(min_steps, ceil(T_l / dt)) uniform steps, so its
    step never exceeds config.dt.

    ``initial`` is "free" (the free evolution), "zero", or a (K, N) coefficient
    stack.  Returns the converged trajectory and the ratios of successive
    iterate differences.  Three consecutive ratios >= 1 raise NoContractionError.
    """
    grid, p, g, sign = config.grid, config.p, config.g, config.sign
    if not T_l > 0:
        raise DomainError(f"T_l must be positive, got {T_l}")
    K = max(min_steps, int(math.ceil(T_l / config.dt - 1e-9)))
    times = np.arange(K + 1) * (T_l / K)
    a0, b0 = np.asarray(state0.u.coeffs), np.asarray(state0.ut.coeffs)
    if isinstance(initial, str):
        if initial == "free":
            U = free_coeffs(a0, b0, grid, times)[0]
        elif initial == "zero":
            U = np.zeros((K + 1, grid.N), dtype=complex)
        else:
            raise DomainError(f"unknown initial iterate {initial!r}")
    else:
        U = np.array(initial, dtype=complex)
        if U.shape != (K + 1, grid.N):
            raise StructuralError(f"initial iterate has shape {U.shape}, need {(K + 1, grid.N)}")
    diffs, ratios = [], []
    for _ in range(max_iter):
        a_new, b_new = _duhamel(times, a0, b0, _nl_stack(U, grid, p, g, sign), grid)
        d = _contraction_norm(a_new - U, times, grid, p)
        if diffs and diffs[-1] > 0:
            ratios.append(d / diffs[-1])
        diffs.append(d)
        U = a_new
        if d <= tol:
            traj = Trajectory(times, a_new, b_new, grid, config.fingerprint())
            return traj, ratios
        if not math.isfinite(d) or (len(ratios) >= 3 and min(ratios[-3:]) >= 1.0):
            raise NoContractionError(
                f"Picard map not contracting on [0, {times[-1]}]: ratios {ratios[-3:]}")
    raise NoContractionError(f"no convergence to tol={tol} in {max_iter} iterations")


class SmallnessTime(NamedTuple):
    T_l: float
    saturated: bool  # free S-norm exceeds delta already at the minimum step


def free_s_norm_profile(state0: WaveState, config: SolverConfig, n_min: int = 1024,
                        T: float | None = None):
    """Sample times on [0, T] and ||free(t)||_{L^q}^q there, q = 2(p-1); T defaults to config.T."""
    grid, q = config.grid, 2.0 * (config.p - 1.0)
    T = config.T if T is None else T
    h = min(config.dt_out, T / n_min) if T > 0 else config.dt_out
    times = np.arange(int(math.ceil(T / h - 1e-9)) + 1) * h
    vals = []
    for i in range(0, len(times), 256):
        A, _ = free_coeffs(state0.u.coeffs, state0.ut.coeffs, grid, times[i:i + 256])
        vals.append(_lebesgue_from_values(sine_synthesize(A, grid), grid, q) ** q)
    f = np.concatenate(vals)
    return times, f


def smallness_time(state0: WaveState, delta: float, config: SolverConfig,
                   rtol: float = 0.01, max_refine: int = 4) -> SmallnessTime:
    """Largest T_l (dyadic search, relative precision rtol) with free S([0,T_l]) <= delta.

    The search ceiling is config.T.  When even the first sample step exceeds
    delta the profile is resampled on [0, step], up to ``max_refine`` times;
    ``saturated`` reports that the finest step still exceeds delta.
    """
    from .norms import _interval_integral

    if not delta > 0:
        raise DomainError(f"delta must be positive, got {delta}")
    q = 2.0 * (config.p - 1.0)
    target = delta**q
    window = config.T
    for level in range(max_refine + 1):
        times, f = free_s_norm_profile(state0, config, T=window)
        S = lambda T: _interval_integral(times, f, 0.0, T)  # noqa: E731
        ceiling = float(times[-1])
        step = float(times[1]) if len(times) > 1 else ceiling
        if S(ceiling) <= target:
            return SmallnessTime(ceiling, False)
        if S(step) <= target:
            break
        if level == max_refine:
            return SmallnessTime(step, True)
        # zoom into [0, step] with a finer sampling
        window = step
    lo = step
    while 2 * lo < ceiling and S(2 * lo) <= target:
        lo *= 2
    hi = min(2 * lo, ceiling)
    while (hi - lo) > rtol * lo:
        mid = 0.5 * (lo + hi)
        if S(mid) <= target:
            lo = mid
        else:
            hi = mid
    return SmallnessTime(lo, False)
