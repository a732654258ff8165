"""Mixed space-time norm accounting over sampled trajectories.

The :class:`NormLedger` stores instantaneous spatial norms at the sample
times.  Time integrals integrate the piecewise-linear interpolant of
``|norm(t)|^q``, which makes every L^q_t accumulation exactly additive over
adjacent intervals.
"""

from __future__ import annotations

import io
import math
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from .errors import (DomainError, MissingChannelError, NoRungCountError,
                     ResolutionError)
from .gfun import GFunction, _log_integral
from .spectral import (RadialGrid, WaveState, _lebesgue_from_values,
                       _sobolev_from_coeffs, sine_synthesize, sp_exponent)

DEFAULT_EPS = 0.1
DEFAULT_MARGIN = 10.0


# -- channel naming -----------------------------------------------------------

def _num(x: float) -> str:
    x = float(x)
    if math.isinf(x):
        return "inf"
    return str(int(x)) if x.is_integer() else repr(x)


def lx_key(r) -> str:
    return f"Lx_norm_r={_num(r)}"


def dlx_key(alpha, r) -> str:
    return f"DLx_norm_a={float(alpha)!r}_r={_num(r)}"


def hdot_key(s) -> str:
    return f"Hdot_s={float(s)!r}"


def hdot_ut_key(s) -> str:
    return f"Hdot_ut_s={float(s)!r}"


def active_exponents(p: float, eps: float) -> list[float]:
    return [2.0 * (p - 1.0), 4.0, 3.0 + eps, 2.0, math.inf]


@dataclass(frozen=True)
class AdmissiblePair:
    q: float
    r: float
    m: float

    @property
    def admissible(self) -> bool:
        return admissible_check(self.q, self.r, self.m)


def admissible_check(q, r, m, tol=1e-12) -> bool:
    """True iff (q, r) is m-wave admissible: q in (2, inf], r in [2, inf], 1/q + 3/r = 3/2 - m."""
    q, r, m = float(q), float(r), float(m)
    if not (q > 2 and r >= 2):
        return False
    inv_q = 0.0 if math.isinf(q) else 1.0 / q
    inv_r = 0.0 if math.isinf(r) else 1.0 / r
    return abs(inv_q + 3.0 * inv_r - (1.5 - m)) <= tol


# -- the ledger ---------------------------------------------------------------

@dataclass
class NormLedger:
    times: np.ndarray
    channels: dict[str, np.ndarray]
    p: float
    eps: float = DEFAULT_EPS
    truncated: bool = False

    def __post_init__(self):
        self.times = np.asarray(self.times, dtype=float)
        if self.times.size > 1 and np.any(np.diff(self.times) <= 0):
            raise DomainError("ledger times must be strictly increasing")
        self.channels = {k: np.asarray(v, dtype=float) for k, v in self.channels.items()}

    def __len__(self):
        return self.times.size

    @property
    def sp(self) -> float:
        return sp_exponent(self.p)

    def channel(self, key: str) -> np.ndarray:
        try:
            return self.channels[key]
        except KeyError:
            raise MissingChannelError(f"ledger does not track channel {key!r}") from None

    def to_csv(self) -> str:
        keys = sorted(self.channels)
        buf = io.StringIO()
        buf.write(f"# p={self.p!r} eps={self.eps!r} truncated={int(self.truncated)}\n")
        buf.write(",".join(["t"] + keys) + "\n")
        cols = [self.times] + [self.channels[k] for k in keys]
        for row in zip(*cols):
            buf.write(",".join("%.17g" % v for v in row) + "\n")
        return buf.getvalue()

    @classmethod
    def from_csv(cls, text: str) -> "NormLedger":
        lines = text.splitlines()
        meta = dict(item.split("=") for item in lines[0].lstrip("# ").split())
        header = lines[1].split(",")
        data = np.array([[float(v) for v in ln.split(",")] for ln in lines[2:] if ln],
                        dtype=float).reshape(-1, len(header))
        return cls(times=data[:, 0],
                   channels={k: data[:, j] for j, k in enumerate(header) if j},
                   p=float(meta["p"]), eps=float(meta["eps"]),
                   truncated=bool(int(meta["truncated"])))

    def save(self, path) -> None:
        Path(path).write_text(self.to_csv())

    @classmethod
    def load(cls, path) -> "NormLedger":
        return cls.from_csv(Path(path).read_text())


def ledger_channels(A: np.ndarray, B: np.ndarray, grid: RadialGrid, p: float,
                    eps: float = DEFAULT_EPS) -> dict[str, np.ndarray]:
    """Instantaneous norms for a (K, N) stack of u and u_t sine coefficients."""
    A = np.atleast_2d(A)
    B = np.atleast_2d(B)
    sp = sp_exponent(p)
    out = {}
    u = sine_synthesize(A, grid)
    for rho in active_exponents(p, eps):
        out[lx_key(rho)] = _lebesgue_from_values(u, grid, rho)
    a_low = sp - 0.5
    du_low = sine_synthesize(grid.k**a_low * A, grid)
    du_high = sine_synthesize(grid.k**1.5 * A, grid)
    out[dlx_key(a_low, 4.0)] = _lebesgue_from_values(du_low, grid, 4.0)
    out[dlx_key(1.5, 4.0)] = _lebesgue_from_values(du_high, grid, 4.0)
    out[dlx_key(a_low, 3.0 + eps)] = _lebesgue_from_values(du_low, grid, 3.0 + eps)
    for s in (sp, 2.0):
        out[hdot_key(s)] = _sobolev_from_coeffs(A, grid, s)
    for s in (sp - 1.0, 1.0):
        out[hdot_ut_key(s)] = _sobolev_from_coeffs(B, grid, s)
    return out


def build_ledger(times, A, B, grid: RadialGrid, p: float, eps: float = DEFAULT_EPS,
                 truncated: bool = False, chunk: int = 256) -> NormLedger:
    times = np.asarray(times, dtype=float)
    parts = [ledger_channels(A[i:i + chunk], B[i:i + chunk], grid, p, eps)
             for i in range(0, len(times), chunk)]
    channels = {k: np.concatenate([pt[k] for pt in parts]) for k in parts[0]} if parts else {}
    return NormLedger(times, channels, p, eps, truncated)


def ledger_from_states(times, states: list[WaveState], p: float,
                       eps: float = DEFAULT_EPS) -> NormLedger:
    A = np.array([s.u.coeffs for s in states])
    B = np.array([s.ut.coeffs for s in states])
    return build_ledger(times, A, B, states[0].grid, p, eps)


# -- time integration ---------------------------------------------------------

def _interval(ledger: NormLedger, I) -> tuple[float, float]:
    t = ledger.times
    if I is None:
        return float(t[0]), float(t[-1])
    a, b = float(I[0]), float(I[1])
    tol = 1e-9 * max(1.0, abs(t[-1]))
    if a > b or a < t[0] - tol or b > t[-1] + tol:
        raise DomainError(f"interval [{a}, {b}] outside ledger range [{t[0]}, {t[-1]}]")
    return max(a, float(t[0])), min(b, float(t[-1]))


def _interval_integral(t: np.ndarray, f: np.ndarray, a: float, b: float) -> float:
    """Integral over [a, b] of the piecewise-linear interpolant of f(t)."""
    if b <= a:
        return 0.0
    inside = (t > a) & (t < b)
    ts = np.concatenate([[a], t[inside], [b]])
    fs = np.concatenate([[np.interp(a, t, f)], f[inside], [np.interp(b, t, f)]])
    return float(np.sum(0.5 * (fs[1:] + fs[:-1]) * np.diff(ts)))


def _interval_max(t: np.ndarray, f: np.ndarray, a: float, b: float) -> float:
    inside = (t >= a) & (t <= b)
    ends = np.interp([a, b], t, f)
    return float(max(np.max(ends), np.max(f[inside]) if inside.any() else -np.inf))


def _mixed(t, values, q, a, b) -> float:
    if math.isinf(q):
        return _interval_max(t, values, a, b)
    if len(t) == 1:
        return 0.0
    return _interval_integral(t, values**q, a, b) ** (1.0 / q)


def spacetime_norm(ledger: NormLedger, q, r, I=None, alpha=None) -> float:
    """||D^alpha u||_{L^q_t L^r_x(I)} from ledger samples (alpha None means u itself)."""
    key = lx_key(r) if alpha is None else dlx_key(alpha, r)
    vals = ledger.channel(key)
    a, b = _interval(ledger, I)
    return _mixed(ledger.times, vals, float(q), a, b)


def s_norm(ledger: NormLedger, I=None) -> float:
    q = 2.0 * (ledger.p - 1.0)
    return spacetime_norm(ledger, q, q, I)


def _sup(ledger: NormLedger, keys: list[str], I) -> float:
    a, b = _interval(ledger, I)
    total = sum(ledger.channel(k) for k in keys)
    return _interval_max(ledger.times, total, a, b)


def _check_p(ledger: NormLedger, p) -> None:
    if p is not None and float(p) != ledger.p:
        raise DomainError(f"p={p} does not match ledger p={ledger.p}")


def q_quantity(ledger: NormLedger, I=None, p=None) -> float:
    """Q(I,u): two W-norms of fractional derivatives plus L^inf_t H~^2 and H~^1 terms."""
    _check_p(ledger, p)
    sp = ledger.sp
    return (spacetime_norm(ledger, 4, 4, I, alpha=sp - 0.5)
            + spacetime_norm(ledger, 4, 4, I, alpha=1.5)
            + _sup(ledger, [hdot_key(2.0), hdot_key(sp)], I)
            + _sup(ledger, [hdot_ut_key(1.0), hdot_ut_key(sp - 1.0)], I))


def x_norm(ledger: NormLedger, I=None, p=None, eps=None) -> float:
    """Composite X(I) norm with the (infinity-, 3+) pair ((3+eps)/eps, 3+eps)."""
    _check_p(ledger, p)
    if eps is not None and float(eps) != ledger.eps:
        raise DomainError(f"eps={eps} does not match ledger eps={ledger.eps}")
    e = ledger.eps
    sp = ledger.sp
    return (spacetime_norm(ledger, (3.0 + e) / e, 3.0 + e, I, alpha=sp - 0.5)
            + spacetime_norm(ledger, 4, 4, I, alpha=sp - 0.5)
            + s_norm(ledger, I)
            + _sup(ledger, [hdot_key(sp)], I)
            + _sup(ledger, [hdot_ut_key(sp - 1.0)], I))


# -- partitioning ---------------------------------------------------------------

@dataclass
class PartitionReport:
    intervals: list[tuple[float, float]]
    s_norms: list[float]
    threshold: float
    N: int | None = None
    A: float | None = None
    C: float | None = None
    eta: float | None = None
    bound: float | None = None

    @property
    def count(self) -> int:
        return len(self.intervals)

    def to_dict(self) -> dict:
        return {"intervals": [list(iv) for iv in self.intervals], "s_norms": self.s_norms,
                "threshold": self.threshold, "count": self.count, "N": self.N,
                "A": self.A, "C": self.C, "eta": self.eta, "bound": self.bound}


def partition_by_threshold(ledger: NormLedger, I, threshold: float) -> PartitionReport:
    """Greedy left-to-right chop of I into pieces of S-norm equal to ``threshold``."""
    if not threshold > 0:
        raise DomainError(f"threshold must be positive, got {threshold}")
    q = 2.0 * (ledger.p - 1.0)
    a, b = _interval(ledger, I)
    t = ledger.times
    f = ledger.channel(lx_key(q)) ** q
    target = threshold**q
    steps = 0.5 * (f[1:] + f[:-1]) * np.diff(t)
    seg = (t[1:] > a) & (t[:-1] < b)
    if np.any(steps[seg] > target):
        raise ResolutionError(
            f"a single ledger step carries S-norm {np.max(steps[seg]) ** (1 / q):.3g} "
            f"> threshold {threshold:.3g}; refine dt_out")
    cuts = [a]
    while _interval_integral(t, f, cuts[-1], b) > target:
        lo, hi = cuts[-1], b
        for _ in range(200):
            mid = 0.5 * (lo + hi)
            if _interval_integral(t, f, cuts[-1], mid) < target:
                lo = mid
            else:
                hi = mid
            if hi - lo <= 1e-14 * max(1.0, abs(b)):
                break
        cuts.append(0.5 * (lo + hi))
    cuts.append(b)
    intervals = list(zip(cuts[:-1], cuts[1:]))
    norms = [s_norm(ledger, iv) for iv in intervals]
    return PartitionReport(intervals=intervals, s_norms=norms, threshold=float(threshold))


def solve_rung_count(A: float, C: float, g: GFunction, s_norm_value: float, p: float,
                     margin: float = DEFAULT_MARGIN, n_cap: int = 2**60,
                     rtol: float = 1e-9) -> int:
    """Smallest N >= 1 with int_{2CA}^{(2C)^N A} dy/(y g^2) >= margin * s^(2(p-1)).

    Searches N by doubling then bisection in the variable log y.  A convergent
    tail (doubling increments shrinking geometrically with a remaining geometric
    bound below the gap) or hitting ``n_cap`` raises NoRungCountError.
    """
    if not (A > 0 and 2 * C > 1 and margin > 1):
        raise DomainError(f"need A > 0, 2C > 1, margin > 1; got A={A}, C={C}, margin={margin}")
    target = margin * float(s_norm_value) ** (2.0 * (p - 1.0))
    la, l2c = math.log(A), math.log(2.0 * C)
    u = lambda n: la + n * l2c  # noqa: E731
    reached = lambda val: val >= target * (1.0 - rtol)  # noqa: E731
    if reached(0.0):
        return 1
    n_lo, acc_lo = 1, 0.0
    n_hi, incs = 2, []
    while True:
        inc = _log_integral(g, u(n_lo), u(n_hi))
        acc_hi = acc_lo + inc
        if reached(acc_hi):
            break
        incs.append(inc)
        if len(incs) >= 4:
            r1, r2, r3 = (incs[-3] / incs[-4] if incs[-4] else 0.0,
                          incs[-2] / incs[-3] if incs[-3] else 0.0,
                          incs[-1] / incs[-2] if incs[-2] else 0.0)
            rho = max(r1, r2, r3)
            if rho < 0.9 and acc_hi + inc * rho / (1.0 - rho) < target:
                raise NoRungCountError(
                    f"rung integral plateaus near {acc_hi + inc * rho / (1 - rho):.6g} "
                    f"< target {target:.6g}")
        if n_hi >= n_cap:
            raise NoRungCountError(f"no N <= {n_cap} reaches target {target:.6g}")
        n_lo, acc_lo, n_hi = n_hi, acc_hi, 2 * n_hi
    # smallest N in (n_lo, n_hi] reaching the target
    while n_hi - n_lo > 1:
        mid = (n_lo + n_hi) // 2
        acc_mid = acc_lo + _log_integral(g, u(n_lo), u(mid))
        if reached(acc_mid):
            n_hi = mid
        else:
            n_lo, acc_lo = mid, acc_mid
    return n_hi


def htilde_series(ledger: NormLedger) -> np.ndarray:
    """Per-sample H~^2 x H~^1 data norm.

    Each intersection norm is a sum of its two seminorms; the product of the u
    and u_t components is combined in l2, so a single free mode keeps it fixed.
    """
    sp = ledger.sp
    u = ledger.channel(hdot_key(2.0)) + ledger.channel(hdot_key(sp))
    ut = ledger.channel(hdot_ut_key(1.0)) + ledger.channel(hdot_ut_key(sp - 1.0))
    return np.hypot(u, ut)


@dataclass
class AprioriReport:
    initial_norm: float
    sup_norm: float
    s_norm: float
    A: float
    C: float
    eta: float
    N: int | None
    bound: float | None
    holds: bool
    precondition_ok: bool
    partition_count: int | None = None
    notes: list[str] = field(default_factory=list)

    def to_dict(self) -> dict:
        return dict(self.__dict__)


def apriori_bound_check(ledger: NormLedger, I, A: float, C: float, g: GFunction,
                        eta: float, p: float, margin: float = DEFAULT_MARGIN) -> AprioriReport:
    """Compare sup_t ||(u, u_t)||_{H~^2 x H~^1} on I with (2C)^N A."""
    _check_p(ledger, p)
    a, b = _interval(ledger, I)
    series = htilde_series(ledger)
    initial = float(np.interp(a, ledger.times, series))
    sup = _interval_max(ledger.times, series, a, b)
    s = s_norm(ledger, (a, b))
    notes = []
    pre_ok = A >= initial and C > 1
    if A < initial:
        notes.append(f"precondition violated: A={A} < initial norm {initial}")
    if not C > 1:
        notes.append(f"precondition violated: C={C} <= 1")
    if not pre_ok:
        return AprioriReport(initial, sup, s, A, C, eta, None, None, False, False, None, notes)
    N = solve_rung_count(A, C, g, s, p, margin)
    log_bound = N * math.log(2.0 * C) + math.log(A)
    bound = math.exp(log_bound) if log_bound < 700 else math.inf
    count = None
    try:
        threshold = eta / float(g.g_log(log_bound)) ** (1.0 / (p - 1.0))
        count = partition_by_threshold(ledger, (a, b), threshold).count
    except ResolutionError as exc:
        notes.append(str(exc))
    return AprioriReport(initial, sup, s, A, C, eta, N, bound, bool(sup <= bound), True,
                         count, notes)


def strichartz_probe(ensemble: list[WaveState], pair: AdmissiblePair, T: float,
                     dt_out: float = 0.01) -> float:
    """Largest ||u||_{L^q_t L^r_x([0,T])} / ||(u0,u1)||_{H^m x H^(m-1)} over free evolutions."""
    from .propagator import free_coeffs

    if not pair.admissible:
        raise DomainError(f"pair {pair} is not {pair.m}-wave admissible")
    times = np.linspace(0.0, T, int(round(T / dt_out)) + 1)
    best = 0.0
    for state in ensemble:
        grid = state.grid
        denom = (_sobolev_from_coeffs(state.u.coeffs, grid, pair.m)
                 + _sobolev_from_coeffs(state.ut.coeffs, grid, pair.m - 1.0))
        if denom == 0:
            continue
        A, _ = free_coeffs(state.u.coeffs, state.ut.coeffs, grid, times)
        spatial = _lebesgue_from_values(sine_synthesize(A, grid), grid, pair.r)
        num = _mixed(times, spatial, pair.q, 0.0, T)
        best = max(best, float(num / denom))
    return best
