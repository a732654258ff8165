"""Nonlinearity factors g, their growth-condition checks, and the g-ladder.

Every g is evaluated internally in the logarithmic variable u = log x so the
ladder, whose thresholds reach 1e150 and beyond, never overflows.  Each class
provides ``parts(u) -> (g, x g'(x), x^2 g''(x))`` at x = exp(u).
"""

from __future__ import annotations

import json
import math
from dataclasses import dataclass, field, replace
from pathlib import Path

import numpy as np
from scipy import integrate
from scipy.special import expit

from .errors import ConstructionError, DomainError, NeedsMoreRungsError
from .spectral import sp_exponent

__all__ = [
    "GFunction", "ConstantG", "LogG", "LogLogG", "LadderG", "Rung", "GLadder",
    "ConditionReport", "sp_exponent", "validate_conditions", "rung_integral",
    "build_rung", "build_ladder", "ladder_eval", "h_bound_probe", "check_ladder",
    "parse_g",
]

LADDER_SCHEMA_VERSION = 1


def _log(x):
    with np.errstate(divide="ignore"):
        return np.log(np.asarray(x, dtype=float))


class GFunction:
    """Positive, nondecreasing factor g(|u|) multiplying |u|^(p-1) u."""

    kind = "abstract"

    def parts(self, u):
        raise NotImplementedError

    def spec(self) -> str:
        """Canonical text form, parseable by :func:`parse_g`."""
        raise NotImplementedError

    def log_breakpoints(self) -> list[float]:
        return []

    def __call__(self, x):
        return self.parts(_log(x))[0]

    def g_log(self, u):
        return self.parts(np.asarray(u, dtype=float))[0]

    def dg(self, x):
        x = np.asarray(x, dtype=float)
        xdg = self.parts(_log(x))[1]
        with np.errstate(divide="ignore", invalid="ignore"):
            return np.where(x > 0, xdg / np.where(x > 0, x, 1.0), self._dg0())

    def d2g(self, x):
        x = np.asarray(x, dtype=float)
        x2d2g = self.parts(_log(x))[2]
        with np.errstate(divide="ignore", invalid="ignore"):
            return np.where(x > 0, x2d2g / np.where(x > 0, x, 1.0) ** 2, self._d2g0())

    def _dg0(self):
        return 0.0

    def _d2g0(self):
        return 0.0

    def is_constant(self) -> bool:
        return False

    def __repr__(self):
        return f"{type(self).__name__}({self.spec()!r})"


class ConstantG(GFunction):
    kind = "constant"

    def __init__(self, c=1.0):
        if not c > 0:
            raise DomainError(f"constant g must be positive, got {c}")
        self.c = float(c)

    def parts(self, u):
        u = np.asarray(u, dtype=float)
        return np.full(u.shape, self.c), np.zeros(u.shape), np.zeros(u.shape)

    def spec(self):
        return f"const:{self.c!r}"

    def is_constant(self):
        return True


class LogG(GFunction):
    """g(x) = log(2 + x^2)."""

    kind = "log"

    def parts(self, u):
        u = np.asarray(u, dtype=float)
        g = np.logaddexp(math.log(2.0), 2.0 * u)
        t = expit(2.0 * u - math.log(2.0))  # x^2 / (2 + x^2)
        inv = expit(-2.0 * u + math.log(2.0)) / 2.0  # 1 / (2 + x^2)
        return g, 2.0 * t, t * (4.0 * inv - 2.0 * t)

    def _d2g0(self):
        return 1.0

    def spec(self):
        return "log"


class LogLogG(GFunction):
    """g(x) = (log log(10 + x^2))^c."""

    kind = "loglog"

    def __init__(self, c=1.0 / 30.0):
        if not c > 0:
            raise DomainError(f"loglog exponent must be positive, got {c}")
        self.c = float(c)

    def parts(self, u):
        u = np.asarray(u, dtype=float)
        c = self.c
        L = np.logaddexp(math.log(10.0), 2.0 * u)
        m = np.log(L)
        q = expit(2.0 * u - math.log(10.0))  # x^2 / (10 + x^2)
        inv = expit(-2.0 * u + math.log(10.0)) / 10.0  # 1 / (10 + x^2)
        xL1 = 2.0 * q  # x L'
        x2L2 = q * (20.0 * inv - 2.0 * q)  # x^2 L''
        g = m**c
        xdg = c * m ** (c - 1.0) * xL1 / L
        x2d2g = (c * (c - 1.0) * m ** (c - 2.0) * (xL1 / L) ** 2
                 + c * m ** (c - 1.0) * (x2L2 * L - xL1**2) / L**2)
        return g, xdg, x2d2g

    def _d2g0(self):
        m = math.log(math.log(10.0))
        return self.c * m ** (self.c - 1.0) * 0.2 / math.log(10.0)

    def spec(self):
        return f"loglog:{self.c!r}"


# -- quintic smoothstep and its derivatives in theta --------------------------

def _smooth(theta):
    return theta**3 * (10.0 - 15.0 * theta + 6.0 * theta**2)


def _smooth1(theta):
    return 30.0 * theta**2 * (1.0 - theta) ** 2


def _smooth2(theta):
    return 60.0 * theta * (1.0 - theta) * (1.0 - 2.0 * theta)


@dataclass(frozen=True)
class Rung:
    """Bridge i: g_i = i + smoothstep((log x - log_start) / L) on [start, Cp]."""

    i: int
    C_prev: float
    Cp: float
    L: float
    log_start: float

    @property
    def start(self) -> float:
        return math.exp(self.log_start)


@dataclass(frozen=True)
class GLadder:
    A: float = 10.0
    rungs: tuple[Rung, ...] = field(default_factory=tuple)

    def __post_init__(self):
        if not self.A > 1:
            raise DomainError(f"ladder multiplier A must exceed 1, got {self.A}")

    @property
    def depth(self) -> int:
        return len(self.rungs)

    def C(self, i: int) -> float | None:
        """C_i if known (it is the C_prev of rung i+1), else None."""
        if i == 0:
            return 0.0
        if i < self.depth:
            return self.rungs[i].C_prev
        return None

    def Cp(self, i: int) -> float:
        return 0.0 if i == 0 else self.rungs[i - 1].Cp

    def g(self, i: int) -> "LadderG":
        return LadderG(self, i)

    # serialization ------------------------------------------------------
    def to_dict(self) -> dict:
        return {
            "version": LADDER_SCHEMA_VERSION,
            "A": self.A,
            "rungs": [{"i": r.i, "C_prev": r.C_prev, "Cp_i": r.Cp, "L": r.L}
                      for r in self.rungs],
        }

    def to_json(self) -> str:
        return json.dumps(self.to_dict(), indent=2, sort_keys=True) + "\n"

    @classmethod
    def from_dict(cls, doc: dict) -> "GLadder":
        if doc.get("version") != LADDER_SCHEMA_VERSION:
            raise DomainError(f"unsupported ladder schema version {doc.get('version')!r}")
        A = float(doc["A"])
        rungs = tuple(
            Rung(int(r["i"]), float(r["C_prev"]), float(r["Cp_i"]), float(r["L"]),
                 _log_start(A, int(r["i"]), float(r["C_prev"])))
            for r in doc["rungs"]
        )
        return cls(A, rungs)

    @classmethod
    def from_json(cls, text: str) -> "GLadder":
        return cls.from_dict(json.loads(text))

    def save(self, path) -> None:
        Path(path).write_text(self.to_json())

    @classmethod
    def load(cls, path) -> "GLadder":
        return cls.from_json(Path(path).read_text())


def _log_start(A: float, i: int, C_prev: float) -> float:
    # Rung 1 starts at x = 1 because A * C_0 = 0 is degenerate.
    return 0.0 if i == 1 else math.log(A * C_prev)


def bridge_length(i: int) -> float:
    """Log-length max(4, i (i+1)^2) of bridge i."""
    return float(max(4, i * (i + 1) ** 2))


class LadderG(GFunction):
    """The rung function g_i of a ladder (constant i+1 beyond C'_i)."""

    kind = "ladder"

    def __init__(self, ladder: GLadder, i: int):
        if not 0 <= i <= ladder.depth:
            raise DomainError(f"rung {i} not built (ladder depth {ladder.depth})")
        self.ladder = ladder
        self.i = i

    def parts(self, u):
        u = np.asarray(u, dtype=float)
        g = np.ones(u.shape)
        xdg = np.zeros(u.shape)
        x2d2g = np.zeros(u.shape)
        for r in self.ladder.rungs[: self.i]:
            mask = u > r.log_start
            theta = np.clip((u - r.log_start) / r.L, 0.0, 1.0)
            g = np.where(mask, r.i + _smooth(theta), g)
            s1 = _smooth1(theta) / r.L
            xdg = np.where(mask, s1, xdg)
            x2d2g = np.where(mask, _smooth2(theta) / r.L**2 - s1, x2d2g)
        return g, xdg, x2d2g

    def log_breakpoints(self):
        pts = []
        for r in self.ladder.rungs[: self.i]:
            pts += [r.log_start, r.log_start + r.L]
        return pts

    def is_constant(self):
        return self.i == 0

    def spec(self):
        return f"ladder-rung:{self.i}"


def parse_g(text: str, ladder: GLadder | None = None) -> GFunction:
    """Build a GFunction from 'const:c', 'log', 'loglog:c' or 'ladder-rung:i'."""
    name, _, arg = text.partition(":")
    if name == "const":
        return ConstantG(float(arg) if arg else 1.0)
    if name == "log":
        return LogG()
    if name == "loglog":
        return LogLogG(float(arg) if arg else 1.0 / 30.0)
    if name == "ladder-rung":
        if ladder is None:
            raise DomainError("ladder-rung g requires a ladder")
        return LadderG(ladder, int(arg))
    raise DomainError(f"unknown g specification {text!r}")


# -- quadrature ---------------------------------------------------------------

def _log_integral(g: GFunction, ua: float, ub: float, epsrel=1e-10) -> float:
    """int_{ua}^{ub} du / g(e^u)^2, split at the breakpoints of g."""
    cuts = [ua] + sorted(b for b in g.log_breakpoints() if ua < b < ub) + [ub]
    total = 0.0
    for lo, hi in zip(cuts[:-1], cuts[1:]):
        val, _ = integrate.quad(lambda s: 1.0 / float(g.g_log(s)) ** 2, lo, hi,
                                epsabs=0.0, epsrel=epsrel, limit=500)
        total += val
    return total


def rung_integral(g: GFunction, a: float, b: float) -> float:
    """int_a^b dy / (y g(y)^2), computed in the variable log y."""
    if not 1 <= a < b:
        raise DomainError(f"need 1 <= a < b, got a={a}, b={b}")
    return _log_integral(g, math.log(a), math.log(b))


# -- condition checks ---------------------------------------------------------

@dataclass
class ConditionReport:
    x_max: float
    c2_sup: float
    g_prime_nonneg: bool
    c2_bounded: bool
    c3_sup: float
    c3_bounded: bool
    c4_cutoffs: list[float]
    c4_integrals: list[float]
    c4_ratio: float
    c4_tail_exponent: float
    c4_verdict: str

    @property
    def passes_c2(self) -> bool:
        return self.g_prime_nonneg and self.c2_bounded

    @property
    def passes_c3(self) -> bool:
        return self.c3_bounded

    @property
    def passes_c4(self) -> bool:
        return self.c4_verdict == "diverges"

    def to_dict(self) -> dict:
        d = dict(self.__dict__)
        d.update(passes_c2=self.passes_c2, passes_c3=self.passes_c3,
                 passes_c4=self.passes_c4)
        return d


def _tail_bounded(values: np.ndarray, growth=1.05, floor=1e-300) -> bool:
    # Compare the sup over the last quarter of the log grid with the quarter before.
    n = len(values)
    last = np.max(values[3 * n // 4:])
    prev = np.max(values[n // 2: 3 * n // 4])
    return bool(np.isfinite(last) and (last <= growth * prev or last <= floor))


def validate_conditions(g: GFunction, x_max: float, tol=1e-12, n_probe=4000,
                        growth=1.05) -> ConditionReport:
    """Numerical probes of the three growth conditions on g.

    c2: 0 <= g' and x g'(x) bounded; c3: x^2 |g''(x)| bounded; c4: divergence of
    int_1^inf dy / (y g^2).  The c4 verdict is a heuristic: partial integrals at
    the cutoffs x_max^(1/3), x_max^(2/3), x_max must keep growing by at least
    ``growth`` and the log-log tail slope of the integrand in log y must be <= 1.
    """
    if not x_max >= 10:
        raise DomainError(f"x_max must be >= 10, got {x_max}")
    U = math.log(x_max)
    u = np.concatenate([_log(np.linspace(0.0, 1.0, 200)),
                        np.linspace(0.0, U, n_probe)[1:]])
    _, xdg, x2d2g = g.parts(u)
    nonneg = bool(np.min(xdg) >= -tol)
    c2 = np.abs(xdg)
    c3 = np.abs(x2d2g)

    cut_u = [U / 3.0, 2.0 * U / 3.0, U]
    integrals = []
    acc, lo = 0.0, 0.0
    for cu in cut_u:
        acc += _log_integral(g, lo, cu)
        integrals.append(acc)
        lo = cu
    ratio = integrals[2] / integrals[1] if integrals[1] > 0 else math.inf
    # Local power of the integrand 1/g(e^u)^2 ~ u^-beta between the last cutoffs.
    f2, f3 = (1.0 / float(g.g_log(cut_u[1])) ** 2, 1.0 / float(g.g_log(cut_u[2])) ** 2)
    beta = -math.log(f3 / f2) / math.log(cut_u[2] / cut_u[1])
    if ratio >= growth and beta <= 1.0:
        verdict = "diverges"
    elif ratio < growth and beta > 1.0:
        verdict = "converges"
    else:
        verdict = "inconclusive"
    return ConditionReport(
        x_max=float(x_max),
        c2_sup=float(np.max(c2)), g_prime_nonneg=nonneg,
        c2_bounded=_tail_bounded(c2, growth),
        c3_sup=float(np.max(c3)), c3_bounded=_tail_bounded(c3, growth),
        c4_cutoffs=[math.exp(c) for c in cut_u], c4_integrals=integrals,
        c4_ratio=float(ratio), c4_tail_exponent=float(beta), c4_verdict=verdict,
    )


# -- ladder construction ------------------------------------------------------

def build_rung(ladder: GLadder, i: int, C_prev: float) -> GLadder:
    """Return a new ladder with rung i appended, given C_{i-1}."""
    if i != ladder.depth + 1:
        raise ConstructionError(f"rung {i} requested but ladder has {ladder.depth} rungs")
    C_prev = float(C_prev)
    if i == 1:
        if C_prev != 0.0:
            raise ConstructionError(f"C_0 = 0 required, got {C_prev}")
    else:
        if not C_prev >= i - 1:
            raise ConstructionError(f"C_{i-1} >= {i-1} violated: C_{i-1} = {C_prev}")
        cp_prev = ladder.Cp(i - 1)
        if not ladder.A * C_prev > cp_prev:
            raise ConstructionError(
                f"C'_{i-1} < A C_{i-1} violated: C'_{i-1} = {cp_prev}, "
                f"A C_{i-1} = {ladder.A * C_prev}")
    L = bridge_length(i)
    log_start = _log_start(ladder.A, i, C_prev)
    try:
        Cp = math.exp(log_start + L)
    except OverflowError:
        Cp = math.inf
    if not math.isfinite(Cp):
        raise ConstructionError(f"C'_{i} = exp({log_start + L}) overflows double precision")
    rung = Rung(i=i, C_prev=C_prev, Cp=Cp, L=L, log_start=log_start)
    return replace(ladder, rungs=ladder.rungs + (rung,))


def build_ladder(A: float, count: int, C_values=None, ladder: GLadder | None = None) -> GLadder:
    """Build rungs up to ``count``.

    ``C_values`` maps i -> C_i (dict, sequence indexed from 1, or callable
    ``f(ladder, i)``).  Missing entries default to max(i, C'_i).  Every
    supplied C_i is raised to max(i, C'_i) if smaller, so that C'_i < A C_i.
    """
    if count < 1:
        raise DomainError(f"rung count must be >= 1, got {count}")
    lad = ladder if ladder is not None else GLadder(A=float(A))
    C_prev = 0.0 if lad.depth == 0 else _default_C(lad, lad.depth, C_values)
    for i in range(lad.depth + 1, count + 1):
        lad = build_rung(lad, i, C_prev)
        C_prev = _default_C(lad, i, C_values)
    return lad


def _default_C(ladder: GLadder, i: int, C_values) -> float:
    floor = max(float(i), ladder.Cp(i))
    supplied = None
    if callable(C_values):
        supplied = C_values(ladder, i)
    elif isinstance(C_values, dict):
        supplied = C_values.get(i)
    elif C_values is not None and i - 1 < len(C_values):
        supplied = C_values[i - 1]
    return floor if supplied is None else max(floor, float(supplied))


def ladder_eval(ladder: GLadder, x):
    """g~(x) = lim g_i(x), valid below the last built plateau start."""
    x = np.asarray(x, dtype=float)
    if ladder.depth == 0:
        raise NeedsMoreRungsError("empty ladder")
    last = ladder.rungs[-1].Cp
    if np.any(x >= last):
        raise NeedsMoreRungsError(f"x >= C'_{ladder.depth} = {last}; build more rungs")
    return LadderG(ladder, ladder.depth)(x)


def h_bound_probe(ladder: GLadder, i: int, p: float, eps_probe=0.01, n_probe=4000,
                  x_min=1e-3) -> float:
    """sup_x |g_i(x) - (i+1)| x^((p-1)/2 - eps_probe) over a log grid."""
    if not 1 <= i <= ladder.depth:
        raise DomainError(f"rung {i} not built")
    g = LadderG(ladder, i)
    u = np.linspace(math.log(x_min), math.log(ladder.Cp(i)) + math.log(10.0), n_probe)
    h = np.abs(g.g_log(u) - (i + 1))
    expo = (p - 1.0) / 2.0 - eps_probe
    with np.errstate(divide="ignore", over="ignore"):
        vals = np.where(h > 0, np.exp(np.log(np.where(h > 0, h, 1.0)) + expo * u), 0.0)
    return float(np.max(vals))


def check_ladder(ladder: GLadder, n_probe=400) -> list[str]:
    """List every violated structural invariant (empty list when all hold)."""
    bad = []
    A = ladder.A
    if ladder.depth and ladder.rungs[0].C_prev != 0.0:
        bad.append("C_0 = 0")
    if float(LadderG(ladder, 0)(0.0)) != 1.0:
        bad.append("g_0 = 1")
    for r in ladder.rungs:
        i = r.i
        C_prev = ladder.C(i - 1)
        if not A * C_prev < r.Cp:
            bad.append(f"A C_{i-1} < C'_{i}")
        C_i = ladder.C(i)
        if C_i is not None:
            if not r.Cp < A * C_i:
                bad.append(f"C'_{i} < A C_{i}")
            if not C_i >= i:
                bad.append(f"C_{i} >= {i}")
            if not C_i >= C_prev:
                bad.append(f"C_{i} >= C_{i-1}")
        if i > 1 and not r.Cp >= ladder.Cp(i - 1):
            bad.append(f"C'_{i} >= C'_{i-1}")
        gi, gprev = LadderG(ladder, i), LadderG(ladder, i - 1)
        lo = np.linspace(-8.0, r.log_start, n_probe)
        if not np.array_equal(gi.g_log(lo), gprev.g_log(lo)):
            bad.append(f"g_{i} = g_{i-1} on [0, A C_{i-1}]")
        hi = math.log(r.Cp) + np.linspace(0.0, 50.0, n_probe)
        if not np.all(gi.g_log(hi) == i + 1):
            bad.append(f"g_{i} = {i+1} on [C'_{i}, inf)")
        u = np.linspace(-8.0, math.log(r.Cp) + 5.0, 20 * n_probe)
        vals, xdg, _ = gi.parts(u)
        if np.any(np.diff(vals) < 0) or np.any(xdg < 0):
            bad.append(f"g_{i} nondecreasing")
        ri = rung_integral(gi, math.exp(r.log_start), r.Cp)
        if not ri >= i * (1 - 1e-6):
            bad.append(f"rung integral {ri} >= {i}")
    return bad
