import math
from fractions import Fraction

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st
from scipy.integrate import quad

from wavelab import profiles
from wavelab.errors import DomainError, MissingChannelError, NoRungCountError, ResolutionError
from wavelab.gfun import ConstantG, LogG
from wavelab.norms import (
    AdmissiblePair,
    NormLedger,
    active_exponents,
    admissible_check,
    apriori_bound_check,
    build_ledger,
    dlx_key,
    hdot_key,
    lx_key,
    partition_by_threshold,
    q_quantity,
    s_norm,
    solve_rung_count,
    spacetime_norm,
    strichartz_probe,
    x_norm,
)
from wavelab.propagator import SolverConfig, evolve, free_coeffs
from wavelab.spectral import RadialGrid, WaveState, lebesgue_norm

G1 = ConstantG(1.0)
GRID = RadialGrid(20.0, 1024)


def cos4_integral(k, T):
    return 3 * T / 8 + math.sin(2 * k * T) / (4 * k) + math.sin(4 * k * T) / (32 * k)


def mode_l4(grid):
    """||sin(k1 r)/r||_{L^4(ball)} by adaptive quadrature."""
    k = grid.k[0]
    val, _ = quad(lambda r: 4 * math.pi * math.sin(k * r) ** 4 / r**2 if r > 0 else 0.0,
                  0, grid.R, epsabs=0, epsrel=1e-13, limit=200)
    return val**0.25


@pytest.fixture(scope="module")
def mode_ledger():
    d = profiles.eigenmode(GRID, 1)
    times = np.linspace(0.0, 1.0, 1001)
    A, B = free_coeffs(d.u.coeffs, d.ut.coeffs, GRID, times)
    return build_ledger(times, A, B, GRID, 5.0)


@pytest.fixture(scope="module")
def nonlinear_ledger():
    d = profiles.gaussian_bump(GRID, 1.0, 1.0)
    _, led = evolve(d, SolverConfig(5.0, G1, 1e-3, 2.0, 0.01, GRID))
    return led


@pytest.fixture(scope="module")
def weak_ledger():
    d = profiles.gaussian_bump(GRID, 0.1, 1.0)
    _, led = evolve(d, SolverConfig(5.0, G1, 1e-3, 2.0, 0.002, GRID))
    return led


def zero_ledger(n=11):
    times = np.linspace(0.0, 1.0, n)
    z = np.zeros((n, 64))
    return build_ledger(times, z, z, RadialGrid(20.0, 64), 5.0)


def test_channel_keys():
    assert lx_key(4) == "Lx_norm_r=4"
    assert lx_key(math.inf) == "Lx_norm_r=inf"
    assert hdot_key(1) == "Hdot_s=1.0"
    assert dlx_key(0.5, 4) == "DLx_norm_a=0.5_r=4"
    assert active_exponents(5, 0.1) == [8.0, 4.0, 3.1, 2.0, math.inf]


def test_admissible_table():
    eps = 0.1
    assert admissible_check(4, 4, 0.5)
    for p in (3.5, 4, 5, 7, 11):
        assert admissible_check(2 * (p - 1), 6 * (p - 1) / (2 * p - 3), 0.5)
    assert admissible_check((3 + eps) / eps, 3 + eps, 0.5)
    assert not admissible_check(4, 4, 1)
    assert not admissible_check(2, 6, 1)  # q must exceed 2
    assert admissible_check(math.inf, 2, 0.0)
    assert AdmissiblePair(4, 4, 0.5).admissible


def exact_admissible(q, r, m):
    if not (q > 2 and r >= 2):
        return False
    return 1 / q + 3 / r == Fraction(3, 2) - m


@settings(max_examples=200, deadline=None)
@given(st.integers(1, 40), st.integers(1, 40), st.integers(1, 40), st.integers(1, 40),
       st.integers(-6, 6))
def test_admissible_rational_grid(qa, qb, ra, rb, m4):
    q, r, m = Fraction(qa, qb), Fraction(ra, rb), Fraction(m4, 4)
    assert admissible_check(float(q), float(r), float(m)) == exact_admissible(q, r, m)


@settings(max_examples=100, deadline=None)
@given(st.integers(3, 60), st.integers(-4, 4))
def test_admissible_solutions_accepted(q, m4):
    # solve for r on the admissibility line
    m = Fraction(m4, 4)
    inv_r = (Fraction(3, 2) - m - Fraction(1, q)) / 3
    if inv_r <= 0 or inv_r > Fraction(1, 2):
        return
    assert admissible_check(q, float(1 / inv_r), float(m))


def test_zero_ledger_norms():
    led = zero_ledger()
    assert spacetime_norm(led, 4, 4) == 0
    assert s_norm(led) == 0
    assert q_quantity(led) == 0
    assert x_norm(led) == 0


def test_constant_in_time_field():
    grid = RadialGrid(20.0, 256)
    d = profiles.random_smooth(grid, 1)
    times = np.linspace(0.0, 2.5, 26)
    A = np.tile(d.u.coeffs, (26, 1))
    led = build_ledger(times, A, A, grid, 5.0)
    for q, r in ((4, 4), (8, 8), (2, 2), (7.5, 4)):
        assert spacetime_norm(led, q, r) == pytest.approx(2.5 ** (1 / q) * lebesgue_norm(d.u, r),
                                                          rel=1e-12)
    assert spacetime_norm(led, math.inf, 4) == pytest.approx(lebesgue_norm(d.u, 4), rel=1e-12)


@settings(max_examples=40, deadline=None)
@given(st.floats(0.0, 2.0), st.sampled_from([(8, 8), (4, 4), (3.1, 2)]))
def test_interval_additivity(split, pair):
    led = _module_nonlinear()
    q, r = pair
    a, c = 0.0, 2.0
    b = min(max(split, a), c)
    whole = spacetime_norm(led, q, r, (a, c)) ** q
    parts = spacetime_norm(led, q, r, (a, b)) ** q + spacetime_norm(led, q, r, (b, c)) ** q
    assert parts == pytest.approx(whole, rel=1e-10)


_CACHE = {}


def _module_nonlinear():
    if "led" not in _CACHE:
        grid = RadialGrid(20.0, 256)
        d = profiles.gaussian_bump(grid, 1.0, 1.0)
        _CACHE["led"] = evolve(d, SolverConfig(5.0, G1, 4e-3, 2.0, 0.02, grid))[1]
    return _CACHE["led"]


def test_q_quantity_eigenmode_closed_form(mode_ledger):
    k, R, T = GRID.k[0], GRID.R, 1.0
    sp = 1.0
    c = math.sqrt(2 * math.pi * R)
    l4 = mode_l4(GRID)
    w = lambda alpha: k**alpha * l4 * cos4_integral(k, T) ** 0.25  # noqa: E731
    sup_u = c * (k**2 + k**sp)  # attained at t = 0
    sup_ut = c * (k * k + k ** (sp - 1) * k) * abs(math.sin(k * T))  # |sin| increasing on [0,1]
    expected = w(sp - 0.5) + w(1.5) + sup_u + sup_ut
    assert q_quantity(mode_ledger, (0.0, T)) == pytest.approx(expected, rel=1e-6)


@settings(max_examples=40, deadline=None)
@given(st.floats(0.0, 2.0), st.floats(0.0, 2.0), st.floats(0.0, 1.0))
def test_monotone_under_inclusion(x, y, shrink):
    led = _module_nonlinear()
    a, b = sorted((x, y))
    mid = 0.5 * (a + b)
    ia = (mid - shrink * (mid - a), mid + shrink * (b - mid))
    for fn in (q_quantity, x_norm, s_norm):
        assert fn(led, ia) <= fn(led, (a, b)) * (1 + 1e-12) + 1e-300
    assert spacetime_norm(led, 4, 4, ia, alpha=0.5) <= spacetime_norm(led, 4, 4, (a, b), alpha=0.5) * (
        1 + 1e-12) + 1e-300


def test_x_norm_resolution_stability():
    vals = []
    for N in (512, 1024):
        grid = RadialGrid(20.0, N)
        d = profiles.gaussian_bump(grid, 1.0, 1.0)
        _, led = evolve(d, SolverConfig(5.0, G1, 1e-3, 1.0, 0.01, grid))
        vals.append(x_norm(led, eps=0.1))
    assert vals[0] == pytest.approx(vals[1], rel=0.01)
    assert vals[1] == pytest.approx(7.4649, rel=0.01)


def test_x_norm_checks_parameters(nonlinear_ledger):
    with pytest.raises(DomainError):
        x_norm(nonlinear_ledger, p=7)
    with pytest.raises(DomainError):
        x_norm(nonlinear_ledger, eps=0.2)


def test_partition_single_interval(nonlinear_ledger):
    rep = partition_by_threshold(nonlinear_ledger, None, 10 * s_norm(nonlinear_ledger))
    assert rep.intervals == [(0.0, 2.0)]


def test_partition_constant_profile():
    grid = RadialGrid(20.0, 256)
    d = profiles.random_smooth(grid, 2)
    times = np.linspace(0.0, 3.0, 301)
    A = np.tile(d.u.coeffs, (301, 1))
    led = build_ledger(times, A, A, grid, 5.0)
    thr = 0.6 * s_norm(led)
    rep = partition_by_threshold(led, None, thr)
    lengths = np.diff([iv[0] for iv in rep.intervals] + [3.0])
    assert np.allclose(lengths[:-1], lengths[0], rtol=1e-6)
    assert lengths[-1] <= lengths[0] * (1 + 1e-6)


def fine_rechop_count(ledger, threshold):
    """Independent greedy chop using cumulative sums of the q-th power on a fine time grid."""
    q = 2 * (ledger.p - 1)
    t = ledger.times
    f = ledger.channel(lx_key(q)) ** q
    tf = np.linspace(t[0], t[-1], 200 * (len(t) - 1) + 1)
    cum = np.concatenate([[0.0], np.cumsum(0.5 * (np.interp(tf[1:], t, f) + np.interp(tf[:-1], t, f))
                                           * np.diff(tf))])
    count, level = 1, threshold**q
    while cum[-1] > level * count:
        count += 1
    return count


def test_partition_matches_fine_rechop(weak_ledger):
    thr = 0.05
    rep = partition_by_threshold(weak_ledger, None, thr)
    assert rep.count == 13
    assert abs(rep.count - fine_rechop_count(weak_ledger, thr)) <= 1
    q = 8
    total = sum(s**q for s in rep.s_norms)
    assert total == pytest.approx(s_norm(weak_ledger) ** q, rel=0.01)
    assert all(s == pytest.approx(thr, rel=0.01) for s in rep.s_norms[:-1])
    assert rep.s_norms[-1] <= thr * 1.01
    ends = [iv[1] for iv in rep.intervals]
    starts = [iv[0] for iv in rep.intervals]
    assert starts[0] == 0.0 and ends[-1] == 2.0 and starts[1:] == ends[:-1]


def test_partition_resolution_error(nonlinear_ledger):
    with pytest.raises(ResolutionError):
        partition_by_threshold(nonlinear_ledger, None, 1e-4)


def test_solve_rung_count_closed_forms():
    # 2C = e, A = 1, s = 1, margin 10: integral over [e, e^N] of dy/(y g^2)
    C = math.e / 2
    assert solve_rung_count(1.0, C, ConstantG(1.0), 1.0, 5.0, margin=10) == 11
    assert solve_rung_count(1.0, C, ConstantG(2.0), 1.0, 5.0, margin=10) == 41


@settings(max_examples=60, deadline=None)
@given(st.floats(0.6, 5.0), st.floats(0.5, 3.0), st.floats(0.3, 1.5), st.floats(1.5, 50.0),
       st.floats(1.0, 1e6))
def test_solve_rung_count_constant_formula(C, c, s, margin, A):
    target = margin * s**8 * c**2 / math.log(2 * C)
    if target > 1e7 or abs(target - round(target)) < 1e-6:
        return
    expected = 1 + math.ceil(target)
    assert solve_rung_count(A, C, ConstantG(c), s, 5.0, margin=margin) == expected


def test_solve_rung_count_convergent_integral():
    # int dy/(y log^2(2+y^2)) converges; a large target is unreachable
    with pytest.raises(NoRungCountError):
        solve_rung_count(10.0, 1.0, LogG(), 2.0, 5.0, margin=10)
    with pytest.raises(DomainError):
        solve_rung_count(1.0, 0.4, ConstantG(1.0), 1.0, 5.0)


def test_apriori_linear_holds(mode_ledger):
    from wavelab.norms import htilde_series
    A = float(htilde_series(mode_ledger)[0])
    rep = apriori_bound_check(mode_ledger, None, A, 1.31, G1, 1.0, 5.0)
    assert rep.precondition_ok and rep.holds
    assert rep.sup_norm == pytest.approx(rep.initial_norm, rel=1e-12)


def test_apriori_flags_tiny_a(nonlinear_ledger):
    rep = apriori_bound_check(nonlinear_ledger, None, 1e-3, 1.31, G1, 1.0, 5.0)
    assert not rep.precondition_ok and not rep.holds
    assert any("precondition" in n for n in rep.notes)


def test_ledger_csv_round_trip(nonlinear_ledger, tmp_path):
    text = nonlinear_ledger.to_csv()
    header = text.splitlines()[1].split(",")
    assert header[0] == "t" and "Lx_norm_r=4" in header and "Hdot_s=1.0" in header
    back = NormLedger.from_csv(text)
    assert back.to_csv() == text
    for k in nonlinear_ledger.channels:
        assert np.array_equal(back.channels[k], nonlinear_ledger.channels[k])
    nonlinear_ledger.save(tmp_path / "l.csv")
    assert NormLedger.load(tmp_path / "l.csv").to_csv() == text


def test_missing_channel(nonlinear_ledger):
    with pytest.raises(MissingChannelError):
        spacetime_norm(nonlinear_ledger, 4, 5)


def test_ledger_entries_nonnegative(nonlinear_ledger):
    for v in nonlinear_ledger.channels.values():
        assert np.all(np.isfinite(v)) and np.all(v >= 0)


def test_strichartz_probe_eigenmode():
    d = profiles.eigenmode(GRID, 1)
    k, R, T = GRID.k[0], GRID.R, 2.0
    num = cos4_integral(k, T) ** 0.25 * mode_l4(GRID)
    den = math.sqrt(2 * math.pi * R) * k**0.5
    val = strichartz_probe([d], AdmissiblePair(4, 4, 0.5), T, dt_out=0.001)
    assert val == pytest.approx(num / den, rel=1e-6)
    zero = WaveState.zeros(GRID)
    assert strichartz_probe([zero], AdmissiblePair(4, 4, 0.5), T) == 0.0
    assert strichartz_probe([zero, d], AdmissiblePair(4, 4, 0.5), T, dt_out=0.001) == val


@settings(max_examples=15, deadline=None)
@given(st.floats(1e-3, 1e3), st.integers(0, 100))
def test_strichartz_probe_homogeneous(c, seed):
    grid = RadialGrid(20.0, 256)
    d = profiles.random_smooth(grid, seed)
    pair = AdmissiblePair(4, 4, 0.5)
    assert strichartz_probe([d.scaled(c)], pair, 1.0) == pytest.approx(
        strichartz_probe([d], pair, 1.0), rel=1e-10)


def test_strichartz_rejects_inadmissible():
    with pytest.raises(DomainError):
        strichartz_probe([profiles.eigenmode(GRID, 1)], AdmissiblePair(4, 4, 1.0), 1.0)
