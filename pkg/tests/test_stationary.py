import io
import math

import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st
from scipy.integrate import quad
from scipy.optimize import brentq
from scipy.special import gamma as gamma_fn

from mfduffing.errors import BracketFailure, ConvergenceFailure
from mfduffing.model import SystemParams
from mfduffing.stationary import (
    SweepCurve,
    _legendre,
    _raw_moments,
    bifurcation_sweep,
    critical_parameter,
    moment_table,
    read_sweep_csv,
    relax_to_equilibrium,
    self_consistency_map,
    self_consistency_slope,
    solve_equilibria,
    static_susceptibility,
    static_susceptibility_formula,
    stationary_moment,
)

# independent high-precision values (mpmath quadrature and root finding)
GAMMA_RATIO = 0.337989120033642364  # Gamma(3/4)/Gamma(1/4)
X0_MU02_D005 = 0.954492514509567524
DC_MU02 = 0.132900400165317886
MUC_D015 = 0.235355477324340209
VAR_MU0_D015 = 0.840247890779083905


def quad_moment(n, p, X0=0.0):
    """Plain adaptive quadrature, independent of the package rule."""
    def w(x):
        return math.exp((-p.b * x**4 / 4 + (p.a - p.mu) * x**2 / 2 + p.mu * X0 * x) / p.D)
    lim = 6.0
    z = quad(w, -lim, lim, points=[-1, 0, 1], limit=200)[0]
    return quad(lambda x: x**n * w(x), -lim, lim, points=[-1, 0, 1], limit=200)[0] / z


def test_normalization_and_odd_moment():
    for p in (SystemParams(), SystemParams(mu=0.6, D=0.05), SystemParams(a=2.0, b=0.5, D=1.3)):
        assert stationary_moment(0, p, 0.3) == pytest.approx(1.0, abs=1e-12)
        assert stationary_moment(1, p, 0.0) == pytest.approx(0.0, abs=1e-12)


def test_quartic_gamma_ratio():
    p = SystemParams(a=0.5, b=1.0, mu=0.5, D=0.25)
    assert stationary_moment(2, p) == pytest.approx(GAMMA_RATIO, rel=1e-10)
    assert math.sqrt(4 * 0.25) * gamma_fn(0.75) / gamma_fn(0.25) == pytest.approx(GAMMA_RATIO)


def test_moments_match_adaptive_quadrature():
    p = SystemParams(mu=0.3, D=0.2)
    table = moment_table(p, 0.4, 8)
    for n in range(9):
        assert table[n] == pytest.approx(quad_moment(n, p, 0.4), rel=1e-8, abs=1e-12)


def test_table_invariants():
    table = moment_table(SystemParams(mu=0.6, D=0.05), 0.9, 22)
    assert table[0] == 1.0
    assert table.variance >= 0
    assert np.all(table.moments[::2] > 0)


def test_node_doubling_changes_little():
    p = SystemParams(mu=0.2, D=0.05)
    table = moment_table(p, 0.95, 22)
    again, _ = _raw_moments(p, 0.95, 0.0, 22, table.half_width, 2 * table.nodes)
    np.testing.assert_allclose(again, table.moments, rtol=1e-9)


def test_map_trivial_cases():
    p0 = SystemParams(mu=0.0)
    for X in (-1.0, 0.3, 2.0):
        assert self_consistency_map(p0, X) == pytest.approx(0.0, abs=1e-12)
    assert self_consistency_map(SystemParams(mu=0.7, D=0.1), 0.0) == pytest.approx(0.0, abs=1e-12)


@given(st.floats(0.05, 1.0), st.floats(0.02, 1.0), st.floats(0, 2))
def test_map_is_odd(mu, D, X):
    p = SystemParams(mu=mu, D=D)
    assert self_consistency_map(p, -X) == pytest.approx(-self_consistency_map(p, X), abs=1e-10)


def test_single_branch_without_coupling():
    eq = solve_equilibria(SystemParams(mu=0.0))
    assert [(b.X0, b.stable) for b in eq.branches] == [(0.0, True)]


def test_three_branches_below_critical():
    p = SystemParams(mu=0.2, D=0.05)
    eq = solve_equilibria(p)
    assert len(eq.branches) == 3
    root = brentq(lambda X: quad_moment(1, p, X) - X, 0.5, 3.0, xtol=1e-12)
    assert root == pytest.approx(X0_MU02_D005, abs=1e-8)
    hi, mid, lo = eq.values()
    assert hi == pytest.approx(X0_MU02_D005, abs=1e-8)
    assert mid == 0.0 and hi + lo == pytest.approx(0.0, abs=1e-9)
    assert [b.stable for b in eq.branches] == [True, False, True]
    for b in eq.branches:
        assert abs(self_consistency_map(p, b.X0) - b.X0) < 1e-10


def test_single_branch_above_critical():
    p = SystemParams(mu=0.2, D=0.5)
    xs = np.linspace(0.01, 3, 60)
    r = [quad_moment(1, p, X) - X for X in xs]
    assert all(v < 0 for v in r)
    assert [(b.X0, b.stable) for b in solve_equilibria(p).branches] == [(0.0, True)]


def test_iteration_cap():
    with pytest.raises(ConvergenceFailure):
        relax_to_equilibrium(SystemParams(mu=0.2, D=0.05), 0.3, max_iter=1)


def test_critical_noise():
    d = critical_parameter(SystemParams(mu=0.2), "D")
    assert d == pytest.approx(DC_MU02, abs=1e-5)
    assert abs(d - 0.14) <= 0.01
    p = SystemParams(mu=0.2)
    assert len(solve_equilibria(p.with_(D=d - 2e-3)).branches) == 3
    assert len(solve_equilibria(p.with_(D=d + 2e-3)).branches) == 1


def test_critical_coupling():
    m = critical_parameter(SystemParams(D=0.15), "mu")
    assert m == pytest.approx(MUC_D015, abs=1e-5)
    assert abs(m - 0.23) < 0.01


def test_critical_bracket_failure():
    with pytest.raises(BracketFailure):
        critical_parameter(SystemParams(mu=0.2), "D", bracket=(0.3, 1.0))


def test_critical_identity_against_finite_difference():
    rng = np.random.default_rng(7)
    h = 1e-5
    for _ in range(10):
        p = SystemParams(a=rng.uniform(0.5, 2), b=rng.uniform(0.5, 2),
                         mu=rng.uniform(0, 1), D=rng.uniform(0.05, 1))
        fd = (self_consistency_map(p, h) - self_consistency_map(p, -h)) / (2 * h)
        ident = p.mu / p.D * stationary_moment(2, p)
        assert abs(fd - ident) < 1e-6
        assert self_consistency_slope(p, 0.0) == pytest.approx(ident, rel=1e-12)


def test_static_susceptibility_uncoupled():
    p = SystemParams(mu=0.0, D=0.15)
    assert static_susceptibility(p, 0.0) == pytest.approx(VAR_MU0_D015 / 0.15, rel=1e-6)


def test_static_susceptibility_quartic():
    # a = mu leaves the pure quartic weight; the tilted weight differentiates in closed form
    p = SystemParams(a=0.5, mu=0.5, D=0.25)
    r = GAMMA_RATIO / 0.25
    assert static_susceptibility(p, 0.0) == pytest.approx(r / (1 - 0.5 * r), rel=1e-6)


def test_static_susceptibility_positive_and_growing():
    p = SystemParams(mu=0.2)
    for D in (0.05, 0.3):
        X0 = solve_equilibria(p.with_(D=D)).select().X0
        chi = static_susceptibility(p.with_(D=D), X0)
        assert chi > 0
        assert chi == pytest.approx(static_susceptibility_formula(p.with_(D=D), X0), rel=1e-6)
    Dc = critical_parameter(p, "D")
    chis = [static_susceptibility(p.with_(D=Dc + d), 0.0) for d in (0.2, 0.1, 0.05, 0.02, 0.01)]
    assert all(b > a for a, b in zip(chis, chis[1:]))


def test_bifurcation_sweep_collapse():
    p = SystemParams(mu=0.2)
    curve = bifurcation_sweep(p, "D", np.linspace(0.02, 0.5, 49))
    counts = [sum(v is not None for v in row) for row in curve.rows]
    first_single = curve.values[counts.index(1)]
    assert all(c == 2 for c in counts[: counts.index(1)])
    assert all(c == 1 for c in counts[counts.index(1):])
    assert 0.13 <= first_single <= 0.15
    for row in curve.rows:
        if row[1] is not None:
            assert abs(row[0] + row[1]) < 1e-8


def test_bifurcation_sweep_uncoupled_flat():
    curve = bifurcation_sweep(SystemParams(mu=0.0), "D", [0.05, 0.1, 0.5])
    assert all(row == (0.0, None, None) for row in curve.rows)


def test_bifurcation_mu_axis_and_unstable():
    curve = bifurcation_sweep(SystemParams(D=0.15), "mu", [0.1, 0.4], include_unstable=True)
    assert curve.rows[0] == (0.0, None, None)
    assert curve.rows[1][1] == 0.0 and curve.rows[1][0] > 0


def test_sweep_curve_csv_roundtrip():
    curve = bifurcation_sweep(SystemParams(mu=0.2), "D", [0.05, 0.5], workers=2)
    text = curve.to_csv(comment="note")
    lines = text.splitlines()
    assert lines[0] == "# note"
    assert lines[1] == "axis,branch_1,branch_2,branch_3"
    assert lines[3] == "0.5,0,,"
    header, rows = read_sweep_csv(text)
    assert rows[0][0] == 0.05 and rows[0][1] == pytest.approx(curve.rows[0][0], rel=1e-11)
    assert len(lines[2].split(",")[1]) <= 16


def test_sweep_workers_do_not_change_results():
    grid = np.linspace(0.05, 0.3, 8)
    a = bifurcation_sweep(SystemParams(mu=0.2), "D", grid, workers=1)
    b = bifurcation_sweep(SystemParams(mu=0.2), "D", grid, workers=3)
    assert a.rows == b.rows


def test_sweep_records_errors_and_continues(monkeypatch):
    import mfduffing.stationary as st_mod

    real = st_mod.solve_equilibria

    def flaky(p, *a, **k):
        if p.D == 0.2:
            raise ConvergenceFailure("forced")
        return real(p, *a, **k)

    monkeypatch.setattr(st_mod, "solve_equilibria", flaky)
    curve = bifurcation_sweep(SystemParams(mu=0.2), "D", [0.1, 0.2, 0.3])
    assert curve.rows[1] is None and 1 in curve.errors
    assert "ConvergenceFailure" in curve.errors[1]
    assert curve.rows[2] == (0.0, None, None)
    assert "0.2,,," in curve.to_csv()


def test_sweep_curve_validation():
    with pytest.raises(ValueError):
        SweepCurve("D", [0.1], [(0.0,)], "X0", ("branch_1",))
    with pytest.raises(ValueError):
        SweepCurve("D", [0.2, 0.1], [(0.0,), (0.0,)], "X0", ("branch_1",))
