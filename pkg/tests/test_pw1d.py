import numpy as np
import pytest

from conftest import ternary_minimize
from rcdopt.subsolvers.pw1d import PiecewiseQuadratic1D, Term, pw1d_minimize
from rcdopt.utils.errors import UnboundedError, InfeasibleError


def test_pure_quadratic_vertex():
    t, value = pw1d_minimize(PiecewiseQuadratic1D(c2=2.0, c1=-4.0))
    assert t == pytest.approx(1.0)
    assert value == pytest.approx(-2.0)


def test_l1_kink_matches_grid():
    phi = PiecewiseQuadratic1D(c2=1.0, c1=0.0, terms=[Term(v=1.0, u=-1.0, lam=1.0)])
    grid = np.arange(-3.0, 3.0, 1e-4)
    values = 0.5 * grid ** 2 + np.abs(grid - 1.0)
    t, value = pw1d_minimize(phi)
    assert value == pytest.approx(values.min(), abs=1e-5)
    assert t == pytest.approx(grid[np.argmin(values)], abs=1e-3)


def test_clipped_vertex():
    phi = PiecewiseQuadratic1D(c2=1.0, c1=-10.0, t_lo=0.0, t_hi=2.0)
    t, _ = pw1d_minimize(phi)
    assert t == 2.0


def test_linear_with_box_goes_to_boundary():
    phi = PiecewiseQuadratic1D(c2=0.0, c1=1.0, terms=[Term(v=2.0, u=0.0, lo=-1.0, hi=1.0)])
    t, value = pw1d_minimize(phi)
    assert t == pytest.approx(-0.5)
    assert value == pytest.approx(-0.5)


def test_linear_with_l1_stops_at_kink():
    # c2 = 0且|c1| < lam时极小点在拐点t = 0
    phi = PiecewiseQuadratic1D(c2=0.0, c1=0.5, terms=[Term(v=1.0, u=0.0, lam=1.0, lo=-1.0, hi=1.0)])
    t, value = pw1d_minimize(phi)
    assert t == 0.0
    assert value == 0.0


def test_unbounded_and_infeasible():
    with pytest.raises(UnboundedError):
        pw1d_minimize(PiecewiseQuadratic1D(c2=0.0, c1=-1.0))
    with pytest.raises(UnboundedError):
        pw1d_minimize(PiecewiseQuadratic1D(c2=0.0, c1=3.0, terms=[Term(v=1.0, u=0.0, lam=1.0)]))
    with pytest.raises(InfeasibleError):
        pw1d_minimize(PiecewiseQuadratic1D(c2=1.0, c1=0.0, terms=[Term(v=1.0, u=0.0, lo=2.0, hi=3.0),
                                                                   Term(v=1.0, u=0.0, lo=-3.0, hi=-2.0)]))


def test_random_instances_match_ternary_search():
    rng = np.random.default_rng(0)
    for _ in range(200):
        k = int(rng.integers(1, 4))
        terms = []
        for _ in range(k):
            lo = -rng.uniform(0.5, 2.0) if rng.random() < 0.7 else -np.inf
            hi = rng.uniform(0.5, 2.0) if rng.random() < 0.7 else np.inf
            terms.append(Term(v=float(rng.standard_normal()), u=float(rng.uniform(-0.4, 0.4)),
                              lam=float(rng.uniform(0, 2)) * (rng.random() < 0.7), lo=lo, hi=hi))
        phi = PiecewiseQuadratic1D(c2=float(rng.uniform(0.1, 3.0)), c1=float(rng.standard_normal() * 3), terms=terms)
        t_lo, t_hi = phi.domain()
        bound = (abs(phi.c1) + sum(term.lam * abs(term.v) for term in terms)) / phi.c2 + 10.0
        t_lo, t_hi = max(t_lo, -bound), min(t_hi, bound)
        t_ref, v_ref = ternary_minimize(phi, t_lo, t_hi)
        t, value = pw1d_minimize(phi)
        assert value == pytest.approx(v_ref, abs=1e-9)
        left, right = phi.subgradient(t)
        assert left <= 1e-7 and right >= -1e-7
