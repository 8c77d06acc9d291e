import numpy as np
import pytest
from scipy.linalg import null_space

from conftest import random_problem, ternary_minimize, enumerate_separable_qp
from rcdopt.problem import StructuredSmooth, SeparableTerm, Coupling, BlockPartition, CompositeProblem, \
    build_state, grad_block
from rcdopt.subsolvers.directions import two_block_direction, tuple_direction, pair_curvature, model_value, \
    knapsack_direction
from rcdopt.utils.errors import UnsupportedConfigurationError, ConfigError


def test_stationary_pair_gives_zero_direction():
    problem = CompositeProblem(smooth=StructuredSmooth(np.eye(2), np.zeros(2)), nonsmooth=SeparableTerm.zero(2),
                               coupling=Coupling.single(np.ones(2), 0.0), partition=BlockPartition.scalar(2))
    state = build_state(problem, np.zeros(2))
    d_i, d_j = two_block_direction(problem, state, 0, 1)
    assert d_i[0] == 0.0 and d_j[0] == 0.0


def test_projection_onto_constraint_line():
    # L_01 = L_0 + L_1 = 3，-g/3投影到s_0 + s_1 = 0上
    problem = CompositeProblem(smooth=StructuredSmooth(np.eye(2), np.zeros(2)), nonsmooth=SeparableTerm.zero(2),
                               coupling=Coupling.single(np.ones(2), 0.0), partition=BlockPartition.scalar(2),
                               lipschitz=np.array([1.0, 2.0]))
    state = build_state(problem, np.zeros(2))
    d_i, d_j = two_block_direction(problem, state, 0, 1, g=np.array([2.0, -1.0]))
    assert d_i[0] == pytest.approx(-0.5)
    assert d_j[0] == pytest.approx(0.5)


def test_same_block_is_rejected():
    problem, x = random_problem(n=4)
    with pytest.raises(ConfigError):
        two_block_direction(problem, build_state(problem, x), 1, 1)


@pytest.mark.parametrize('kind', ['l1', 'box', 'l1_box'])
@pytest.mark.parametrize('alpha', [0.0, 1.0])
def test_scalar_pairs_match_line_search(kind, alpha):
    rng = np.random.default_rng(10)
    for trial in range(200):
        problem, x = random_problem(n=6, kind=kind, seed=trial, alpha=alpha, density=1.0)
        state = build_state(problem, x)
        i, j = rng.choice(6, size=2, replace=False)
        d_i, d_j = two_block_direction(problem, state, int(i), int(j))
        idx = np.array([i, j])
        g = np.concatenate([grad_block(problem, state, i), grad_block(problem, state, j)])
        c = pair_curvature(problem, i, j)
        value = model_value(problem, x, idx, g, c, np.concatenate([d_i, d_j]))
        a = problem.coupling.a[idx]
        v = np.array([a[1], -a[0]])

        def phi(t):
            return model_value(problem, x, idx, g, c, t * v)

        h = problem.nonsmooth
        bound = (abs(g @ v) + float(np.sum(h.lam[idx] * np.abs(v)))) / float(np.sum(c * v * v)) + 1.0
        lo, hi = -bound, bound
        for k in range(2):
            if v[k] != 0 and np.isfinite(h.lo[idx[k]]):
                ends = sorted([(h.lo[idx[k]] - x[idx[k]]) / v[k], (h.hi[idx[k]] - x[idx[k]]) / v[k]])
                lo, hi = max(lo, ends[0]), min(hi, ends[1])
        _, ref = ternary_minimize(phi, lo, hi)
        assert value <= ref + 1e-6
        assert value == pytest.approx(ref, abs=1e-6)
        assert abs(a @ np.concatenate([d_i, d_j])) <= 1e-12
        assert value <= 1e-15


def test_block_pair_matches_enumeration():
    for seed in range(30):
        problem, x = random_problem(n=6, kind='box', seed=seed, block_size=2)
        state = build_state(problem, x)
        d_i, d_j = two_block_direction(problem, state, 0, 2)
        idx = np.r_[0:2, 4:6]
        g = np.concatenate([grad_block(problem, state, 0), grad_block(problem, state, 2)])
        c = pair_curvature(problem, 0, 2)
        h = problem.nonsmooth
        _, ref = enumerate_separable_qp(g, c, problem.coupling.a[idx], 0.0, h.lo[idx], h.hi[idx], x=x[idx])
        value = model_value(problem, x, idx, g, c, np.concatenate([d_i, d_j]))
        assert value == pytest.approx(ref, abs=1e-8)


def test_block_pair_with_l1_uses_split():
    problem, x = random_problem(n=6, kind='l1_box', seed=3, block_size=3)
    state = build_state(problem, x)
    d_i, d_j = two_block_direction(problem, state, 0, 1)
    g = np.concatenate([grad_block(problem, state, 0), grad_block(problem, state, 1)])
    c = pair_curvature(problem, 0, 1)
    idx = np.arange(6)
    h = problem.nonsmooth
    _, ref = enumerate_separable_qp(g, c, problem.coupling.a, 0.0, h.lo, h.hi, lam=h.lam, x=x)
    assert model_value(problem, x, idx, g, c, np.concatenate([d_i, d_j])) == pytest.approx(ref, abs=1e-8)


def test_knapsack_direction_respects_rhs():
    problem, x = random_problem(n=5, kind='box', seed=2)
    g = np.ones(5)
    s = knapsack_direction(problem, x, np.arange(5), g, np.ones(5), rhs=0.0)
    assert abs(problem.coupling.a @ s) <= 1e-12


def _tuple_problem(q):
    A = np.array([[1.0, 0.0, -1.0], [0.0, 1.0, -1.0]])
    rng = np.random.default_rng(0)
    Z = rng.standard_normal((5, 3))
    return CompositeProblem(smooth=StructuredSmooth(Z, q), nonsmooth=SeparableTerm.zero(3),
                            coupling=Coupling.general(A, np.zeros(2)), partition=BlockPartition.scalar(3))


def test_tuple_direction_zero_gradient():
    problem = _tuple_problem(np.zeros(3))
    state = build_state(problem, np.zeros(3))
    np.testing.assert_array_equal(tuple_direction(problem, state, [0, 1, 2]), np.zeros(3))


def test_tuple_direction_matches_dense_kkt():
    problem = _tuple_problem(np.array([1.0, -2.0, 0.5]))
    x = np.array([0.3, 0.3, 0.3])
    state = build_state(problem, x)
    d = tuple_direction(problem, state, [0, 1, 2])
    g = problem.smooth.gradient(problem.smooth.residual(x))
    L_N = float(np.sum(problem.lipschitz))
    # min <g, s> + L_N/2 ||s||^2  s.t. A s = 0
    kkt = np.block([[L_N * np.eye(3), problem.coupling.A.T], [problem.coupling.A, np.zeros((2, 2))]])
    ref = np.linalg.solve(kkt, np.concatenate([-g, np.zeros(2)]))[:3]
    np.testing.assert_allclose(d, ref, atol=1e-8)


def test_tuple_direction_rank_deficient_returns_none():
    A = np.array([[1.0, 0.0, 0.0, 0.0], [0.0, 1.0, 0.0, 0.0]])
    problem = CompositeProblem(smooth=StructuredSmooth(np.eye(4), np.ones(4)), nonsmooth=SeparableTerm.zero(4),
                               coupling=Coupling.general(A, np.zeros(2)), partition=BlockPartition.scalar(4))
    state = build_state(problem, np.zeros(4))
    # 第0列和第2、3列：A[:, (0, 2, 3)]的秩为1，零空间二维
    assert tuple_direction(problem, state, [0, 2, 3]) is None
    assert null_space(A[:, [0, 1, 2]]).shape[1] == 1
    assert tuple_direction(problem, state, [0, 1, 2]) is not None


def test_tuple_direction_requires_scalar_blocks():
    problem, x = random_problem(n=6, block_size=2)
    with pytest.raises(UnsupportedConfigurationError):
        tuple_direction(problem, build_state(problem, x), [0, 1])
