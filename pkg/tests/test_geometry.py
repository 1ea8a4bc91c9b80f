import functools
import itertools
import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from lrperc.errors import CapacityError, DomainError, PoleError
from lrperc.geometry import (
    Arborescence,
    Generator,
    MobiusMap,
    PointSet,
    S_log,
    S_partition,
    S_value,
    arborescence_value,
    diameter,
    mobius_apply,
    mobius_jacobian,
    random_mobius,
    spread_exact,
    spread_greedy,
    sweep_exact,
    sweep_greedy,
)


def brute_sweep(A):
    """Minimum over every parent map that forms an arborescence."""
    n = len(A)
    best = math.inf
    for root in range(n):
        others = [x for x in range(n) if x != root]
        for parents in itertools.product(range(n), repeat=n - 1):
            par = dict(zip(others, parents))
            if any(c == p for c, p in par.items()):
                continue
            ok = True
            for x in others:
                seen, y = set(), x
                while y != root:
                    if y in seen:
                        ok = False
                        break
                    seen.add(y)
                    y = par[y]
                if not ok:
                    break
            if ok:
                best = min(best, arborescence_value(A, Arborescence(root, par)))
    return best


def brute_S(pts):
    pts = [tuple(p) for p in pts]

    @functools.cache
    def rec(A):
        if len(A) == 2:
            return float(np.sum((np.array(A[0]) - np.array(A[1])) ** 2))
        best = math.inf
        first, rest = A[0], A[1:]
        for labels in itertools.product(range(3), repeat=len(rest)):
            parts = [[first], [], []]
            for v, lab in zip(rest, labels):
                parts[lab].append(v)
            if parts[1] and parts[2]:
                a, b, c = parts
                best = min(best, math.sqrt(rec(tuple(sorted(a + b))) * rec(tuple(sorted(b + c)))
                                           * rec(tuple(sorted(c + a)))))
        return best

    return rec(tuple(sorted(pts)))


def random_set(rng, n, d=2):
    return PointSet(rng.normal(size=(n, d)) * np.exp(rng.uniform(-1, 1, size=(n, 1))))


def test_worked_three_point_values():
    A = [0, 1, 3]
    assert spread_exact(A)[0] == pytest.approx(2.0, rel=1e-12)
    assert spread_greedy(A) == pytest.approx(3.0, rel=1e-12)
    assert sweep_exact(A)[0] == pytest.approx(6.0, rel=1e-12)
    assert S_value(A) == pytest.approx(6.0, rel=1e-12)


def test_worked_four_point_S():
    assert S_value([0, 1, 3, 10]) == pytest.approx(6 * math.sqrt(735), rel=1e-12)


def test_two_point_base_cases():
    A = [[0.0, 0.0], [3.0, 4.0]]
    assert sweep_exact(A)[0] == pytest.approx(25.0, rel=1e-12)
    assert S_value(A) == pytest.approx(25.0, rel=1e-12)
    assert spread_exact(A)[0] == pytest.approx(5.0, rel=1e-12)


def test_three_point_S_is_product_of_sides():
    rng = np.random.default_rng(1)
    for _ in range(50):
        P = rng.normal(size=(3, 3))
        sides = [np.linalg.norm(P[i] - P[j]) for i, j in ((0, 1), (1, 2), (2, 0))]
        assert S_value(P) == pytest.approx(np.prod(sides), rel=1e-12)


def test_duplicates_rejected():
    with pytest.raises(DomainError):
        PointSet([[0, 0], [0, 0], [1, 1]])


def test_singleton_errors_and_diameter():
    assert diameter([5.0]) == 0.0
    with pytest.raises(DomainError):
        spread_exact([1.0])
    with pytest.raises(DomainError):
        S_value([1.0])


def test_sweep_capacity():
    with pytest.raises(CapacityError):
        sweep_exact(list(range(9)))
    assert sweep_exact(list(range(9)), max_n=9)[0] > 0


def test_sweep_dp_matches_brute_force():
    rng = np.random.default_rng(2)
    for n in (3, 4, 5):
        for _ in range(15):
            A = random_set(rng, n)
            val, tree = sweep_exact(A)
            assert val == pytest.approx(brute_sweep(A), rel=1e-12)
            assert arborescence_value(A, tree) == pytest.approx(val, rel=1e-12)


def test_S_dp_matches_brute_force():
    rng = np.random.default_rng(3)
    for n in (3, 4, 5, 6):
        for _ in range(10):
            A = random_set(rng, n)
            assert S_value(A) == pytest.approx(brute_S(A.points), rel=1e-12)


def test_S_partition_reports_minimiser():
    A = PointSet([0.0, 1.0, 3.0, 10.0])
    val, parts = S_partition(A)
    sub = [sorted(set(p) | set(q)) for p, q in ((parts[0], parts[1]), (parts[1], parts[2]), (parts[2], parts[0]))]
    recomputed = math.sqrt(np.prod([S_value(A.points[s]) for s in sub]))
    assert recomputed == pytest.approx(val, rel=1e-12)


def test_S_cap():
    with pytest.raises(CapacityError):
        S_value(list(range(15)))


def test_log_space_survives_extreme_scales():
    A = PointSet(np.array([0.0, 1.0, 3.0, 10.0]) * 1e90)
    assert math.isinf(S_value(A))  # 1e360 overflows only at the final exponentiation
    assert S_log(A) == pytest.approx(math.log(6 * math.sqrt(735)) + 360 * math.log(10), rel=1e-14)
    B = PointSet(np.array([0.0, 1.0, 3.0]) * 1e-100)
    assert S_value(B) == pytest.approx(6e-300, rel=1e-9)


@settings(max_examples=60, deadline=None)
@given(st.integers(3, 6), st.floats(0.01, 100.0), st.integers(0, 2**32 - 1))
def test_dilation_homogeneity(n, lam, seed):
    A = random_set(np.random.default_rng(seed), n)
    B = A.scaled(lam)
    assert S_value(B) == pytest.approx(lam**n * S_value(A), rel=1e-9)
    assert sweep_exact(B)[0] == pytest.approx(lam**n * sweep_exact(A)[0], rel=1e-9)
    assert spread_exact(B)[0] == pytest.approx(lam ** (n - 1) * spread_exact(A)[0], rel=1e-9)
    assert diameter(B) == pytest.approx(lam * diameter(A), rel=1e-9)


@settings(max_examples=60, deadline=None)
@given(st.integers(3, 7), st.integers(0, 2**32 - 1))
def test_sandwich_and_greedy_domination(n, seed):
    A = random_set(np.random.default_rng(seed), n)
    diam, spread, sweep = diameter(A), spread_exact(A)[0], sweep_exact(A)[0]
    eps = 1e-12
    assert diam * spread <= sweep * (1 + eps)
    assert sweep <= n ** (n - 1) * diam * spread * (1 + eps)
    assert spread <= spread_greedy(A) * (1 + eps)
    assert sweep <= sweep_greedy(A) * (1 + eps)
    assert sweep_greedy(A) <= n ** (n - 1) * diam * spread_greedy(A) * (1 + eps)


@settings(max_examples=40, deadline=None)
@given(st.integers(2, 6), st.integers(0, 2**32 - 1))
def test_isometry_invariance(n, seed):
    rng = np.random.default_rng(seed)
    A = random_set(rng, n, d=3)
    q, r = np.linalg.qr(rng.normal(size=(3, 3)))
    B = PointSet(A.points @ q.T + rng.normal(size=3))
    for f in (diameter, lambda X: spread_exact(X)[0], lambda X: sweep_exact(X)[0], S_value):
        assert f(B) == pytest.approx(f(A), rel=1e-9)


def test_inversion_jacobian_example():
    m = MobiusMap((Generator("invert"),))
    x = np.array([2.0, 0.0])
    assert mobius_jacobian(m, x) == pytest.approx(1 / 16, rel=1e-15)
    np.testing.assert_allclose(mobius_apply(m, x), [0.5, 0.0])


def test_dilation_jacobian_and_unit_sphere():
    m = MobiusMap((Generator("dilate", 3.0),))
    assert mobius_jacobian(m, [0.3, -2.0, 1.0]) == pytest.approx(27.0, rel=1e-14)
    inv = MobiusMap((Generator("invert"),))
    u = np.array([0.6, 0.8])
    np.testing.assert_allclose(mobius_apply(inv, u), u, rtol=1e-15)
    assert mobius_jacobian(inv, u) == pytest.approx(1.0, rel=1e-15)


def test_pole_reports_generator_index():
    m = MobiusMap((Generator("dilate", 2.0), Generator("translate", [-2.0, 0.0]), Generator("invert")))
    with pytest.raises(PoleError) as err:
        mobius_apply(m, [1.0, 0.0])
    assert err.value.index == 2


def test_generator_validation():
    with pytest.raises(DomainError):
        Generator("dilate", -1.0)
    with pytest.raises(DomainError):
        Generator("orthogonal", [[1.0, 1.0], [0.0, 1.0]])
    with pytest.raises(DomainError):
        Generator("shear")


def test_jacobian_matches_finite_difference():
    rng = np.random.default_rng(5)
    for _ in range(20):
        m = random_mobius(rng, 2, 4)
        x = rng.normal(size=2)
        h = 1e-6
        J = np.column_stack([(mobius_apply(m, x + h * e) - mobius_apply(m, x - h * e)) / (2 * h) for e in np.eye(2)])
        assert abs(np.linalg.det(J)) == pytest.approx(mobius_jacobian(m, x), rel=1e-5)


@settings(max_examples=50, deadline=None)
@given(st.integers(2, 7), st.integers(1, 6), st.integers(1, 3), st.integers(0, 2**32 - 1))
def test_mobius_covariance_of_S(n, g, d, seed):
    rng = np.random.default_rng(seed)
    m = random_mobius(rng, d, g)
    A = random_set(rng, n, d)
    image = PointSet([mobius_apply(m, a) for a in A.points])
    factor = np.prod([mobius_jacobian(m, a) ** (1 / d) for a in A.points])
    assert S_value(image) == pytest.approx(S_value(A) * factor, rel=1e-9)
