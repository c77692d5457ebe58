import numpy as np
import pytest
from hypothesis import given, settings, strategies as st
from hypothesis.extra.numpy import arrays
from scipy.integrate import quad
from scipy.optimize import brentq

from varexp.exponent import ExponentField, build_field
from varexp.mesh import CellVectorField, GridFunction, Mesh, MeshError, gradient, interpolate, refine
from varexp.modular import (
    embedding_constant,
    holder_check,
    luxemburg_norm,
    modular,
    unit_ball_check,
)
from conftest import const, sine

MESH = Mesh.interval(0, 1, 40)
SQUARE = Mesh.rectangle(0, 1, 0, 1, 6)


def bisection_oracle(a, pc, w, tol=1e-14):
    """Plain bisection on gamma with the raw modular; independent of the log-space kernel."""
    lo, hi = 1e-12, 1.0
    while np.dot(w, (a / hi) ** pc) > 1:
        hi *= 2
    while (hi - lo) > tol * hi:
        mid = 0.5 * (lo + hi)
        if np.dot(w, (a / mid) ** pc) > 1:
            lo = mid
        else:
            hi = mid
    return 0.5 * (lo + hi)


def test_modular_zero_and_constant():
    p = const(MESH, 2.5)
    assert modular(GridFunction(MESH, np.zeros(MESH.n_nodes)), p) == 0.0
    assert luxemburg_norm(GridFunction(MESH, np.zeros(MESH.n_nodes)), p) == 0.0
    u = GridFunction(MESH, np.full(MESH.n_nodes, 1.7))
    assert modular(u, p) == pytest.approx(1.7**2.5, rel=1e-13)
    assert luxemburg_norm(u, p) == pytest.approx(1.7, rel=1e-12)


def test_modular_of_x_squared():
    m = Mesh.interval(0, 1, 1024)
    assert abs(modular(interpolate(lambda x: x, m), const(m, 2.0)) - 1 / 3) < 1e-6


def test_vector_field_uses_euclidean_length():
    f = CellVectorField(SQUARE, np.tile([3.0, 4.0], (SQUARE.n_cells, 1)))
    assert modular(f, const(SQUARE, 2.0)) == pytest.approx(25.0)
    assert luxemburg_norm(f, const(SQUARE, 3.0)) == pytest.approx(5.0, rel=1e-12)


def test_mesh_mismatch():
    with pytest.raises(MeshError):
        modular(sine(MESH), const(Mesh.interval(0, 1, 41), 2.0))


def test_constant_exponent_collapse():
    rng = np.random.default_rng(3)
    for p0 in (1.2, 2.0, 3.7):
        u = GridFunction(MESH, rng.normal(size=MESH.n_nodes) * 3)
        p = const(MESH, p0)
        assert luxemburg_norm(u, p) == pytest.approx(modular(u, p) ** (1 / p0), rel=1e-10)


def test_variable_exponent_sine_against_fine_oracle():
    coarse = Mesh.interval(0, 1, 2048)
    fine = refine(coarse, 4)
    spec = {"family": "affine", "c0": 2.0, "c": 1.0}
    value = luxemburg_norm(sine(coarse), build_field(coarse, spec))
    pf = build_field(fine, spec)
    oracle = bisection_oracle(np.abs(sine(fine).cell_values()), pf.cell_values, fine.cell_measures)
    assert abs(value - oracle) < 1e-3
    # continuum value by adaptive quadrature
    cont = brentq(lambda g: quad(lambda x: abs(np.sin(np.pi * x) / g) ** (2 + x), 0, 1)[0] - 1, 0.1, 2, xtol=1e-14)
    assert abs(value - cont) < 1e-5


def test_matches_bisection_oracle_2d():
    rng = np.random.default_rng(7)
    u = GridFunction(SQUARE, rng.normal(size=SQUARE.n_nodes))
    p = ExponentField(SQUARE, 1.1 + 3 * rng.random(SQUARE.n_nodes))
    oracle = bisection_oracle(np.abs(u.cell_values()), p.cell_values, SQUARE.cell_measures)
    assert luxemburg_norm(u, p) == pytest.approx(oracle, rel=1e-12)


def test_unit_ball_examples():
    p = build_field(MESH, {"family": "affine", "c0": 1.5, "c": 2.0})
    u = sine(MESH)
    at_one = u / luxemburg_norm(u, p)
    v = unit_ball_check(at_one, p)
    assert v == (0, 0, True)
    assert unit_ball_check(0.5 * at_one, p) == (-1, -1, True)
    assert unit_ball_check(3 * at_one, p) == (1, 1, True)


nodal = arrays(np.float64, MESH.n_nodes, elements=st.floats(-50, 50, allow_subnormal=False))
exps = arrays(np.float64, MESH.n_nodes, elements=st.floats(1.05, 6.0))


@settings(max_examples=100, deadline=None)
@given(u=nodal, pv=exps, alpha=st.floats(-1e3, 1e3).filter(lambda a: abs(a) > 1e-6))
def test_homogeneity_and_evenness(u, pv, alpha):
    f = GridFunction(MESH, u)
    p = ExponentField(MESH, pv)
    n = luxemburg_norm(f, p)
    assert luxemburg_norm(-f, p) == n
    assert luxemburg_norm(alpha * f, p) == pytest.approx(abs(alpha) * n, rel=1e-10, abs=1e-300)


@settings(max_examples=100, deadline=None)
@given(u=nodal, v=nodal, pv=exps)
def test_triangle_inequality(u, v, pv):
    p = ExponentField(MESH, pv)
    f, g = GridFunction(MESH, u), GridFunction(MESH, v)
    assert luxemburg_norm(f + g, p) <= luxemburg_norm(f, p) + luxemburg_norm(g, p) + 1e-9


@settings(max_examples=100, deadline=None)
@given(u=nodal, pv=exps, scale=st.floats(0.05, 20))
def test_unit_ball_property(u, pv, scale):
    f = GridFunction(MESH, u)
    p = ExponentField(MESH, pv)
    assert unit_ball_check(scale * f, p).passed


@settings(max_examples=50, deadline=None)
@given(u=nodal.filter(lambda a: np.any(np.abs(a) > 1e-3)), pv=exps)
def test_modular_strictly_decreasing_in_gamma(u, pv):
    f = GridFunction(MESH, u)
    p = ExponentField(MESH, pv)
    vals = [modular(f / g, p) for g in (0.5, 1.0, 2.0, 4.0)]
    assert all(a > b for a, b in zip(vals, vals[1:]))


def test_embedding_constant_values():
    p = build_field(MESH, {"family": "affine", "c0": 1.5, "c": 1.0})
    assert embedding_constant(1.0, p, p) == 1.0
    assert embedding_constant(3.0, p, p) == 1.0
    assert embedding_constant(1.0, const(MESH, 2.0), const(MESH, 2.5)) == pytest.approx(1.0, rel=1e-15)
    # hand evaluation on |Omega| = 2: [(0.8) + (0.2)] * 2^(1/2 - 1/2.5)
    assert embedding_constant(2.0, const(MESH, 2.0), const(MESH, 2.5)) == pytest.approx(2**0.1, rel=1e-14)
    with pytest.raises(ValueError):
        embedding_constant(1.0, const(MESH, 2.5), const(MESH, 2.0))


def test_embedding_constant_tends_to_one():
    p = build_field(MESH, {"family": "sinusoidal", "c0": 2.0, "a": 0.6, "omega": 5.0})
    gaps = [embedding_constant(1.0, p, p.shifted(1.0 / j)) - 1 for j in (1, 10, 100, 1000)]
    assert all(a > b for a, b in zip(gaps, gaps[1:]))
    assert gaps[-1] < 1e-3


def test_holder_check():
    p = const(MESH, 1.5)
    assert holder_check(GridFunction(MESH, np.zeros(MESH.n_nodes)), p, p) == (0.0, 0.0, True)
    lhs, rhs, ok = holder_check(sine(MESH), p, p)
    assert ok and lhs == rhs


def test_holder_check_random():
    rng = np.random.default_rng(11)
    for _ in range(500):
        m = Mesh.interval(0, float(rng.uniform(0.2, 3.0)), 16)
        u = GridFunction(m, rng.normal(size=m.n_nodes) * rng.uniform(0.01, 10))
        pv = 1.05 + 3 * rng.random(m.n_nodes)
        p = ExponentField(m, pv)
        q = ExponentField(m, pv + 2 * rng.random(m.n_nodes))
        assert holder_check(u, p, q).passed
