import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from varexp.exponent import (
    AdmissibilityError,
    ExponentField,
    build_field,
    build_sequence,
    logholder_estimate,
    uniform_distance,
    validate_admissible,
)
from varexp.mesh import Mesh, MeshError
from conftest import const

SQUARE = Mesh.rectangle(0, 1, 0, 1, 10)
LINE = Mesh.interval(0, 1, 8)


def test_constant_field():
    p = const(LINE, 2.0)
    assert np.all(p.values == 2.0)
    assert p.p_minus == p.p_plus == 2.0
    assert p.logholder_L == 0.0


def test_affine_extrema():
    p = build_field(SQUARE, {"family": "affine", "c0": 1.5, "c": 0.3})
    assert p.p_minus == pytest.approx(1.5) and p.p_plus == pytest.approx(1.8)


def test_gaussian_bump_interior_minimum():
    p = build_field(SQUARE, {"family": "gaussian_bump", "c0": 2.0, "a": -0.4, "sigma": 0.1, "x0": [0.5, 0.5]})
    i = int(np.argmin(p.values))
    assert p.p_minus == pytest.approx(1.6)
    np.testing.assert_allclose(SQUARE.nodes[i], [0.5, 0.5])
    assert not SQUARE.boundary[i]


def test_sinusoidal_and_tabulated(tmp_path):
    p = build_field(LINE, {"family": "sinusoidal", "c0": 2.0, "a": 0.5, "omega": np.pi})
    np.testing.assert_allclose(p.values, 2 + 0.5 * np.sin(np.pi * LINE.nodes[:, 0]))
    path = tmp_path / "p.csv"
    path.write_text("node_index,value\n" + "".join(f"{i},{float(v)!r}\n" for i, v in enumerate(p.values)))
    q = build_field(LINE, {"family": "tabulated", "path": str(path)})
    np.testing.assert_array_equal(q.values, p.values)


def test_field_at_most_one_rejected():
    with pytest.raises(AdmissibilityError) as exc:
        build_field(LINE, {"family": "affine", "c0": 0.9, "c": 1.0})
    assert exc.value.node == 0 and "node 0" in str(exc.value)


def test_validate_admissible():
    r = validate_admissible(const(SQUARE, 2.0))
    assert r.upper_ok is False and not r.passed
    r = validate_admissible(build_field(SQUARE, {"family": "affine", "c0": 1.5, "c": 0.3}))
    assert r.passed and r.p_plus == pytest.approx(1.8)
    r = validate_admissible(const(LINE, 2.0))
    assert r.upper_ok is None and r.passed


def test_logholder_brute_force():
    # direct double loop over pairs
    m = Mesh.interval(0, 1, 12)
    p = build_field(m, {"family": "sinusoidal", "c0": 2, "a": 0.4, "omega": 7.0})
    x, v = m.nodes[:, 0], p.values
    best = 0.0
    for i in range(len(x)):
        for j in range(len(x)):
            d = abs(x[i] - x[j])
            if 0 < d <= 0.5:
                best = max(best, abs(v[i] - v[j]) * -np.log(d))
    assert p.logholder_L == pytest.approx(best, rel=1e-13)
    assert logholder_estimate(m.nodes, v, chunk=5) == pytest.approx(best, rel=1e-13)


def test_uniform_distance():
    p = const(LINE, 2.0)
    assert uniform_distance(p, p) == 0.0
    assert uniform_distance(p, const(LINE, 2.25)) == 0.25
    seq = build_sequence(p, {"rule": "additive", "delta": 1.0}, [4])
    assert uniform_distance(seq[4], p) == 0.25
    with pytest.raises(MeshError):
        uniform_distance(p, const(Mesh.interval(0, 1, 9), 2.0))


def test_sequence_class_s_2d():
    seq = build_sequence(const(SQUARE, 1.5), {"rule": "additive", "delta": 0.25}, [1, 2, 4])
    assert seq.p_I == 1.5 and seq.p_S == 1.75 and seq.p_I_star == pytest.approx(6.0)


def test_sequence_from_below_rejected():
    p = const(LINE, 2.0)
    q = ExponentField(LINE, np.where(np.arange(LINE.n_nodes) == 3, 1.8, 2.5))
    with pytest.raises(AdmissibilityError) as exc:
        build_sequence(p, {"rule": "blend", "q": q}, [1, 2])
    assert exc.value.h == 1 and exc.value.node == 3


def test_sequence_1d_waiver():
    seq = build_sequence(const(LINE, 1.5), {"rule": "additive", "delta": 0.5}, [1, 2, 3, 10])
    assert seq.p_I_star == np.inf


def test_sequence_leaving_class_rejected():
    with pytest.raises(AdmissibilityError) as exc:
        build_sequence(const(SQUARE, 1.5), {"rule": "additive", "delta": 0.6}, [1, 2])
    assert exc.value.h == 1


def test_sequence_critical_bound_rejected():
    # p = 1.05 in 2D: p_I* = 2.1/0.95 ~ 2.21 > 2, so only class C bites; use blend to
    # push sup p_h to 1.95 with p_I = 1.05 -> p_I* = 2.2105, admissible
    p = const(SQUARE, 1.05)
    seq = build_sequence(p, {"rule": "blend", "q": {"family": "constant", "c": 1.95}}, [1, 2])
    assert seq.p_S < seq.p_I_star


@settings(max_examples=50, deadline=None)
@given(delta=st.floats(0.01, 3.0), c=st.floats(1.1, 4.0))
def test_additive_distance_exact(delta, c):
    p = const(LINE, c)
    hs = [1, 2, 3, 5, 8, 13]
    seq = build_sequence(p, {"rule": "additive", "delta": delta}, hs)
    d = seq.distances()
    assert all(a > b for a, b in zip(d, d[1:]))
    for h, dist in zip(hs, d):
        assert dist == pytest.approx(delta / h, rel=1e-12)
        assert np.min(seq[h].values - p.values) >= 0
