"""p(x)-modulars and Luxemburg norms by midpoint quadrature.

Both nodal functions and cell vector fields are sampled at cell centers:
nodal values (and the exponent) by averaging the cell's nodes, vector fields
through their Euclidean length.
"""

from __future__ import annotations

from typing import NamedTuple, Union

import numpy as np

from varexp.exponent import ExponentField
from varexp.mesh import CellVectorField, GridFunction, MeshError

Field = Union[GridFunction, CellVectorField]

NORM_RTOL = 1e-12
MAX_BISECTIONS = 200
UNIT_BAND = 1e-9


class NormError(ArithmeticError):
    pass


def cell_magnitudes(f: Field) -> np.ndarray:
    if isinstance(f, GridFunction):
        return np.abs(f.cell_values())
    if isinstance(f, CellVectorField):
        return f.magnitudes()
    raise TypeError(f"expected GridFunction or CellVectorField, got {type(f).__name__}")


def _check_mesh(f: Field, p: ExponentField) -> None:
    if f.mesh != p.mesh:
        raise MeshError("function and exponent live on different meshes")


def _lse(t: np.ndarray) -> float:
    # scipy's logsumexp carries ~40us of call overhead; this loop is hot
    m = t.max()
    return float(m + np.log(np.exp(t - m).sum()))


def modular_of(a: np.ndarray, pc: np.ndarray, weights: np.ndarray) -> float:
    """sum_c weights_c * a_c**pc_c, with 0**p = 0."""
    out = np.zeros_like(a)
    nz = a > 0
    out[nz] = a[nz] ** pc[nz]
    return float(np.dot(weights, out))


def modular(f: Field, p: ExponentField) -> float:
    """Midpoint-rule value of the integral of |f|^p(x)."""
    _check_mesh(f, p)
    return modular_of(cell_magnitudes(f), p.cell_values, f.mesh.cell_measures)


def luxemburg_of(a: np.ndarray, pc: np.ndarray, weights: np.ndarray, rtol: float = NORM_RTOL) -> float:
    """Root gamma of sum w * (a/gamma)**p = 1 for cell data ``a >= 0``.

    Works on s = log(gamma), where the log-modular is convex and strictly
    decreasing.  Bisection on the power-law bracket, then a Newton polish.
    """
    nz = a > 0
    if not np.any(nz):
        return 0.0
    la = np.log(a[nz])
    pe = pc[nz]
    lw = np.log(weights[nz])

    def log_mod(s):
        return _lse(lw + pe * (la - s))

    lm = log_mod(0.0)
    if not np.isfinite(lm):
        raise NormError("modular is not finite")
    lo = min(lm / pe.min(), lm / pe.max())
    hi = max(lm / pe.min(), lm / pe.max())
    pad = 1e-12 * max(1.0, abs(lo), abs(hi))
    lo, hi = lo - pad, hi + pad
    for _ in range(MAX_BISECTIONS):
        if hi - lo <= rtol:
            break
        mid = 0.5 * (lo + hi)
        if log_mod(mid) > 0.0:
            lo = mid
        else:
            hi = mid
    else:
        raise NormError(f"Luxemburg bisection did not reach rtol={rtol} in {MAX_BISECTIONS} steps")
    # Newton from the left endpoint is monotone for a convex decreasing map
    s = lo
    for _ in range(4):
        t = lw + pe * (la - s)
        e = np.exp(t - t.max())
        lse = float(t.max() + np.log(e.sum()))
        slope = -float(np.dot(e, pe) / e.sum())
        step = -lse / slope
        s_new = min(max(s + step, lo), hi)
        if s_new == s:
            break
        s = s_new
    return float(np.exp(s))


def luxemburg_norm(f: Field, p: ExponentField) -> float:
    """Luxemburg norm inf{gamma > 0 : modular(f/gamma) <= 1}; 0 for f = 0."""
    _check_mesh(f, p)
    return luxemburg_of(cell_magnitudes(f), p.cell_values, f.mesh.cell_measures)


class UnitBallVerdict(NamedTuple):
    norm_sign: int
    modular_sign: int
    passed: bool


def _band_sign(x: float, band: float) -> int:
    if abs(x - 1.0) <= band:
        return 0
    return 1 if x > 1.0 else -1


def unit_ball_check(f: Field, p: ExponentField, band: float = UNIT_BAND) -> UnitBallVerdict:
    """Compare the sides of 1 on which the norm and the modular sit."""
    ns = _band_sign(luxemburg_norm(f, p), band)
    ms = _band_sign(modular(f, p), band)
    return UnitBallVerdict(ns, ms, ns == ms)


def embedding_constant(omega_measure: float, p: ExponentField, q: ExponentField) -> float:
    """Bound on the norm of the embedding L^q(x) -> L^p(x) for p <= q.

    [(p/q)_+ + (1 - p/q)_+] * max(|Omega|^(1/p - 1/q)_+, |Omega|^(1/p - 1/q)_-),
    with _+ / _- the max / min over nodes.
    """
    if p.mesh != q.mesh:
        raise MeshError("exponents live on different meshes")
    bad = np.flatnonzero(p.values > q.values)
    if bad.size:
        raise ValueError(f"embedding needs p <= q; node {int(bad[0])} has p > q")
    ratio = p.values / q.values
    gap = 1.0 / p.values - 1.0 / q.values
    factor = ratio.max() + (1.0 - ratio).max()
    return float(factor * max(omega_measure ** gap.max(), omega_measure ** gap.min()))


class HolderVerdict(NamedTuple):
    lhs: float
    rhs: float
    passed: bool


def holder_check(u: GridFunction, p: ExponentField, q: ExponentField, rtol: float = 1e-9) -> HolderVerdict:
    """Check ||u||_p <= C(|Omega|, p, q) * ||u||_q."""
    c = embedding_constant(u.mesh.measure, p, q)
    lhs = luxemburg_norm(u, p)
    rhs = c * luxemburg_norm(u, q)
    return HolderVerdict(lhs, rhs, lhs <= rhs * (1.0 + rtol))
