"""Norm-form Rayleigh ratio of the p(x)-Laplacian and its first eigenpair.

K(u) = ||grad u||_p(x), k(u) = ||u||_p(x) and the eigenvalue is the minimum of
K/k over Dirichlet functions.  The derivative actions are assembled on the
nodal hat basis, so ``K_prime(u) @ v`` is the exact directional derivative of
the discrete K.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field, replace
from typing import Sequence

import numpy as np
import scipy.sparse as sp
from scipy.sparse.linalg import splu

from varexp.exponent import ExponentField
from varexp.mesh import GridFunction, Mesh, MeshError, gradient, interpolate, zero_boundary
from varexp.modular import cell_magnitudes, luxemburg_norm, modular

PRECONDITIONER_EPS = 1e-4


class UnsupportedError(NotImplementedError):
    pass


class DegenerateFunctionError(ValueError):
    pass


def _signed_power(x: np.ndarray, e: np.ndarray) -> np.ndarray:
    """|x|^(e) * sign(x), defined as 0 where x = 0."""
    out = np.zeros_like(x)
    nz = x != 0
    out[nz] = np.sign(x[nz]) * np.abs(x[nz]) ** e[nz]
    return out


def _check(u: GridFunction, p: ExponentField) -> None:
    if u.mesh != p.mesh:
        raise MeshError("function and exponent live on different meshes")


def K(u: GridFunction, p: ExponentField) -> float:
    _check(u, p)
    value = luxemburg_norm(gradient(u), p)
    if value == 0.0:
        raise DegenerateFunctionError("K(u) undefined: grad u vanishes identically")
    return value


def k(u: GridFunction, p: ExponentField) -> float:
    _check(u, p)
    value = luxemburg_norm(u, p)
    if value == 0.0:
        raise DegenerateFunctionError("k(u) undefined: u vanishes identically")
    return value


def _grad_parts(u: GridFunction, p: ExponentField, Ku: float | None = None):
    g = gradient(u).values
    Ku = K(u, p) if Ku is None else Ku
    mag = np.linalg.norm(g, axis=1) / Ku
    pc = p.cell_values
    w = u.mesh.cell_measures
    denom = float(np.dot(w, pc * _signed_power(mag, pc)))
    return g / Ku, mag, pc, w, denom, Ku


def _val_parts(u: GridFunction, p: ExponentField, ku: float | None = None):
    ku = k(u, p) if ku is None else ku
    uc = u.cell_values() / ku
    pc = p.cell_values
    w = u.mesh.cell_measures
    denom = float(np.dot(w, pc * np.abs(_signed_power(uc, pc))))
    return uc, pc, w, denom, ku


def S(u: GridFunction, p: ExponentField) -> float:
    """Ratio of the p-weighted modulars of grad u / K(u) and u / k(u)."""
    *_, dK, _ = _grad_parts(u, p)
    *_, dk, _ = _val_parts(u, p)
    return dK / dk


def K_prime(u: GridFunction, p: ExponentField, Ku: float | None = None) -> np.ndarray:
    """Nodal vector of <K'(u), phi_j> over all hat functions phi_j."""
    gn, mag, pc, w, denom, _ = _grad_parts(u, p, Ku)
    if denom == 0.0:
        raise DegenerateFunctionError("K'(u) undefined: zero denominator")
    # p |g|^{p-2} g with the vanishing-vector convention
    scale = np.zeros_like(mag)
    nz = mag > 0
    scale[nz] = pc[nz] * mag[nz] ** (pc[nz] - 2.0)
    flux = (w * scale)[:, None] * gn / denom
    return sum(op.T @ flux[:, i] for i, op in enumerate(u.mesh.gradient_ops))


def k_prime(u: GridFunction, p: ExponentField, ku: float | None = None) -> np.ndarray:
    """Nodal vector of <k'(u), phi_j> over all hat functions phi_j."""
    uc, pc, w, denom, _ = _val_parts(u, p, ku)
    if denom == 0.0:
        raise DegenerateFunctionError("k'(u) undefined: zero denominator")
    flux = w * pc * _signed_power(uc, pc - 1.0) / denom
    return u.mesh.averaging.T @ flux


def K_prime_action(u: GridFunction, v: GridFunction, p: ExponentField) -> float:
    return float(K_prime(u, p) @ v.values)


def k_prime_action(u: GridFunction, v: GridFunction, p: ExponentField) -> float:
    return float(k_prime(u, p) @ v.values)


def rayleigh_ratio(u: GridFunction, p: ExponentField) -> float:
    return K(u, p) / k(u, p)


def el_residual(u: GridFunction, lam: float, p: ExponentField) -> float:
    """Weak-form defect of the eigenvalue equation, max over interior hat functions.

    Tests ``int p|grad u/K|^(p-2) grad u/K . grad phi - lam S(u) int p|u/k|^(p-2) u/k phi``
    against every interior hat function ``phi`` (sup norm 1).
    """
    _, _, _, _, dK, Ku = _grad_parts(u, p)
    _, _, _, dk, ku = _val_parts(u, p)
    s = dK / dk
    r = K_prime(u, p, Ku) * dK - lam * s * k_prime(u, p, ku) * dk
    return float(np.max(np.abs(r[u.mesh.interior])))


# -- closed forms for constant exponents in 1D ---------------------------------


def constant_p_first_eigenvalue_1d(p0: float, length: float = 1.0) -> float:
    """min ||u'||_p / ||u||_p on an interval of the given length, constant p.

    Equals (p-1)^(1/p) * pi_p / length with pi_p = 2 pi / (p sin(pi/p)).
    """
    if p0 <= 1:
        raise ValueError("p0 must exceed 1")
    pi_p = 2.0 * math.pi / (p0 * math.sin(math.pi / p0))
    return (p0 - 1.0) ** (1.0 / p0) * pi_p / length


def _constant_exponent(p0) -> float:
    if isinstance(p0, ExponentField):
        if not p0.is_constant:
            raise UnsupportedError("higher eigenvalues are only available for constant exponents")
        return p0.p_minus
    return float(p0)


def constant_p_higher_eigenvalue_1d(m: int, p0, interval: Sequence[float] = (0.0, 1.0), first: float | None = None) -> float:
    """m-th norm-form eigenvalue in 1D for a constant exponent: m * lambda_1.

    The m-th eigenfunction is m alternating copies of the first one rescaled to
    sub-intervals of length L/m, and the norm-form ratio scales like 1/length.
    ``first`` overrides the closed-form lambda_1 (e.g. with a discrete solve).
    """
    if int(m) != m or m < 1:
        raise ValueError("m must be a positive integer")
    p0 = _constant_exponent(p0)
    a, b = interval
    lam1 = constant_p_first_eigenvalue_1d(p0, b - a) if first is None else float(first)
    return m * lam1


# -- inhomogeneous ratio and the concentration probe ----------------------------


def inhomogeneous_ratio(u: GridFunction, p: ExponentField) -> float:
    """int |grad u|^p(x) / int |u|^p(x); not scale invariant when p varies."""
    den = modular(u, p)
    if den == 0.0:
        raise DegenerateFunctionError("inhomogeneous ratio undefined for u = 0")
    return modular(gradient(u), p) / den


def bump(mesh: Mesh, x0: Sequence[float], eps: float) -> GridFunction:
    """cos^2(pi r / (2 eps)) on the ball of radius eps about x0, zero outside and on the boundary."""
    x0 = np.asarray(x0, dtype=float)

    def f(*x):
        r = np.sqrt(sum((xi - c) ** 2 for xi, c in zip(x, x0)))
        return np.where(r < eps, np.cos(0.5 * np.pi * r / eps) ** 2, 0.0)

    return zero_boundary(interpolate(f, mesh))


def concentration_probe(
    p: ExponentField, x0: Sequence[float], scales: Sequence[float], amplitudes: Sequence[float]
) -> list[tuple[float, float, float]]:
    """Rows (eps, t, inhomogeneous_ratio(t * bump_eps)) over the probe grid."""
    x0 = np.atleast_1d(np.asarray(x0, dtype=float))
    if x0.shape != (p.mesh.dimension,):
        raise ValueError(f"x0 needs {p.mesh.dimension} coordinates")
    for xi, (lo, hi) in zip(x0, p.mesh.extent):
        if not lo < xi < hi:
            raise ValueError(f"x0 = {x0.tolist()} lies outside the open domain")
    rows = []
    for eps in scales:
        phi = bump(p.mesh, x0, eps)
        if not np.any(phi.values):
            raise DegenerateFunctionError(f"bump of width {eps} misses every interior node")
        for t in amplitudes:
            rows.append((float(eps), float(t), inhomogeneous_ratio(t * phi, p)))
    return rows


# -- first eigenpair --------------------------------------------------------------


class SolverNotConverged(RuntimeError):
    def __init__(self, message: str, best: "EigenPair"):
        super().__init__(message)
        self.best = best


@dataclass(frozen=True)
class SolverConfig:
    initial_step: float = 0.5
    backtracking: float = 0.5
    tol_lambda: float = 1e-9
    tol_residual: float = 1e-6
    max_iter: int = 50_000
    restarts: int = 3
    seed: int = 0
    perturbation: float = 0.1

    def __post_init__(self):
        if not 0 < self.backtracking < 1:
            raise ValueError("backtracking factor must lie in (0, 1)")
        if min(self.initial_step, self.tol_lambda, self.tol_residual) <= 0:
            raise ValueError("step and tolerances must be positive")
        if self.restarts < 1 or self.max_iter < 1:
            raise ValueError("restarts and max_iter must be >= 1")


@dataclass(frozen=True, eq=False)
class EigenPair:
    lam: float
    u: GridFunction = field(repr=False)
    el_residual: float
    initial_residual: float
    iterations: int
    restarts_used: int
    converged: bool
    restart: int = 0
    history: tuple[float, ...] = field(default=(), repr=False)


def initial_bump(mesh: Mesh) -> GridFunction:
    def f(*x):
        out = 1.0
        for xi, (lo, hi) in zip(x, mesh.extent):
            out = out * np.sin(np.pi * (xi - lo) / (hi - lo))
        return out

    return zero_boundary(interpolate(f, mesh))


class _Descent:
    """Preconditioned projected descent on R = K/k restricted to interior nodes.

    The metric is the stiffness matrix weighted by p |grad u/K|^(p-2), so a unit
    step is one sweep of nonlinear inverse iteration; backtracking keeps every
    accepted step strictly decreasing in R.
    """

    def __init__(self, p: ExponentField, cfg: SolverConfig):
        self.p = p
        self.cfg = cfg
        self.mesh = p.mesh
        self.inner = self.mesh.interior
        self.ops = [op[:, self.inner].tocsc() for op in self.mesh.gradient_ops]

    def normalize(self, u: GridFunction) -> tuple[GridFunction, float]:
        ku = k(u, self.p)
        return GridFunction(self.mesh, u.values / ku), ku

    def metric(self, u: GridFunction, Ku: float):
        g = gradient(u).values / Ku
        mag2 = np.einsum("ij,ij->i", g, g)
        pc = self.p.cell_values
        wts = self.mesh.cell_measures * pc * (mag2 + PRECONDITIONER_EPS**2) ** (0.5 * (pc - 2.0))
        # scaled so that P u = K'(u) up to the regularization
        dK = float(np.dot(self.mesh.cell_measures * pc, mag2 ** (0.5 * pc)))
        W = sp.diags(wts / (Ku * dK))
        P = sum(op.T @ W @ op for op in self.ops)
        return splu(sp.csc_matrix(P))

    def run(self, u: GridFunction, restart: int) -> EigenPair:
        cfg = self.cfg
        u, _ = self.normalize(u)
        lam = K(u, self.p)
        res0 = el_residual(u, lam, self.p)
        res = res0
        history = [lam]
        step = cfg.initial_step
        converged = False
        it = 0
        while it < cfg.max_iter:
            it += 1
            G = K_prime(u, self.p, lam) - lam * k_prime(u, self.p, 1.0)
            Gi = G[self.inner]
            d = -self.metric(u, lam).solve(Gi)
            slope = float(Gi @ d)
            if not slope < 0:
                break
            tau = min(1.0, step / cfg.backtracking)
            accepted = None
            while tau > 1e-14:
                trial = u.values.copy()
                trial[self.inner] += tau * d
                cand = GridFunction(self.mesh, trial)
                try:
                    r = rayleigh_ratio(cand, self.p)
                except DegenerateFunctionError:
                    r = np.inf
                if r <= lam + 1e-4 * tau * slope:
                    accepted = (cand, r)
                    break
                tau *= cfg.backtracking
            if accepted is None:
                break
            step = tau
            u, _ = self.normalize(accepted[0])
            new = K(u, self.p)
            change = abs(lam - new) / lam
            lam = new
            history.append(lam)
            res = el_residual(u, lam, self.p)
            if res <= cfg.tol_residual or change <= cfg.tol_lambda:
                converged = True
                break
        res = el_residual(u, lam, self.p)
        converged = converged or res <= cfg.tol_residual
        if np.max(u.values) < -np.min(u.values):
            u = -u
        return EigenPair(
            lam=lam,
            u=u,
            el_residual=res,
            initial_residual=res0,
            iterations=it,
            restarts_used=restart + 1,
            converged=converged,
            restart=restart,
            history=tuple(history),
        )


def _better(a: EigenPair, b: EigenPair | None, tol: float) -> bool:
    if b is None:
        return True
    if a.converged != b.converged:
        return a.converged
    if abs(a.lam - b.lam) <= tol * b.lam:
        return a.el_residual < b.el_residual
    return a.lam < b.lam


def solve_first_eigenpair(
    p: ExponentField, cfg: SolverConfig | None = None, initial: GridFunction | None = None
) -> EigenPair:
    """Minimize K(u)/k(u) over Dirichlet grid functions.

    Restart ``r`` starts from the positive product-of-sines bump (or
    ``initial``) plus seeded noise with seed ``cfg.seed + r``.  The smallest
    eigenvalue over restarts wins, ties broken by the smaller residual.
    """
    cfg = cfg or SolverConfig()
    mesh = p.mesh
    if mesh.interior.size < 2:
        raise MeshError("need at least two interior nodes")
    base = initial_bump(mesh) if initial is None else zero_boundary(initial)
    scale = np.max(np.abs(base.values))
    descent = _Descent(p, cfg)
    best = None
    for r in range(cfg.restarts):
        rng = np.random.default_rng(cfg.seed + r)
        noise = np.zeros(mesh.n_nodes)
        noise[mesh.interior] = rng.uniform(-1.0, 1.0, mesh.interior.size)
        u0 = GridFunction(mesh, base.values + cfg.perturbation * scale * noise)
        pair = descent.run(u0, r)
        if _better(pair, best, cfg.tol_lambda):
            best = pair
    best = replace(best, restarts_used=cfg.restarts)
    if not best.converged:
        raise SolverNotConverged(
            f"no restart converged within {cfg.max_iter} iterations "
            f"(best lambda={best.lam:.6g}, residual={best.el_residual:.3g})",
            best,
        )
    return best
