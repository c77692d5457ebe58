"""Experiments on exponent sequences p_h -> p from above.

Every limit statement is checked on a finite list of h, so each report keeps
the observed sequence and recomputes its verdict from it.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from pathlib import Path
from typing import Any, Mapping, Sequence

import numpy as np

from varexp.exponent import ExponentField, ExponentSequence, uniform_distance
from varexp.io import write_csv
from varexp.mesh import GridFunction, MeshError, gradient
from varexp.modular import luxemburg_norm, modular
from varexp.rayleigh import (
    EigenPair,
    SolverConfig,
    SolverNotConverged,
    bump,
    constant_p_higher_eigenvalue_1d,
    solve_first_eigenpair,
)

TAIL = 3


def increments_shrink(values: Sequence[float], window: int = TAIL) -> bool:
    """Successive increments |v[i+1] - v[i]| are non-increasing over the last ``window``."""
    inc = np.abs(np.diff(values))[-window:]
    return bool(np.all(np.diff(inc) <= 0))


# -- stability sweep ----------------------------------------------------------------


@dataclass(frozen=True)
class SweepRow:
    h: int
    distance: float
    lam: float
    el_residual: float
    iterations: int
    converged: bool


@dataclass
class StabilityReport:
    rows: list[SweepRow]
    lam_base: float
    base_residual: float
    base_converged: bool
    rel_tol: float = 1e-2
    meta: dict = field(default_factory=dict)

    @property
    def increments(self) -> list[float]:
        return np.abs(np.diff([r.lam for r in self.rows])).tolist()

    @property
    def final_gap(self) -> float:
        return abs(self.rows[-1].lam - self.lam_base)

    @property
    def increments_decreasing(self) -> bool:
        return increments_shrink([r.lam for r in self.rows])

    @property
    def verdict(self) -> bool | None:
        """True/False for (in)consistency with right-continuity; None if some solve failed."""
        if not self.base_converged or not all(r.converged for r in self.rows):
            return None
        return self.increments_decreasing and self.final_gap <= self.rel_tol * self.lam_base

    def verdict_line(self) -> str:
        v = self.verdict
        if v is None:
            return "verdict withheld: solver did not converge for every exponent"
        gap = f"final gap {self.final_gap:.6g} vs tolerance {self.rel_tol * self.lam_base:.6g}"
        if v:
            return f"consistent with right-continuity ({gap})"
        return f"NOT consistent with right-continuity ({gap}, increments decreasing: {self.increments_decreasing})"

    def csv_rows(self):
        incs = [None] + self.increments
        for r, inc in zip(self.rows, incs):
            yield (r.h, r.distance, r.lam, r.el_residual, r.iterations, r.converged, inc)
        yield ("inf", 0.0, self.lam_base, self.base_residual, None, self.base_converged, self.final_gap)

    header = ("h", "sup_distance", "lambda", "el_residual", "iterations", "converged", "increment")

    def to_csv(self, path: str | Path) -> Path:
        return write_csv(path, self.header, self.csv_rows())

    def summary(self) -> dict:
        return {
            "lambda_base": self.lam_base,
            "final_gap": self.final_gap,
            "tolerance": self.rel_tol * self.lam_base,
            "increments": self.increments,
            "increments_decreasing": self.increments_decreasing,
            "verdict": self.verdict,
            **self.meta,
        }


def _solve(p: ExponentField, cfg: SolverConfig) -> tuple[EigenPair, bool]:
    try:
        return solve_first_eigenpair(p, cfg), True
    except SolverNotConverged as exc:
        return exc.best, False


def stability_sweep(
    p: ExponentField,
    seq: ExponentSequence,
    cfg: SolverConfig | None = None,
    rel_tol: float = 1e-2,
    base: EigenPair | None = None,
) -> StabilityReport:
    """Solve the first eigenvalue for every p_h and for p itself."""
    cfg = cfg or SolverConfig()
    if seq.base is not p and uniform_distance(seq.base, p) != 0.0:
        raise ValueError("sequence was built over a different base exponent")
    rows = []
    for h, ph in seq:
        # re-check the from-above hypothesis row by row
        if np.any(ph.values < p.values):
            raise ValueError(f"p_h < p for h = {h}")
        pair, ok = _solve(ph, cfg)
        rows.append(SweepRow(h, uniform_distance(ph, p), pair.lam, pair.el_residual, pair.iterations, ok))
    if base is None:
        base, base_ok = _solve(p, cfg)
    else:
        base_ok = base.converged
    return StabilityReport(rows, base.lam, base.el_residual, base_ok, rel_tol)


# -- norm and modular checks --------------------------------------------------------


@dataclass
class CheckReport:
    name: str
    description: dict
    h_list: list[int]
    observed: dict[str, list[float]]
    base: dict[str, float]
    tolerance: float
    rule: str

    @property
    def verdict(self) -> bool:
        return _VERDICTS[self.name](self)

    def gaps(self, key: str) -> list[float]:
        return [abs(v - self.base[key]) for v in self.observed[key]]

    def csv_rows(self):
        keys = list(self.observed)
        for i, h in enumerate(self.h_list):
            yield (h, *[self.observed[k][i] for k in keys], *[self.gaps(k)[i] for k in keys])
        yield ("inf", *[self.base[k] for k in keys], *[0.0 for _ in keys])

    def header(self):
        keys = list(self.observed)
        return ("h", *keys, *[f"gap_{k}" for k in keys])

    def to_csv(self, path: str | Path) -> Path:
        return write_csv(path, self.header(), self.csv_rows())

    def summary(self) -> dict:
        return {
            "check": self.name,
            "rule": self.rule,
            "tolerance": self.tolerance,
            "base": self.base,
            "final_gaps": {k: self.gaps(k)[-1] for k in self.observed},
            "verdict": self.verdict,
            **self.description,
        }

    def verdict_line(self) -> str:
        return f"{self.name}: {'pass' if self.verdict else 'fail'}"


def _limsup_verdict(r: CheckReport) -> bool:
    gaps = r.gaps("grad_norm")
    k_inf = r.base["grad_norm"]
    if k_inf == 0.0:
        return all(v == 0.0 for v in r.observed["grad_norm"])
    return bool(np.all(np.diff(gaps) <= 0)) and gaps[-1] <= r.tolerance * k_inf


def _semicontinuity_verdict(r: CheckReport) -> bool:
    tail = r.observed["norm"][-TAIL:]
    return min(tail) >= r.base["norm"] - r.tolerance


def _modular_verdict(r: CheckReport) -> bool:
    ok = True
    for key in ("modular", "norm"):
        scale = abs(r.base[key]) or 1.0
        ok &= r.gaps(key)[-1] <= r.tolerance * scale
    return bool(ok)


_VERDICTS = {
    "gamma_limsup": _limsup_verdict,
    "norm_semicontinuity": _semicontinuity_verdict,
    "modular_convergence": _modular_verdict,
}


def gamma_limsup_check(p: ExponentField, seq: ExponentSequence, w: GridFunction, rtol: float = 1e-4) -> CheckReport:
    """Track ||grad w||_{p_h} -> ||grad w||_p for a fixed smooth w."""
    if w.mesh != p.mesh:
        raise MeshError("test function and exponent live on different meshes")
    if not np.any(w.values):
        raise ValueError("test function w vanishes identically")
    gw = gradient(w)
    if np.any(gw.values) and not w.dirichlet_admissible:
        raise ValueError("test function must vanish on the boundary")
    values = [luxemburg_norm(gw, ph) for _, ph in seq]
    return CheckReport(
        name="gamma_limsup",
        description={},
        h_list=list(seq.h_list),
        observed={"grad_norm": values},
        base={"grad_norm": luxemburg_norm(gw, p)},
        tolerance=rtol,
        rule="gaps non-increasing and final gap <= tol * ||grad w||_p",
    )


def perturb(u: GridFunction, rule: Mapping[str, Any], h: int) -> GridFunction:
    """Named perturbation families u_h with u_h -> u nodewise as h grows.

    identity: u; scaling: (1 + 1/h) u; noise: u + (a/h) * seeded uniform noise
    on interior nodes; bump: u + (a/h) * bump(x0, eps).
    """
    kind = rule.get("kind", "identity")
    if kind == "identity":
        return u
    if kind == "scaling":
        return (1.0 + 1.0 / h) * u
    mesh = u.mesh
    a = float(rule.get("amplitude", 0.1))
    if kind == "noise":
        rng = np.random.default_rng(int(rule.get("seed", 0)))
        eta = np.zeros(mesh.n_nodes)
        eta[mesh.interior] = rng.uniform(-1.0, 1.0, mesh.interior.size)
        return GridFunction(mesh, u.values + (a / h) * eta)
    if kind == "bump":
        x0 = rule.get("x0", [0.5 * (lo + hi) for lo, hi in mesh.extent])
        phi = bump(mesh, x0, float(rule.get("eps", 0.25)))
        return GridFunction(mesh, u.values + (a / h) * phi.values)
    raise ValueError(f"unknown perturbation {kind!r}")


def norm_semicontinuity_check(
    p: ExponentField, seq: ExponentSequence, u: GridFunction, rule: Mapping[str, Any], slack: float = 1e-6
) -> CheckReport:
    """||u||_p <= liminf ||u_h||_{p_h}, judged on the last few h."""
    values = [luxemburg_norm(perturb(u, rule, h), ph) for h, ph in seq]
    return CheckReport(
        name="norm_semicontinuity",
        description={"perturbation": dict(rule)},
        h_list=list(seq.h_list),
        observed={"norm": values},
        base={"norm": luxemburg_norm(u, p)},
        tolerance=slack,
        rule=f"min over last {TAIL} h of ||u_h||_(p_h) >= ||u||_p - slack",
    )


class EnergyBoundError(ValueError):
    def __init__(self, message: str, h: int):
        super().__init__(message)
        self.h = h


def modular_convergence_check(
    p: ExponentField,
    seq: ExponentSequence,
    u: GridFunction,
    rule: Mapping[str, Any],
    rtol: float = 1e-4,
    energy_bound: float | None = None,
) -> CheckReport:
    """rho_{p_h}(u_h) -> rho_p(u) and ||u_h||_{p_h} -> ||u||_p under bounded gradient energy.

    ``energy_bound`` caps sup_h ||grad u_h||_{p_h}; by default ten times
    (1 + ||grad u||_p).
    """
    base_energy = luxemburg_norm(gradient(u), p)
    bound = 10.0 * (1.0 + base_energy) if energy_bound is None else energy_bound
    mods, norms, energies = [], [], []
    for h, ph in seq:
        uh = perturb(u, rule, h)
        e = luxemburg_norm(gradient(uh), ph)
        if not math.isfinite(e) or e > bound:
            raise EnergyBoundError(f"gradient energy {e:.6g} exceeds the bound {bound:.6g} at h = {h}", h)
        energies.append(e)
        mods.append(modular(uh, ph))
        norms.append(luxemburg_norm(uh, ph))
    return CheckReport(
        name="modular_convergence",
        description={"perturbation": dict(rule), "energy_sup": max(energies), "energy_bound": bound},
        h_list=list(seq.h_list),
        observed={"modular": mods, "norm": norms},
        base={"modular": modular(u, p), "norm": luxemburg_norm(u, p)},
        tolerance=rtol,
        rule="final relative gaps of modular and norm <= tol",
    )


# -- growth of higher eigenvalues ---------------------------------------------------


@dataclass
class GrowthTable:
    p0: float
    interval: tuple[float, float]
    rows: list[tuple[int, float, float]]
    slope: float
    dimension: int = 1

    @property
    def stated_exponent(self) -> float:
        """Exponent N/p of the quoted growth law."""
        return self.dimension / self.p0

    @property
    def classical_exponent(self) -> float:
        """Exponent p/N of the 1D closed form (m pi_p)^p."""
        return self.p0 / self.dimension

    @property
    def discrepancy(self) -> bool:
        return abs(self.stated_exponent - self.classical_exponent) > 1e-12

    def note(self) -> str:
        return (
            f"fitted modular-form slope {self.slope:.6f}; quoted law m^(N/p) has exponent "
            f"{self.stated_exponent:.6g}, 1D closed form has exponent p/N = {self.classical_exponent:.6g}"
            + (" (they differ)" if self.discrepancy else "")
        )

    header = ("m", "lambda_norm_form", "lambda_modular_form")

    def to_csv(self, path: str | Path) -> Path:
        return write_csv(path, self.header, self.rows)

    def summary(self) -> dict:
        return {
            "p0": self.p0,
            "interval": list(self.interval),
            "fitted_slope": self.slope,
            "stated_exponent_N_over_p": self.stated_exponent,
            "classical_exponent_p_over_N": self.classical_exponent,
            "discrepancy": self.discrepancy,
            "note": self.note(),
        }


def growth_rate_table(p0: float, interval: Sequence[float], m_max: int, first: float | None = None) -> GrowthTable:
    if m_max < 2:
        raise ValueError("m_max must be at least 2 to fit a slope")
    rows = []
    for m in range(1, m_max + 1):
        lam = constant_p_higher_eigenvalue_1d(m, p0, interval, first=first)
        rows.append((m, lam, lam**p0))
    ms = np.log([r[0] for r in rows])
    slope = float(np.polyfit(ms, np.log([r[2] for r in rows]), 1)[0])
    return GrowthTable(float(p0), (float(interval[0]), float(interval[1])), rows, slope)
