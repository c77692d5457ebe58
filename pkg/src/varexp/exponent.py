"""Variable exponents on a mesh: construction, admissibility, sequences."""

from __future__ import annotations

import csv
from dataclasses import dataclass, field
from functools import cached_property
from pathlib import Path
from typing import Any, Mapping, Sequence

import numpy as np

from varexp.mesh import Mesh, MeshError

FAMILIES = ("constant", "affine", "sinusoidal", "gaussian_bump", "tabulated")
RULES = ("additive", "blend")


class AdmissibilityError(ValueError):
    """An exponent (or exponent sequence) violates a hypothesis."""

    def __init__(self, message: str, h: int | None = None, node: int | None = None):
        super().__init__(message)
        self.h = h
        self.node = node


@dataclass(frozen=True, eq=False)
class ExponentField:
    mesh: Mesh
    values: np.ndarray = field(repr=False)
    spec: Mapping[str, Any] | None = None

    def __post_init__(self):
        values = np.asarray(self.values, dtype=float)
        if values.shape != (self.mesh.n_nodes,):
            raise MeshError(f"expected {self.mesh.n_nodes} exponent values, got shape {values.shape}")
        bad = np.flatnonzero(~np.isfinite(values) | (values <= 1.0))
        if bad.size:
            i = int(bad[0])
            raise AdmissibilityError(f"exponent must exceed 1 everywhere; node {i} has p = {values[i]!r}", node=i)
        values.setflags(write=False)
        object.__setattr__(self, "values", values)

    @property
    def p_minus(self) -> float:
        return float(self.values.min())

    @property
    def p_plus(self) -> float:
        return float(self.values.max())

    @property
    def is_constant(self) -> bool:
        return self.p_minus == self.p_plus

    @cached_property
    def cell_values(self) -> np.ndarray:
        return self.mesh.averaging @ self.values

    @cached_property
    def logholder_L(self) -> float:
        """Smallest L with |p(x)-p(y)| <= L / (-log|x-y|) over node pairs 0 < |x-y| <= 1/2."""
        return logholder_estimate(self.mesh.nodes, self.values)

    def shifted(self, delta: float) -> "ExponentField":
        return ExponentField(self.mesh, self.values + delta)


def logholder_estimate(nodes: np.ndarray, values: np.ndarray, chunk: int = 512) -> float:
    best = 0.0
    n = len(values)
    for start in range(0, n, chunk):
        stop = min(start + chunk, n)
        d = np.linalg.norm(nodes[start:stop, None, :] - nodes[None, :, :], axis=-1)
        dp = np.abs(values[start:stop, None] - values[None, :])
        ok = (d > 0) & (d <= 0.5)
        if np.any(ok):
            best = max(best, float(np.max(dp[ok] * -np.log(d[ok]))))
    return best


def _coords(mesh: Mesh) -> list[np.ndarray]:
    return [mesh.nodes[:, i] for i in range(mesh.dimension)]


def _vector(value, dimension: int, name: str) -> np.ndarray:
    arr = np.atleast_1d(np.asarray(value, dtype=float))
    if arr.size == 1 and dimension > 1 and name != "x0":
        arr = np.concatenate([arr, np.zeros(dimension - 1)])
    if arr.shape != (dimension,):
        raise ValueError(f"{name} needs {dimension} components, got {arr.tolist()}")
    return arr


def read_tabulated(path: str | Path, n_nodes: int) -> np.ndarray:
    """Read ``node_index,value`` rows (optional header) in node order."""
    rows = []
    with open(path, newline="") as fh:
        for row in csv.reader(fh):
            if not row or row[0].strip().startswith("#"):
                continue
            try:
                rows.append((int(row[0]), float(row[1])))
            except ValueError:
                if rows:
                    raise
                continue  # header line
    index = np.array([r[0] for r in rows])
    if len(rows) != n_nodes or not np.array_equal(index, np.arange(n_nodes)):
        raise ValueError(f"{path}: expected node indices 0..{n_nodes - 1} in order")
    return np.array([r[1] for r in rows])


def evaluate_family(mesh: Mesh, family: Mapping[str, Any]) -> np.ndarray:
    kind = family.get("family")
    x = _coords(mesh)
    if kind == "constant":
        return np.full(mesh.n_nodes, float(family["c"]))
    if kind == "affine":
        slope = _vector(family.get("c", 0.0), mesh.dimension, "c")
        return float(family["c0"]) + sum(s * xi for s, xi in zip(slope, x))
    if kind == "sinusoidal":
        omega = _vector(family.get("omega", np.pi), mesh.dimension, "omega")
        phase = sum(w * xi for w, xi in zip(omega, x))
        return float(family["c0"]) + float(family["a"]) * np.sin(phase)
    if kind == "gaussian_bump":
        x0 = _vector(family.get("x0", [0.5] * mesh.dimension), mesh.dimension, "x0")
        r2 = sum((xi - c) ** 2 for xi, c in zip(x, x0))
        return float(family["c0"]) + float(family["a"]) * np.exp(-r2 / float(family["sigma"]) ** 2)
    if kind == "tabulated":
        return read_tabulated(family["path"], mesh.n_nodes)
    raise ValueError(f"unknown exponent family {kind!r}; expected one of {FAMILIES}")


def build_field(mesh: Mesh, family: Mapping[str, Any]) -> ExponentField:
    """Evaluate an exponent family at the mesh nodes.

    ``gaussian_bump`` takes a signed amplitude ``a``: ``c0 + a*exp(-|x-x0|^2/sigma^2)``.
    """
    return ExponentField(mesh, evaluate_family(mesh, family), spec=dict(family))


@dataclass(frozen=True)
class AdmissibilityReport:
    p_minus: float
    p_plus: float
    dimension: int
    lower_ok: bool
    upper_ok: bool | None  # None when waived (1D)
    logholder_L: float

    @property
    def passed(self) -> bool:
        return self.lower_ok and self.upper_ok is not False


def validate_admissible(p: ExponentField) -> AdmissibilityReport:
    n = p.mesh.dimension
    return AdmissibilityReport(
        p_minus=p.p_minus,
        p_plus=p.p_plus,
        dimension=n,
        lower_ok=p.p_minus > 1.0,
        upper_ok=None if n == 1 else p.p_plus < n,
        logholder_L=p.logholder_L,
    )


def uniform_distance(p: ExponentField, q: ExponentField) -> float:
    if p.mesh != q.mesh:
        raise MeshError("exponents live on different meshes")
    return float(np.max(np.abs(p.values - q.values)))


def critical_exponent(p_I: float, dimension: int) -> float:
    if dimension == 1 or p_I >= dimension:
        return np.inf
    return dimension * p_I / (dimension - p_I)


@dataclass(frozen=True, eq=False)
class ExponentSequence:
    base: ExponentField
    rule: Mapping[str, Any]
    h_list: tuple[int, ...]
    fields: Mapping[int, ExponentField] = field(repr=False)
    p_I: float
    p_S: float
    p_I_star: float

    def __getitem__(self, h: int) -> ExponentField:
        return self.fields[h]

    def __iter__(self):
        return ((h, self.fields[h]) for h in self.h_list)

    def distances(self) -> list[float]:
        return [uniform_distance(self.fields[h], self.base) for h in self.h_list]


def _sequence_member(p: ExponentField, rule: Mapping[str, Any], h: int) -> np.ndarray:
    kind = rule.get("rule")
    if kind == "additive":
        return p.values + float(rule["delta"]) / h
    if kind == "blend":
        q = rule["q"]
        q_values = q.values if isinstance(q, ExponentField) else evaluate_family(p.mesh, q)
        return p.values + (q_values - p.values) / h
    raise ValueError(f"unknown sequence rule {kind!r}; expected one of {RULES}")


def build_sequence(p: ExponentField, rule: Mapping[str, Any], h_list: Sequence[int]) -> ExponentSequence:
    """Build ``p_h`` for each ``h`` and check the convergence-from-above hypotheses.

    Raises :class:`AdmissibilityError` (carrying the offending ``h``) when some
    ``p_h`` dips below ``p``, leaves the admissible class, or when the uniform
    bound ``sup p_h < N p_I / (N - p_I)`` fails in dimension >= 2.
    """
    hs = [int(h) for h in h_list]
    if not hs or any(h < 1 for h in hs):
        raise ValueError("h_list must contain positive integers")
    if sorted(set(hs)) != hs:
        raise ValueError("h_list must be strictly increasing")
    n = p.mesh.dimension
    fields: dict[int, ExponentField] = {}
    for h in hs:
        values = _sequence_member(p, rule, h)
        below = np.flatnonzero(values < p.values)
        if below.size:
            i = int(below[0])
            raise AdmissibilityError(
                f"p_h < p at node {i} for h = {h} (convergence must be from above)", h=h, node=i
            )
        try:
            ph = ExponentField(p.mesh, values)
        except AdmissibilityError as exc:
            raise AdmissibilityError(f"h = {h}: {exc}", h=h, node=exc.node) from None
        if n >= 2 and ph.p_plus >= n:
            raise AdmissibilityError(f"h = {h}: sup p_h = {ph.p_plus} is not below N = {n}", h=h)
        fields[h] = ph
    # both rules are nodewise non-increasing in h with limit p, so the tail
    # infimum is inf p and the tail supremum is attained at the first h
    p_I = min(p.p_minus, min(f.p_minus for f in fields.values()))
    p_S = max(f.p_plus for f in fields.values())
    p_I_star = critical_exponent(p_I, n)
    if n >= 2 and not p_S < p_I_star:
        worst = max(hs, key=lambda h: fields[h].p_plus)
        raise AdmissibilityError(f"sup p_h = {p_S} is not below p_I* = {p_I_star}", h=worst)
    distances = [uniform_distance(fields[h], p) for h in hs]
    if any(b > a for a, b in zip(distances, distances[1:])):
        raise AdmissibilityError("uniform distance to the base exponent must not increase along h_list")
    return ExponentSequence(
        base=p, rule=dict(rule), h_list=tuple(hs), fields=fields, p_I=p_I, p_S=p_S, p_I_star=p_I_star
    )
