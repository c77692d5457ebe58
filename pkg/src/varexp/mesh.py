"""Tensor-grid meshes on intervals and rectangles, grid functions and the
discrete gradient used by the modular quadrature.

Nodes are numbered with the x index running fastest; cells likewise.  Every
cell carries one quadrature point (its center), at which both ``u`` (nodal
average) and ``grad u`` (averaged edge differences) are sampled.
"""

from __future__ import annotations

import os
from dataclasses import dataclass, field
from functools import cached_property
from typing import Callable, Sequence

import numpy as np
import scipy.sparse as sp

DEFAULT_MAX_NODES = 10**7


class MeshError(ValueError):
    pass


def max_nodes() -> int:
    raw = os.environ.get("VAREXP_MAX_NODES")
    return int(raw) if raw else DEFAULT_MAX_NODES


@dataclass(frozen=True)
class Mesh:
    """Uniform tensor grid on ``(a, b)`` or ``(a, b) x (c, d)``.

    ``extent`` holds one ``(lo, hi)`` pair per axis and ``cells`` one cell
    count per axis.
    """

    extent: tuple[tuple[float, float], ...]
    cells: tuple[int, ...]

    def __post_init__(self):
        extent = tuple((float(lo), float(hi)) for lo, hi in self.extent)
        cells = tuple(int(n) for n in self.cells)
        object.__setattr__(self, "extent", extent)
        object.__setattr__(self, "cells", cells)
        if len(extent) not in (1, 2) or len(cells) != len(extent):
            raise MeshError("mesh must be 1D or 2D with one cell count per axis")
        for (lo, hi), n in zip(extent, cells):
            if not hi > lo:
                raise MeshError(f"empty extent ({lo}, {hi})")
            if n < 1:
                raise MeshError(f"cells per axis must be positive, got {n}")
        n_nodes = int(np.prod([n + 1 for n in cells]))
        if n_nodes > max_nodes():
            raise MeshError(f"{n_nodes} nodes exceeds the node cap {max_nodes()}")

    @classmethod
    def interval(cls, a: float, b: float, n: int) -> "Mesh":
        return cls(((a, b),), (n,))

    @classmethod
    def rectangle(cls, a: float, b: float, c: float, d: float, nx: int, ny: int | None = None) -> "Mesh":
        return cls(((a, b), (c, d)), (nx, nx if ny is None else ny))

    @property
    def dimension(self) -> int:
        return len(self.cells)

    @property
    def spacing(self) -> tuple[float, ...]:
        return tuple((hi - lo) / n for (lo, hi), n in zip(self.extent, self.cells))

    @property
    def shape(self) -> tuple[int, ...]:
        """Node counts per axis."""
        return tuple(n + 1 for n in self.cells)

    @property
    def n_nodes(self) -> int:
        return int(np.prod(self.shape))

    @property
    def n_cells(self) -> int:
        return int(np.prod(self.cells))

    @property
    def measure(self) -> float:
        return float(np.prod([hi - lo for lo, hi in self.extent]))

    def axis_nodes(self, axis: int) -> np.ndarray:
        lo, hi = self.extent[axis]
        return np.linspace(lo, hi, self.cells[axis] + 1)

    @cached_property
    def nodes(self) -> np.ndarray:
        """Node coordinates, shape ``(n_nodes, dimension)``."""
        axes = np.meshgrid(*[self.axis_nodes(i) for i in range(self.dimension)], indexing="xy")
        return np.stack([a.ravel() for a in axes], axis=1)

    @cached_property
    def centers(self) -> np.ndarray:
        mids = []
        for i in range(self.dimension):
            x = self.axis_nodes(i)
            mids.append(0.5 * (x[:-1] + x[1:]))
        axes = np.meshgrid(*mids, indexing="xy")
        return np.stack([a.ravel() for a in axes], axis=1)

    @cached_property
    def cell_measures(self) -> np.ndarray:
        return np.full(self.n_cells, float(np.prod(self.spacing)))

    @cached_property
    def boundary(self) -> np.ndarray:
        """Boolean mask of nodes on the domain boundary."""
        if self.dimension == 1:
            mask = np.zeros(self.n_nodes, dtype=bool)
            mask[[0, -1]] = True
            return mask
        nx, ny = self.cells
        grid = np.zeros((ny + 1, nx + 1), dtype=bool)
        grid[0, :] = grid[-1, :] = grid[:, 0] = grid[:, -1] = True
        return grid.ravel()

    @cached_property
    def interior(self) -> np.ndarray:
        return np.flatnonzero(~self.boundary)

    @cached_property
    def averaging(self) -> sp.csr_matrix:
        """Cells x nodes matrix mapping nodal values to cell-center averages."""
        return _cell_operator(self, [1.0] * 2**self.dimension, scale=2.0**-self.dimension)

    @cached_property
    def gradient_ops(self) -> tuple[sp.csr_matrix, ...]:
        """One cells x nodes difference matrix per axis."""
        if self.dimension == 1:
            (h,) = self.spacing
            return (_cell_operator(self, [-1.0, 1.0], scale=1.0 / h),)
        hx, hy = self.spacing
        # corner order: (i,j), (i+1,j), (i,j+1), (i+1,j+1)
        gx = _cell_operator(self, [-1.0, 1.0, -1.0, 1.0], scale=0.5 / hx)
        gy = _cell_operator(self, [-1.0, -1.0, 1.0, 1.0], scale=0.5 / hy)
        return gx, gy


def _cell_operator(mesh: Mesh, corner_weights: Sequence[float], scale: float) -> sp.csr_matrix:
    if mesh.dimension == 1:
        (n,) = mesh.cells
        cells = np.arange(n)
        corners = [cells, cells + 1]
    else:
        nx, ny = mesh.cells
        i, j = np.meshgrid(np.arange(nx), np.arange(ny), indexing="xy")
        i, j = i.ravel(), j.ravel()
        stride = nx + 1
        base = i + stride * j
        corners = [base, base + 1, base + stride, base + stride + 1]
    rows = np.concatenate([np.arange(mesh.n_cells)] * len(corners))
    cols = np.concatenate(corners)
    vals = np.concatenate([np.full(mesh.n_cells, w * scale) for w in corner_weights])
    return sp.csr_matrix((vals, (rows, cols)), shape=(mesh.n_cells, mesh.n_nodes))


@dataclass(frozen=True, eq=False)
class GridFunction:
    """Nodal scalar field on a mesh."""

    mesh: Mesh
    values: np.ndarray = field(repr=False)

    def __post_init__(self):
        values = np.asarray(self.values, dtype=float)
        if values.shape != (self.mesh.n_nodes,):
            raise MeshError(f"expected {self.mesh.n_nodes} nodal values, got shape {values.shape}")
        if not np.all(np.isfinite(values)):
            raise MeshError("grid function has non-finite values")
        object.__setattr__(self, "values", values)

    @property
    def dirichlet_admissible(self) -> bool:
        return bool(np.all(self.values[self.mesh.boundary] == 0.0))

    def cell_values(self) -> np.ndarray:
        return self.mesh.averaging @ self.values

    def _check(self, other: "GridFunction") -> None:
        if other.mesh != self.mesh:
            raise MeshError("grid functions live on different meshes")

    def __add__(self, other):
        if isinstance(other, GridFunction):
            self._check(other)
            return GridFunction(self.mesh, self.values + other.values)
        return NotImplemented

    def __sub__(self, other):
        if isinstance(other, GridFunction):
            self._check(other)
            return GridFunction(self.mesh, self.values - other.values)
        return NotImplemented

    def __mul__(self, alpha):
        if np.isscalar(alpha):
            return GridFunction(self.mesh, float(alpha) * self.values)
        return NotImplemented

    __rmul__ = __mul__

    def __truediv__(self, alpha):
        if np.isscalar(alpha):
            return GridFunction(self.mesh, self.values / float(alpha))
        return NotImplemented

    def __neg__(self):
        return GridFunction(self.mesh, -self.values)


@dataclass(frozen=True, eq=False)
class CellVectorField:
    """One vector per cell, shape ``(n_cells, dimension)``."""

    mesh: Mesh
    values: np.ndarray = field(repr=False)

    def __post_init__(self):
        values = np.asarray(self.values, dtype=float)
        if values.ndim == 1:
            values = values[:, None]
        if values.shape != (self.mesh.n_cells, self.mesh.dimension):
            raise MeshError(f"expected shape {(self.mesh.n_cells, self.mesh.dimension)}, got {values.shape}")
        if not np.all(np.isfinite(values)):
            raise MeshError("vector field has non-finite values")
        object.__setattr__(self, "values", values)

    def magnitudes(self) -> np.ndarray:
        if self.mesh.dimension == 1:
            return np.abs(self.values[:, 0])
        return np.hypot(self.values[:, 0], self.values[:, 1])

    def __mul__(self, alpha):
        if np.isscalar(alpha):
            return CellVectorField(self.mesh, float(alpha) * self.values)
        return NotImplemented

    __rmul__ = __mul__

    def __neg__(self):
        return CellVectorField(self.mesh, -self.values)


def gradient(u: GridFunction) -> CellVectorField:
    ops = u.mesh.gradient_ops
    return CellVectorField(u.mesh, np.stack([op @ u.values for op in ops], axis=1))


def interpolate(f: Callable[..., np.ndarray], mesh: Mesh) -> GridFunction:
    """Sample ``f`` at the nodes; ``f`` takes one coordinate array per axis."""
    coords = [mesh.nodes[:, i] for i in range(mesh.dimension)]
    values = np.broadcast_to(np.asarray(f(*coords), dtype=float), (mesh.n_nodes,))
    if not np.all(np.isfinite(values)):
        raise MeshError("interpolated function is not finite at every node")
    return GridFunction(mesh, values.copy())


def zero_boundary(u: GridFunction) -> GridFunction:
    values = u.values.copy()
    values[u.mesh.boundary] = 0.0
    return GridFunction(u.mesh, values)


def refine(mesh: Mesh, factor: int) -> Mesh:
    if int(factor) != factor or factor < 2:
        raise MeshError(f"refinement factor must be an integer >= 2, got {factor}")
    return Mesh(mesh.extent, tuple(n * int(factor) for n in mesh.cells))


def coarse_sample(u: GridFunction, coarse: Mesh) -> GridFunction:
    """Restrict a function on a refined mesh to the nodes of ``coarse``."""
    factors = []
    for nf, nc, ef, ec in zip(u.mesh.cells, coarse.cells, u.mesh.extent, coarse.extent):
        if ef != ec or nf % nc:
            raise MeshError("meshes are not nested")
        factors.append(nf // nc)
    grid = u.values.reshape(u.mesh.shape[::-1])
    if coarse.dimension == 1:
        sub = grid[:: factors[0]]
    else:
        sub = grid[:: factors[1], :: factors[0]]
    return GridFunction(coarse, sub.ravel().copy())


def mesh_from_spec(spec: dict) -> Mesh:
    dimension = int(spec.get("dimension", 1))
    extent = spec.get("extent", [0.0, 1.0] if dimension == 1 else [[0.0, 1.0], [0.0, 1.0]])
    cells = spec["cells"]
    if dimension == 1:
        if np.ndim(extent) == 1:
            extent = [extent]
        cells = [cells] if np.isscalar(cells) else cells
    else:
        cells = [cells, cells] if np.isscalar(cells) else cells
    return Mesh(tuple(tuple(e) for e in extent), tuple(cells))


def mesh_spec(mesh: Mesh) -> dict:
    return {"dimension": mesh.dimension, "extent": [list(e) for e in mesh.extent], "cells": list(mesh.cells)}
