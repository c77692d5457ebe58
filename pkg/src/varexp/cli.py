"""Command line front-end: ``varexp <command> --config run.json [--seed N] [--out DIR]``.

Exit status: 0 success, 2 invalid config or inadmissible input, 3 numerical
kernel failure, 4 solver non-convergence.
"""

from __future__ import annotations

import argparse
import json
import logging
import sys
from pathlib import Path
from typing import Annotated, Any, Literal, Optional, Union

import numpy as np
from pydantic import BaseModel, ConfigDict, Field, ValidationError, model_validator

from varexp.exponent import AdmissibilityError, ExponentField, build_field, build_sequence, read_tabulated, validate_admissible
from varexp.io import config_hash, write_csv, write_grid_function, write_json
from varexp.lab import (
    EnergyBoundError,
    gamma_limsup_check,
    growth_rate_table,
    modular_convergence_check,
    norm_semicontinuity_check,
    stability_sweep,
)
from varexp.mesh import GridFunction, Mesh, MeshError, interpolate, mesh_from_spec, zero_boundary
from varexp.modular import NormError, luxemburg_norm, modular, unit_ball_check
from varexp.rayleigh import (
    DegenerateFunctionError,
    SolverConfig,
    SolverNotConverged,
    bump,
    solve_first_eigenpair,
)

log = logging.getLogger("varexp")

EXIT_OK, EXIT_CONFIG, EXIT_NUMERIC, EXIT_NOCONV = 0, 2, 3, 4
COMMANDS = ("norm", "eigen", "sweep", "gamma", "growth")


class Strict(BaseModel):
    model_config = ConfigDict(extra="forbid", frozen=True)


class MeshSpec(Strict):
    dimension: Literal[1, 2] = 1
    extent: Optional[list] = None
    cells: Union[int, list[int]]


class ConstantExponent(Strict):
    family: Literal["constant"]
    c: float


class AffineExponent(Strict):
    family: Literal["affine"]
    c0: float
    c: Union[float, list[float]] = 0.0


class SinusoidalExponent(Strict):
    family: Literal["sinusoidal"]
    c0: float
    a: float
    omega: Union[float, list[float]] = float(np.pi)


class GaussianExponent(Strict):
    family: Literal["gaussian_bump"]
    c0: float
    a: float
    sigma: float = Field(gt=0)
    x0: Optional[list[float]] = None


class TabulatedExponent(Strict):
    family: Literal["tabulated"]
    path: str


ExponentSpec = Annotated[
    Union[ConstantExponent, AffineExponent, SinusoidalExponent, GaussianExponent, TabulatedExponent],
    Field(discriminator="family"),
]


class FunctionSpec(Strict):
    family: Literal["zero", "constant", "sine", "affine", "bump", "tabulated"]
    c: Union[float, list[float]] = 1.0
    c0: float = 0.0
    modes: Union[int, list[int]] = 1
    amplitude: float = 1.0
    x0: Optional[list[float]] = None
    eps: float = 0.25
    path: Optional[str] = None
    zero_boundary: bool = False


class SequenceSpec(Strict):
    rule: Literal["additive", "blend"]
    delta: Optional[float] = None
    q: Optional[ExponentSpec] = None
    h_list: list[int]

    @model_validator(mode="after")
    def _params(self):
        if self.rule == "additive" and self.delta is None:
            raise ValueError("additive rule needs delta")
        if self.rule == "blend" and self.q is None:
            raise ValueError("blend rule needs q")
        return self


class SolverSpec(Strict):
    initial_step: float = 0.5
    backtracking: float = 0.5
    tol_lambda: float = 1e-9
    tol_residual: float = 1e-6
    max_iter: int = 50_000
    restarts: int = 3
    perturbation: float = 0.1


class PerturbationSpec(Strict):
    kind: Literal["identity", "scaling", "noise", "bump"] = "identity"
    amplitude: float = 0.1
    seed: Optional[int] = None
    x0: Optional[list[float]] = None
    eps: float = 0.25


class CheckSpec(Strict):
    kind: Literal["limsup", "semicontinuity", "modular"] = "limsup"
    function: FunctionSpec
    perturbation: PerturbationSpec = PerturbationSpec()
    tolerance: Optional[float] = None


class GrowthSpec(Strict):
    p0: float = Field(gt=1)
    m_max: int
    interval: list[float] = [0.0, 1.0]
    method: Literal["closed_form", "solve"] = "closed_form"
    cells: int = 2048


class RunConfig(Strict):
    command: Optional[Literal["norm", "eigen", "sweep", "gamma", "growth"]] = None
    mesh: Optional[MeshSpec] = None
    exponent: Optional[ExponentSpec] = None
    function: Optional[FunctionSpec] = None
    sequence: Optional[SequenceSpec] = None
    solver: SolverSpec = SolverSpec()
    check: Optional[CheckSpec] = None
    growth: Optional[GrowthSpec] = None
    stability_tolerance: float = 1e-2
    seed: int = 0
    out: str = "results"


class ConfigError(ValueError):
    pass


def _require(cfg: RunConfig, *names: str) -> None:
    missing = [n for n in names if getattr(cfg, n) is None]
    if missing:
        raise ConfigError(f"command {cfg.command!r} needs config sections: {', '.join(missing)}")


def build_function(spec: FunctionSpec, mesh: Mesh) -> GridFunction:
    kind = spec.family
    if kind == "zero":
        u = GridFunction(mesh, np.zeros(mesh.n_nodes))
    elif kind == "constant":
        u = GridFunction(mesh, np.full(mesh.n_nodes, float(np.atleast_1d(spec.c)[0])))
    elif kind == "sine":
        modes = np.broadcast_to(np.atleast_1d(spec.modes), (mesh.dimension,))

        def f(*x):
            out = spec.amplitude
            for xi, k, (lo, hi) in zip(x, modes, mesh.extent):
                out = out * np.sin(k * np.pi * (xi - lo) / (hi - lo))
            return out

        u = zero_boundary(interpolate(f, mesh))
    elif kind == "affine":
        slope = np.atleast_1d(np.asarray(spec.c, dtype=float))
        slope = np.concatenate([slope, np.zeros(mesh.dimension - slope.size)])
        u = interpolate(lambda *x: spec.c0 + sum(s * xi for s, xi in zip(slope, x)), mesh)
    elif kind == "bump":
        x0 = spec.x0 or [0.5 * (lo + hi) for lo, hi in mesh.extent]
        u = spec.amplitude * bump(mesh, x0, spec.eps)
    else:
        if spec.path is None:
            raise ConfigError("tabulated function needs a path")
        u = GridFunction(mesh, read_tabulated(spec.path, mesh.n_nodes))
    return zero_boundary(u) if spec.zero_boundary else u


def _exponent(cfg: RunConfig, mesh: Mesh, require_class: bool) -> ExponentField:
    p = build_field(mesh, cfg.exponent.model_dump())
    if require_class and mesh.dimension >= 2 and p.p_plus >= mesh.dimension:
        raise AdmissibilityError(f"sup p = {p.p_plus} is not below N = {mesh.dimension}")
    return p


def _solver_config(cfg: RunConfig) -> SolverConfig:
    return SolverConfig(seed=cfg.seed, **cfg.solver.model_dump())


def _sequence(cfg: RunConfig, p: ExponentField):
    spec = cfg.sequence.model_dump()
    if spec["q"] is None:
        spec.pop("q")
    h_list = spec.pop("h_list")
    return build_sequence(p, spec, h_list)


def _mesh(cfg: RunConfig) -> Mesh:
    return mesh_from_spec(cfg.mesh.model_dump(exclude_none=True))


def _say(msg: str) -> None:
    print(msg, flush=True)


def cmd_norm(cfg: RunConfig, out: Path, tag: str) -> int:
    _require(cfg, "mesh", "exponent", "function")
    mesh = _mesh(cfg)
    p = _exponent(cfg, mesh, require_class=False)
    u = build_function(cfg.function, mesh)
    rho = modular(u, p)
    norm = luxemburg_norm(u, p)
    ub = unit_ball_check(u, p)
    write_csv(
        out / f"norm_{tag}.csv",
        ("modular", "luxemburg_norm", "norm_sign", "modular_sign", "unit_ball_pass"),
        [(rho, norm, ub.norm_sign, ub.modular_sign, ub.passed)],
    )
    write_json(out / f"norm_{tag}.json", {"modular": rho, "luxemburg_norm": norm, "unit_ball": ub._asdict(), "config": cfg.model_dump()})
    _say(f"modular = {rho:.6g}")
    _say(f"norm = {norm:.6g}")
    _say(f"unit ball: norm side {ub.norm_sign:+d}, modular side {ub.modular_sign:+d}, {'pass' if ub.passed else 'FAIL'}")
    return EXIT_OK


def cmd_eigen(cfg: RunConfig, out: Path, tag: str) -> int:
    _require(cfg, "mesh", "exponent")
    mesh = _mesh(cfg)
    p = _exponent(cfg, mesh, require_class=True)
    status = EXIT_OK
    try:
        pair = solve_first_eigenpair(p, _solver_config(cfg))
    except SolverNotConverged as exc:
        pair, status = exc.best, EXIT_NOCONV
    write_grid_function(out / f"eigen_{tag}_u.csv", pair.u.values)
    record = {
        "lambda": pair.lam,
        "el_residual": pair.el_residual,
        "initial_residual": pair.initial_residual,
        "iterations": pair.iterations,
        "restarts": pair.restarts_used,
        "converged": pair.converged,
        "seed": cfg.seed,
        "mesh": cfg.mesh.model_dump(),
        "exponent": cfg.exponent.model_dump(),
    }
    write_csv(out / f"eigen_{tag}.csv", tuple(k for k in record if k not in ("mesh", "exponent")),
              [tuple(v for k, v in record.items() if k not in ("mesh", "exponent"))])
    write_json(out / f"eigen_{tag}.json", record)
    _say(f"lambda = {pair.lam:.6g}  residual = {pair.el_residual:.3g}  iterations = {pair.iterations}"
         + ("" if pair.converged else "  (NOT converged)"))
    return status


def cmd_sweep(cfg: RunConfig, out: Path, tag: str) -> int:
    _require(cfg, "mesh", "exponent", "sequence")
    mesh = _mesh(cfg)
    p = _exponent(cfg, mesh, require_class=True)
    seq = _sequence(cfg, p)
    report = stability_sweep(p, seq, _solver_config(cfg), rel_tol=cfg.stability_tolerance)
    report.to_csv(out / f"sweep_{tag}.csv")
    write_json(out / f"sweep_{tag}.json", {**report.summary(), "seed": cfg.seed, "config": cfg.model_dump()})
    _say(report.verdict_line())
    return EXIT_NOCONV if report.verdict is None else EXIT_OK


def cmd_gamma(cfg: RunConfig, out: Path, tag: str) -> int:
    _require(cfg, "mesh", "exponent", "sequence", "check")
    mesh = _mesh(cfg)
    p = _exponent(cfg, mesh, require_class=True)
    seq = _sequence(cfg, p)
    chk = cfg.check
    u = build_function(chk.function, mesh)
    rule = chk.perturbation.model_dump(exclude_none=True)
    rule.setdefault("seed", cfg.seed)
    tol = {} if chk.tolerance is None else {"limsup": {"rtol": chk.tolerance}, "semicontinuity": {"slack": chk.tolerance},
                                             "modular": {"rtol": chk.tolerance}}[chk.kind]
    if chk.kind == "limsup":
        report = gamma_limsup_check(p, seq, u, **tol)
    elif chk.kind == "semicontinuity":
        report = norm_semicontinuity_check(p, seq, u, rule, **tol)
    else:
        report = modular_convergence_check(p, seq, u, rule, **tol)
    report.to_csv(out / f"gamma_{tag}.csv")
    write_json(out / f"gamma_{tag}.json", {**report.summary(), "seed": cfg.seed, "config": cfg.model_dump()})
    _say(report.verdict_line())
    return EXIT_OK


def cmd_growth(cfg: RunConfig, out: Path, tag: str) -> int:
    _require(cfg, "growth")
    g = cfg.growth
    first = None
    if g.method == "solve":
        a, b = g.interval
        p = build_field(Mesh.interval(a, b, g.cells), {"family": "constant", "c": g.p0})
        try:
            first = solve_first_eigenpair(p, _solver_config(cfg)).lam
        except SolverNotConverged as exc:
            _say(f"first eigenvalue solve did not converge (best {exc.best.lam:.6g})")
            return EXIT_NOCONV
    table = growth_rate_table(g.p0, g.interval, g.m_max, first=first)
    table.to_csv(out / f"growth_{tag}.csv")
    write_json(out / f"growth_{tag}.json", {**table.summary(), "config": cfg.model_dump()})
    for m, lam, lam_mod in table.rows:
        _say(f"m = {m}: norm form {lam:.6g}, modular form {lam_mod:.6g}")
    _say(table.note())
    return EXIT_OK


HANDLERS = {"norm": cmd_norm, "eigen": cmd_eigen, "sweep": cmd_sweep, "gamma": cmd_gamma, "growth": cmd_growth}


def load_config(path: str | Path, command: str, seed: int | None = None, out: str | None = None) -> RunConfig:
    with open(path) as fh:
        raw = json.load(fh)
    if not isinstance(raw, dict):
        raise ConfigError("config must be a JSON object")
    if raw.get("command", command) != command:
        raise ConfigError(f"config is for command {raw['command']!r}, not {command!r}")
    raw["command"] = command
    if seed is not None:
        raw["seed"] = seed
    if out is not None:
        raw["out"] = out
    return RunConfig.model_validate(raw)


def run(command: str, config: str | Path, seed: int | None = None, out: str | None = None) -> int:
    try:
        cfg = load_config(config, command, seed, out)
    except (OSError, json.JSONDecodeError, ValidationError, ConfigError) as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    tag = config_hash(cfg.model_dump(exclude={"out"}))
    try:
        return HANDLERS[command](cfg, Path(cfg.out), tag)
    except (ConfigError, AdmissibilityError, MeshError, EnergyBoundError, FileNotFoundError) as exc:
        print(f"validation error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except (NormError, DegenerateFunctionError, ArithmeticError) as exc:
        print(f"numerical failure: {exc}", file=sys.stderr)
        return EXIT_NUMERIC
    except ValueError as exc:
        print(f"validation error: {exc}", file=sys.stderr)
        return EXIT_CONFIG


def main(argv: list[str] | None = None) -> int:
    parser = argparse.ArgumentParser(prog="varexp", description=__doc__.splitlines()[0])
    parser.add_argument("command", choices=COMMANDS)
    parser.add_argument("--config", required=True, help="JSON run configuration")
    parser.add_argument("--seed", type=int, default=None, help="override the config seed")
    parser.add_argument("--out", default=None, help="output directory (overrides the config)")
    parser.add_argument("-v", "--verbose", action="store_true")
    args = parser.parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING)
    return run(args.command, args.config, args.seed, args.out)


if __name__ == "__main__":
    sys.exit(main())
