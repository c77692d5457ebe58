"""Regenerate oracle_constant_p.json: fine-mesh descent for constant exponents.

Run from the repository root: ``python tests/data/compute_oracles.py``.
"""

import json
import time
from pathlib import Path

from varexp import Mesh, SolverConfig, build_field, solve_first_eigenpair

CONFIG = {"interval": [0.0, 1.0], "cells": 8192, "tol_lambda": 1e-10, "restarts": 10, "seed": 12345}


def main():
    out = {"config": CONFIG, "lambda": {}}
    for p0 in (1.5, 3.0):
        mesh = Mesh.interval(*CONFIG["interval"], CONFIG["cells"])
        p = build_field(mesh, {"family": "constant", "c": p0})
        cfg = SolverConfig(tol_lambda=CONFIG["tol_lambda"], restarts=CONFIG["restarts"], seed=CONFIG["seed"])
        t = time.time()
        pair = solve_first_eigenpair(p, cfg)
        out["lambda"][str(p0)] = pair.lam
        print(p0, pair.lam, pair.el_residual, f"{time.time() - t:.1f}s")
    path = Path(__file__).with_name("oracle_constant_p.json")
    path.write_text(json.dumps(out, indent=2, sort_keys=True) + "\n")


if __name__ == "__main__":
    main()
