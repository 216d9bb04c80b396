#!/usr/bin/env python3
"""Reference solver for the solver-correctness test instances.

Reads the JSON instances dumped by
`cargo test -p gds-cli --test acceptance -- --ignored dump_oracle`
(from target/oracle/) and solves each with cvxpy: minimize the nuclear norm
subject to a spectral-norm constraint on the correlated residual. Prints the
optimal objectives as a Rust array literal for freezing into the test.
"""
import glob
import json
import sys

import cvxpy as cp
import numpy as np

paths = sorted(glob.glob(sys.argv[1] if len(sys.argv) > 1 else "target/oracle/instance_*.json"))
if not paths:
    sys.exit("no instances found; run the dump_oracle test first")

values = []
for path in paths:
    inst = json.load(open(path))
    d, p, n, lam = inst["d"], inst["p"], inst["n"], inst["lambda"]
    xs = [np.array(row, dtype=float).reshape(d, p) for row in inst["x"]]
    y = np.array(inst["y"], dtype=float)
    theta = cp.Variable((d, p))
    resid = sum((cp.trace(xs[i].T @ theta) - y[i]) * xs[i] for i in range(n))
    problem = cp.Problem(cp.Minimize(cp.normNuc(theta)), [cp.sigma_max(resid) <= lam])
    try:
        problem.solve(solver=cp.CLARABEL, max_iter=200000)
    except (cp.error.SolverError, ValueError):
        problem.solve(solver=cp.SCS, eps=1e-11, max_iters=200000)
    if problem.status not in ("optimal", "optimal_inaccurate"):
        sys.exit(f"{path}: status {problem.status}")
    values.append(problem.value)
    print(f"{path}: {problem.value:.12f} ({problem.status})", file=sys.stderr)

print("const ORACLE_OBJECTIVES: [f64; %d] = [" % len(values))
for v in values:
    print(f"    {v:.12f},")
print("];")
