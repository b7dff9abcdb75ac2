"""Sweep sign and log approximants to fix the constants in ``ApproxConstants``.

For each parameter pair the script records the l1 norm of the coefficients,
the degree relative to ``log(1/eps) / gap`` and the measured error relative
to ``eps``. The printed constants are the sweep maxima rounded up to one
decimal place (never below one).

    python3 scripts/calibrate_constants.py [--quick]
"""

from __future__ import annotations

import argparse
import json
import math

import numpy as np

from qsvtlab.poly_approx import eval_cheb, log_poly, log_target, sign_poly


def roundup(x: float) -> float:
    return max(1.0, math.ceil(10 * x) / 10)


def sign_rows(deltas, epss):
    for delta in deltas:
        for eps in epss:
            P = sign_poly(delta, eps, cap=1 << 16)
            x = np.concatenate([np.linspace(-1, -delta, 2000), np.linspace(delta, 1, 2000)])
            err = float(np.max(np.abs(np.sign(x) - eval_cheb(P, x))))
            yield {
                "delta": delta,
                "eps": eps,
                "degree": P.degree,
                "l1": P.l1_norm,
                "degree_ratio": P.degree * delta / math.log(1 / eps),
                "err_ratio": err / eps,
            }


def log_rows(betas, epss):
    for beta in betas:
        for eps in epss:
            P = log_poly(beta, eps, cap=1 << 18)
            x = np.linspace(beta, 1, 4000)
            err = float(np.max(np.abs(log_target(beta)(x) - eval_cheb(P, x))))
            yield {
                "beta": beta,
                "eps": eps,
                "degree": P.degree,
                "l1": P.l1_norm,
                "degree_ratio": P.degree * beta / math.log(1 / eps),
                "err_ratio": err / eps,
            }


def main() -> None:
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--quick", action="store_true", help="smaller sweep")
    args = ap.parse_args()
    if args.quick:
        s_grid = ([0.2, 0.05], [1e-2, 1e-4])
        l_grid = ([0.2, 0.05], [1e-2, 1e-3])
    else:
        s_grid = ([0.4, 0.2, 0.1, 0.05, 0.02, 0.01, 0.005], [1e-1, 1e-2, 1e-3, 1e-4, 1e-5])
        l_grid = ([0.5, 0.2, 0.1, 0.05, 0.02, 0.01], [5e-2, 1e-2, 1e-3, 1e-4])
    srows = list(sign_rows(*s_grid))
    lrows = list(log_rows(*l_grid))
    for row in srows + lrows:
        print(json.dumps(row))
    constants = {
        "C_hat_sgn": roundup(max(r["l1"] for r in srows)),
        "C_tilde_sgn": roundup(max(r["degree_ratio"] for r in srows)),
        "C_ln": roundup(max(r["err_ratio"] for r in lrows)),
        "C_hat_ln": roundup(max(r["l1"] for r in lrows)),
        "C_tilde_ln": roundup(max(r["degree_ratio"] for r in lrows)),
        "max_sign_err_ratio": max(r["err_ratio"] for r in srows),
    }
    print(json.dumps(constants, indent=2))


if __name__ == "__main__":
    main()
