"""Command-line front end: coefficient export, QSVT on matrix files, state-testing runs.

Every command prints one JSON report on stdout; log lines go to stderr.

Exit codes: 0 success, 2 invalid input, 3 degree or size budget exceeded,
4 a result disagreed with its reference value.
"""

from __future__ import annotations

import csv
import json
import logging
import math
import sys
import time
from concurrent.futures import ProcessPoolExecutor
from pathlib import Path

import click
import numpy as np

from . import state_testing as st
from ._validation import QsvtError, ResourceError, ValidationError, max_degree
from .encoding import (
    ALPHA_TOL,
    BlockEncoding,
    apply_poly_qsvt,
    from_matrix,
    matrix_from_json,
    matrix_to_json,
    renormalize,
)
from .oracles import svt_reference
from .poly_approx import ChebyshevPoly, TargetFunction, eval_cheb
from .simulator import distance_oracle

SCHEMA = "qsvtlab.report/1"
EXIT_OK, EXIT_INVALID, EXIT_RESOURCE, EXIT_MISMATCH = 0, 2, 3, 4
ALGOS = ("qsd", "qed", "qjs", "qhs", "cert-qsd", "cert-qhs", "hh", "protocol", "svd-disc")

log = logging.getLogger("qsvtlab")


class Mismatch(Exception):
    """Raised to request exit code 4 after the report has been printed."""


def _finite(obj):
    """Replace non-finite floats by None and numpy scalars by Python numbers."""
    if isinstance(obj, dict):
        return {str(k): _finite(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [_finite(v) for v in obj]
    if isinstance(obj, (np.floating, float)):
        return float(obj) if math.isfinite(obj) else None
    if isinstance(obj, np.integer):
        return int(obj)
    if isinstance(obj, np.bool_):
        return bool(obj)
    return obj


def _emit(command: str, params: dict, results, started: float, status: str = "ok", error: str | None = None):
    report = {
        "schema": SCHEMA,
        "command": command,
        "argv": sys.argv[1:],
        "parameters": params,
        "status": status,
        "results": results,
        "wall_time": time.perf_counter() - started,
    }
    if error is not None:
        report["error"] = error
    click.echo(json.dumps(_finite(report), indent=2))


def _run(command: str, params: dict, body):
    """Run ``body`` and translate its outcome into a report and an exit code."""
    started = time.perf_counter()
    try:
        results = body()
    except Mismatch as exc:
        _emit(command, params, exc.args[0], started, "mismatch")
        sys.exit(EXIT_MISMATCH)
    except ResourceError as exc:
        log.error("%s", exc)
        _emit(command, params, None, started, "resource_error", str(exc))
        sys.exit(EXIT_RESOURCE)
    except (QsvtError, ValueError, OSError, KeyError, TypeError) as exc:
        log.error("%s", exc)
        _emit(command, params, None, started, "invalid_input", f"{type(exc).__name__}: {exc}")
        sys.exit(EXIT_INVALID)
    _emit(command, params, results, started)


def _read_json(path: str):
    try:
        return json.loads(Path(path).read_text())
    except json.JSONDecodeError as exc:
        raise ValidationError(f"{path} is not valid JSON: {exc}") from exc


@click.group()
@click.option("-v", "--verbose", count=True, help="More log output on stderr.")
def main(verbose: int) -> None:
    """Chebyshev approximants, QSVT on block-encodings and state testers."""
    level = logging.WARNING - 10 * min(verbose, 2)
    logging.basicConfig(level=level, stream=sys.stderr, format="%(levelname)s %(name)s: %(message)s")


# ---------------------------------------------------------------------------
# approx


def raw_coefficients(P: ChebyshevPoly) -> np.ndarray:
    """Coefficients before averaging, recovered from the averaging weights."""
    d = P.params.get("d")
    c = np.array(P.coeffs, dtype=float)
    if not d:
        return c
    k = np.arange(c.size)
    w = np.where(k <= d, 1.0, (2 * d - k) / d)
    return np.divide(c, w, out=np.zeros_like(c), where=w > 0)


def write_coeff_csv(path: Path, P: ChebyshevPoly) -> None:
    raw = raw_coefficients(P)
    with path.open("w", newline="") as fh:
        wr = csv.writer(fh)
        wr.writerow(["k", "c_k", "chat_k"])
        for k, (c, ch) in enumerate(zip(raw, P.coeffs)):
            wr.writerow([k, f"{c:.17g}", f"{ch:.17g}"])


def read_coeff_csv(path: str) -> ChebyshevPoly:
    """Polynomial from the ``chat_k`` column; parity is inferred from zero entries."""
    with open(path, newline="") as fh:
        rows = list(csv.DictReader(fh))
    if not rows or "chat_k" not in rows[0] or "k" not in rows[0]:
        raise ValidationError(f"{path} needs columns k and chat_k")
    ks = [int(r["k"]) for r in rows]
    if ks != list(range(len(ks))):
        raise ValidationError(f"{path}: k must run 0, 1, 2, ... without gaps")
    c = np.array([float(r["chat_k"]) for r in rows])
    if not np.any(c[0::2]) and np.any(c):
        parity = "odd"
    elif not np.any(c[1::2]):
        parity = "even"
    else:
        parity = "none"
    return ChebyshevPoly(c, parity)


def approx_report(target: TargetFunction, P: ChebyshevPoly, grid: int) -> dict:
    x = np.linspace(-1, 1, grid)
    vals = eval_cheb(P, x)
    with np.errstate(all="ignore"):
        ref = target.evaluator()(x)
    inside = target.interval()(x) & np.isfinite(ref)
    outside = ~target.interval()(x) & np.isfinite(ref)
    err = np.abs(vals - np.where(np.isfinite(ref), ref, 0.0))
    out = {
        "kind": target.kind,
        "eps": target.eps,
        "degree": P.degree,
        "parity": P.parity,
        "l1_norm": P.l1_norm,
        "lcu_weight": P.lcu_weight(),
        "max_abs": float(np.max(np.abs(vals))),
        "max_err_inside": float(err[inside].max()) if inside.any() else None,
        "max_err_outside": float(err[outside].max()) if outside.any() else None,
        "grid": grid,
        "params": P.params,
    }
    if target.kind == "sign":
        out["max_err_outside_gap"] = out["max_err_inside"]
    return out


@main.command()
@click.argument("spec", type=click.Path(dir_okay=False))
@click.option("--out", type=click.Path(dir_okay=False), help="CSV file for the coefficients; the report is also written to OUT.json.")
@click.option("--grid", default=10_000, show_default=True, help="Uniform grid size for the error report.")
@click.option("--cap", type=int, default=None, help="Degree cap (default: QSVT_MAX_DEGREE or 4095).")
def approx(spec: str, out: str | None, grid: int, cap: int | None) -> None:
    """Build the approximant described by SPEC and report its errors."""
    params = {"spec": spec, "out": out, "grid": grid, "cap": max_degree(cap)}

    def body():
        if grid < 2:
            raise ValidationError("--grid must be at least 2")
        target = TargetFunction.from_dict(_read_json(spec))
        P = target.build(cap)
        report = approx_report(target, P, grid)
        if out:
            path = Path(out)
            write_coeff_csv(path, P)
            path.with_name(path.name + ".json").write_text(json.dumps(_finite(report), indent=2))
            report["csv"] = str(path)
        return report

    _run("approx", params, body)


# ---------------------------------------------------------------------------
# qsvt


def qsvt_block(E: BlockEncoding, P: ChebyshevPoly, allow_scaled: bool, cap: int | None):
    """``P`` applied to the encoded operator, with the operator actually transformed.

    Scale-one encodings are used as they are and isometries are first
    renormalized. Otherwise ``allow_scaled`` applies ``P`` to ``A / alpha``.
    """
    scaled = False
    if E.alpha > 1 + ALPHA_TOL:
        try:
            E = renormalize(E)
        except ValidationError as exc:
            if not allow_scaled:
                raise ValidationError(
                    f"encoding has alpha = {E.alpha} and is not an isometry ({exc}); "
                    "pass --allow-scaled to transform A / alpha instead"
                ) from exc
            E = BlockEncoding(E.n_qubits, E.ancilla_qubits, E.projectors, 1.0, E.eps, unitary=E.unitary)
            scaled = True
    W = apply_poly_qsvt(E, P, cap)
    return W.operator(), E.block, scaled, W


@main.command()
@click.argument("encoding", type=click.Path(dir_okay=False))
@click.argument("poly", type=click.Path(dir_okay=False))
@click.option("--out", type=click.Path(dir_okay=False), help="JSON file for the transformed block.")
@click.option("--allow-scaled", is_flag=True, help="Transform A / alpha when A cannot be renormalized.")
@click.option("--cap", type=int, default=None, help="Degree cap (default: QSVT_MAX_DEGREE or 4095).")
def qsvt(encoding: str, poly: str, out: str | None, allow_scaled: bool, cap: int | None) -> None:
    """Apply the polynomial in POLY (a coefficient CSV) to the block of ENCODING."""
    params = {"encoding": encoding, "poly": poly, "out": out, "allow_scaled": allow_scaled}

    def body():
        data = _read_json(encoding)
        if "matrix" in data and "a" not in data:
            E = from_matrix(matrix_from_json(data["matrix"]), data.get("alpha"))
        else:
            E = BlockEncoding.from_dict(data)
        P = read_coeff_csv(poly)
        result, source, scaled, W = qsvt_block(E, P, allow_scaled, cap)
        reference = svt_reference(source, P)
        deviation = float(np.max(np.abs(result - reference)))
        report = {
            "degree": P.degree,
            "parity": P.parity,
            "alpha": W.alpha,
            "qubits": W.n_qubits,
            "ancillas": W.ancilla_qubits,
            "scaled_input": scaled,
            "deviation": deviation,
            "declared_eps": W.eps,
        }
        if out:
            Path(out).write_text(json.dumps({"dim": result.shape[0], "matrix": matrix_to_json(result), **report}))
            report["out"] = out
        else:
            report["block"] = matrix_to_json(result)
        return report

    _run("qsvt", params, body)


# ---------------------------------------------------------------------------
# test

ORACLE_MEASURE = {"qsd": "td", "qed": "entropy_diff", "qjs": "qjs2", "qhs": "hs2", "cert-qsd": "td", "cert-qhs": "hs2", "hh": "td"}


def _hoeffding_band(trials: int, confidence: float = 0.99) -> float:
    return math.sqrt(math.log(2 / (1 - confidence)) / (2 * trials))


def run_state_test(data: dict, algo: str, cfg: st.TesterConfig, eps: float, trials: int, route: str) -> dict:
    """Run one algorithm on one instance description and compare with the reference."""
    if algo == "svd-disc":
        return _run_discriminator(data, cfg)
    inst = st.StateTestInstance.from_dict(data)
    rho0, rho1 = inst.states()
    oracle = distance_oracle(rho0, rho1, ORACLE_MEASURE.get(algo, "td"))
    if algo in ("hh", "protocol"):
        if algo == "hh":
            m = st.hh_measurement(inst.q0, inst.q1, inst.outputs, eps, cfg)
            lo, hi = 0.5 + 0.5 * oracle - eps, 0.5 + 0.5 * oracle + 1e-9
            return {"success": m.success, "oracle_td": oracle, "bounds": [lo, hi], "pass": lo <= m.success <= hi, "schedule": m.schedule}
        res = st.hypothesis_protocol(inst.q0, inst.q1, inst.outputs, eps, trials, cfg.seed, cfg)
        band = _hoeffding_band(trials)
        ok = abs(res["empirical_success"] - res["analytic_success"]) <= band
        return dict(res, oracle_td=oracle, band=band, **{"pass": ok})
    if algo == "qsd":
        out = st.gap_qsd(inst, cfg)
    elif algo == "qed":
        if inst.g is None:
            inst = st.StateTestInstance(inst.q0, inst.q1, inst.outputs, g=float(data.get("g", 0.4)))
        out = st.gap_qed(inst, cfg)
    elif algo == "qjs":
        out = st.gap_qjs(inst, cfg, route)
    elif algo == "qhs":
        out = st.gap_qhs(inst, cfg)
    elif algo == "cert-qsd":
        out = st.cert_qsd(inst, cfg)
    else:
        out = st.cert_qhs(inst, cfg)
    result = dict(out.to_dict(), oracle=oracle)
    if algo.startswith("cert-"):
        alpha = inst.alpha
        ceiling = out.diagnostics["soundness_ceiling"]
        if oracle <= 1e-12:
            ok = abs(out.estimate - 1) <= 1e-9
        elif oracle >= alpha:
            ok = out.estimate <= ceiling + 1e-12
        else:
            ok = True
        result["pass"] = ok
    else:
        result["pass"] = abs(out.estimate - oracle) <= out.tolerance
    return result


def _run_discriminator(data: dict, cfg: st.TesterConfig) -> dict:
    if "encoding" in data:
        E = BlockEncoding.from_dict(data["encoding"])
    else:
        E = from_matrix(matrix_from_json(data["matrix"]), 1.0)
    alpha, beta, eps = float(data["alpha"]), float(data["beta"]), float(data.get("eps", 0.05))
    D = st.sv_discriminator(E, alpha, beta, eps, cfg.cap)
    A = E.operator()
    _, s, Vh = np.linalg.svd(A)
    rows = []
    ok = True
    for sigma, v in zip(s, Vh.conj()):
        p = D.above_probability(v)
        if sigma >= beta:
            good = p >= 1 - eps
        elif sigma <= alpha:
            good = p <= eps
        else:
            good = True
        ok &= good
        rows.append({"sigma": sigma, "above_probability": p, "pass": good})
    return {"projector": D.projector, "degree": D.poly.degree, "vectors": rows, "pass": ok}


def _overrides(items) -> dict:
    out = {}
    for item in items:
        key, _, value = item.partition("=")
        if not value:
            raise ValidationError(f"override {item!r} must look like key=value")
        out[key.strip()] = float(value)
    return out


def _job(args):
    path, algo, cfg, eps, trials, route = args
    result = run_state_test(_read_json(path), algo, cfg, eps, trials, route)
    return dict(result, instance=path)


@main.command("test")
@click.argument("instances", nargs=-1, required=True, type=click.Path(dir_okay=False))
@click.option("--algo", type=click.Choice(ALGOS), required=True)
@click.option("--mode", type=click.Choice(["exact", "sample"]), default="exact", show_default=True)
@click.option("--seed", default=0, show_default=True, type=int)
@click.option("--jobs", default=1, show_default=True, type=int, help="Worker processes; output order is fixed.")
@click.option("--eps", default=1e-3, show_default=True, type=float, help="Precision for hh and protocol.")
@click.option("--trials", default=10_000, show_default=True, type=int, help="Rounds for protocol.")
@click.option("--route", type=click.Choice(["reduction", "entropies"]), default="reduction", show_default=True)
@click.option("--cap", type=int, default=None, help="Degree cap (default: QSVT_MAX_DEGREE or 4095).")
@click.option("--override", "override", multiple=True, help="Schedule override key=value (delta, eps_qsvt, beta, eps_H).")
def test_cmd(instances, algo, mode, seed, jobs, eps, trials, route, cap, override) -> None:
    """Run a state-testing algorithm on each instance file and check it against the reference."""
    params = {
        "instances": list(instances), "algo": algo, "mode": mode, "seed": seed, "jobs": jobs,
        "eps": eps, "trials": trials, "route": route, "cap": max_degree(cap), "override": list(override),
    }

    def body():
        cfg = st.TesterConfig(
            mode="exact_prob" if mode == "exact" else "sample", seed=seed, cap=cap, overrides=_overrides(override)
        )
        tasks = [(path, algo, cfg, eps, trials, route) for path in instances]
        if jobs > 1 and len(tasks) > 1:
            with ProcessPoolExecutor(max_workers=jobs) as pool:
                results = list(pool.map(_job, tasks))
        else:
            results = [_job(t) for t in tasks]
        if not all(r["pass"] for r in results):
            raise Mismatch(results)
        return results

    _run("test", params, body)


if __name__ == "__main__":
    main()
