"""Command line interface.

Exit codes: 0 success, 1 invalid input (config or arguments), 2 a checked
property was violated.
"""

from __future__ import annotations

import argparse
import json
import sys
import warnings

import numpy as np

from . import __version__
from .config import ConfigError, RunConfig, kernel_spec, load_config
from .kernels import check_positive_real, delay_pr_condition, min_z0_delayed_sqrt
from .measures import discretize, eval_extended, eval_standard, integrability_report
from .realizations import admissible_k_range
from .resolvent import bijectivity_scan, default_samples
from .spectrum import (
    assemble_generator,
    dissipativity_check,
    eigen_report,
    injectivity_check,
    roundoff_floor,
    spectrum_csv,
)
from .wavesim import Grid1D, run

EXIT_OK, EXIT_INVALID, EXIT_VIOLATION = 0, 1, 2


def _write(path: str | None, text: str) -> None:
    if path is None:
        sys.stdout.write(text)
    else:
        with open(path, "w", encoding="utf-8", newline="") as fh:
            fh.write(text)


def _dump(obj) -> str:
    def default(o):
        if isinstance(o, (np.floating, np.integer)):
            return o.item()
        if isinstance(o, np.bool_):
            return bool(o)
        raise TypeError(f"not serializable: {type(o).__name__}")

    return json.dumps(obj, indent=2, default=default, allow_nan=True) + "\n"


def cmd_simulate(cfg: RunConfig, args) -> int:
    report = run(cfg)
    csv_path = args.csv or cfg.outputs.csv
    json_path = args.json or cfg.outputs.json_path
    _write(csv_path, report.to_csv())
    summary = report.summary()
    E0 = summary["E_initial"]
    driven = "driven_u" in (cfg.bc.left.kind, cfg.bc.right.kind)
    tol = 1e-12 * E0
    summary["energy_monotone"] = driven or report.max_energy_increase <= tol
    summary["identity_exact"] = driven or report.max_identity_defect <= tol
    if json_path or csv_path:
        _write(json_path, _dump(summary))
    ok = summary["energy_monotone"] and summary["identity_exact"]
    return EXIT_OK if ok else EXIT_VIOLATION


def cmd_kernel_check(cfg: RunConfig, args) -> int:
    kz = kernel_spec(cfg)
    rep = check_positive_real(kz, cfg.sampler.sampler())
    out = {"terms": kz.terms, "pr_report": rep.to_dict(), "zero_frequency_value": kz.zero_frequency_value()}
    if kz.has_delay:
        out["delay_pr_condition"] = delay_pr_condition(kz.z0, kz.z_tau, kz.tau)
        if abs(kz.z_tau) <= kz.z0:
            kr = admissible_k_range(kz.z0, kz.z_tau)
            k = cfg.kernel.k if cfg.kernel.k is not None else kz.z0
            out["k_range"] = [kr.lo, kr.hi]
            out["k"] = k
            out["k_admissible"] = k in kr
    if kz.delayed_diffusive is not None:
        zd, td = kz.delayed_diffusive
        if zd >= 0:
            out["delayed_sqrt_min_z0"] = min_z0_delayed_sqrt(zd, td)
    if out["zero_frequency_value"] == 0:
        out["warning"] = "z(0) = 0: the generator is not injective"
    _write(args.json, _dump(out))
    return EXIT_OK if rep.certified else EXIT_VIOLATION


def cmd_measure_fit(cfg: RunConfig, args) -> int:
    kz = kernel_spec(cfg)
    pieces = [("standard", kz.diff_standard), ("extended", kz.diff_extended)]
    pieces = [(name, d) for name, d in pieces if d is not None]
    if not pieces:
        raise ValueError("kernel has no diffusive term to discretize")
    s = np.asarray(cfg.measure_fit.check_s, dtype=float)
    out, ok, csv_parts = {}, True, []
    for name, desc in pieces:
        mu = discretize(desc)
        ir = integrability_report(mu)
        entry = {"kind": desc.kind, "n_poles": len(mu),
                 "sum_w_over_1_plus_xi": ir.sum_wellposed, "sum_w_over_xi": ir.sum_inv_xi}
        if desc.kind == "fractional":
            approx = eval_standard(mu, s) if name == "standard" else eval_extended(mu, s)
            exact = desc.exact_standard(s) if name == "standard" else desc.exact_extended(s)
            err = float(np.max(np.abs(approx / exact - 1.0)))
            entry["max_relative_error"] = err
            entry["within_tol"] = err <= cfg.measure_fit.tol
            ok = ok and entry["within_tol"]
        out[name] = entry
        csv_parts.append((name, mu.to_csv()))
    if args.csv:
        if len(csv_parts) == 1:
            _write(args.csv, csv_parts[0][1])
        else:
            for name, text in csv_parts:
                stem, dot, ext = args.csv.rpartition(".")
                _write(f"{stem}_{name}.{ext}" if dot else f"{args.csv}_{name}", text)
    _write(args.json, _dump(out))
    return EXIT_OK if ok else EXIT_VIOLATION


def cmd_resolvent_scan(cfg: RunConfig, args) -> int:
    if {"dirichlet_p0", "driven_u"} & {cfg.bc.left.kind, cfg.bc.right.kind}:
        raise ValueError("the resolvent scan supports only 'ibc' and 'neumann_u0' ends")
    grid = Grid1D(cfg.domain.L, cfg.scan.n or cfg.domain.n)
    ends = cfg.ibc_ends
    kernel = kernel_spec(cfg) if ends else None
    samples = default_samples(cfg.scan.n_samples, cfg.scan.s_min, cfg.scan.s_max)
    rep = bijectivity_scan(kernel, samples, grid, ends=ends, seed=cfg.seed, workers=args.workers)
    if args.csv:
        _write(args.csv, rep.to_csv())
    _write(args.json, _dump(rep.summary()))
    return EXIT_OK if rep.n_flags == 0 else EXIT_VIOLATION


def cmd_spectrum(cfg: RunConfig, args) -> int:
    gen = assemble_generator(cfg)
    eig = eigen_report(gen)
    diss = dissipativity_check(gen)
    out = {**eig.summary(), "dissipativity": diss, "sigma_min": injectivity_check(gen),
           "norm_G": float(np.linalg.norm(gen.G, 2))}
    if args.csv:
        _write(args.csv, spectrum_csv(eig))
    tol = roundoff_floor(gen, cfg.spectrum.tol)
    out["threshold"] = tol
    _write(args.json, _dump(out))
    return EXIT_OK if diss <= tol and eig.max_re <= tol else EXIT_VIOLATION


def cmd_selftest(args) -> int:
    from .selftest import run_selftest

    results = run_selftest()
    for r in results:
        status = "PASS" if r.passed else "FAIL"
        print(f"[{status}] {r.name}: {r.detail} ({r.seconds:.2f}s)")
    failed = sum(not r.passed for r in results)
    print(f"{len(results) - failed}/{len(results)} checks passed")
    return EXIT_OK if failed == 0 else EXIT_VIOLATION


COMMANDS = {
    "simulate": cmd_simulate,
    "kernel-check": cmd_kernel_check,
    "measure-fit": cmd_measure_fit,
    "resolvent-scan": cmd_resolvent_scan,
    "spectrum": cmd_spectrum,
}


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="ibclab", description=__doc__.splitlines()[0])
    parser.add_argument("--version", action="version", version=f"%(prog)s {__version__}")
    sub = parser.add_subparsers(dest="command", required=True)
    helps = {
        "simulate": "time-domain run; CSV time series (stdout unless --csv)",
        "kernel-check": "positive-realness sampling and closed-form conditions",
        "measure-fit": "discretize the diffusive measures and report quadrature accuracy",
        "resolvent-scan": "Laplace-domain solvability sweep",
        "spectrum": "generator eigenvalues, dissipativity, injectivity",
    }
    for name, text in helps.items():
        p = sub.add_parser(name, help=text)
        p.add_argument("config", help="YAML run configuration")
        p.add_argument("--csv", help="CSV output path")
        p.add_argument("--json", help="JSON summary path (default: stdout)")
        if name == "resolvent-scan":
            p.add_argument("--workers", type=int, default=None,
                           help="parallel solves (capped by IBCLAB_MAX_WORKERS)")
    sub.add_parser("selftest", help="run the quick invariant suite")
    return parser


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    if args.command == "selftest":
        return cmd_selftest(args)
    try:
        cfg = load_config(args.config)
        with warnings.catch_warnings():
            warnings.simplefilter("ignore", RuntimeWarning)
            return COMMANDS[args.command](cfg, args)
    except ConfigError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_INVALID
    except (ValueError, OSError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_INVALID


if __name__ == "__main__":
    sys.exit(main())
