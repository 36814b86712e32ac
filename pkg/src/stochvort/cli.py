"""Command-line entry point: ``stochvort <subcommand> --config cfg.json --out DIR``.

Exit codes: 0 pass, 1 failed check or diagnostic, 2 usage or configuration error.
Every output directory holds ``manifest.json``; timestamps live only there, so
CSV payloads are byte-identical across reruns of the same configuration.
"""

from __future__ import annotations

import argparse
import hashlib
import json
import sys
import time
from datetime import datetime, timezone
from pathlib import Path

import numpy as np
import scipy.fft

from . import __version__, checks, density, malliavin, noise, solver
from .config import ConfigError, Options, config_dict, parse_config
from .io import write_rows, write_spectral_csv
from .spectral import SpectralField

SUBCOMMANDS = ("simulate", "kernel-check", "convolution-check", "picard", "malliavin", "density", "all-checks")


class _Parser(argparse.ArgumentParser):
    def exit(self, status=0, message=None):
        if message:
            self._print_message(message, sys.stderr)
        raise _Exit(status)


class _Exit(Exception):
    def __init__(self, code: int):
        self.code = code


def build_parser() -> argparse.ArgumentParser:
    common = _Parser(add_help=False)
    common.add_argument("--config", type=Path, default=None, help="JSON file of flat config keys")
    common.add_argument("--out", type=Path, default=None, help="output directory (default: out/<subcommand>)")
    common.add_argument("--threads", type=int, default=1, help="FFT worker threads")
    common.add_argument("--seed", type=int, default=None, help="override the config seed")
    parser = _Parser(prog="stochvort", description=__doc__.splitlines()[0])
    parser.add_argument("--version", action="version", version=f"stochvort {__version__}")
    sub = parser.add_subparsers(dest="subcommand", metavar="{" + ",".join(SUBCOMMANDS) + "}")
    sub.required = True
    for name in SUBCOMMANDS:
        sub.add_parser(name, parents=[common])
    return parser


# ---------------------------------------------------------------------------
# subcommands: each writes its outputs and returns the pass flag


def _simulate(cfg: solver.RunConfig, opts: Options, out: Path) -> bool:
    tr = solver.run(cfg)
    hit = tr.sigma_hit
    rows = [
        {"t": t, "l2": l2, "lp": lp, "sigma_hit_flag": int(hit is not None and t >= hit - 1e-12)}
        for t, l2, lp in zip(tr.times, tr.l2_norms, tr.lp_norms)
    ]
    write_rows(out / "norms.csv", ["t", "l2", "lp", "sigma_hit_flag"], rows)
    if opts.snapshot_every > 0:
        snap = out / "snapshots"
        snap.mkdir(exist_ok=True)
        for m in range(0, cfg.steps + 1, opts.snapshot_every):
            write_spectral_csv(snap / f"xi_{m:06d}.csv", SpectralField(tr.states[m]))
    return True


def _kernel_check(cfg, opts, out: Path) -> bool:
    rows, worst_x = checks.kernel_slope_rows()
    write_rows(out / "kernel_check.csv", ["beta", "s", "integral", "fitted_slope", "target_slope", "pass", "gradient"], rows)
    print(f"x-dependence {worst_x:.2e} (tol {checks.X_INDEP_TOL:g})")
    return all(r["pass"] for r in rows) and worst_x <= checks.X_INDEP_TOL


def _convolution_check(cfg: solver.RunConfig, opts: Options, out: Path) -> bool:
    rows = checks.convolution_rows(opts.samples, cfg.K_w, cfg.seed)
    write_rows(out / "convolution_check.csv", ["b", "t", "empirical_var", "closed_form", "stderr", "pass"], rows)
    return all(r["pass"] for r in rows)


def _picard(cfg: solver.RunConfig, opts: Options, out: Path) -> bool:
    res = solver.picard_solve(cfg, tol=opts.picard_tol, max_iter=opts.picard_max_iter)
    d = res.differences
    rows = [
        {"iteration": i + 1, "difference": v, "ratio": (v / d[i - 1]) if i > 0 and d[i - 1] > 0 else float("nan")}
        for i, v in enumerate(d)
    ]
    write_rows(out / "picard.csv", ["iteration", "difference", "ratio"], rows)
    print(f"converged: {res.converged}; contraction factor {res.contraction_factor:.4g}")
    return res.converged


def _malliavin(cfg: solver.RunConfig, opts: Options, out: Path) -> bool:
    t = cfg.T
    eps_list = [e for e in opts.eps if e < t]
    if not eps_list:
        raise ConfigError(f"eps values {list(opts.eps)} rejected: windows require 0 < eps < T = {t:g}")
    bounds = {e: malliavin.lower_bound_A(cfg.b, e, t, cfg.T, cfg.K_w) for e in eps_list}
    rows, norms = [], []
    for s in range(opts.samples):
        tr = solver.run(cfg, sample=s)
        dirs, yv, gv = malliavin.point_tangents(tr, opts.probe_x)
        for e in eps_list:
            rep = malliavin.split_from_values(dirs, yv, gv, cfg.steps, cfg.dt, e)
            A, lb = bounds[e]
            rows.append(
                {
                    "sample_id": s,
                    "t": t,
                    "x1": opts.probe_x[0],
                    "x2": opts.probe_x[1],
                    "eps": e,
                    "norm_sq": rep.norm_sq,
                    "window_norm_sq": rep.window_norm_sq,
                    "A_eps": A,
                    "lower_bound": lb,
                    "I_split": rep.I_disc,
                }
            )
        norms.append(float(cfg.dt * np.sum(yv**2)))
    cols = ["sample_id", "t", "x1", "x2", "eps", "norm_sq", "window_norm_sq", "A_eps", "lower_bound", "I_split"]
    write_rows(out / "malliavin.csv", cols, rows)
    deltas = opts.deltas if opts.deltas is not None else tuple(10.0 ** np.arange(-6, 1))
    sb = malliavin.small_ball_probe(norms, deltas)
    write_rows(
        out / "small_ball.csv",
        ["delta", "frequency"],
        [{"delta": d, "frequency": f} for d, f in zip(sb.deltas, sb.frequencies)],
    )
    a_ok = all(A >= lb for A, lb in bounds.values())
    return a_ok and min(norms) > 0 and sb.monotone


def _density(cfg: solver.RunConfig, opts: Options, out: Path) -> bool:
    res = density.ensemble(cfg, opts.probe_t, opts.probe_x, opts.samples)
    write_rows(out / "samples.csv", ["sample_id", "value"], [{"sample_id": i, "value": v} for i, v in enumerate(res.values)])
    curve = density.kde(res.values, opts.bandwidth)
    if isinstance(curve, density.AtomReport):
        write_rows(out / "kde.csv", ["x", "density"], [])
        diag = {"atom": {"value": curve.value, "count": curve.count}, "pass": False}
        ok = False
    else:
        write_rows(out / "kde.csv", ["x", "density"], [{"x": a, "density": b} for a, b in zip(curve.x, curve.density)])
        rep = density.continuity_diagnostics(res.values)
        diag = rep.to_dict() | {"bandwidth": curve.bandwidth, "kde_mass": curve.mass()}
        ok = rep.passed
    diag |= {"t": res.meta["t"], "x": res.meta["x"], "samples": res.meta["samples"]}
    if not cfg.nonlinear and cfg.ic == "zero":
        var = noise.convolution_variance(cfg.b, res.meta["t"], cfg.K_w, cfg.noise_amplitude)
        ks, p = density.exact_gaussian_ks(res.values, var)
        diag["exact_gaussian"] = {"variance": var, "ks_stat": ks, "p_value": p, "pass": p > 0.01}
        ok = ok and p > 0.01
    (out / "diagnostics.json").write_text(json.dumps(diag, indent=2, sort_keys=True) + "\n")
    return ok


def _all_checks(cfg, opts, out: Path) -> bool:
    results = []
    for fn in checks.ALL_CHECKS:
        r = fn()
        print(r.line(), flush=True)
        results.append(r)
    write_rows(
        out / "summary.csv",
        ["criterion", "name", "pass", "summary"],
        [{"criterion": r.number, "name": r.name, "pass": r.passed, "summary": r.summary} for r in results],
    )
    timing = {str(r.number): {"elapsed_s": r.elapsed, "budget_s": r.budget} for r in results}
    (out / "timing.json").write_text(json.dumps(timing, indent=2) + "\n")
    failed = [r.number for r in results if not r.passed]
    print(f"{len(results) - len(failed)}/{len(results)} criteria pass" + (f"; failed: {failed}" if failed else ""))
    return not failed


DISPATCH = {
    "simulate": _simulate,
    "kernel-check": _kernel_check,
    "convolution-check": _convolution_check,
    "picard": _picard,
    "malliavin": _malliavin,
    "density": _density,
    "all-checks": _all_checks,
}


def _manifest(args, cfg, opts, out: Path, started: str, wall: float, passed: bool) -> dict:
    cfg_blob = json.dumps(config_dict(cfg, opts), sort_keys=True)
    return {
        "artifact_version": f"stochvort-{__version__}",
        "subcommand": args.subcommand,
        "config_path": str(args.config) if args.config else None,
        "config_hash": hashlib.sha256(cfg_blob.encode()).hexdigest(),
        "config": json.loads(cfg_blob),
        "output_directory": str(out),
        "threads": args.threads,
        "started_utc": started,
        "wall_seconds": wall,
        "passed": passed,
    }


def main(argv=None) -> int:
    try:
        args = build_parser().parse_args(argv)
    except _Exit as e:
        return e.code
    if args.threads < 1:
        print("error: --threads requires a positive integer", file=sys.stderr)
        return 2
    overrides = {} if args.seed is None else {"seed": args.seed}
    try:
        cfg, opts = parse_config(args.config, args.subcommand, overrides=overrides)
    except ConfigError as e:
        print(f"config error: {e}", file=sys.stderr)
        return 2
    out = args.out if args.out is not None else Path("out") / args.subcommand
    out.mkdir(parents=True, exist_ok=True)
    started = datetime.now(timezone.utc).isoformat()
    t0 = time.perf_counter()
    try:
        with scipy.fft.set_workers(args.threads):
            passed = DISPATCH[args.subcommand](cfg, opts, out)
    except ConfigError as e:
        print(f"config error: {e}", file=sys.stderr)
        return 2
    except solver.BlowUpError as e:
        print(f"error: {e}", file=sys.stderr)
        passed = False
    manifest = _manifest(args, cfg, opts, out, started, time.perf_counter() - t0, passed)
    (out / "manifest.json").write_text(json.dumps(manifest, indent=2) + "\n")
    print(f"{args.subcommand}: {'pass' if passed else 'FAIL'} -> {out}")
    return 0 if passed else 1


if __name__ == "__main__":
    sys.exit(main())
