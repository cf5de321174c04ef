"""Command line front end: ``robust-miso {generate|region|sumrate|lowsnr}``.

Every command is a pure function of its flags and input files. Solver
statuses go to a sidecar log next to the main output, and the exit code is
1 when any solve failed unless ``--allow-failures`` is given. Invalid input
exits with code 2. The number of worker processes comes from ``--workers``
or the ``ROBUST_MISO_THREADS`` environment variable.
"""

import argparse
import csv
import math
import sys

import numpy as np

from . import asymptotics as asy
from .model import BeamformerSet, generate_scenario, load_scenario, save_scenario
from .pareto import export_region, failed, solve_candidates, sweep_region
from .robust_design import robust_mrt

EXIT_FAILURES = 1
EXIT_USAGE = 2


class UsageError(ValueError):
    pass


def _fmt(x) -> str:
    return f"{float(x):.12g}"


def _floats(text: str, what: str):
    try:
        return [float(v) for v in text.split(",") if v.strip()]
    except ValueError:
        raise UsageError(f"{what}: expected comma-separated numbers, got {text!r}") from None


def _ints(text: str, what: str):
    try:
        return [int(v) for v in text.split(",") if v.strip()]
    except ValueError:
        raise UsageError(f"{what}: expected comma-separated integers, got {text!r}") from None


def parse_grid(text: str, what: str):
    """``start:stop:step`` (stop included) or a comma-separated list."""
    if ":" in text:
        parts = text.split(":")
        if len(parts) != 3:
            raise UsageError(f"{what}: expected start:stop:step, got {text!r}")
        start, stop, step = (float(p) for p in parts)
        if step <= 0 or stop < start:
            raise UsageError(f"{what}: need step > 0 and stop >= start")
        count = int(math.floor((stop - start) / step + 1e-9))
        return [round(start + i * step, 12) for i in range(count + 1)]
    values = _floats(text, what)
    if not values:
        raise UsageError(f"{what}: empty grid")
    return values


def _check_step(step: float, what: str = "--step"):
    if not 0 < step <= 1:
        raise UsageError(f"{what} must lie in (0, 1], got {step}")


def _write_rows(path, header, rows):
    with open(path, "w", newline="") as fh:
        writer = csv.writer(fh, lineterminator="\n")
        writer.writerow(header)
        for row in rows:
            writer.writerow([_fmt(v) if not isinstance(v, str) else v for v in row])


def _write_log(path, lines):
    with open(path, "w") as fh:
        for line in lines:
            fh.write(line + "\n")


def _status_lines(statuses):
    for k, levels, status in statuses:
        lv = ",".join(_fmt(v) for v in levels)
        yield f"transmitter={k + 1} levels={lv} status={status}"


def _finish(n_failed: int, allow: bool, log_path) -> int:
    if n_failed:
        print(f"{n_failed} solver failures recorded in {log_path}", file=sys.stderr)
        return 0 if allow else EXIT_FAILURES
    return 0


# --- commands --------------------------------------------------------------------

def cmd_generate(args) -> int:
    antennas = _ints(args.antennas, "--antennas")
    K = args.k
    if K < 1:
        raise UsageError("--k must be >= 1")
    if len(antennas) == 1:
        antennas = antennas * K
    if len(antennas) != K or any(n < 1 for n in antennas):
        raise UsageError(f"--antennas needs {K} positive counts")
    eps = _floats(args.eps, "--eps")
    if len(eps) == 1:
        eps = eps[0]
    elif len(eps) == K * K:
        eps = np.array(eps).reshape(K, K)
    else:
        raise UsageError(f"--eps needs 1 or {K * K} values")
    if np.any(np.asarray(eps) < 0) or not np.all(np.isfinite(eps)):
        raise UsageError("--eps values must be finite and >= 0")
    powers = _floats(args.powers, "--powers") if args.powers else [1.0]
    if len(powers) == 1:
        powers = powers * K
    if len(powers) != K or any(not p > 0 for p in powers):
        raise UsageError(f"--powers needs {K} positive values")
    if not args.noise > 0:
        raise UsageError("--noise must be positive")
    s = generate_scenario(K, antennas, eps, powers, args.noise, args.seed)
    save_scenario(s, args.out)
    print(s.digest())
    return 0


def cmd_region(args) -> int:
    _check_step(args.step)
    s = load_scenario(args.scenario)
    r = sweep_region(s, args.step, workers=args.workers)
    export_region(r, args.out, args.format)
    log_path = args.log or f"{args.out}.log"
    _write_log(log_path, [f"scenario={r.scenario_digest} step={_fmt(args.step)} "
                          f"points={len(r.points)} failures={len(r.failures)}"]
               + list(_status_lines(r.statuses)))
    return _finish(len(r.failures), args.allow_failures, log_path)


def _law(args):
    if args.law == "custom_exponent":
        if args.exponent is None:
            raise UsageError("--law custom_exponent needs --exponent")
        return asy.ErrorScalingLaw.custom(args.coef, args.exponent)
    if args.exponent is not None:
        raise UsageError("--exponent only applies to --law custom_exponent")
    return asy.ErrorScalingLaw(args.law, args.coef)


def cmd_sumrate(args) -> int:
    _check_step(args.step)
    if args.coef < 0:
        raise UsageError("--coef must be >= 0")
    law = _law(args)
    snr = parse_grid(args.snr_db, "--snr-db")
    s = load_scenario(args.scenario)
    points = asy.sum_rate_sweep_detailed(s, law, snr, args.strategy, args.step, args.workers)
    _write_rows(args.out, ["snr_db", "sum_rate"], [(p.snr_db, p.sum_rate) for p in points])
    log_path = args.log or f"{args.out}.log"
    lines = [f"scenario={s.digest()} strategy={args.strategy} law={law.kind} "
             f"coef={_fmt(law.coefficient)} exponent={_fmt(law.exponent)} step={_fmt(args.step)}"]
    n_failed = 0
    for p in points:
        rates = ",".join(_fmt(r) for r in p.rates)
        lines.append(f"snr_db={_fmt(p.snr_db)} sum_rate={_fmt(p.sum_rate)} rates={rates} "
                     f"active_links={p.active_links} failures={len(p.failures)}")
        lines.extend("  " + line for line in _status_lines(p.failures))
        n_failed += len(p.failures)
    _write_log(log_path, lines)
    return _finish(n_failed, args.allow_failures, log_path)


def cmd_lowsnr(args) -> int:
    _check_step(args.step)
    s = load_scenario(args.scenario)
    link = args.link - 1
    if not 0 <= link < s.K:
        raise UsageError(f"--link must lie in 1..{s.K}")
    ebno_db = parse_grid(args.ebno_db, "--ebno-db")
    prefix = args.out_prefix
    b = BeamformerSet(tuple(robust_mrt(s, k) for k in range(s.K)))
    metrics = asy.low_snr_metrics(s, b)
    _write_rows(f"{prefix}_metrics.csv", ["link", "ebno_min", "ebno_min_db", "wideband_slope"],
                [(str(k + 1), e, 10 * math.log10(e) if np.isfinite(e) else math.inf, sl)
                 for k, (e, sl) in enumerate(zip(metrics.ebno_min, metrics.wideband_slope))])
    curve = asy.spectral_efficiency_curve(s, b, link, [10 ** (v / 10) for v in ebno_db])
    _write_rows(f"{prefix}_spectral.csv", ["ebno_db", "spectral_efficiency", "below_minimum"],
                [(db, p.efficiency, str(int(p.below_minimum))) for db, p in zip(ebno_db, curve)])

    cands, statuses = solve_candidates(s, args.step, args.workers)
    ebno = asy.ebno_region_sweep(s, candidates=cands)
    slope = asy.slope_region_sweep(s, candidates=cands)
    ebno_cols = [f"ebno{k + 1}" for k in range(s.K)]
    slope_cols = [f"S{k + 1}" for k in range(s.K)]
    _write_rows(f"{prefix}_ebno_region.csv", ebno_cols, ebno.boundary)
    _write_rows(f"{prefix}_slope_region.csv", slope_cols, slope.boundary)
    if args.scatter:
        _write_rows(f"{prefix}_ebno_points.csv", ebno_cols, ebno.points)
        _write_rows(f"{prefix}_slope_points.csv", slope_cols, slope.points)
    log_path = args.log or f"{prefix}.log"
    fails = failed(statuses)
    _write_log(log_path, [f"scenario={s.digest()} step={_fmt(args.step)} link={args.link} "
                          f"failures={len(fails)}"] + list(_status_lines(statuses)))
    return _finish(len(fails), args.allow_failures, log_path)


# --- parser ----------------------------------------------------------------------

def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="robust-miso",
        description="Robust beamforming for the MISO interference channel.")
    sub = parser.add_subparsers(dest="command", required=True)

    g = sub.add_parser("generate", help="draw a random scenario and save it as JSON")
    g.add_argument("--k", type=int, required=True, help="number of links")
    g.add_argument("--antennas", required=True, help="antenna counts, e.g. 3,3,3 (one value repeats)")
    g.add_argument("--eps", default="0", help="uncertainty radius or K*K row-major radii")
    g.add_argument("--powers", default="", help="power budgets (default 1 each)")
    g.add_argument("--noise", type=float, default=1.0, help="noise power, 1/SNR (default 1)")
    g.add_argument("--seed", type=int, default=0)
    g.add_argument("--out", default="scenario.json")
    g.set_defaults(func=cmd_generate)

    def common(p, step_default):
        p.add_argument("--scenario", required=True, help="scenario JSON file")
        p.add_argument("--step", type=float, default=step_default, help="level grid spacing")
        p.add_argument("--log", default=None, help="sidecar log of solver statuses")
        p.add_argument("--allow-failures", action="store_true",
                       help="exit 0 even when solves fail (failures stay in the log)")
        p.add_argument("--workers", type=int, default=None,
                       help="worker processes (default: $ROBUST_MISO_THREADS or 1)")

    r = sub.add_parser("region", help="Pareto boundary of the robust rate region")
    common(r, 0.05)
    r.add_argument("--out", default="region.csv")
    r.add_argument("--format", choices=("csv", "structured"), default="csv")
    r.set_defaults(func=cmd_region)

    m = sub.add_parser("sumrate", help="maximum sum rate versus SNR")
    common(m, 0.001)
    m.add_argument("--law", choices=("constant", "inverse_sqrt_snr", "inverse_cbrt_snr",
                                     "custom_exponent"), default="constant")
    m.add_argument("--coef", type=float, default=0.0, help="error coefficient a")
    m.add_argument("--exponent", type=float, default=None, help="exponent for custom_exponent")
    m.add_argument("--snr-db", default="0:60:2", help="start:stop:step or a comma list")
    m.add_argument("--strategy", choices=asy.STRATEGIES, default="robust_pareto_grid")
    m.add_argument("--out", default="sumrate.csv")
    m.set_defaults(func=cmd_sumrate)

    lo = sub.add_parser("lowsnr", help="energy per bit, wideband slope and spectral efficiency")
    common(lo, 0.001)
    lo.add_argument("--link", type=int, default=1, help="link of the spectral efficiency curve")
    lo.add_argument("--ebno-db", default="-2:10:0.5", help="Eb/N0 grid in dB")
    lo.add_argument("--scatter", action="store_true", help="also write every swept tuple")
    lo.add_argument("--out-prefix", default="lowsnr")
    lo.set_defaults(func=cmd_lowsnr)
    return parser


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        return args.func(args)
    except (ValueError, OSError) as err:
        # covers UsageError, ScenarioFormatError and missing or unwritable files
        print(f"robust-miso: error: {err}", file=sys.stderr)
        return EXIT_USAGE


if __name__ == "__main__":
    sys.exit(main())
