"""Command-line front end.

Every command writes plain data files (CSV with a header row, JSON for the
design report) into the output directory. Exit codes: 0 success,
2 infeasible radar threshold, 3 solver failure or non-convergence,
4 configuration or input error, 1 failed validation check.
"""
import argparse
import csv
import json
import logging
import math
import os
import sys
from concurrent.futures import ProcessPoolExecutor

import numpy as np

from . import detection as det
from .beamforming import beampattern_gain, sinr_dl, sinr_ul_opt
from .config import (MODES, ConfigError, default_config_text, dump_config, load_config,
                     parse_config)
from .numerics import lin_to_db
from .scenario import build_channels
from .sca import (InfeasibleError, ProblemSpec, SolverFailure, extract_rank1, radar_sinr,
                  run_sca, sum_rate)

log = logging.getLogger("iqscc")

EXIT_OK = 0
EXIT_VALIDATION = 1
EXIT_INFEASIBLE = 2
EXIT_SOLVER = 3
EXIT_CONFIG = 4

TRACE_COLUMNS = ("iter", "sum_rate", "radar_sinr_db", "feasible", "surrogate", "solver_status")
ROC_COLUMNS = ("gamma_db", "protocol", "pf", "pd", "kay_pd", "marcum_pd")
REQ_COLUMNS = ("pd", "protocol", "pf", "required_sinr_db", "note")
THERMAL_COLUMNS = ("frequency_hz", "temperature_k", "n_n")
BEAM_COLUMNS = ("angle_deg", "comm_gain_db", "sens_gain_db")
SWEEP_COLUMNS = ("seed", "mode", "exit_code", "status", "iterations", "sum_rate", "radar_sinr_db")

REF_FREQUENCY = 24e9
REF_TEMPERATURE = 293.0


class InputError(Exception):
    """Bad command-line input or missing upstream artifact."""


# ---- formatting -----------------------------------------------------------

def _fmt(x):
    """Deterministic text for a CSV cell; ``None`` and NaN become empty."""
    if x is None:
        return ""
    if isinstance(x, (bool, np.bool_)):
        return "1" if x else "0"
    if isinstance(x, (int, np.integer)):
        return str(int(x))
    if isinstance(x, (float, np.floating)):
        x = float(x)
        if math.isnan(x):
            return ""
        return repr(x)
    return str(x)


def write_csv(path, columns, rows):
    os.makedirs(os.path.dirname(os.path.abspath(path)), exist_ok=True)
    with open(path, "w", encoding="utf-8", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(columns)
        for row in rows:
            w.writerow([_fmt(row.get(c)) for c in columns])
    return path


def _jsonable(x):
    if isinstance(x, dict):
        return {k: _jsonable(v) for k, v in x.items()}
    if isinstance(x, (list, tuple)):
        return [_jsonable(v) for v in x]
    if isinstance(x, np.ndarray):
        return _jsonable(x.tolist())
    if isinstance(x, (complex, np.complexfloating)):
        return [float(x.real), float(x.imag)]
    if isinstance(x, (np.floating, float)):
        x = float(x)
        return None if math.isnan(x) else x
    if isinstance(x, (np.integer,)):
        return int(x)
    if isinstance(x, np.bool_):
        return bool(x)
    return x


def write_json(path, obj):
    os.makedirs(os.path.dirname(os.path.abspath(path)), exist_ok=True)
    with open(path, "w", encoding="utf-8", newline="\n") as fh:
        json.dump(_jsonable(obj), fh, indent=2, sort_keys=False, allow_nan=True)
        fh.write("\n")
    return path


def _complex_matrix(M):
    return [[[float(z.real), float(z.imag)] for z in row] for row in np.asarray(M)]


def _eigs_desc(M):
    return sorted((float(w) for w in np.linalg.eigvalsh(np.asarray(M))), reverse=True)


# ---- detection commands ---------------------------------------------------

def cmd_thermal(frequencies, temperatures):
    rows = []
    for T in temperatures:
        for f in frequencies:
            rows.append({"frequency_hz": float(f), "temperature_k": float(T),
                         "n_n": det.thermal_photons(f, T)})
    return rows


def cmd_roc(protocols, gamma_db, pf_list, K, n_n, eta):
    rows = []
    for proto in protocols:
        for pf in pf_list:
            for g_db in gamma_db:
                g = 10.0 ** (g_db / 10.0)
                params = det.protocol_params(proto, g, K, n_n, eta)
                row = {"gamma_db": float(g_db), "protocol": proto, "pf": float(pf),
                       "pd": det.roc_pd(params, pf)}
                if proto == "CW":
                    row["kay_pd"] = det.kay_pd(2.0 * g, K, pf)
                    if K == 1:
                        row["marcum_pd"] = det.marcum_pd(g, pf)
                rows.append(row)
    return rows


def cmd_required_sinr(protocols, pd_values, pf, K, n_n, eta):
    rows = []
    for proto in protocols:
        for pd in pd_values:
            row = {"pd": float(pd), "protocol": proto, "pf": float(pf), "note": ""}
            try:
                row["required_sinr_db"] = float(lin_to_db(det.required_sinr(proto, pd, pf, K, n_n, eta)))
            except det.NonMonotoneError:
                row["note"] = "non_monotone"
            except det.UnattainableError:
                row["note"] = "unattainable"
            rows.append(row)
    return rows


# ---- optimization -----------------------------------------------------------

def _trace_rows(trace):
    rows = []
    if not math.isnan(trace.initial_sum_rate):
        rows.append({"iter": 0, "sum_rate": trace.initial_sum_rate,
                     "radar_sinr_db": trace.initial_radar_sinr_db, "feasible": True})
    for r in trace.rows:
        rows.append({"iter": r.iteration, "sum_rate": r.sum_rate, "radar_sinr_db": r.radar_sinr_db,
                     "feasible": r.radar_feasible and r.budget_ok, "surrogate": r.surrogate,
                     "solver_status": r.solver_status})
    return rows


def design_report(cfg, mode, rho_s, design, trace, ch):
    s = cfg.scenario
    sig = s.noise_power
    v, gap = extract_rank1(design.V_c)
    ul = sinr_ul_opt(design, ch, sig)
    dl = sinr_dl(design, ch, sig)
    return {
        "mode": mode,
        "seed": cfg.seed,
        "status": trace.status,
        "iterations": len(trace),
        "rho_s_db": float(lin_to_db(rho_s)),
        "sum_rate": sum_rate(design, ch, sig),
        "dl_rate": math.log2(1.0 + dl),
        "ul_rate": math.log2(1.0 + ul),
        "radar_sinr_db": float(lin_to_db(radar_sinr(design, ch, sig, mode))),
        "bs_power_watt": float(np.real(np.trace(design.V_t))),
        "p_watt": float(design.p),
        "rank1_gap": gap,
        "eigenvalues_V_s": _eigs_desc(design.V_s),
        "eigenvalues_V_c": _eigs_desc(design.V_c),
        "v_dl": [[float(z.real), float(z.imag)] for z in v],
        "V_s": _complex_matrix(design.V_s),
        "V_c": _complex_matrix(design.V_c),
    }


def run_optimize(cfg, mode, out_dir):
    """Run one optimization and write its trace and design report.

    Returns ``(exit_code, summary_dict)``.
    """
    ch = build_channels(cfg.scenario)
    rho_s = cfg.radar[mode].rho_s()
    spec = ProblemSpec(cfg.scenario, ch, rho_s, mode, tol=cfg.sca.tol,
                       max_iters=cfg.sca.max_iters, solver=cfg.sca.solver)
    trace_path = os.path.join(out_dir, "trace_%s.csv" % mode)
    summary = {"seed": cfg.seed, "mode": mode}
    try:
        design, trace = run_sca(spec)
    except (InfeasibleError, SolverFailure) as exc:
        code = EXIT_INFEASIBLE if isinstance(exc, InfeasibleError) else EXIT_SOLVER
        if exc.trace is not None:
            write_csv(trace_path, TRACE_COLUMNS, _trace_rows(exc.trace))
        summary.update(exit_code=code, status=exc.trace.status if exc.trace else "error",
                       iterations=len(exc.trace) if exc.trace else 0)
        log.error("%s: %s", mode, exc)
        return code, summary
    if "csv" in cfg.output.formats:
        write_csv(trace_path, TRACE_COLUMNS, _trace_rows(trace))
    report = design_report(cfg, mode, rho_s, design, trace, ch)
    if "json" in cfg.output.formats:
        write_json(os.path.join(out_dir, "design_%s.json" % mode), report)
    code = EXIT_OK if trace.converged else EXIT_SOLVER
    if code:
        log.error("%s: no convergence within %d iterations", mode, spec.max_iters)
    summary.update(exit_code=code, status=trace.status, iterations=len(trace),
                   sum_rate=report["sum_rate"], radar_sinr_db=report["radar_sinr_db"])
    return code, summary


def _sweep_job(args):
    cfg_text, seed, mode, out_dir = args
    cfg = parse_config(cfg_text).with_seed(seed)
    return run_optimize(cfg, mode, os.path.join(out_dir, "seed_%04d" % seed))[1]


def cmd_beampattern(design_path, n_points=721):
    if not os.path.exists(design_path):
        raise InputError("design report %s not found; run optimize first" % design_path)
    with open(design_path, encoding="utf-8") as fh:
        rep = json.load(fh)
    mats = {}
    for key in ("V_c", "V_s"):
        arr = np.asarray(rep[key], dtype=float)
        mats[key] = arr[..., 0] + 1j * arr[..., 1]
    grid = np.linspace(-90.0, 90.0, n_points)
    ang, comm = beampattern_gain(mats["V_c"], grid)
    _, sens = beampattern_gain(mats["V_s"], grid)
    return [{"angle_deg": float(a), "comm_gain_db": float(c), "sens_gain_db": float(s)}
            for a, c, s in zip(ang, comm, sens)]


# ---- argument handling ------------------------------------------------------

class _Parser(argparse.ArgumentParser):
    def error(self, message):
        self.print_usage(sys.stderr)
        self.exit(EXIT_CONFIG, "%s: error: %s\n" % (self.prog, message))


def _floats(text):
    try:
        return [float(t) for t in text.split(",") if t.strip()]
    except ValueError:
        raise argparse.ArgumentTypeError("expected comma-separated numbers, got %r" % text)


def _protocols(text):
    out = [t.strip().upper() for t in text.split(",") if t.strip()]
    for p in out:
        if p not in det.PROTOCOLS:
            raise argparse.ArgumentTypeError("unknown protocol %r" % p)
    return out


def _add_globals(p, suppress):
    d = argparse.SUPPRESS if suppress else None
    p.add_argument("--config", default=d, metavar="PATH",
                   help="YAML run configuration (default: shipped campaign)")
    p.add_argument("--out", default=d, metavar="DIR", help="output directory")
    p.add_argument("--seed", type=int, default=d, metavar="N", help="override the config seed")
    p.add_argument("--mode", choices=MODES, default=d,
                   help="optimization mode (default: both)")
    p.add_argument("-v", "--verbose", action="store_true",
                   default=argparse.SUPPRESS if suppress else False)


def build_parser():
    parser = _Parser(prog="iqscc", description=__doc__.splitlines()[0])
    _add_globals(parser, suppress=False)
    common = _Parser(add_help=False)
    _add_globals(common, suppress=True)
    sub = parser.add_subparsers(dest="command", required=True, parser_class=_Parser)

    p = sub.add_parser("thermal", parents=[common], help="thermal photon count sweep")
    p.add_argument("--frequencies-hz", type=_floats, default=None)
    p.add_argument("--temperatures-k", type=_floats, default=[3.0, 77.0, 293.0])

    for name, helptext in (("roc", "detection probability versus SINR"),
                           ("required-sinr", "required SINR versus detection probability")):
        p = sub.add_parser(name, parents=[common], help=helptext)
        p.add_argument("--protocols", type=_protocols, default=list(det.PROTOCOLS))
        p.add_argument("--K", type=int, default=1)
        p.add_argument("--n-n", type=float, default=None,
                       help="thermal photon number (default: 24 GHz at 293 K)")
        p.add_argument("--eta", type=float, default=1e-11)
        if name == "roc":
            p.add_argument("--gamma-db", type=_floats, default=None,
                           help="SINR grid in dB (default: -20..20 step 0.5)")
            p.add_argument("--pf", type=_floats, default=[1e-2, 1e-4, 1e-6])
        else:
            p.add_argument("--pd", type=_floats, default=None,
                           help="Pd grid (default: 1e-6..0.99, 50 log points)")
            p.add_argument("--pf", type=float, default=1e-6)

    p = sub.add_parser("optimize", parents=[common], help="run the sum-rate optimization")
    p.add_argument("--sweep-seeds", type=int, default=0, metavar="N",
                   help="run seeds seed..seed+N-1 in parallel, one directory each")
    p.add_argument("--workers", type=int, default=None)

    p = sub.add_parser("beampattern", parents=[common], help="beampattern of an optimized design")
    p.add_argument("--points", type=int, default=721)

    sub.add_parser("validate", parents=[common], help="run the property and oracle checks")
    return parser


def _load(args):
    cfg = load_config(args.config) if args.config else parse_config(default_config_text())
    if args.seed is not None:
        if args.seed < 0:
            raise ConfigError("--seed must be >= 0")
        cfg = cfg.with_seed(args.seed)
    out = args.out or cfg.output.directory
    return cfg, out


def _n_n(args):
    return args.n_n if args.n_n is not None else det.thermal_photons(REF_FREQUENCY, REF_TEMPERATURE)


def _dispatch(args):
    cmd = args.command
    if cmd == "thermal":
        out = args.out or "out"
        freqs = args.frequencies_hz
        if freqs is None:
            freqs = sorted(set(np.logspace(8, 13, 51).tolist()) | {REF_FREQUENCY})
        if any(f <= 0 for f in freqs) or any(t < 0 for t in args.temperatures_k):
            raise InputError("frequencies must be > 0 and temperatures >= 0")
        write_csv(os.path.join(out, "thermal.csv"), THERMAL_COLUMNS,
                  cmd_thermal(freqs, args.temperatures_k))
        return EXIT_OK
    if cmd in ("roc", "required-sinr"):
        out = args.out or "out"
        if args.K < 1 or not 0.0 < args.eta < 1.0:
            raise InputError("need K >= 1 and 0 < eta < 1")
        if cmd == "roc":
            grid = args.gamma_db if args.gamma_db is not None else np.arange(-20.0, 20.25, 0.5).tolist()
            if any(not 0.0 < pf < 1.0 for pf in args.pf):
                raise InputError("pf values must lie in (0, 1)")
            rows = cmd_roc(args.protocols, grid, args.pf, args.K, _n_n(args), args.eta)
            write_csv(os.path.join(out, "roc.csv"), ROC_COLUMNS, rows)
        else:
            pds = args.pd if args.pd is not None else np.logspace(-6, math.log10(0.99), 50).tolist()
            if not 0.0 < args.pf < 1.0 or any(not 0.0 < p < 1.0 for p in pds):
                raise InputError("pd and pf values must lie in (0, 1)")
            rows = cmd_required_sinr(args.protocols, pds, args.pf, args.K, _n_n(args), args.eta)
            write_csv(os.path.join(out, "required_sinr.csv"), REQ_COLUMNS, rows)
        return EXIT_OK

    cfg, out = _load(args)
    modes = [args.mode] if args.mode else list(MODES)
    if cmd == "optimize":
        if args.sweep_seeds > 0:
            text = dump_config(cfg)
            jobs = [(text, cfg.seed + k, m, out) for k in range(args.sweep_seeds) for m in modes]
            with ProcessPoolExecutor(max_workers=args.workers) as pool:
                rows = list(pool.map(_sweep_job, jobs))
            write_csv(os.path.join(out, "sweep_summary.csv"), SWEEP_COLUMNS, rows)
            return max(r["exit_code"] for r in rows)
        code = EXIT_OK
        for m in modes:
            c, summary = run_optimize(cfg, m, out)
            print("%s: %s, sum rate %s bps/Hz" % (m, summary["status"],
                                                  _fmt(summary.get("sum_rate"))))
            code = code or c
        return code
    if cmd == "beampattern":
        for m in modes:
            rows = cmd_beampattern(os.path.join(out, "design_%s.json" % m), args.points)
            write_csv(os.path.join(out, "beampattern_%s.csv" % m), BEAM_COLUMNS, rows)
        return EXIT_OK
    if cmd == "validate":
        from .validation import run_validation
        results = run_validation(cfg.seed)
        for r in results:
            print("%s %s: %s" % ("PASS" if r.passed else "FAIL", r.name, r.detail))
        write_json(os.path.join(out, "validation.json"),
                   {"seed": cfg.seed, "checks": [r.as_dict() for r in results]})
        return EXIT_OK if all(r.passed for r in results) else EXIT_VALIDATION
    raise InputError("unknown command %r" % cmd)


def main(argv=None):
    args = build_parser().parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="%(levelname)s %(name)s: %(message)s")
    try:
        return _dispatch(args)
    except (ConfigError, InputError) as exc:
        print("error: %s" % exc, file=sys.stderr)
        return EXIT_CONFIG


if __name__ == "__main__":  # pragma: no cover
    sys.exit(main())
