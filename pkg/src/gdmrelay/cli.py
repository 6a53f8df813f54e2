"""Command line front end.

Subcommands:
  simulate    run a Monte Carlo SER sweep
  analyze     evaluate the closed-form SER approximation over an SNR grid
  optimize    closed-form reference/normal power split for a block length
  complexity  per-symbol operation counts of the destination detectors
  diversity   diversity orders, overall and conditioned on relay errors
  reproduce   rerun a canned figure experiment and write its data files

Exit codes: 0 on success, 2 on argument/config errors, 3 on runtime failure.
"""

from __future__ import annotations

import argparse
import json
import math
import sys

from gdmrelay import analysis, harness, power
from gdmrelay.detectors import count_ops
from gdmrelay.harness import ExperimentConfig, run_ser_experiment

_SIMULATE_KEYS = {
    "relays", "mod", "K", "L", "detector", "snr", "seed", "threads",
    "errors_min", "frames_max", "relay_mode", "genie_r", "sr_offset_db",
    "rd_offset_db", "rho_n", "power", "out_dir", "csv", "json",
}


def _parse_snr_grid(text: str):
    """'start:step:stop' (inclusive) or a comma list of dB values."""
    try:
        if ":" in text:
            start, step, stop = (float(v) for v in text.split(":"))
            if step <= 0 or stop < start:
                raise ValueError
            grid = []
            v = start
            while v <= stop + 1e-9:
                grid.append(round(v, 10))
                v += step
            return tuple(grid)
        return tuple(float(v) for v in text.split(","))
    except ValueError:
        raise argparse.ArgumentTypeError(
            f"bad SNR grid {text!r}; use start:step:stop or v1,v2,...")


def _add_simulate_args(p: argparse.ArgumentParser):
    p.add_argument("--relays", type=int, default=1)
    p.add_argument("--mod", type=int, default=4, help="PSK order M")
    p.add_argument("--K", type=int, default=127, help="info symbols per frame")
    p.add_argument("--L", type=int, default=1, help="block length")
    p.add_argument("--detector", default="nmld", choices=harness.DETECTOR_KINDS)
    p.add_argument("--snr", type=_parse_snr_grid, default=(0, 5, 10, 15, 20, 25, 30),
                   help="dB grid, start:step:stop or comma list")
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--threads", type=int, default=1,
                   help="worker cap; does not affect results")
    p.add_argument("--errors-min", type=int, default=100)
    p.add_argument("--frames-max", type=int, default=100000)
    p.add_argument("--relay-mode", default="realistic", choices=harness.RELAY_MODES)
    p.add_argument("--genie-r", type=int, default=0)
    p.add_argument("--sr-offset-db", type=float, default=0.0)
    p.add_argument("--rd-offset-db", type=float, default=0.0)
    p.add_argument("--rho-n", type=float, default=None,
                   help="normal-symbol power; default is the closed-form optimum")
    p.add_argument("--power", type=float, default=1.0, help="average symbol power")
    p.add_argument("--out-dir", default=None)
    p.add_argument("--csv", action="store_true")
    p.add_argument("--json", action="store_true")
    p.add_argument("--config", default=None,
                   help="JSON file of simulate options; overrides flags")


def _load_config_file(path: str, args: argparse.Namespace, parser):
    try:
        with open(path) as fh:
            data = json.load(fh)
    except (OSError, json.JSONDecodeError) as exc:
        parser.error(f"cannot read config file {path}: {exc}")
    if not isinstance(data, dict):
        parser.error(f"config file {path} must hold a JSON object")
    unknown = set(data) - _SIMULATE_KEYS
    if unknown:
        parser.error(f"unknown config keys in {path}: {sorted(unknown)}")
    for key, val in data.items():
        if key == "snr" and isinstance(val, str):
            val = _parse_snr_grid(val)
        elif key == "snr":
            val = tuple(float(v) for v in val)
        setattr(args, key, val)


def _cmd_simulate(args) -> int:
    cfg = ExperimentConfig(
        n_relays=args.relays, m=args.mod, k_frame=args.K, l_block=args.L,
        detector=args.detector, snr_grid_db=tuple(args.snr),
        relay_mode=args.relay_mode, genie_r=args.genie_r,
        sr_offset_db=args.sr_offset_db, rd_offset_db=args.rd_offset_db,
        rho_n=args.rho_n, p_s=args.power, min_errors=args.errors_min,
        max_frames=args.frames_max, master_seed=args.seed,
        workers=args.threads,
    )
    result = run_ser_experiment(cfg)
    print(f"# detector={cfg.detector} relays={cfg.n_relays} M={cfg.m} "
          f"K={cfg.k_frame} L={cfg.l_block} seed={cfg.master_seed}")
    print("snr_db symbols errors ser ci_lo ci_hi")
    for p in result.points:
        print(f"{p.snr_db:g} {p.symbols} {p.errors} "
              f"{p.ser:.6e} {p.ci_lo:.6e} {p.ci_hi:.6e}")
    if args.out_dir:
        import pathlib

        out = pathlib.Path(args.out_dir)
        out.mkdir(parents=True, exist_ok=True)
        stem = f"ser_{cfg.detector}_n{cfg.n_relays}_m{cfg.m}_l{cfg.l_block}"
        if args.csv or not args.json:
            harness.write_csv(result, out / f"{stem}.csv")
        if args.json:
            harness.write_json(result, out / f"{stem}.json")
        harness.write_gnuplot(result, out / f"{stem}.dat")
    return 0


def _cmd_analyze(args) -> int:
    pa = power.optimize_power(args.L, args.power).as_allocation()
    print("snr_db epsilon ser_error_free ser_erroneous ser_total")
    for snr_db in args.snr:
        g = 10.0 ** (snr_db / 10.0)
        g_sr = 10.0 ** ((snr_db + args.sr_offset_db) / 10.0)
        eps = analysis.relay_epsilon(pa, args.L, g_sr, args.mod)
        eta = analysis.eta_threshold(
            max(eps, 1e-12), args.mod, pa.rho_r, pa.rho_r)
        pc = analysis.ser_avg_error_free(args.relays, args.mod, eps, eta, g)
        pe = analysis.ser_avg_erroneous(args.relays, args.mod, eps, eta, g)
        total = min(pc + pe, 1.0)
        print(f"{snr_db:g} {eps:.6e} {pc:.6e} {pe:.6e} {total:.6e}")
    return 0


def _cmd_optimize(args) -> int:
    sol = power.optimize_power(args.L, args.power)
    print(f"L={sol.l_block} p_s={sol.p_s:g}")
    print(f"rho_r* = {sol.rho_r_star:.9f}")
    print(f"rho_n* = {sol.rho_n_star:.9f}")
    print(f"ratio rho_r*/rho_n* = {sol.ratio:.9f} (sqrt(L-1) = "
          f"{math.sqrt(max(sol.l_block - 1, 0)):.9f})")
    if sol.degenerate:
        print("note: L=1 has no normal symbols; allocation is degenerate")
    if args.gamma_sr is not None and args.gamma_sd is not None:
        ratio = power.feasibility_diagnostic(
            sol, args.mod, args.L, args.gamma_sr, args.gamma_sd)
        print(f"feasibility ratio = {ratio:.3f} "
              f"(warn below {power.FEASIBILITY_WARN_RATIO:g})")
    return 0


def _cmd_complexity(args) -> int:
    kinds = ("amld", "pld", "nmld") if args.detector == "all" else (args.detector,)
    print("detector additions multiplications max_min exp_log total")
    for kind in kinds:
        c = count_ops(kind, args.mod, args.relays)
        print(f"{kind} {c.additions} {c.multiplications} "
              f"{c.max_min_ops} {c.exp_log_ops} {c.total}")
    if args.detector == "all":
        amld = count_ops("amld", args.mod, args.relays).total
        nmld = count_ops("nmld", args.mod, args.relays).total
        print(f"nmld saving vs amld: {100.0 * (1 - nmld / amld):.2f}%")
    return 0


def _cmd_diversity(args) -> int:
    if args.errors is not None:
        d = analysis.diversity_with_errors(args.relays, n_err=args.errors)
        print(f"N={args.relays} wrong_relays={args.errors} diversity={d}")
    elif args.genie_r is not None:
        d = analysis.diversity_with_errors(args.relays, r_error_free=args.genie_r)
        print(f"N={args.relays} error_free_relays={args.genie_r} diversity={d}")
    else:
        d = analysis.diversity_order(args.relays)
        print(f"N={args.relays} diversity={d}")
    return 0


def _cmd_reproduce(args) -> int:
    results = harness.reproduce_figure(args.figure, scale=args.scale,
                                       out_dir=args.out_dir,
                                       master_seed=args.seed)
    for name, res in results.items():
        sers = " ".join(f"{p.ser:.3e}" for p in res.points)
        print(f"{args.figure}/{name}: {sers}")
    if not results:
        print(f"{args.figure}: analytic data written"
              + (f" to {args.out_dir}" if args.out_dir else ""))
    return 0


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="gdmrelay",
        description="Non-coherent DF relay network simulation and analysis",
    )
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("simulate", help="Monte Carlo SER sweep")
    _add_simulate_args(p)
    p.set_defaults(func=_cmd_simulate)

    p = sub.add_parser("analyze", help="closed-form SER over an SNR grid")
    p.add_argument("--relays", type=int, default=2)
    p.add_argument("--mod", type=int, default=4)
    p.add_argument("--L", type=int, default=1)
    p.add_argument("--power", type=float, default=1.0)
    p.add_argument("--sr-offset-db", type=float, default=0.0)
    p.add_argument("--snr", type=_parse_snr_grid, default=(0, 5, 10, 15, 20, 25, 30))
    p.set_defaults(func=_cmd_analyze)

    p = sub.add_parser("optimize", help="closed-form power split")
    p.add_argument("--L", type=int, required=True)
    p.add_argument("--power", type=float, default=1.0)
    p.add_argument("--mod", type=int, default=4)
    p.add_argument("--gamma-sr", type=float, default=None,
                   help="linear S-R SNR for the feasibility diagnostic")
    p.add_argument("--gamma-sd", type=float, default=None,
                   help="linear S-D SNR for the feasibility diagnostic")
    p.set_defaults(func=_cmd_optimize)

    p = sub.add_parser("complexity", help="per-symbol operation counts")
    p.add_argument("--mod", type=int, default=8)
    p.add_argument("--relays", type=int, default=12)
    p.add_argument("--detector", default="all",
                   choices=("all", "amld", "pld", "nmld"))
    p.set_defaults(func=_cmd_complexity)

    p = sub.add_parser("diversity", help="diversity orders")
    p.add_argument("--relays", type=int, required=True)
    p.add_argument("--errors", type=int, default=None,
                   help="condition on this many wrong relays")
    p.add_argument("--genie-r", type=int, default=None,
                   help="condition on this many guaranteed-correct relays")
    p.set_defaults(func=_cmd_diversity)

    p = sub.add_parser("reproduce", help="rerun a canned figure experiment")
    p.add_argument("--figure", required=True, choices=sorted(harness.FIGURE_PRESETS))
    p.add_argument("--scale", default="desk", choices=("desk", "full"))
    p.add_argument("--out-dir", default=None)
    p.add_argument("--seed", type=int, default=0)
    p.set_defaults(func=_cmd_reproduce)

    return parser


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    if getattr(args, "config", None):
        _load_config_file(args.config, args, parser)
    try:
        return args.func(args)
    except (ValueError, OSError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 3


if __name__ == "__main__":
    sys.exit(main())
