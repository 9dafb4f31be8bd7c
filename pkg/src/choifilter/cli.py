"""Command line: prepare, sweep, fit, validate."""

from __future__ import annotations

import argparse
import json
import logging
import sys
from pathlib import Path

from .dmrg import DmrgConfig, prepare_initial_choi_state
from .errors import ConvergenceError, DimensionError, FitError, InputError
from .models import ModelParams
from .mps import TruncationPolicy, save_mps
from .sweep import (SweepConfig, SweepResult, checkpoint_name, default_grid, default_sizes, fit_all,
                    fits_document, output_paths, read_profiles_json, read_rows_csv, run_sweep)

log = logging.getLogger("choifilter")

EXIT_OK, EXIT_MISMATCH, EXIT_CONFIG, EXIT_CONVERGENCE, EXIT_FIT = 0, 1, 2, 3, 4


def _floats(text: str) -> list[float]:
    """``0,0.1,0.2`` or ``start:stop:step`` (stop inclusive)."""
    if ":" in text:
        a, b, c = (float(v) for v in text.split(":"))
        n = int(round((b - a) / c))
        return [round(a + k * c, 10) for k in range(n + 1)]
    return [float(v) for v in text.split(",") if v.strip()]


def _ints(text: str) -> list[int]:
    return [int(v) for v in text.split(",") if v.strip()]


def build_parser() -> argparse.ArgumentParser:
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--config", help="JSON file with defaults for any flag (flags win)")
    common.add_argument("--j-over-h", type=float, dest="j_over_h", default=None)
    common.add_argument("--h", type=float, default=1.0)
    common.add_argument("--sizes", type=_ints, default=None, help="comma separated rung counts")
    common.add_argument("--pzz-grid", type=_floats, dest="pzz_grid", default=None,
                        help="comma list or start:stop:step")
    common.add_argument("--mode", choices=["full", "zz_only"], default=None)
    common.add_argument("--max-bond", type=int, dest="max_bond", default=200)
    common.add_argument("--sv-cutoff", type=float, dest="sv_cutoff", default=1e-6)
    common.add_argument("--energy-tol", type=float, dest="energy_tol", default=1e-4)
    common.add_argument("--max-sweeps", type=int, dest="max_sweeps", default=50)
    common.add_argument("--seed", type=int, default=0)
    common.add_argument("--out", default=None)
    common.add_argument("--threads", type=int, default=1)
    common.add_argument("--resume", action="store_true")
    common.add_argument("--no-project", action="store_true", dest="no_project",
                        help="skip the cat-state parity projection")
    common.add_argument("-v", "--verbose", action="store_true")

    p = argparse.ArgumentParser(prog="choifilter", description="Decohered TFIM ground states as filtered Choi MPS")
    sub = p.add_subparsers(dest="command", required=True)
    sub.add_parser("prepare", parents=[common], help="DMRG ground states, saved as checkpoints")
    sub.add_parser("sweep", parents=[common], help="filter and measure over the p_zz grid")
    f = sub.add_parser("fit", parents=[common], help="S_A peaks, 1/L extrapolation and c_eff from sweep output")
    f.add_argument("rows", help="rows CSV written by sweep")
    v = sub.add_parser("validate", parents=[common], help="MPS against exact diagonalization on a small ladder")
    v.add_argument("--tol", type=float, default=1e-4)
    return p


def parse_args(argv=None) -> argparse.Namespace:
    parser = build_parser()
    args = parser.parse_args(argv)
    if args.config:
        try:
            cfg = json.loads(Path(args.config).read_text())
        except (OSError, json.JSONDecodeError) as e:
            raise InputError(f"cannot read config {args.config}: {e}") from e
        if not isinstance(cfg, dict):
            raise InputError("config must be a JSON object")
        cfg = {k.replace("-", "_"): v for k, v in cfg.items()}
        for key in ("sizes", "pzz_grid"):
            if isinstance(cfg.get(key), str):
                cfg[key] = (_ints if key == "sizes" else _floats)(cfg[key])
        known = set(vars(args))
        unknown = set(cfg) - known
        if unknown:
            raise InputError(f"unknown config keys: {sorted(unknown)}")
        sub = parser._subparsers._group_actions[0].choices[args.command]
        sub.set_defaults(**cfg)
        args = parser.parse_args(argv)
    return args


def _dmrg_config(args) -> DmrgConfig:
    return DmrgConfig(trunc=_trunc(args), energy_tol=args.energy_tol, seed=args.seed, max_sweeps=args.max_sweeps)


def _trunc(args) -> TruncationPolicy:
    return TruncationPolicy(max_bond=args.max_bond, sv_cutoff=args.sv_cutoff)


def _sweep_config(args) -> SweepConfig:
    if args.j_over_h is None:
        raise InputError("--j-over-h is required")
    return SweepConfig(
        J_over_h=args.j_over_h,
        h=args.h,
        L_list=args.sizes or default_sizes(args.j_over_h),
        p_zz_grid=args.pzz_grid or default_grid(),
        dmrg=_dmrg_config(args),
        trunc=_trunc(args),
        output_path=args.out,
        mode=args.mode or "full",
        threads=args.threads,
        resume=args.resume,
        project=False if args.no_project else None,
    )


def cmd_prepare(args) -> int:
    if args.j_over_h is None:
        raise InputError("--j-over-h is required")
    out = Path(args.out or "checkpoints")
    out.mkdir(parents=True, exist_ok=True)
    J = args.j_over_h * args.h
    status = EXIT_OK
    for L in args.sizes or default_sizes(args.j_over_h):
        state, rep = prepare_initial_choi_state(ModelParams(J, L, args.h), _dmrg_config(args),
                                                project=False if args.no_project else None)
        path = out / checkpoint_name(J, args.h, L, args.seed)
        save_mps(state, path)
        path.with_suffix(".json").write_text(json.dumps(
            {"energy": rep.energy, "converged": rep.converged, "sweeps": len(rep.sweep_energies)}))
        print(f"L={L} E={rep.energy:.10f} sweeps={len(rep.sweep_energies)} "
              f"max_bond={state.max_bond} converged={rep.converged} -> {path}")
        if not rep.converged:
            status = EXIT_CONVERGENCE
    return status


def cmd_sweep(args) -> int:
    cfg = _sweep_config(args)
    if cfg.output_path is None:
        cfg.output_path = f"sweep_J{cfg.J_over_h}.csv"

    def progress(row):
        print(f"L={row['L']:3d} p_zz={row['p_zz']:.4f} chi_II={row['chi_renyi2_zz']:.5f} "
              f"chi_st={row['chi_strange_z']:.5f} chi_u={row['chi_upper_zz']:.5f} "
              f"S_A={row['S_A']:.5f} {row['regime']} {row['status']}", flush=True)

    res = run_sweep(cfg, progress)
    _print_fits(res)
    if any(r["status"] != "ok" for r in res.rows):
        return EXIT_CONVERGENCE
    return EXIT_OK


def _print_fits(res: SweepResult) -> None:
    for L, p in sorted(res.fits.items()):
        print(f"peak L={L}: p_zz={p:.5f}")
    for L, e in sorted(res.fit_errors.items()):
        print(f"peak L={L}: failed ({e})")
    if res.extrapolation:
        a, pc, r = res.extrapolation
        print(f"p_c = {pc:.5f}  (a = {a:.4f}, residual {r:.2e})")


def cmd_fit(args) -> int:
    rows = read_rows_csv(args.rows)
    res = SweepResult(rows=rows)
    prof_path = output_paths(args.rows)["profiles"]
    if prof_path.exists():
        res.profiles = read_profiles_json(prof_path)
    fit_all(res)
    doc = fits_document(res)
    _print_fits(res)
    for rec in doc.get("c_eff", []):
        print(f"c_eff L={rec['L']} p_zz={rec['p_zz']:.4f}: {rec['c_eff']:.4f} (rms {rec['rms']:.2e})")
    if args.out:
        Path(args.out).write_text(json.dumps(doc, indent=2, sort_keys=True) + "\n")
    if res.fit_errors or res.extrapolation is None:
        return EXIT_FIT
    return EXIT_OK


def cmd_validate(args) -> int:
    from . import ed, observables as ob
    from .filtering import filter_state

    j = args.j_over_h if args.j_over_h is not None else 0.1
    J = j * args.h
    mode = args.mode or "zz_only"
    L = (args.sizes or [8])[0]
    grid = args.pzz_grid or [round(0.05 * k, 10) for k in range(11)]
    p = ModelParams(J, L, args.h)
    s0, _ = prepare_initial_choi_state(p, _dmrg_config(args), project=False if args.no_project else None)
    d0 = ed.ground_state_dense(p)
    worst = 0.0
    print(f"{'p_zz':>6} {'C_nn mps':>12} {'C_nn ed':>12} {'S_plaq mps':>12} {'S_plaq ed':>12}")
    for pz in grid:
        f = filter_state(s0, pz, J, _trunc(args), h=args.h, mode=mode)
        p_x = f.channel.p_x
        o = ed.observables_dense(ed.apply_channel_dense(d0, pz, p_x))
        c, s = ob.mean_nn_renyi2(f), ob.plaquette_entropy(f)
        worst = max(worst, abs(c - o.nn_renyi2_zz), abs(s - o.plaquette_entropy))
        print(f"{pz:6.3f} {c:12.8f} {o.nn_renyi2_zz:12.8f} {s:12.8f} {o.plaquette_entropy:12.8f}")
    ok = worst <= args.tol
    print(f"max deviation {worst:.2e} ({'within' if ok else 'exceeds'} {args.tol:g})")
    return EXIT_OK if ok else EXIT_MISMATCH


COMMANDS = {"prepare": cmd_prepare, "sweep": cmd_sweep, "fit": cmd_fit, "validate": cmd_validate}


def main(argv=None) -> int:
    try:
        args = parse_args(argv)
    except InputError as e:
        print(f"config error: {e}", file=sys.stderr)
        return EXIT_CONFIG
    logging.basicConfig(level=logging.DEBUG if args.verbose else logging.WARNING,
                        format="%(levelname)s %(name)s: %(message)s")
    try:
        return COMMANDS[args.command](args)
    except (InputError, DimensionError) as e:
        print(f"config error: {e}", file=sys.stderr)
        return EXIT_CONFIG
    except ConvergenceError as e:
        print(f"convergence failure: {e}", file=sys.stderr)
        return EXIT_CONVERGENCE
    except FitError as e:
        print(f"fit failure: {e}", file=sys.stderr)
        return EXIT_FIT


if __name__ == "__main__":
    sys.exit(main())
