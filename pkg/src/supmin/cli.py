"""Command-line front end: run / sweep / oracle / check-tensor.

Exit codes: 0 success, 2 invalid configuration, 3 solver failure,
4 verification failure.  Outputs are plain structured text; re-running with
the same config and seed reproduces every byte.
"""

import argparse
import os
import sys
from concurrent.futures import ThreadPoolExecutor

import numpy as np

from .bangbang import ClampedBC1D, solve_bang_bang
from .config import (
    boundary_profile,
    build_grid,
    build_supremand,
    build_tensor,
    config_hash,
    load_config,
    oracle_endpoint_data,
)
from .continuation import continuation_solve
from .errors import ConfigError, SupminError, VerificationFailure
from .operators import apply_operator, assemble_operator
from .tensors import LEGENDRE_HADAMARD, check_legendre, check_legendre_hadamard

EXIT_OK = 0
EXIT_CONFIG = 2
EXIT_SOLVER = 3
EXIT_VERIFY = 4


def _fmt(x):
    return format(float(x), ".17e")


def _apply_overrides(cfg, args):
    if getattr(args, "seed", None) is not None:
        cfg.seed = int(args.seed)
        cfg.items["seed"] = str(cfg.seed)
    if getattr(args, "p_max", None) is not None:
        cfg.p_max = float(args.p_max)
        cfg.schedule = None
        cfg.items["schedule.p_max"] = repr(cfg.p_max)
        cfg.items.pop("schedule.p", None)
    if getattr(args, "nodes", None) is not None:
        nodes = tuple(int(v) for v in str(args.nodes).split(","))
        if len(nodes) not in (1, cfg.dim):
            raise ConfigError(f"--nodes: expected 1 or {cfg.dim} values, got {args.nodes!r}")
        cfg.nodes = tuple(int(v) for v in np.resize(nodes, cfg.dim))
        if any(m < 5 for m in cfg.nodes):
            raise ConfigError(f"--nodes: need at least 5 nodes per axis, got {cfg.nodes}")
        cfg.items["domain.nodes"] = ",".join(str(m) for m in cfg.nodes)
    return cfg


def _solve_from_config(cfg):
    grid = build_grid(cfg)
    tensor = build_tensor(cfg)
    supremand = build_supremand(cfg)
    clamp = boundary_profile(cfg, grid.coords())
    op = assemble_operator(grid, tensor)
    report = continuation_solve(
        op,
        supremand,
        clamp,
        schedule=cfg.schedule,
        p_max=cfg.p_max,
        newton_tol=cfg.newton_tol,
        bracket_stop=cfg.bracket_stop,
        theta=cfg.theta,
        degenerate_tol=cfg.degenerate_tol,
    )
    return op, supremand, clamp, report


def _check_report(cfg, report):
    """Enforce the structural and residual bounds; raises VerificationFailure."""
    try:
        report.check_invariants()
    except AssertionError as exc:
        raise VerificationFailure(str(exc)) from exc
    v = report.verify
    if v is None or report.degenerate:
        return
    if report.e_inf > 0 and v.r_system > cfg.r_system_frac * report.e_inf:
        raise VerificationFailure(
            f"r_system {v.r_system:.6e} exceeds {cfg.r_system_frac} * e_inf ({report.e_inf:.6e})"
        )
    if v.r_harmonic > cfg.r_harmonic_max:
        raise VerificationFailure(
            f"r_harmonic {v.r_harmonic:.6e} exceeds {cfg.r_harmonic_max:.1e}"
        )


def _write_report(path, cfg, report, oracle_row):
    lines = []
    lines.append("status = ok")
    lines.append(f"config_hash = {config_hash(cfg)}")
    lines.append(f"seed = {cfg.seed}")
    lines.append(f"dim = {cfg.dim}")
    lines.append(f"nodes = {','.join(str(m) for m in cfg.nodes)}")
    lines.append(f"components = {cfg.components}")
    lines.append(f"degenerate = {'true' if report.degenerate else 'false'}")
    lines.append("p_table_columns = p energy peak newton_iters grad_norm cv")
    for row in report.rows:
        lines.append(
            "p_row = "
            + " ".join(
                [
                    _fmt(row.p),
                    _fmt(row.energy),
                    _fmt(row.peak),
                    str(row.newton_iters),
                    _fmt(row.grad_norm),
                    _fmt(row.cv),
                ]
            )
        )
    lines.append(f"e_inf_estimate = {_fmt(report.e_inf)}")
    lines.append(f"bracket_low = {_fmt(report.bracket[0])}")
    lines.append(f"bracket_high = {_fmt(report.bracket[1])}")
    if report.verify is not None:
        for key, value in report.verify.as_dict().items():
            lines.append(f"verify.{key} = {_fmt(value)}")
    if oracle_row is not None:
        bb, e_oracle = oracle_row
        lines.append(f"oracle.a = {_fmt(bb.a)}")
        lines.append(f"oracle.s = {_fmt(bb.s)}")
        lines.append(f"oracle.sigma = {bb.sigma}")
        lines.append(f"oracle.e_inf = {_fmt(e_oracle)}")
    with open(path, "w", encoding="utf-8") as fh:
        fh.write("\n".join(lines) + "\n")


def _write_fields(path, cfg, op, supremand, report):
    coords = op.grid.coords()
    n_nodes = coords.shape[0]
    n_comp = op.n_components
    lu_eq = apply_operator(op, report.u)
    fv_eq = supremand.eval_field(op.eq_coords(), lu_eq)
    lu = np.zeros((n_nodes, n_comp))
    lu[op.eq_idx] = lu_eq
    fv = np.zeros(n_nodes)
    fv[op.eq_idx] = fv_eq
    dual = np.zeros((n_nodes, n_comp))
    dual[op.eq_idx] = report.f
    headers = (
        [f"x{a}" for a in range(coords.shape[1])]
        + [f"u{i}" for i in range(n_comp)]
        + [f"Lu{i}" for i in range(n_comp)]
        + ["F"]
        + [f"f{i}" for i in range(n_comp)]
    )
    with open(path, "w", encoding="utf-8") as fh:
        fh.write("# " + " ".join(headers) + "\n")
        for k in range(n_nodes):
            row = (
                list(coords[k])
                + list(report.u[k])
                + list(lu[k])
                + [fv[k]]
                + list(dual[k])
            )
            fh.write(" ".join(_fmt(v) for v in row) + "\n")


def _oracle_for_config(cfg, supremand):
    data = oracle_endpoint_data(cfg)
    if data is None:
        return None
    bb = solve_bang_bang(ClampedBC1D(*data))
    e_oracle = supremand.eval(None, np.array([bb.a]))
    return bb, e_oracle


def _run_single(cfg, out_dir):
    os.makedirs(out_dir, exist_ok=True)
    op, supremand, clamp, report = _solve_from_config(cfg)
    oracle_row = _oracle_for_config(cfg, supremand)
    _check_report(cfg, report)
    _write_report(os.path.join(out_dir, "report.txt"), cfg, report, oracle_row)
    _write_fields(os.path.join(out_dir, "fields.dat"), cfg, op, supremand, report)
    if oracle_row is not None:
        bb, e_oracle = oracle_row
        with open(os.path.join(out_dir, "oracle.txt"), "w", encoding="utf-8") as fh:
            fh.write(f"a = {_fmt(bb.a)}\n")
            fh.write(f"s = {_fmt(bb.s)}\n")
            fh.write(f"sigma = {bb.sigma}\n")
            fh.write(f"e_inf = {_fmt(e_oracle)}\n")
    return report


def cmd_run(args):
    cfg = _apply_overrides(load_config(args.config), args)
    _run_single(cfg, args.out)
    return EXIT_OK


def cmd_sweep(args):
    if not args.config:
        raise ConfigError("sweep: at least one --config is required")
    cfgs = [_apply_overrides(load_config(path), args) for path in args.config]
    os.makedirs(args.out, exist_ok=True)
    results = []

    def one(k_cfg):
        k, cfg = k_cfg
        sub = os.path.join(args.out, config_hash(cfg))
        try:
            _run_single(cfg, sub)
            return k, sub, EXIT_OK, ""
        except VerificationFailure as exc:
            return k, sub, EXIT_VERIFY, str(exc)
        except ConfigError as exc:
            return k, sub, EXIT_CONFIG, str(exc)
        except SupminError as exc:
            return k, sub, EXIT_SOLVER, str(exc)

    with ThreadPoolExecutor(max_workers=min(4, len(cfgs))) as pool:
        results = sorted(pool.map(one, enumerate(cfgs)))

    lines = []
    worst = EXIT_OK
    for k, sub, code, message in results:
        status = {EXIT_OK: "ok", EXIT_CONFIG: "config-error",
                  EXIT_SOLVER: "solver-error", EXIT_VERIFY: "verify-failure"}[code]
        lines.append(f"{args.config[k]} -> {os.path.basename(sub)} : {status}"
                     + (f" ({message})" if message else ""))
        worst = max(worst, code)
    with open(os.path.join(args.out, "sweep.txt"), "w", encoding="utf-8") as fh:
        fh.write("\n".join(lines) + "\n")
    print("\n".join(lines))
    return worst


def cmd_oracle(args):
    if args.bc is not None:
        vals = tuple(float(v) for v in args.bc.split(","))
        if len(vals) != 4:
            raise ConfigError("--bc: expected x0,v0,x1,v1")
        bb = solve_bang_bang(ClampedBC1D(*vals))
        e_oracle = bb.a**2
    else:
        if args.config is None:
            raise ConfigError("oracle: provide --config or --bc")
        cfg = _apply_overrides(load_config(args.config), args)
        supremand = build_supremand(cfg)
        row = _oracle_for_config(cfg, supremand)
        if row is None:
            raise ConfigError(
                "oracle: closed form needs a 1D scalar config with identity tensor, "
                "q=2, constant weight, and a named analytic profile"
            )
        bb, e_oracle = row
    text = (
        f"a = {_fmt(bb.a)}\n"
        f"s = {_fmt(bb.s)}\n"
        f"sigma = {bb.sigma}\n"
        f"e_inf = {_fmt(e_oracle)}\n"
    )
    print(text, end="")
    if args.out:
        os.makedirs(args.out, exist_ok=True)
        with open(os.path.join(args.out, "oracle.txt"), "w", encoding="utf-8") as fh:
            fh.write(text)
    return EXIT_OK


def cmd_check_tensor(args):
    cfg = _apply_overrides(load_config(args.config), args)
    tensor = build_tensor(cfg)
    grid = build_grid(cfg)
    points = grid.coords() if not tensor.is_constant else None
    dev = tensor.check_symmetry(points=points)
    lines = [f"symmetry_deviation = {_fmt(dev)}", f"mode = {tensor.mode}",
             f"lambda_declared = {_fmt(tensor.lam)}"]
    legendre = check_legendre(tensor, sample_points=points)
    lines.append(f"legendre_min = {_fmt(legendre)}")
    if tensor.is_constant:
        lh = check_legendre_hadamard(tensor)
        lines.append(f"legendre_hadamard_min = {_fmt(lh)}")
        declared_ok = (lh if tensor.mode == LEGENDRE_HADAMARD else legendre) >= tensor.lam - 1e-6
    else:
        declared_ok = legendre >= tensor.lam - 1e-6
    lines.append(f"declared_lambda_consistent = {'true' if declared_ok else 'false'}")
    text = "\n".join(lines) + "\n"
    print(text, end="")
    if args.out:
        os.makedirs(args.out, exist_ok=True)
        with open(os.path.join(args.out, "tensor.txt"), "w", encoding="utf-8") as fh:
            fh.write(text)
    if not declared_ok:
        raise VerificationFailure(
            f"declared lambda {tensor.lam} not supported by the measured constants"
        )
    return EXIT_OK


def build_parser():
    parser = argparse.ArgumentParser(
        prog="supmin",
        description="sup-norm minimization of elliptic divergence-form costs on clamped box grids",
    )
    sub = parser.add_subparsers(dest="command", required=True)

    def common(p, config_required=True, multi_config=False):
        if multi_config:
            p.add_argument("--config", action="append", default=[], help="config file (repeatable)")
        else:
            p.add_argument("--config", required=config_required, help="config file")
        p.add_argument("--out", help="output directory")
        p.add_argument("--seed", type=int, help="override seed")
        p.add_argument("--p-max", dest="p_max", type=float, help="override schedule.p_max")
        p.add_argument("--nodes", help="override domain.nodes (comma-separated)")

    p_run = sub.add_parser("run", help="solve one configuration and verify it")
    common(p_run)
    p_run.set_defaults(func=cmd_run)

    p_sweep = sub.add_parser("sweep", help="run several configurations")
    common(p_sweep, multi_config=True)
    p_sweep.set_defaults(func=cmd_sweep)

    p_oracle = sub.add_parser("oracle", help="closed-form 1D least-peak-acceleration profile")
    common(p_oracle, config_required=False)
    p_oracle.add_argument("--bc", help="x0,v0,x1,v1 endpoint data (bypasses --config)")
    p_oracle.set_defaults(func=cmd_oracle)

    p_check = sub.add_parser("check-tensor", help="symmetry and ellipticity of the coefficient tensor")
    common(p_check)
    p_check.set_defaults(func=cmd_check_tensor)
    return parser


def main(argv=None):
    parser = build_parser()
    args = parser.parse_args(argv)
    if args.command in ("run", "sweep") and not args.out:
        print("error: --out is required", file=sys.stderr)
        return EXIT_CONFIG
    try:
        return args.func(args)
    except ConfigError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except VerificationFailure as exc:
        print(f"verification failure: {exc}", file=sys.stderr)
        return EXIT_VERIFY
    except SupminError as exc:
        print(f"solver error: {exc}", file=sys.stderr)
        return EXIT_SOLVER


if __name__ == "__main__":
    sys.exit(main())
