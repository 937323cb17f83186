"""Batch front-end: ``skec bounds|simulate|sweep|validate``.

Every command reads one structured-text config, derives all randomness from
``--seed``, and writes machine-readable records (CSV with a header row, or
JSON-lines) plus, for the sweep and simulate report paths, a rendered figure
alongside the delimited output.  Reruns with identical config and seed produce
byte-identical files.

Exit codes: 0 success, 2 config error, 3 infeasibility (including sd-only
bounds requested for a non-sd setup), 4 enumeration guard exceeded.  The
``SKEC_GUARD_ETA`` environment variable overrides the candidate-scan guard.
"""

from __future__ import annotations

import argparse
import os
import sys

import numpy as np

from . import __version__
from .bounds import (BoundPair, BoundReport, DirectionAux, InfeasiblePlanError,
                     NotSdSetupError, SearchConfig, degenerate_aux_system,
                     lower_bound_and_icc, lower_bound_sd, upper_bound)
from .channels import TwoDmbcSetup, degradedness_check, is_sd_setup, make_bsc_pair
from .config import (Section, SkecConfigError, build_setup, channel_is_bsc_pair,
                     load_config)
from .icc import (BlockPlan, EnumerationGuardError, PlanError, evaluate,
                  general_protocol, plan_general, plan_special, special_protocol)
from .reporting import (SCHEMA_BOUNDS, SCHEMA_SESSION, SCHEMA_SIMULATE,
                        SCHEMA_SWEEP, SCHEMA_VALIDATE, write_rows)

EXIT_OK = 0
EXIT_CONFIG = 2
EXIT_INFEASIBLE = 3
EXIT_GUARD = 4

_BOUND_KINDS = ("general", "icc", "sd", "upper", "capacity")


def _aux_dict(aux: DirectionAux | None) -> dict | None:
    if aux is None:
        return None
    return {
        "p_x1": aux.p_x1.probs.tolist(),
        "p_v_given_y1": aux.p_v_given_y1.table.tolist(),
        "p_w1": aux.p_w1.probs.tolist(),
        "p_w2_given_w1": aux.p_w2_given_w1.table.tolist(),
        "p_x2_given_w1": aux.p_x2_given_w1.table.tolist(),
    }


def _search_config(sec: Section | None, seed: int, workers: int) -> SearchConfig:
    if sec is None:
        return SearchConfig(seed=seed, workers=workers)
    return SearchConfig(
        restarts=sec.get_int("restarts", 32),
        max_sweeps=sec.get_int("max_sweeps", 40),
        tol=sec.get_float("tolerance", 1e-7),
        tau_grid=sec.get_int("tau_grid", 512),
        seed=seed,
        v_card=sec.get_int("v_card"),
        w1_card=sec.get_int("w1_card"),
        w2_card=sec.get_int("w2_card"),
        workers=workers,
    )


def _bound_kinds(sec: Section | None, setup: TwoDmbcSetup) -> list[str]:
    raw = sec.get("kinds") if sec is not None else None
    if raw is None:
        kinds = ["general", "icc", "upper"]
        if is_sd_setup(setup):
            kinds += ["sd", "capacity"]
        return kinds
    kinds = raw.split()
    for kind in kinds:
        if kind not in _BOUND_KINDS:
            raise SkecConfigError(f"unknown bound kind {kind!r}; choose from "
                                  f"{' '.join(_BOUND_KINDS)}", fieldname="kinds")
    if ("sd" in kinds or "capacity" in kinds) and not is_sd_setup(setup):
        raise NotSdSetupError("sd bounds requested but the setup is not an "
                              "sd setup (independent components plus "
                              "degradedness order on both channels)")
    return kinds


def _report_row(name: str, report: BoundReport, seed: int) -> dict:
    return {
        "schema": SCHEMA_BOUNDS,
        "bound": name,
        "value": report.value,
        "ratio": report.ratio,
        "constraint_slack": report.constraint_slack,
        "feasible": report.feasible,
        "diagnostic": report.diagnostic,
        "restarts": report.restarts,
        "evaluations": report.evaluations,
        "seed": seed,
        "argmax": _aux_dict(report.argmax),
    }


def _combined_row(name: str, pair: BoundPair, seed: int) -> dict:
    winner, direction = ((pair.a, "A") if pair.a.value >= pair.b.value
                         else (pair.b, "B"))
    row = _report_row(name, winner, seed)
    row["direction"] = direction
    return row


def _pair_rows(prefix: str, combined: str, pair: BoundPair, seed: int) -> list[dict]:
    row_a = _report_row(f"{prefix}_A", pair.a, seed)
    row_a["direction"] = "A"
    row_b = _report_row(f"{prefix}_B", pair.b, seed)
    row_b["direction"] = "B"
    return [row_a, row_b, _combined_row(combined, pair, seed)]


def cmd_bounds(args) -> int:
    config = load_config(args.config)
    setup = build_setup(config)
    sec = config.section("bounds")
    kinds = _bound_kinds(sec, setup)
    cfg = _search_config(sec, args.seed, args.workers)
    rows: list[dict] = []
    if "general" in kinds or "icc" in kinds:
        lower, icc = lower_bound_and_icc(setup, cfg)
        if "general" in kinds:
            rows += _pair_rows("L", "L", lower, args.seed)
        if "icc" in kinds:
            rows += _pair_rows("R_ICC", "R_ICC", icc, args.seed)
    if "sd" in kinds or "capacity" in kinds:
        sd = lower_bound_sd(setup, cfg)
        if "sd" in kinds:
            rows += _pair_rows("Lp", "Lp", sd, args.seed)
        if "capacity" in kinds:
            row = _combined_row("capacity_sd_iid", sd, args.seed)
            rows.append(row)
    if "upper" in kinds:
        ub = upper_bound(setup, seed=args.seed)
        rows.append({"schema": SCHEMA_BOUNDS, "bound": "upper", "value": ub,
                     "ratio": None, "constraint_slack": None, "feasible": True,
                     "diagnostic": None, "restarts": None, "evaluations": None,
                     "seed": args.seed, "argmax": None, "direction": None})
    write_rows(args.out, rows, args.format)
    print(f"wrote {len(rows)} bound records to {args.out}")
    return EXIT_OK


def cmd_validate(args) -> int:
    config = load_config(args.config)
    setup = build_setup(config)
    rows = []
    sd = True
    for direction, channel in (("forward", setup.forward),
                               ("backward", setup.backward)):
        report = degradedness_check(channel)
        order = report.order.value
        print(f"{direction}: independent_components={report.independent_components} "
              f"order={order}")
        sd = sd and report.independent_components and order != "incomparable"
        rows.append({
            "schema": SCHEMA_VALIDATE,
            "direction": direction,
            "independent_components": report.independent_components,
            "order": order,
            "witness": (None if report.witness is None
                        else report.witness.rows.tolist()),
        })
    print(f"sd_setup: {sd}")
    rows.append({"schema": SCHEMA_VALIDATE, "direction": "setup",
                 "independent_components": None, "order": None, "witness": None,
                 "sd_setup": sd})
    if args.out:
        write_rows(args.out, rows, args.format)
        print(f"wrote {len(rows)} classification records to {args.out}")
    return EXIT_OK


def _build_plan(setup: TwoDmbcSetup, sec: Section) -> tuple[BlockPlan, str]:
    protocol = sec.get("protocol", "special")
    if protocol not in ("special", "general"):
        raise SkecConfigError(f"protocol must be special or general, got "
                              f"{protocol!r}", fieldname="protocol")
    n_total = sec.get_int("n_total")
    if n_total is None:
        raise SkecConfigError("simulate needs n_total", fieldname="n_total")
    kwargs = dict(alpha=sec.get_float("alpha", 0.05),
                  epsilon=sec.get_float("epsilon"),
                  n_f=sec.get_int("n_f"),
                  kappa=sec.get_int("kappa"))
    if protocol == "special":
        plan = plan_special(setup, n_total, **kwargs)
    else:
        aux = degenerate_aux_system(setup).a
        plan = plan_general(setup, aux, n_total, **kwargs)
    return plan, protocol


def cmd_simulate(args) -> int:
    config = load_config(args.config)
    setup = build_setup(config)
    sec = config.require("simulate")
    plan, protocol_name = _build_plan(setup, sec)
    sessions = sec.get_int("sessions", 200)
    delta = sec.get_float("delta", 0.1)
    want_leakage = sec.get_flag("leakage", True)
    per_session = sec.get_flag("per_session", False)
    root = np.random.SeedSequence(args.seed)
    build_ss, eval_ss = root.spawn(2)
    if protocol_name == "special":
        protocol = special_protocol(setup, plan, np.random.default_rng(build_ss))
    else:
        aux = degenerate_aux_system(setup).a
        protocol = general_protocol(setup, aux, plan, np.random.default_rng(build_ss))
    report = evaluate(setup, plan, protocol, sessions,
                      np.random.default_rng(eval_ss), delta=delta,
                      compute_leakage=want_leakage, workers=args.workers,
                      keep_outcomes=per_session)
    record = {
        "schema": SCHEMA_SIMULATE,
        "protocol": protocol_name,
        "sessions": sessions,
        "seed": args.seed,
        "n_f": plan.n_f,
        "n_b_info": plan.n_b_info,
        "n_b_parity": plan.n_b_parity,
        "n_total": plan.n_total,
        "eta": plan.eta,
        "kappa": plan.kappa,
        "gamma": plan.gamma,
        "alpha": plan.alpha,
        "epsilon": plan.epsilon,
        "r_sk": plan.r_sk,
        "p_error": report.p_error,
        "p_error_half_width": report.p_error_half_width,
        "key_entropy": report.key_entropy,
        "key_entropy_plugin": report.key_entropy_plugin,
        "leakage": report.leakage,
        "leakage_se": report.leakage_se,
        "rate": report.rate,
        "delta": delta,
        "check_uniformity": report.checks["uniformity"],
        "check_reliability": report.checks["reliability"],
        "check_secrecy": report.checks["secrecy"],
        "count_ok": report.failure_counts["ok"],
        "count_bob_null": report.failure_counts["bob_null"],
        "count_alice_null": report.failure_counts["alice_null"],
        "count_decode_mismatch": report.failure_counts["decode_mismatch"],
    }
    write_rows(args.out, [record], args.format)
    wrote = [args.out]
    if per_session and report.outcomes is not None:
        stem, ext = os.path.splitext(args.out)
        spath = f"{stem}_sessions{ext}"
        srows = [{"schema": SCHEMA_SESSION, "session": i, "s": o.s,
                  "s_hat": o.s_hat, "failure_mode": o.failure_mode}
                 for i, o in enumerate(report.outcomes)]
        write_rows(spath, srows, args.format)
        wrote.append(spath)
    if args.plot:
        from .plotting import render_simulate_figure

        fig_path = os.path.splitext(args.out)[0] + ".png"
        render_simulate_figure(record, report.key_counts, fig_path)
        wrote.append(fig_path)
    print(f"simulated {sessions} sessions: p_error={report.p_error:.6f} "
          f"H(S)={report.key_entropy:.4f} bits"
          + (f" leakage={report.leakage:.4f}" if report.leakage is not None else ""))
    print("wrote " + ", ".join(wrote))
    return EXIT_OK


_SWEEP_BOUND_COLUMNS = ["l_a", "l_b", "lower", "r_icc_a", "r_icc_b", "r_icc",
                        "lp_a", "lp_b", "lower_sd", "upper", "capacity_sd_iid"]


def cmd_sweep(args) -> int:
    config = load_config(args.config)
    sec = config.require("sweep")
    param = sec.get("parameter", "eve")
    if param not in ("eve", "legit"):
        raise SkecConfigError(f"parameter must be eve or legit, got {param!r}",
                              fieldname="parameter")
    raw_grid = sec.get("grid")
    if raw_grid is None or not raw_grid.split():
        raise SkecConfigError("sweep needs a nonempty grid", fieldname="grid")
    grid = [float(tok) for tok in raw_grid.split()]
    fwd = channel_is_bsc_pair(config.require("forward"))
    bwd = channel_is_bsc_pair(config.require("backward"))
    if fwd is None or bwd is None:
        raise SkecConfigError("sweep requires bsc_pair channels in both "
                              "directions (the swept crossover replaces the "
                              "configured one)")
    cfg = _search_config(config.section("bounds"), args.seed, args.workers)
    rows = []
    for value in grid:
        if param == "eve":
            setup = TwoDmbcSetup(make_bsc_pair(fwd[0], value),
                                 make_bsc_pair(bwd[0], value))
        else:
            setup = TwoDmbcSetup(make_bsc_pair(value, fwd[1]),
                                 make_bsc_pair(value, bwd[1]))
        lower, icc = lower_bound_and_icc(setup, cfg)
        row = {
            "schema": SCHEMA_SWEEP,
            "param": param,
            "param_value": value,
            "l_a": lower.a.value, "l_b": lower.b.value, "lower": lower.value,
            "r_icc_a": icc.a.value, "r_icc_b": icc.b.value, "r_icc": icc.value,
            "upper": upper_bound(setup, seed=args.seed),
            "seed": args.seed,
        }
        if is_sd_setup(setup):
            sd = lower_bound_sd(setup, cfg)
            row.update(lp_a=sd.a.value, lp_b=sd.b.value, lower_sd=sd.value,
                       capacity_sd_iid=sd.value)
        else:
            row.update(lp_a=None, lp_b=None, lower_sd=None, capacity_sd_iid=None)
        rows.append(row)
    columns = ["schema", "param", "param_value"] + _SWEEP_BOUND_COLUMNS + ["seed"]
    write_rows(args.out, rows, args.format, columns=columns)
    wrote = [args.out]
    if args.plot:
        from .plotting import render_sweep_figure

        fig_path = os.path.splitext(args.out)[0] + ".png"
        render_sweep_figure(rows, _SWEEP_BOUND_COLUMNS, param, fig_path)
        wrote.append(fig_path)
    print(f"swept {len(grid)} grid points; wrote " + ", ".join(wrote))
    return EXIT_OK


def _add_common(sub, out_required: bool = True):
    sub.add_argument("--config", required=True, help="path to the run config")
    sub.add_argument("--seed", type=int, default=0, help="master seed (default 0)")
    sub.add_argument("--out", required=out_required, default=None,
                     help="output report path")
    sub.add_argument("--format", choices=("csv", "jsonl"), default="csv")
    sub.add_argument("--workers", type=int, default=1,
                     help="worker threads for restarts/sessions")


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="skec",
        description="Secret-key establishment over a two-way noisy broadcast "
                    "setup: rate bounds and protocol simulation.")
    parser.add_argument("--version", action="version", version=f"skec {__version__}")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("bounds", help="compute all applicable rate bounds")
    _add_common(p)
    p.set_defaults(func=cmd_bounds, plot=False)

    p = sub.add_parser("simulate", help="run protocol sessions and evaluate them")
    _add_common(p)
    p.add_argument("--plot", action=argparse.BooleanOptionalAction, default=True,
                   help="render a figure next to the report (default on)")
    p.set_defaults(func=cmd_simulate)

    p = sub.add_parser("sweep", help="bounds over a parameter grid")
    _add_common(p)
    p.add_argument("--plot", action=argparse.BooleanOptionalAction, default=True,
                   help="render rate curves next to the table (default on)")
    p.set_defaults(func=cmd_sweep)

    p = sub.add_parser("validate", help="classify the configured channels")
    _add_common(p, out_required=False)
    p.set_defaults(func=cmd_validate, plot=False)
    return parser


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        return args.func(args)
    except SkecConfigError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except (InfeasiblePlanError, NotSdSetupError, PlanError) as exc:
        print(f"infeasible: {exc}", file=sys.stderr)
        return EXIT_INFEASIBLE
    except EnumerationGuardError as exc:
        print(f"guard exceeded: {exc}", file=sys.stderr)
        return EXIT_GUARD


if __name__ == "__main__":
    sys.exit(main())
