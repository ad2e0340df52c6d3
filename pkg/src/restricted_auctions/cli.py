"""Command-line front end.

    restricted-auctions preset list
    restricted-auctions calibrate preset:deterministic-expo
    restricted-auctions certify preset:at-most-one --out out/amo
    restricted-auctions solve path/to/instance.toml --resolution 64
    restricted-auctions sweep preset:bundle-alpha --from 1.0 --to 1.5 --step 0.02 --tol 0.01

Exit codes: 0 success, 1 certificate inconclusive, 2 bad input or config,
3 price calibration did not converge, 4 certificate refuted, 5 solver failure.
"""

from __future__ import annotations

import argparse
import json
import logging
import sys
from concurrent.futures import ProcessPoolExecutor
from pathlib import Path

import numpy as np

from . import presets
from .calibrate import calibrate_extrapolated
from .certify import (CERTIFIED, REFUTED, certify_menu, check_matching_condition)
from .config import InstanceConfig, load_config
from .errors import ConvergenceError, InputError, SolverError, StructuralError, UnsupportedError
from .export import cells_csv, cells_svg, mechanism_csv, plan_svg, rungs_csv
from .measure import transform
from .menu import Menu, cell_measures, revenue_direct
from .transport import (discretize_dual, feasibility_violation, plan_residuals, recovered_mechanism,
                        solve)

log = logging.getLogger("restricted_auctions.cli")

EXIT_OK, EXIT_INCONCLUSIVE, EXIT_INPUT, EXIT_CONVERGENCE, EXIT_REFUTED, EXIT_SOLVER = 0, 1, 2, 3, 4, 5
MC_SAMPLES = 200_000


def _parse_sets(items) -> dict:
    out = {}
    for item in items or ():
        key, sep, val = item.partition("=")
        if not sep:
            raise InputError(f"--set expects KEY=VALUE, got {item!r}")
        try:
            out[key] = float(val)
        except ValueError as exc:
            raise InputError(f"--set {key}: {val!r} is not a number") from exc
    return out


def resolve_target(target: str, params: dict | None = None) -> InstanceConfig:
    """``preset:NAME`` or a path to a TOML instance file."""
    params = params or {}
    if target.startswith("preset:"):
        return presets.get_preset(target[len("preset:"):], **params)
    if params:
        raise InputError("--set only applies to presets")
    return load_config(target)


def _apply_flags(cfg: InstanceConfig, args) -> InstanceConfig:
    kw = {"tol": args.tol, "seed": args.seed, "out": args.out}
    r = args.resolution
    if r is not None:
        if r < 4:
            raise InputError("--resolution must be at least 4")
        kw["resolutions"] = (r // 4, r // 2, r)
        kw["calibration"] = (r // 2, r)
    return cfg.with_overrides(**kw)


def _menu(cfg: InstanceConfig):
    """Fixed prices from the config, or calibrated ones."""
    if cfg.prices is not None:
        if cfg.outside_option:
            return Menu.with_zero_option(cfg.shape, cfg.prices), None
        return Menu(cfg.shape, cfg.prices), None
    cal = calibrate_extrapolated(cfg.shape, cfg.density, cfg.initial_prices, cfg.calibration,
                                 tol=cfg.calibrate_tol, outside_option=cfg.outside_option)
    return cal.menu, cal


def _offered(menu: Menu, cfg: InstanceConfig) -> np.ndarray:
    return menu.prices[1:] if cfg.outside_option else menu.prices


def _out_dir(cfg: InstanceConfig) -> Path:
    p = Path(cfg.out)
    p.mkdir(parents=True, exist_ok=True)
    return p


def _view(cfg: InstanceConfig):
    # exponential instances live near the origin; show the interesting part
    if cfg.density.kind == "exponential_product":
        return np.full(cfg.density.dim, 2.0)
    return None


# -- commands -----------------------------------------------------------------

def cmd_calibrate(cfg: InstanceConfig, args) -> int:
    menu, cal = _menu(cfg)
    out = _out_dir(cfg)
    lines = [f"instance: {cfg.name}", "calibrated prices (integrate-to-zero, Richardson extrapolated):"]
    header = "resolution  " + "  ".join(f"{np.round(s, 4).tolist()!s:>16}" for s in cfg.shape)
    lines.append(header)
    if cal is not None:
        for r, p in zip(cal.resolutions, cal.per_resolution):
            lines.append(f"{r:>10d}  " + "  ".join(f"{v:16.10f}" for v in p))
    final = _offered(menu, cfg)
    lines.append(f"{'final':>10}  " + "  ".join(f"{v:16.10f}" for v in final))
    ref = cfg.reference.get("prices")
    if ref is not None:
        diff = np.asarray(final) - np.asarray(ref)
        lines.append("reference   " + "  ".join(f"{v:16.10f}" for v in ref))
        lines.append(f"max deviation from reference: {np.max(np.abs(diff)):.3e}")
    bench = cfg.reference.get("randomized_bundle_price")
    if bench is not None:
        lines.append(f"grand-bundle price: deterministic {final[-1]:.4f} vs randomized benchmark "
                     f"{bench:.4f} (difference {final[-1] - bench:+.4f})")
    text = "\n".join(lines) + "\n"
    sys.stdout.write(text)
    (out / "report.txt").write_text(text)
    rows = ["allocation,price"] + [
        f"\"{np.round(s, 12).tolist()}\",{float(p)!r}" for s, p in zip(menu.allocations, menu.prices)]
    (out / "prices.csv").write_text("\n".join(rows) + "\n")
    return EXIT_OK


def _diagnostics(cfg: InstanceConfig, menu: Menu, mu) -> tuple[list, dict]:
    """Preset-specific matching conditions and mass checks at the finest grid."""
    lines, rec = [], {}
    price = _offered(menu, cfg)
    cond = None
    if cfg.name == "at-most-one":
        cond = presets.matching_at_most_one(mu, price[0])
    elif cfg.name == "exactly-one":
        cond = presets.matching_exactly_one(mu, price[0])
    elif cfg.name == "bundle-alpha":
        cond = presets.matching_bundle(mu, cfg.params["alpha"], price[0])
    if cond is not None:
        rep = check_matching_condition(cond)
        lines.append(f"matching condition [{cond.name}]: min slack {rep.min_slack:+.3e} "
                     f"at a = {rep.worst_a:.4f} -> {'pass' if rep.passed else 'fail'}")
        rec["matching"] = {"name": cond.name, "min_slack": rep.min_slack, "worst_a": rep.worst_a,
                           "passed": rep.passed}
    if cfg.name == "deterministic-expo":
        w = presets.deterministic_witness(cfg.density, price[0], price[1])
        lines.append(f"item-1 cell: pos dominates neg: {w.dominates} (margin {w.margin:+.2e}, "
                     f"raw imbalance {100 * w.imbalance:+.3f}%)")
        lines.append(f"45-degree line availability factor: {w.availability:.2f} "
                     f"(least line mass {w.line_min:.4f}, largest neg {w.neg_max:.4f})")
        rec["witness"] = {"dominates": w.dominates, "margin": w.margin, "imbalance": w.imbalance,
                          "availability": w.availability}
    return lines, rec


def cmd_certify(cfg: InstanceConfig, args) -> int:
    menu, _ = _menu(cfg)
    out = _out_dir(cfg)
    finest = {}

    def keep(rung, inst, plan, mu):
        log.info("resolution %d: gap %.3e (%.1f s)", rung.resolution, rung.gap, rung.seconds)
        finest.update(inst=inst, plan=plan, mu=mu)

    rep = certify_menu(menu, cfg.density, cfg.S, cfg.resolutions, tol=cfg.tol, on_rung=keep,
                       dual_measure=presets.dual_measure(cfg.dual_measure))
    inst, plan, mu = finest["inst"], finest["plan"], finest["mu"]
    mc, se = revenue_direct(menu, cfg.density, MC_SAMPLES, seed=cfg.seed)
    diag, diag_rec = _diagnostics(cfg, menu, mu)
    text = (f"instance: {cfg.name}\n" + rep.to_text(menu)
            + f"monte carlo revenue: {mc:.6f} +/- {se:.1e} ({MC_SAMPLES} samples, seed {cfg.seed})\n"
            + "".join(line + "\n" for line in diag))
    sys.stdout.write(text)
    (out / "report.txt").write_text(text)
    report = cell_measures(menu, mu, method="fractional")
    (out / "cells.csv").write_text(cells_csv(menu, report))
    (out / "ladder.csv").write_text(rungs_csv(rep.rungs))
    (out / "plan.csv").write_text(plan.to_csv(inst))
    mech = recovered_mechanism(plan, inst)
    (out / "mechanism.csv").write_text(mechanism_csv(mech, mech.allocations(cfg.S, inst, plan), cfg.S))
    (out / "cells.svg").write_text(cells_svg(menu, cfg.density.truncation, _view(cfg), title=cfg.name))
    (out / "plan.svg").write_text(plan_svg(inst, plan, cfg.density.truncation, _view(cfg),
                                           title=f"{cfg.name}: transport plan"))
    record = {"instance": cfg.name, "prices": menu.prices.tolist(),
              "allocations": menu.allocations.tolist(), "certificate": rep.to_record(),
              "monte_carlo": {"revenue": mc, "stderr": se, "seed": cfg.seed}, **diag_rec}
    (out / "record.json").write_text(json.dumps(record, indent=2, sort_keys=True) + "\n")
    if rep.verdict == CERTIFIED:
        return EXIT_OK
    return EXIT_REFUTED if rep.verdict == REFUTED else EXIT_INCONCLUSIVE


def cmd_solve(cfg: InstanceConfig, args) -> int:
    r = cfg.resolutions[-1]
    out = _out_dir(cfg)
    mu = transform(cfg.density, resolution=r)
    inst = discretize_dual(mu, cfg.S)
    plan = solve(inst)
    res = plan_residuals(inst, plan)
    mech = recovered_mechanism(plan, inst)
    viol = feasibility_violation(mech, cfg.S, seed=cfg.seed)
    lines = [f"instance: {cfg.name}", f"resolution: {r}",
             f"sources: {inst.size[0]}  sinks: {inst.size[1]}  arcs used: {plan.weight.size}",
             f"dual optimum (plan cost): {plan.cost:.10f}",
             f"potential value:          {plan.dual_value(inst):.10f}"]
    lines += [f"residual {k}: {v:.3e}" for k, v in res.items()]
    lines.append(f"recovered mechanism: max u(x) - u(y) - l_S(x, y) = {viol:.3e}")
    text = "\n".join(lines) + "\n"
    sys.stdout.write(text)
    (out / "report.txt").write_text(text)
    (out / "plan.csv").write_text(plan.to_csv(inst))
    (out / "mechanism.csv").write_text(mechanism_csv(mech, mech.allocations(cfg.S, inst, plan), cfg.S))
    (out / "plan.svg").write_text(plan_svg(inst, plan, cfg.density.truncation, _view(cfg),
                                           title=f"{cfg.name}: transport plan"))
    return EXIT_OK


def sweep_point(cfg: InstanceConfig) -> dict:
    """Calibrate and certify one instance of a sweep."""
    menu, _ = _menu(cfg)
    rep = certify_menu(menu, cfg.density, cfg.S, cfg.resolutions, tol=cfg.tol,
                       dual_measure=presets.dual_measure(cfg.dual_measure))
    row = {"price": float(_offered(menu, cfg)[0]), "verdict": rep.verdict, "primal": rep.primal,
           "dual": rep.dual, "gap": rep.gap, "rel_gap": rep.rel_gap,
           "extrapolated_gap": rep.extrapolated_gap,
           "coarse_rel_gaps": [r.rel_gap for r in rep.rungs[:-1]]}
    if cfg.name == "bundle-alpha":
        mu = transform(cfg.density, resolution=cfg.resolutions[-1])
        cond = presets.matching_bundle(mu, cfg.params["alpha"], row["price"])
        row["matching_slack"] = check_matching_condition(cond).min_slack
    return row


def sweep_values(start: float, stop: float, step: float) -> list:
    if step <= 0 or stop < start:
        raise InputError("sweep needs --step > 0 and --to >= --from")
    n = int(np.floor((stop - start) / step + 1e-9)) + 1
    return [round(start + k * step, 10) for k in range(n)]


def cmd_sweep(target: str, args, params: dict) -> int:
    if not target.startswith("preset:"):
        raise InputError("sweep needs a preset target")
    values = sweep_values(args.start, args.stop, args.step)
    cfgs = [_apply_flags(resolve_target(target, {**params, args.param: v}), args) for v in values]
    out = _out_dir(cfgs[0])
    if args.jobs > 1:
        with ProcessPoolExecutor(args.jobs) as pool:
            rows = list(pool.map(sweep_point, cfgs))
    else:
        rows = []
        for v, c in zip(values, cfgs):
            rows.append(sweep_point(c))
            log.info("%s = %g: %s", args.param, v, rows[-1]["verdict"])
    ladder = cfgs[0].resolutions
    head = [args.param, "price", "primal", "dual", "gap", "rel_gap"] + \
        [f"rel_gap_{r}" for r in ladder[:-1]] + ["extrapolated_gap", "verdict"]
    has_match = "matching_slack" in rows[0]
    if has_match:
        head.append("matching_slack")
    lines = [",".join(head)]
    for v, row in zip(values, rows):
        cells = [repr(v), repr(row["price"]), repr(row["primal"]), repr(row["dual"]), repr(row["gap"]),
                 repr(row["rel_gap"])] + [repr(g) for g in row["coarse_rel_gaps"]] + \
                [repr(row["extrapolated_gap"]), row["verdict"]]
        if has_match:
            cells.append(repr(row["matching_slack"]))
        lines.append(",".join(cells))
    (out / "sweep.csv").write_text("\n".join(lines) + "\n")
    certified = [v for v, row in zip(values, rows) if row["verdict"] == CERTIFIED]
    summary = [f"{args.param:>8}  {'rel_gap':>9}  verdict"] + [
        f"{v:8.3f}  {100 * row['rel_gap']:8.4f}%  {row['verdict']}" for v, row in zip(values, rows)]
    summary.append(f"smallest {args.param} certified at tolerance {100 * cfgs[0].tol:g}%: "
                   f"{certified[0] if certified else 'none'}")
    if has_match:
        ok = [v for v, row in zip(values, rows) if row["matching_slack"] >= -1e-6]
        summary.append(f"smallest {args.param} passing the matching condition: {ok[0] if ok else 'none'}")
    text = "\n".join(summary) + "\n"
    sys.stdout.write(text)
    (out / "report.txt").write_text(text)
    return EXIT_OK


def cmd_preset_list() -> int:
    for name, fn in presets.PRESETS.items():
        doc = (fn.__doc__ or "").strip().splitlines()
        cfg = fn()
        sys.stdout.write(f"{name:20s} dim {cfg.density.dim}  {cfg.density.kind:20s} "
                         f"{len(cfg.shape)} option(s){'  ' + doc[0] if doc else ''}\n")
    return EXIT_OK


# -- entry point --------------------------------------------------------------

def build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(prog="restricted-auctions",
                                description="Calibrate, solve and certify menus under restricted allocations.")
    p.add_argument("-v", "--verbose", action="count", default=0)
    sub = p.add_subparsers(dest="command", required=True)

    def common(sp):
        sp.add_argument("target", help="preset:NAME or path to a TOML instance")
        sp.add_argument("--resolution", type=int, help="finest grid; the ladder becomes R/4, R/2, R")
        sp.add_argument("--tol", type=float, help="certificate tolerance as a fraction of revenue")
        sp.add_argument("--seed", type=int)
        sp.add_argument("--out", help="output directory")
        sp.add_argument("--set", action="append", metavar="KEY=VALUE", help="preset parameter")

    for name in ("calibrate", "certify", "solve"):
        common(sub.add_parser(name))
    sw = sub.add_parser("sweep")
    common(sw)
    sw.add_argument("--param", default="alpha")
    sw.add_argument("--from", dest="start", type=float, required=True)
    sw.add_argument("--to", dest="stop", type=float, required=True)
    sw.add_argument("--step", type=float, required=True)
    sw.add_argument("--jobs", type=int, default=1)
    pr = sub.add_parser("preset")
    pr.add_argument("action", choices=["list"])
    return p


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    level = logging.WARNING if not args.verbose else (logging.INFO if args.verbose == 1 else logging.DEBUG)
    logging.basicConfig(format="%(levelname)s %(name)s: %(message)s")
    logging.getLogger("restricted_auctions").setLevel(level)
    try:
        if args.command == "preset":
            return cmd_preset_list()
        params = _parse_sets(args.set)
        if args.command == "sweep":
            return cmd_sweep(args.target, args, params)
        cfg = _apply_flags(resolve_target(args.target, params), args)
        return {"calibrate": cmd_calibrate, "certify": cmd_certify, "solve": cmd_solve}[args.command](cfg, args)
    except (InputError, StructuralError, UnsupportedError) as exc:
        sys.stderr.write(f"error: {exc}\n")
        return EXIT_INPUT
    except ConvergenceError as exc:
        sys.stderr.write(f"calibration did not converge: {exc}\n")
        return EXIT_CONVERGENCE
    except SolverError as exc:
        sys.stderr.write(f"transport solver failed: {exc}\n")
        return EXIT_SOLVER


if __name__ == "__main__":
    sys.exit(main())
