"""Command line entry point: ``nsi simulate|design|estimate|test|bench``.

Exit codes: 0 success, 2 bad input, 3 estimation infeasible, 4 a validity
test failed under ``--strict``.
"""

from __future__ import annotations

import argparse
import json
import logging
import sys
from pathlib import Path

import numpy as np

from . import __version__
from .bench import BenchConfig, run_bench
from .design import design_schedule, random_prediction_treatments
from .donors import donor_submatrices, find_donors
from .errors import InputError, NSIError
from .estimator import estimate
from .graph import read_edge_list
from .io import (
    SIM_CONFIG_KEYS,
    graph_from_config,
    load_config,
    read_panel_csv,
    read_treatment_csv,
    write_panel_csv,
    write_treatment_csv,
)
from .panel import ObservationPanel, SimConfig, TreatmentPanel, simulate
from .validity import subspace_inclusion_test, training_treatment_test

log = logging.getLogger("nsi")

EXIT_TEST_FAILED = 4


def _emit(obj, out: str | None = None) -> None:
    text = json.dumps(obj, indent=2, default=_json_default)
    if out:
        Path(out).write_text(text + "\n")
    else:
        print(text)


def _json_default(x):
    if isinstance(x, np.generic):
        return x.item()
    if isinstance(x, np.ndarray):
        return x.tolist()
    raise TypeError(f"cannot serialize {type(x).__name__}")


def _parse_target(text: str) -> list[int]:
    try:
        return [int(x) for x in text.replace(" ", "").split(",") if x]
    except ValueError:
        raise InputError(f"target must be comma-separated integers, got {text!r}") from None


def _kappa_arg(text: str):
    if text in ("auto", "knee", "universal"):
        return text
    try:
        return int(text)
    except ValueError:
        raise InputError(f"kappa must be auto, knee, universal or an integer, got {text!r}") from None


def _load_treatments(args) -> TreatmentPanel:
    a = read_treatment_csv(args.treatments)
    d = args.d if args.d else int(a.max())
    t_pre = args.tpre if args.tpre is not None else a.shape[1]
    return TreatmentPanel(a, d, t_pre)


def _load_graph(args, n_units: int):
    g = read_edge_list(args.graph, n_units)
    if g.n_units != n_units:
        raise InputError(f"graph has {g.n_units} units, panel has {n_units}")
    return g


def cmd_simulate(args) -> int:
    raw = load_config(args.config)
    unknown = set(raw) - set(SIM_CONFIG_KEYS)
    if unknown:
        raise InputError(f"unknown config keys {sorted(unknown)}")
    cfg = {**SIM_CONFIG_KEYS, **raw}
    g = graph_from_config(cfg, Path(args.config).parent)
    d = int(cfg["d_treatments"])
    rng = np.random.default_rng(cfg["seed"])
    if cfg["training"] == "design":
        sched = design_schedule(g, d, int(cfg["r_bar"]))
        t_bar = int(cfg["t_pre"]) // sched.t_prime
        a_pre = design_schedule(g, d, int(cfg["r_bar"]), t_bar).a_pre
    elif cfg["training"] == "random":
        a_pre = np.repeat(rng.integers(1, d + 1, size=g.n_units)[:, None], int(cfg["t_pre"]), axis=1)
    else:
        raise InputError(f"unknown training scheme {cfg['training']!r}")
    a_post = random_prediction_treatments(g.n_units, d, rng)
    tp = TreatmentPanel.from_parts(a_pre, a_post, int(cfg["t_post"]), d)
    sim = SimConfig(
        rank=int(cfg["rank"]),
        noise_std=float(cfg["noise_std"]),
        seed=cfg["seed"],
        w_process=cfg["w_process"],
        factor_scale=cfg["factor_scale"],
        noise_kind=cfg["noise_kind"],
    )
    z, _ = simulate(g, tp, sim, rng=rng)
    write_panel_csv(z.z, args.out_panel)
    write_treatment_csv(tp.a_matrix, args.out_treatments)
    summary = {"n_units": g.n_units, "t_pre": tp.t_pre, "t_post": tp.t_post, "d_treatments": d}
    if args.out_graph:
        from .graph import write_edge_list

        write_edge_list(g, args.out_graph)
    _emit(summary)
    return 0


def cmd_design(args) -> int:
    g = read_edge_list(args.graph, args.n_units)
    sched = design_schedule(g, args.d, args.rbar, args.tbar)
    write_treatment_csv(sched.a_pre, args.out)
    _emit(sched.summary(g.max_degree), args.summary)
    return 0


def _estimand_inputs(args):
    tp = _load_treatments(args)
    z = ObservationPanel(read_panel_csv(args.panel), tp.t_pre)
    z.check_against(tp)
    g = _load_graph(args, tp.n_units)
    target = _parse_target(args.target)
    ds = find_donors(g, tp, args.unit, target, args.donor_mode)
    return tp, z, g, target, ds


def cmd_estimate(args) -> int:
    tp, z, g, target, ds = _estimand_inputs(args)
    report = estimate(z, ds, args.kappa, args.ci, args.two_sided)
    training = training_treatment_test(g, tp, args.unit, target, args.rbar)
    _, z_pre_I, z_post_I = donor_submatrices(z, ds)
    try:
        subspace = subspace_inclusion_test(z_pre_I, z_post_I, gamma=args.gamma).to_dict()
    except InputError as exc:
        subspace = {"error": str(exc), "pass": False}
    report.diagnostics["tests"] = {"training": training.to_dict(), "subspace": subspace}
    for w in report.warnings:
        log.warning(w)
    _emit(report.to_dict(), args.out)
    if args.strict and not (training.passed and subspace.get("pass")):
        return EXIT_TEST_FAILED
    return 0


def cmd_test(args) -> int:
    if args.which == "training":
        tp = _load_treatments(args)
        g = _load_graph(args, tp.n_units)
        res = training_treatment_test(g, tp, args.unit, _parse_target(args.target), args.rbar)
        _emit({"training": res.to_dict()})
        passed = res.passed
    else:
        tp, z, g, target, ds = _estimand_inputs(args)
        _, z_pre_I, z_post_I = donor_submatrices(z, ds)
        res = subspace_inclusion_test(z_pre_I, z_post_I, args.kappa, args.kappa_prime, args.gamma)
        _emit({"subspace": res.to_dict()})
        passed = res.passed
    return EXIT_TEST_FAILED if args.strict and not passed else 0


def cmd_bench(args) -> int:
    raw = load_config(args.config)
    if args.sims is not None:
        raw["n_sims"] = args.sims
    cfg = BenchConfig.from_dict(raw)
    result = run_bench(cfg)
    _emit(result.to_dict(), args.out)
    if args.residuals_csv:
        with open(args.residuals_csv, "w") as fh:
            fh.write("estimator,residual\n")
            for name, vals in result.residuals.items():
                fh.writelines(f"{name},{float(v)!r}\n" for v in vals)
    return 0


def build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(prog="nsi", description=__doc__.splitlines()[0])
    p.add_argument("--version", action="version", version=f"%(prog)s {__version__}")
    p.add_argument("-v", "--verbose", action="store_true")
    sub = p.add_subparsers(dest="command", required=True)

    s = sub.add_parser("simulate", help="simulate a panel from a config file")
    s.add_argument("--config", required=True)
    s.add_argument("--out-panel", required=True)
    s.add_argument("--out-treatments", required=True)
    s.add_argument("--out-graph")
    s.set_defaults(func=cmd_simulate)

    s = sub.add_parser("design", help="coloring-based training schedule")
    s.add_argument("--graph", required=True)
    s.add_argument("--d", type=int, required=True)
    s.add_argument("--rbar", type=int, default=1)
    s.add_argument("--tbar", type=int)
    s.add_argument("--n-units", type=int)
    s.add_argument("--out", required=True)
    s.add_argument("--summary", help="write the JSON summary here instead of stdout")
    s.set_defaults(func=cmd_design)

    def estimand_args(s, kappa_default="auto"):
        s.add_argument("--panel", required=True)
        s.add_argument("--treatments", required=True)
        s.add_argument("--graph", required=True)
        s.add_argument("--unit", type=int, required=True)
        s.add_argument("--target", required=True, help="comma-separated labels over N(unit), ascending index order")
        s.add_argument("--tpre", type=int, required=True)
        s.add_argument("--d", type=int, help="number of treatments (default: largest label)")
        s.add_argument("--donor-mode", choices=("identity", "exhaustive"), default="identity")
        s.add_argument("--gamma", type=float, default=0.5)
        s.add_argument("--strict", action="store_true")

    s = sub.add_parser("estimate", help="estimate one unit's counterfactual outcome")
    estimand_args(s)
    s.add_argument("--kappa", type=_kappa_arg, default="auto")
    s.add_argument("--ci", type=float, default=95.0)
    s.add_argument("--two-sided", action="store_true")
    s.add_argument("--rbar", type=int, default=1)
    s.add_argument("--out")
    s.set_defaults(func=cmd_estimate)

    s = sub.add_parser("test", help="run a validity test")
    tsub = s.add_subparsers(dest="which", required=True)
    t = tsub.add_parser("training")
    t.add_argument("--treatments", required=True)
    t.add_argument("--graph", required=True)
    t.add_argument("--unit", type=int, required=True)
    t.add_argument("--target", required=True)
    t.add_argument("--tpre", type=int, required=True)
    t.add_argument("--d", type=int)
    t.add_argument("--rbar", type=int, default=1)
    t.add_argument("--strict", action="store_true")
    t.set_defaults(func=cmd_test)
    t = tsub.add_parser("subspace")
    estimand_args(t)
    t.add_argument("--kappa", type=_kappa_arg, default="knee")
    t.add_argument("--kappa-prime", type=_kappa_arg, default="knee")
    t.set_defaults(func=cmd_test)

    s = sub.add_parser("bench", help="run a simulation study")
    s.add_argument("--config", required=True)
    s.add_argument("--out")
    s.add_argument("--sims", type=int, help="override n_sims")
    s.add_argument("--residuals-csv")
    s.set_defaults(func=cmd_bench)
    return p


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING, format="%(levelname)s %(message)s")
    try:
        return args.func(args)
    except NSIError as exc:
        print(f"nsi: error: {exc}", file=sys.stderr)
        return exc.exit_code
    except (FileNotFoundError, IsADirectoryError) as exc:
        print(f"nsi: error: {exc}", file=sys.stderr)
        return InputError.exit_code


if __name__ == "__main__":
    sys.exit(main())
