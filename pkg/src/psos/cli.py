"""Command-line front end: ``psos simulate | verify | experiment | schema``.

Exit codes: 0 success, 1 a verification found a violation (or an experiment
was aborted as unmixed), 2 invalid configuration or usage, 3 I/O failure.
"""

from __future__ import annotations

import argparse
import json
import math
import os
import sys

import numpy as np

from . import experiments as ex
from . import verify as vf
from .config import EXPERIMENTS, ConfigError, build_config, config_hash, load_schema
from .dynamics import GlauberChain, make_rng
from .gibbs import FLOOR_CEILING, ModelParams, total_energy
from .lattice import BoundaryCondition, BoxGeometry, HeightField
from .output import RunWriter

SCHEMAS = ("config", "summary", "manifest", "report", "snapshot")


def _int_list(s: str) -> list[int]:
    try:
        return [int(v) for v in s.split(",") if v.strip()]
    except ValueError:
        raise argparse.ArgumentTypeError(f"expected comma-separated integers, got {s!r}") from None


def _workers(args) -> int:
    if args.workers is not None:
        return max(1, args.workers)
    env = os.environ.get("PSOS_WORKERS")
    try:
        return max(1, int(env)) if env else 1
    except ValueError:
        raise ConfigError([("PSOS_WORKERS", f"not an integer: {env!r}")]) from None


def _common(p: argparse.ArgumentParser) -> None:
    p.add_argument("--config", help="JSON or TOML config file")
    p.add_argument("--seed", type=int, help="master seed")
    p.add_argument("--workers", type=int, help="worker processes (default: $PSOS_WORKERS or 1)")
    p.add_argument("--out", default="psos-runs", help="base output directory (default: psos-runs)")
    p.add_argument("--dry-run", action="store_true", help="validate and print the resolved config only")
    p.add_argument("--timestamps", action="store_true", help="record wall-clock times in the manifest")


def _model_flags(p: argparse.ArgumentParser, L_list: bool = False) -> None:
    p.add_argument("--p", type=float)
    p.add_argument("--beta", type=float)
    if L_list:
        p.add_argument("--L", type=_int_list, help="box side, or a comma-separated list for hitting-time")
    else:
        p.add_argument("--L", type=int)
    p.add_argument("--mode", choices=("free", "floor", "floor_ceiling"))
    p.add_argument("--n-plus", type=int, dest="n_plus")


def build_parser() -> argparse.ArgumentParser:
    ap = argparse.ArgumentParser(prog="psos", description="p-SOS model simulation and exact checks")
    sub = ap.add_subparsers(dest="command", required=True)

    sim = sub.add_parser("simulate", help="run Glauber chains and record trajectories")
    _common(sim)
    _model_flags(sim)
    sim.add_argument("--n-sweeps", type=int, dest="n_sweeps")
    sim.add_argument("--snapshot-every", type=int, dest="snapshot_every")
    sim.add_argument("--start", choices=("zero", "top"))
    sim.add_argument("--n-replicas", type=int, dest="n_replicas")

    ver = sub.add_parser("verify", help="exact verification suites on tiny boxes")
    ver.add_argument("suite", choices=vf.SUITES + ("all",))
    _common(ver)
    ver.add_argument("--p", type=float)
    ver.add_argument("--beta", type=float)
    ver.add_argument("--L", type=int)

    exp = sub.add_parser("experiment", help="run a named experiment")
    exp.add_argument("name", choices=EXPERIMENTS)
    _common(exp)
    _model_flags(exp, L_list=True)
    exp.add_argument("--ci-policy", choices=ex.CI_POLICIES, dest="ci_policy")
    exp.add_argument("--a", type=float)
    exp.add_argument("--K", type=int)
    exp.add_argument("--M", type=int)
    exp.add_argument("--h", type=_int_list, dest="h_list", help="levels, comma-separated")
    exp.add_argument("--H", type=int, help="use this typical height instead of estimating it")
    exp.add_argument("--n-samples", type=int, dest="n_samples")
    exp.add_argument("--burn-in", type=int, dest="burn_in")
    exp.add_argument("--n-seeds", type=int, dest="n_seeds")
    exp.add_argument("--T-max", type=int, dest="T_max", help="censoring horizon in sweeps")
    exp.add_argument("--target", choices=("omega", "B"))
    exp.add_argument("--start", choices=("zero", "nu"))
    exp.add_argument("--fraction", type=float)
    exp.add_argument("--min-level", type=int, dest="min_level")
    exp.add_argument("--method", choices=("ratio", "direct"))
    exp.add_argument("--separations", type=_int_list)

    sch = sub.add_parser("schema", help="print a shipped JSON schema")
    sch.add_argument("name", nargs="?", default="config", choices=SCHEMAS)
    return ap


# ---------------------------------------------------------------- config assembly


def _overrides(args, kind: str) -> dict:
    model = {"p": args.p, "beta": args.beta, "mode": args.mode, "n_plus": args.n_plus}
    params = {}
    L = getattr(args, "L", None)
    if isinstance(L, list):
        if kind == "hitting-time":
            params["L_list"] = L
        elif len(L) == 1:
            model["L"] = L[0]
        else:
            raise ConfigError([("--L", f"'{kind}' takes a single box side")])
    elif L is not None:
        model["L"] = L
    for k in ("n_sweeps", "snapshot_every", "start", "n_replicas", "ci_policy", "a", "K", "M", "h_list",
              "n_samples", "burn_in", "n_seeds", "T_max", "target", "fraction", "min_level", "method",
              "separations"):
        v = getattr(args, k, None)
        if v is not None:
            params[k] = v
    if getattr(args, "H", None) is not None:
        params["H"] = args.H
    out = {"model": {k: v for k, v in model.items() if v is not None}, "experiment": {"params": params},
           "rng": {"seed": args.seed} if args.seed is not None else {}}
    if args.timestamps:
        out["output"] = {"timestamps": True}
    return out


def _model_params(cfg: dict, kind: str, L: int | None = None) -> ModelParams:
    m = cfg["model"]
    mode = m["mode"]
    n_plus = m.get("n_plus")
    if mode == FLOOR_CEILING and n_plus is None:
        n_plus = ex.default_n_plus(L or m.get("L", 2))
    geometry = BoxGeometry(m["L"]) if "L" in m else None
    return ModelParams(p=float(m["p"]), beta=float(m["beta"]), mode=mode,
                       n_plus=n_plus if mode == FLOOR_CEILING else None,
                       bc=BoundaryCondition.from_json(m.get("bc"), geometry),
                       bond_double_count=bool(m.get("bond_double_count", False)))


def _summary(kind: str, cfg: dict, h: str, results: dict) -> dict:
    from . import __version__
    return {"kind": kind, "config_hash": h, "artifact_version": __version__, "config": cfg, "results": results}


# ---------------------------------------------------------------- commands


def cmd_simulate(args, cfg, h, writer: RunWriter) -> int:
    P = cfg["experiment"]["params"]
    L = cfg["model"]["L"]
    params = _model_params(cfg, "simulate")
    if P["start"] == "top":
        top = params.n_plus if params.mode == FLOOR_CEILING else 2 * ex.default_n_plus(L)
    elif P["start"] == "zero":
        top = 0
    else:
        raise ConfigError([("experiment.params.start", "simulate starts from 'zero' or 'top'")])
    seed = cfg["rng"]["seed"]
    snaps, series = [], []
    every = P["snapshot_every"]
    for r in range(P["n_replicas"]):
        chain = GlauberChain(params, HeightField.constant(L, top), make_rng(seed, 1, r))
        for s in range(0, P["n_sweeps"] + 1):
            if s:
                chain.sweeps(1)
            H = chain.heights
            if s % every == 0 or s == P["n_sweeps"]:
                snaps.append({"replica": r, "step": chain.step, "sweep": s, "heights": H.tolist()})
            series.append([r, chain.step, s, float(H.mean()), int(H.max()), int(H.min()), float((H >= 1).mean()),
                           total_energy(chain.field, params)])
        writer.seed_status(f"seed={seed},replica={r}", "done")
    header = ["replica", "step", "sweep", "mean_height", "max_height", "min_height", "frac_ge_1", "energy"]
    writer.add_jsonl("snapshots.jsonl", snaps)
    writer.add_csv("series.csv", header, series)
    last = [row for row in series if row[2] == P["n_sweeps"]]
    writer.add_csv("plotdata.csv", ["sweep", "mean_height"],
                   [[s, float(np.mean([row[3] for row in series if row[2] == s]))] for s in range(P["n_sweeps"] + 1)])
    writer.add_json("summary.json", _summary("simulate", cfg, h, {
        "params": params.to_json(), "final": [dict(zip(header, row)) for row in last]}))
    return 0


def _verify_config(args) -> dict:
    suites = vf.SUITES if args.suite == "all" else (args.suite,)
    seed = args.seed if args.seed is not None else 0
    return {"verify": {s: vf.instances(s, args.p, args.beta, args.L) for s in suites}, "rng": {"seed": seed},
            "output": {"timestamps": bool(args.timestamps)}}


def cmd_verify(args) -> int:
    cfg = _verify_config(args)
    h = config_hash(cfg)
    if args.dry_run:
        print(json.dumps(cfg, sort_keys=True, indent=1))
        print(f"config_hash {h}")
        return 0
    writer = RunWriter(args.out, h, "verify", args.timestamps)
    failed = 0
    overview = {}
    for suite, inst in cfg["verify"].items():
        reports = vf.run_suite(suite, inst, cfg["rng"]["seed"])
        writer.add_json(f"report-{suite}.json", {"suite": suite, "config_hash": h, "reports": reports})
        nv = sum(r["violations"] + (r.get("nested") or {}).get("violations", 0) for r in reports)
        ok = all(r["passed"] for r in reports)
        failed += not ok
        overview[suite] = {"instances": len(reports), "violations": nv, "passed": ok}
        for r in reports:
            inp = r["inputs"]
            tag = " ".join(f"{k}={inp[k]}" for k in ("L", "p", "beta") if k in inp)
            print(f"{suite:17s} {tag:28s} checked={r['n_checked']:<6d} violations={r['violations']} "
                  f"{'PASS' if r['passed'] else 'FAIL'}")
    writer.seed_status(f"seed={cfg['rng']['seed']}", "done")
    writer.add_json("summary.json", _summary("verify", cfg, h, {"suites": overview, "passed": failed == 0}))
    path = writer.finish()
    print(f"wrote {path}")
    return 1 if failed else 0


def _tail_kw(P: dict, L: int) -> dict:
    return {"M": P.get("M") or ex.default_proxy_side(L), "n_sweeps": P["n_samples"], "burn_in": P["burn_in"],
            "method": P["method"], "mode": P["tail_mode"]}


def cmd_experiment(args, cfg, h, writer: RunWriter) -> int:
    name = cfg["experiment"]["name"]
    P = cfg["experiment"]["params"]
    m = cfg["model"]
    seed = cfg["rng"]["seed"]
    p, beta = float(m["p"]), float(m["beta"])
    if name == "tail-rates":
        fit = ex.tail_rates(p, beta, P["h_list"], P["M"], P["n_samples"], P["tail_mode"], seed, P["burn_in"],
                            P["method"])
        res = fit.to_json()
        rows = [[t.h, t.p_hat, t.ci, t.n_samples, t.method] for t in fit.tails]
        writer.add_csv("series.csv", ["h", "p_hat", "ci95", "n_samples", "method"], rows)
        writer.add_csv("plotdata.csv", ["h", "neg_log_p_hat", "neg_log_upper", "neg_log_lower"],
                       [[t.h, -math.log(t.p_hat) if t.p_hat > 0 else None,
                         -math.log(t.upper) if t.upper > 0 else None,
                         -math.log(t.lower) if t.lower > 0 else None] for t in fit.tails])
    elif name == "typical-height":
        L = m["L"]
        est = ex.TailEstimator(p, beta, seed=seed, **_tail_kw(P, L))
        th = ex.typical_height(beta, L, est, P["ci_policy"])
        res = th.to_json()
        if p == 1:
            res["sos_reference"] = math.floor(math.log(L) / (4 * beta))
        rows = [[t.h, t.p_hat, t.ci, t.lower, t.upper] for t in th.tails]
        writer.add_csv("series.csv", ["h", "p_hat", "ci95", "lower", "upper"], rows)
        writer.add_csv("plotdata.csv", ["h", "p_hat", "threshold"], [[t.h, t.p_hat, th.threshold] for t in th.tails])
    elif name == "concentration":
        L = m["L"]
        params = _model_params(cfg, "concentration")
        H = P["H"] if isinstance(P["H"], int) else None
        tail_kw = {"seed": seed, "M": P.get("M") or ex.default_proxy_side(L)}
        rep = ex.concentration_experiment(p, beta, L, P["K"], P["n_samples"], H, params.mode, params.n_plus,
                                          P["burn_in"], P["thin"], P["epsilon"], seed, P["agreement_tol"],
                                          tail_kw=tail_kw)
        res = rep.to_json()
        rows = [[int(k), rep.H - int(k), s, v["mean"], v["se"], v["min"]]
                for k, d in rep.by_start.items() for s, v in d.items()]
        writer.add_csv("series.csv", ["K", "level", "start", "mean_fraction", "se", "min_fraction"], rows)
        writer.add_csv("plotdata.csv", ["K", "fraction"], [[int(k), v] for k, v in rep.fractions_by_K.items()])
    elif name == "hitting-time":
        hmap = P["H"]
        if isinstance(hmap, int):
            hmap = {L: hmap for L in P["L_list"]}
        n_plus = {L: m["n_plus"] for L in P["L_list"]} if m.get("n_plus") else None
        hc = ex.HittingConfig(p, beta, P["a"], tuple(P["L_list"]), P["n_seeds"], P["T_max"], P["target"],
                              P["start"], P["fraction"], P["min_level"], hmap, n_plus, P["delta"], P["nu_burn_in"],
                              seed, {"ci_policy": P["ci_policy"]})
        res = ex.hitting_time_experiment(hc, _workers(args))
        recs = res.pop("records")
        cols = ["L", "seed", "tau_steps", "tau_sweeps", "censored", "level", "needed", "final_mean_height"]
        writer.add_csv("series.csv", cols, [[r.get(c) for c in cols] for r in recs])
        x_exp = P["a"] ** ex.d_of_p(p)
        writer.add_csv("plotdata.csv", ["L", "L_pow_a_d", "median_sweeps", "q1_sweeps", "q3_sweeps", "n_censored"],
                       [[L, L ** x_exp, d["median"], d["q1"], d["q3"], d["n_censored"]]
                        for L, d in ((int(k), v) for k, v in res["per_L"].items())])
        for r in recs:
            writer.seed_status(f"L={r['L']},seed={r['seed']}", "censored" if r["censored"] else "done")
    elif name == "correlation-decay":
        params = _model_params(cfg, "correlation-decay")
        res = ex.correlation_decay_probe(p, beta, P["M"], P["separations"], P["n_samples"], P["burn_in"],
                                         P["thin"], params.mode, seed, P["level"])
        rows = [[r["separation"], r["covariance"], r["ci"]] for r in res["curve"]]
        writer.add_csv("series.csv", ["separation", "covariance", "ci95"], rows)
        writer.add_csv("plotdata.csv", ["separation", "covariance", "ci95"], rows)
    elif name == "appendix-tail":
        res = ex.appendix_tail_check(p, beta, m["L"], m["n_plus"], P["proxy_side"])
        cols = ["L", "n_plus", "h", "proxy_side", "probability", "bound", "ratio", "below_bound"]
        writer.add_csv("series.csv", cols, [[res[c] for c in cols]])
        writer.add_csv("plotdata.csv", ["h", "probability", "bound"], [[res["h"], res["probability"], res["bound"]]])
    else:  # argparse guards the names
        raise ConfigError([("experiment.name", f"unknown experiment {name!r}")])
    if name != "hitting-time":
        writer.seed_status(f"seed={seed}", "done")
    writer.add_json("summary.json", _summary(name, cfg, h, res))
    return 0


def main(argv=None) -> int:
    ap = build_parser()
    args = ap.parse_args(argv)
    try:
        if args.command == "schema":
            print(json.dumps(load_schema(args.name), indent=2))
            return 0
        if args.command == "verify":
            return cmd_verify(args)
        kind = "simulate" if args.command == "simulate" else args.name
        cfg = build_config(args.config, _overrides(args, kind), kind)
        h = config_hash(cfg)
        if args.dry_run:
            print(json.dumps(cfg, sort_keys=True, indent=1))
            print(f"config_hash {h}")
            return 0
        _workers(args)
        writer = RunWriter(args.out, h, kind, cfg["output"]["timestamps"])
        if kind == "simulate":
            code = cmd_simulate(args, cfg, h, writer)
        else:
            code = cmd_experiment(args, cfg, h, writer)
        path = writer.finish()
        print(f"wrote {path}")
        return code
    except ConfigError as e:
        for loc, msg in e.diagnostics:
            print(f"error: {loc}: {msg}", file=sys.stderr)
        return 2
    except ex.UnmixedError as e:
        print(f"aborted: {e}", file=sys.stderr)
        return 1
    except OSError as e:
        print(f"I/O error: {e}", file=sys.stderr)
        return 3
    except ValueError as e:
        print(f"error: {e}", file=sys.stderr)
        return 2


if __name__ == "__main__":
    sys.exit(main())
