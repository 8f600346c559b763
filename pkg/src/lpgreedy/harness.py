"""Experiment front end: flat-spec parsing, runs, sweeps, audits, selftest.

Spec grammar (the leading tag is optional on the CLI):
  space     lp:p=<real>,n=<int>
  dict      dict:<kind>,N=<int>,seed=<int>
  target    target:a1,k=<int>,seed=<int>
            target:a1dense,seed=<int>
            target:noisy,k=<int>,eps=<real>,seed=<int>
  weakness  const:<t> | pow:<t0>,<a> | list:<v>,<v>,...
  errors    err:delta=<spec>,eta=<spec>,eps=derived|list:<...>[,seed=<int>]
            with <spec> one of const:<v> | pow:<c>,<a> | prop72auto | list:...

Exit codes: 0 on success / all checks passing, 1 on any audit failure,
2 on usage errors.  LPGREEDY_OUT_DIR, when set, re-roots relative output
paths (the only environment override).
"""

from __future__ import annotations

import argparse
import json
import os
import sys
from dataclasses import asdict, dataclass, field
from pathlib import Path
from typing import Optional

import numpy as np

from .algorithms import ALGORITHM_IDS, RunReport, WeaknessSchedule, run_greedy
from .diagnostics import (BOUND_IDS, BoundSpec, audit_conditions, bound_curve,
                          error_reduction_margins, verify_rates)
from .dictionary import TargetSpec, build_dictionary, make_target
from .perturbation import (AWBGA_IDS, ErrorSchedule, SequenceSpec, run_awbga)
from .solvers import SolverConfig
from .space import LpSpace, lp_space

CSV_HEADER = ("m,algo,residual_norm,gs_lhs,gs_rhs,bo_abs,er_reference,"
              "t_m,delta_m,eta_m,eps_m,bound_cor52,wall_ns")


def _strip_tag(spec: str, tag: str) -> str:
    return spec[len(tag):] if spec.startswith(tag) else spec


def _out_path(path: str) -> Path:
    """Relative outputs land under LPGREEDY_OUT_DIR when it is set."""
    p = Path(path)
    root = os.environ.get("LPGREEDY_OUT_DIR")
    if root and not p.is_absolute():
        p = Path(root) / p
    p.parent.mkdir(parents=True, exist_ok=True)
    return p


def _fields(body: str) -> list:
    """Split on commas, re-attaching tokens that lack '=' to the previous
    field (so pow:<c>,<a> and list:... survive the comma split)."""
    out = []
    for tok in body.split(","):
        if "=" in tok or not out:
            out.append(tok)
        else:
            out[-1] = out[-1] + "," + tok
    return out


def _kv(fields: list) -> dict:
    d = {}
    for f in fields:
        if "=" not in f:
            raise ValueError(f"malformed field {f!r}: expected key=value")
        k, v = f.split("=", 1)
        d[k.strip()] = v.strip()
    return d


def parse_space(spec: str) -> LpSpace:
    kv = _kv(_fields(_strip_tag(spec, "lp:")))
    try:
        return lp_space(p=float(kv["p"]), n=int(kv["n"]))
    except KeyError as e:
        raise ValueError(f"space spec {spec!r} missing field {e}") from e


def parse_dict_spec(spec: str) -> tuple:
    body = _fields(_strip_tag(spec, "dict:"))
    kind = body[0]
    kv = _kv(body[1:])
    return kind, int(kv.get("N", 0)), int(kv.get("seed", 0))


def parse_target_spec(spec: str) -> TargetSpec:
    body = _fields(_strip_tag(spec, "target:"))
    mode = body[0]
    kv = _kv(body[1:])
    seed = int(kv.get("seed", 0))
    if mode == "a1":
        return TargetSpec(mode="a1_sparse", k=int(kv["k"]), seed=seed)
    if mode == "a1dense":
        return TargetSpec(mode="a1_dense", seed=seed)
    if mode == "noisy":
        return TargetSpec(mode="general_plus_noise", k=int(kv["k"]),
                          eps=float(kv["eps"]), seed=seed)
    raise ValueError(f"unknown target mode {mode!r}")


def parse_weakness(spec: str) -> WeaknessSchedule:
    kind, _, rest = spec.partition(":")
    if kind == "const":
        return WeaknessSchedule(kind="constant", t0=float(rest))
    if kind == "pow":
        t0, a = rest.split(",")
        return WeaknessSchedule(kind="power_decay", t0=float(t0),
                                exponent=float(a))
    if kind == "list":
        vals = tuple(float(v) for v in rest.split(","))
        return WeaknessSchedule(kind="explicit_list", t0=vals[0] or 1.0,
                                values=vals)
    raise ValueError(f"unknown weakness spec {spec!r}")


def _parse_sequence(spec: str) -> SequenceSpec:
    kind, _, rest = spec.partition(":")
    if kind == "const":
        return SequenceSpec(kind="const", c=float(rest))
    if kind == "pow":
        c, a = rest.split(",")
        return SequenceSpec(kind="pow", c=float(c), a=float(a))
    if kind == "prop72auto":
        return SequenceSpec(kind="prop72auto")
    if kind == "list":
        return SequenceSpec(kind="list",
                            values=tuple(float(v) for v in rest.split(",")))
    raise ValueError(f"unknown error sequence spec {spec!r}")


def parse_errors(spec: str) -> ErrorSchedule:
    kv = _kv(_fields(_strip_tag(spec, "err:")))
    eps = kv.get("eps", "derived")
    if eps == "derived":
        eps_mode, eps_values = "derived", None
    elif eps.startswith("list:"):
        eps_mode = "list"
        eps_values = tuple(float(v) for v in eps[5:].split(","))
    else:
        raise ValueError(f"unknown eps mode {eps!r}")
    return ErrorSchedule(delta=_parse_sequence(kv["delta"]),
                         eta=_parse_sequence(kv["eta"]),
                         eps_mode=eps_mode, eps_values=eps_values,
                         seed=int(kv.get("seed", 0)))


@dataclass
class ExperimentConfig:
    """One run's flat configuration; parses and serializes losslessly."""

    space: str
    dict_spec: str
    target: str
    algorithm: str
    weakness: str = "const:1.0"
    errors: Optional[str] = None
    max_m: int = 100
    stop_tol: float = 1e-12
    rule: str = "exact_argmax"
    solver_tol: float = 1e-8
    solver_grad_tol: float = 1e-10
    solver_max_iters: int = 500
    out: Optional[str] = None
    timings: bool = False

    def serialize(self) -> str:
        return json.dumps(asdict(self), sort_keys=True)

    @staticmethod
    def parse(text: str) -> "ExperimentConfig":
        return ExperimentConfig(**json.loads(text))

    def validate(self) -> None:
        algo = self.algorithm.lower()
        if algo not in ALGORITHM_IDS + AWBGA_IDS:
            raise ValueError(f"unknown algorithm {self.algorithm!r}")
        if self.errors and algo not in AWBGA_IDS:
            raise ValueError("error schedules apply to awcga/awgafr/arwrga only")
        parse_space(self.space)
        parse_dict_spec(self.dict_spec)
        parse_target_spec(self.target)
        parse_weakness(self.weakness)
        if self.errors:
            parse_errors(self.errors)
        if self.rule not in ("exact_argmax", "threshold_first"):
            raise ValueError(f"unknown selection rule {self.rule!r}")


def execute(config: ExperimentConfig) -> RunReport:
    """Run one experiment described by a config, deterministically."""
    config.validate()
    space = parse_space(config.space)
    kind, size, dseed = parse_dict_spec(config.dict_spec)
    D = build_dictionary(space, kind, size if size > 0 else space.n, dseed)
    target = make_target(D, parse_target_spec(config.target))
    tau = parse_weakness(config.weakness)
    cfg = SolverConfig(tol=config.solver_tol, grad_tol=config.solver_grad_tol,
                       max_iters=config.solver_max_iters)
    algo = config.algorithm.lower()
    if algo in AWBGA_IDS:
        errs = parse_errors(config.errors) if config.errors else None
        if errs is None:
            raise ValueError("approximate algorithms need an --errors schedule")
        return run_awbga(algo, target.f, D, tau, errs, cfg=cfg,
                         max_m=config.max_m, stop_tol=config.stop_tol,
                         rule=config.rule, target=target)
    return run_greedy(algo, target.f, D, tau, cfg=cfg, max_m=config.max_m,
                      stop_tol=config.stop_tol, rule=config.rule, target=target)


def emit_csv(report: RunReport, path: str, timings: bool = False) -> None:
    """One row per iteration, 17 significant digits, byte-deterministic.

    The wall-clock column is written as 0 unless ``timings`` is requested;
    true timings always remain in the JSON report.
    """
    sm = report.space_meta
    spec = BoundSpec(bound_id="cor52", q=sm["q"], gamma=sm["gamma"],
                     p_conj=sm["p_conj"])
    bounds = bound_curve(spec, report) if report.records else np.array([])
    lines = [CSV_HEADER]
    for i, r in enumerate(report.records):
        vals = [f"{r.m}", report.algorithm]
        for x in (r.residual_norm, r.gs_lhs, r.gs_rhs, r.bo_abs,
                  r.er_reference, r.t_m, r.delta_m, r.eta_m, r.eps_m,
                  float(bounds[i])):
            vals.append(f"{x:.17g}")
        vals.append(str(r.wall_ns if timings else 0))
        lines.append(",".join(vals))
    Path(path).write_text("\n".join(lines) + "\n")


def summarize(reports: list) -> str:
    """Per-algorithm medians at checkpoints, tightness quartiles, failures."""
    if not reports:
        raise ValueError("nothing to summarize")
    checkpoints = (10, 25, 50, 100)
    by_algo: dict = {}
    for rep in reports:
        by_algo.setdefault(rep.algorithm, []).append(rep)
    head = ("algo    runs " + " ".join(f"med@{c:<4d}" for c in checkpoints)
            + "  tight q1/q2/q3   fails")
    lines = [head]
    for algo in sorted(by_algo):
        reps = by_algo[algo]
        cols = []
        for c in checkpoints:
            vals = []
            for rep in reps:
                if rep.records:
                    idx = min(c, len(rep.records)) - 1
                    vals.append(rep.records[idx].residual_norm)
            cols.append(f"{np.median(vals):.2e}" if vals else "    -   ")
        tight = []
        for rep in reps:
            if rep.target_meta.get("in_hull") and rep.records:
                spec = BoundSpec.from_report("cor52", rep)
                b = bound_curve(spec, rep)
                tight.extend((rep.residual_norms() / b).tolist())
        if tight:
            q1, q2, q3 = np.percentile(tight, [25, 50, 75])
            tcol = f"{q1:.2f}/{q2:.2f}/{q3:.2f}"
        else:
            tcol = "      -       "
        fails = sum(0 if audit_conditions(rep).passed else 1 for rep in reps)
        lines.append(f"{algo:<7s} {len(reps):<4d} " + " ".join(cols)
                     + f"  {tcol}  {fails}")
    return "\n".join(lines)


def _cmd_run(args: argparse.Namespace) -> int:
    config = ExperimentConfig(
        space=args.space, dict_spec=args.dict, target=args.target,
        algorithm=args.algo, weakness=args.weakness, errors=args.errors,
        max_m=args.iters, stop_tol=args.stop_tol, rule=args.rule,
        out=args.out, timings=args.timings)
    report = execute(config)
    out = _out_path(args.out)
    emit_csv(report, out, timings=args.timings)
    out.with_suffix(".json").write_text(report.to_json())
    last = report.records[-1].residual_norm if report.records else 0.0
    print(f"{report.algorithm}: m={len(report.records)} residual={last:.6e} "
          f"termination={report.termination}")
    print(f"wrote {out} and {out.with_suffix('.json')}")
    return 0


def _cmd_sweep(args: argparse.Namespace) -> int:
    out_dir = _out_path(args.out_dir)
    out_dir.mkdir(parents=True, exist_ok=True)
    algos = args.algos.split(",")
    seeds = [int(s) for s in args.seeds.split(",")]
    base_target = parse_target_spec(args.target)
    reports = []
    for algo in algos:
        for seed in seeds:
            tspec = args.target
            # replace the target seed for this sweep instance
            body = _fields(_strip_tag(tspec, "target:"))
            kv = _kv(body[1:])
            kv["seed"] = str(seed)
            tspec = "target:" + ",".join([body[0]] + [f"{k}={v}"
                                                      for k, v in kv.items()])
            config = ExperimentConfig(
                space=args.space, dict_spec=args.dict, target=tspec,
                algorithm=algo, weakness=args.weakness, errors=args.errors,
                max_m=args.iters, stop_tol=args.stop_tol, rule=args.rule)
            report = execute(config)
            stem = out_dir / f"{algo}_k{base_target.k}_s{seed}"
            emit_csv(report, stem.with_suffix(".csv"))
            stem.with_suffix(".json").write_text(report.to_json())
            reports.append(report)
    print(summarize(reports))
    return 0


def _cmd_audit(args: argparse.Namespace) -> int:
    ok = True
    for path in args.reports:
        report = RunReport.from_json(Path(path).read_text())
        audit = audit_conditions(report)
        print(f"{path}: conditions {audit.verdict}")
        for c in audit.checks:
            if c.applicable:
                print(f"  {c.name:<18s} {'PASS' if c.passed else 'FAIL':<4s} "
                      f"worst margin {c.worst_margin:+.3e}")
            else:
                print(f"  {c.name:<18s} SKIP ({c.reason})")
        ok = ok and audit.passed
        if report.target_meta.get("certificate"):
            margins = error_reduction_margins(report)
            worst = min(margins) if margins else 0.0
            passed = worst >= -1e-6
            ok = ok and passed
            print(f"  error_reduction_rhs {'PASS' if passed else 'FAIL'} "
                  f"worst margin {worst:+.3e}")
        if args.bound:
            for rc in verify_rates(report, args.bound):
                if not rc.applicable:
                    print(f"  bound {rc.bound_id:<8s} SKIP ({rc.reason})")
                    continue
                ok = ok and rc.passed
                print(f"  bound {rc.bound_id:<8s} "
                      f"{'PASS' if rc.passed else 'FAIL'} "
                      f"worst margin {rc.worst_margin:+.3e} "
                      f"tightness {rc.max_tightness:.3f}")
        if args.out:
            _out_path(args.out).write_text(audit.to_json())
    return 0 if ok else 1


def _cmd_selftest(_args: argparse.Namespace) -> int:
    from .selftest import run_all
    results = run_all()
    for r in results:
        print(f"{'PASS' if r.passed else 'FAIL'}  {r.name}  {r.detail}")
    n_fail = sum(1 for r in results if not r.passed)
    print(f"{len(results) - n_fail}/{len(results)} selftest checks passed")
    return 0 if n_fail == 0 else 1


def build_parser() -> argparse.ArgumentParser:
    ap = argparse.ArgumentParser(prog="lpgreedy",
                                 description="greedy lp approximation runner")
    sub = ap.add_subparsers(dest="cmd", required=True)

    run = sub.add_parser("run", help="execute one experiment")
    run.add_argument("--algo", required=True)
    run.add_argument("--space", required=True)
    run.add_argument("--dict", required=True)
    run.add_argument("--target", required=True)
    run.add_argument("--weakness", default="const:1.0")
    run.add_argument("--errors", default=None)
    run.add_argument("--iters", type=int, default=100)
    run.add_argument("--stop-tol", type=float, default=1e-12)
    run.add_argument("--rule", default="exact_argmax")
    run.add_argument("--out", required=True)
    run.add_argument("--timings", action="store_true",
                     help="write real wall clocks into the CSV "
                          "(breaks byte determinism)")
    run.set_defaults(fn=_cmd_run)

    sweep = sub.add_parser("sweep", help="cross algorithms x seeds")
    sweep.add_argument("--algos", required=True)
    sweep.add_argument("--seeds", required=True)
    sweep.add_argument("--space", required=True)
    sweep.add_argument("--dict", required=True)
    sweep.add_argument("--target", required=True)
    sweep.add_argument("--weakness", default="const:1.0")
    sweep.add_argument("--errors", default=None)
    sweep.add_argument("--iters", type=int, default=100)
    sweep.add_argument("--stop-tol", type=float, default=1e-12)
    sweep.add_argument("--rule", default="exact_argmax")
    sweep.add_argument("--out-dir", required=True)
    sweep.set_defaults(fn=_cmd_sweep)

    audit = sub.add_parser("audit", help="audit stored JSON reports")
    audit.add_argument("reports", nargs="+")
    audit.add_argument("--bound", action="append", choices=BOUND_IDS,
                       default=None)
    audit.add_argument("--out", default=None)
    audit.set_defaults(fn=_cmd_audit)

    st = sub.add_parser("selftest", help="run the oracle/property suite")
    st.set_defaults(fn=_cmd_selftest)
    return ap


def main(argv: list = None) -> int:
    ap = build_parser()
    try:
        args = ap.parse_args(argv)
        return args.fn(args)
    except (ValueError, FileNotFoundError) as e:
        print(f"error: {e}", file=sys.stderr)
        return 2


if __name__ == "__main__":
    sys.exit(main())
