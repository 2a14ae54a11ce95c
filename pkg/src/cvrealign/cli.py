"""
Command-line front end.

Every evaluation prints one JSON object per line on stdout with the fields
``command, inputs, value, threshold, entangled, branch, lower_bound_only,
notes``.  Exit codes: 0 separable (or not detected), 2 entangled,
3 boundary, 1 error.  Commands without a verdict exit 0 on success.
"""

from __future__ import annotations

import argparse
import csv
import dataclasses
import json
import math
import sys
from concurrent.futures import ProcessPoolExecutor

import numpy as np

from .channel import (
    CRITERIA,
    ChannelParams,
    critical_time,
    criterion_for,
    evolve_ccm,
    evolved_photon_criterion_tmsv,
    second_moment_evolved,
)
from .errors import CVRealignError
from .fock_oracle import (
    STATES,
    default_cutoff,
    dump_tensor,
    oracle_comparison,
    photon_state_fock,
)
from .gaussian_core import SymmetricCCM, physicality_check
from .nongaussian import mixture_criteria, photon_pm_criterion
from .realign import CriterionReport, gaussian_criterion_nonsymmetric, gaussian_trace_norm_bound

EXIT_SEPARABLE = 0
EXIT_ERROR = 1
EXIT_ENTANGLED = 2
EXIT_BOUNDARY = 3

SWEEP_PARAMS = ("lambda", "gammat", "nbar", "p", "b0", "c1", "c2")
MAX_STEPS = 10**6
SIGNS = {"sub": "subtract", "add": "add"}


class UsageError(Exception):
    pass


class _Parser(argparse.ArgumentParser):
    # usage errors exit 1 so that 2 stays reserved for "entangled"
    def error(self, message):
        self.print_usage(sys.stderr)
        print(f"{self.prog}: error: {message}", file=sys.stderr)
        sys.exit(EXIT_ERROR)


# ---------------------------------------------------------------------------
# output helpers
# ---------------------------------------------------------------------------


def _clean(x):
    if isinstance(x, dict):
        return {k: _clean(v) for k, v in x.items()}
    if isinstance(x, (list, tuple)):
        return [_clean(v) for v in x]
    if isinstance(x, (bool, np.bool_)):
        return bool(x)
    if isinstance(x, (int, np.integer)):
        return int(x)
    if isinstance(x, (float, np.floating)):
        x = float(x)
        return x if math.isfinite(x) else None
    return x


def record(command, inputs, value=None, threshold=None, entangled=None, branch=None,
           lower_bound_only=False, notes=None) -> dict:
    return _clean({
        "command": command,
        "inputs": inputs,
        "value": value,
        "threshold": threshold,
        "entangled": entangled,
        "branch": branch,
        "lower_bound_only": lower_bound_only,
        "notes": notes or {},
    })


def report_record(command, inputs, rep: CriterionReport) -> dict:
    notes = {"verdict": rep.verdict, "direction": rep.direction, "detail": rep.detail}
    notes.update(rep.extras)
    return record(
        command,
        inputs,
        rep.value,
        rep.threshold,
        rep.entangled,
        rep.branch.label if rep.branch else None,
        rep.lower_bound_only,
        notes,
    )


def exit_code(reports) -> int:
    reports = list(reports)
    if any(r.entangled for r in reports):
        return EXIT_ENTANGLED
    if any(r.boundary for r in reports):
        return EXIT_BOUNDARY
    return EXIT_SEPARABLE


def _emit(obj, out):
    out.write(json.dumps(obj) + "\n")


# ---------------------------------------------------------------------------
# argument handling
# ---------------------------------------------------------------------------


def read_config(path) -> dict:
    """Flat ``key=value`` file; blank lines and '#' comments are ignored."""
    out = {}
    with open(path, encoding="utf-8") as fh:
        for n, line in enumerate(fh, 1):
            line = line.split("#", 1)[0].strip()
            if not line:
                continue
            if "=" not in line:
                raise UsageError(f"{path}:{n}: expected key=value")
            key, value = (s.strip() for s in line.split("=", 1))
            key = key.lstrip("-").replace("-", "_")
            out["lam" if key == "lambda" else key] = value
    return out


def _need(args, *names) -> None:
    """Check options that may come from the command line or a config file."""
    missing = [n for n in names if getattr(args, n, None) is None]
    if missing:
        flags = ", ".join("--" + {"lam": "lambda", "start": "from", "stop": "to"}.get(n, n)
                          for n in missing)
        raise UsageError(f"missing required option(s): {flags}")


def _gamma_t(args) -> float:
    rate, time = getattr(args, "rate", None), getattr(args, "time", None)
    if (rate is None) != (time is None):
        raise UsageError("--rate and --time must be given together")
    if rate is not None:
        if args.gammat is not None:
            raise UsageError("give either --gammat or --rate/--time")
        return ChannelParams.from_rate(rate, time).gamma_t
    return 0.0 if args.gammat is None else args.gammat


def _channel(args) -> ChannelParams:
    return ChannelParams(_gamma_t(args), args.nbar)


def _parse_criterion(name: str, state: str) -> tuple:
    """``"second-moment-add"`` -> ("second-moment", "add"); no suffix takes the state's sign."""
    for suffix, sign in (("-add", "add"), ("-sub", "subtract")):
        if name.endswith(suffix):
            base = name[: -len(suffix)]
            break
    else:
        base, sign = name, SIGNS.get(state)
    if base not in CRITERIA:
        raise UsageError(f"unknown criterion {name!r}; choose from {sorted(CRITERIA)}")
    if sign is None:
        raise UsageError("photon operation unknown: use --state sub|add or a -sub/-add suffix")
    return base, sign


# ---------------------------------------------------------------------------
# commands
# ---------------------------------------------------------------------------


def cmd_gaussian(args, out) -> int:
    if args.b1 is not None or args.b2 is not None:
        if args.b1 is None or args.b2 is None:
            raise UsageError("--b1 and --b2 must be given together")
        inputs = {"b1": args.b1, "b2": args.b2, "c1": args.c1, "c2": args.c2}
        rep = gaussian_criterion_nonsymmetric(args.b1, args.b2, args.c1, args.c2)
    else:
        if args.b0 is None:
            raise UsageError("--b0 (or --b1/--b2) is required")
        inputs = {"b0": args.b0, "c1": args.c1, "c2": args.c2}
        ccm = SymmetricCCM(args.b0, args.c1, args.c2)
        rep = gaussian_trace_norm_bound(ccm)
        if not physicality_check(ccm):
            rep = dataclasses.replace(rep, detail="unphysical input; " + rep.detail)
    _emit(report_record("gaussian", inputs, rep), out)
    return exit_code([rep])


def _kernel(args) -> tuple:
    if args.lam is not None:
        return SymmetricCCM.tmsv(args.lam), {"lambda": args.lam}
    if args.b0 is None:
        raise UsageError("give --lambda or --b0/--c1/--c2")
    return SymmetricCCM(args.b0, args.c1, args.c2), {"b0": args.b0, "c1": args.c1, "c2": args.c2}


def cmd_photon(args, out) -> int:
    ccm, inputs = _kernel(args)
    inputs.update(op=args.op, m=args.m)
    rep = photon_pm_criterion(ccm, SIGNS[args.op], args.m)
    _emit(report_record("photon", inputs, rep), out)
    return exit_code([rep])


def _evolved_report(state, lam, ch, criterion):
    if state == "tmsv":
        if criterion != "realignment":
            raise UsageError("the second-moment test applies to sub/add states only")
        return gaussian_trace_norm_bound(evolve_ccm(SymmetricCCM.tmsv(lam), ch))
    if criterion == "realignment":
        return evolved_photon_criterion_tmsv(lam, ch, SIGNS[state])
    return second_moment_evolved(lam, ch, SIGNS[state])


def cmd_evolve(args, out) -> int:
    _need(args, "lam")
    ch = _channel(args)
    inputs = {"state": args.state, "lambda": args.lam, "gammat": ch.gamma_t, "nbar": ch.nbar}
    if args.criterion == "all":
        names = ["realignment"] if args.state == "tmsv" else list(CRITERIA)
    else:
        names = [args.criterion]
    reports = []
    for name in names:
        rep = _evolved_report(args.state, args.lam, ch, name)
        reports.append(rep)
        _emit(report_record("evolve", dict(inputs, criterion=name), rep), out)
    return exit_code(reports)


def cmd_critical_time(args, out) -> int:
    _need(args, "lam")
    name, sign = _parse_criterion(args.criterion, args.state)
    res = critical_time(criterion_for(name, sign), args.lam, Gamma=args.rate, nbar=args.nbar)
    inputs = {"state": args.state, "lambda": args.lam, "nbar": args.nbar,
              "criterion": name, "op": sign, "rate": args.rate}
    if res is None:
        notes = {"crossing": False, "message": "criterion holds over the whole search bracket"}
        _emit(record("critical-time", inputs, None, notes=notes), out)
    else:
        notes = {"crossing": True, "t": res.t, "nonmonotonic": res.nonmonotonic}
        _emit(record("critical-time", inputs, res.gamma_t, notes=notes), out)
    return EXIT_SEPARABLE


def cmd_mixture(args, out) -> int:
    _need(args, "w1", "w2", "p")
    reports = mixture_criteria(args.w1, args.w2, args.p)
    inputs = {"w1": args.w1, "w2": args.w2, "p": args.p}
    for name, rep in reports.items():
        _emit(report_record("mixture", dict(inputs, criterion=name), rep), out)
    return exit_code(reports.values())


def cmd_oracle(args, out) -> int:
    _need(args, "lam")
    ch = _channel(args)
    cutoff = default_cutoff() if args.cutoff is None else args.cutoff
    res = oracle_comparison(args.state, args.lam, ch, cutoff=cutoff, converge=not args.no_converge)
    inputs = {"state": args.state, "lambda": args.lam, "gammat": ch.gamma_t,
              "nbar": ch.nbar, "cutoff": cutoff}
    notes = {
        "oracle_trace_norm": res["trace_norm"],
        "oracle_realigned_trace": res["realigned_trace"],
        "abs_deviation": res["abs_deviation"],
        "rel_deviation": res["rel_deviation"],
        "converged": res["converged"],
        "final_cutoff": res["cutoff"],
    }
    if args.dump:
        dump_tensor(photon_state_fock(SymmetricCCM.tmsv(args.lam), STATES[args.state], 1, ch,
                                      res["cutoff"]), args.dump)
        notes["dump"] = args.dump
    _emit(record("oracle", inputs, res["analytic"], 1.0, res["analytic"] > 1.0,
                 lower_bound_only=ch.gamma_t > 0.0, notes=notes), out)
    return EXIT_SEPARABLE


# ---------------------------------------------------------------------------
# sweep
# ---------------------------------------------------------------------------


def _nan_on_error(fn):
    try:
        return fn()
    except (CVRealignError, ValueError):
        return math.nan


def sweep_columns(param: str, state: str, fixed: dict) -> list:
    if param == "p":
        return ["second_moment", "fock", "realignment"]
    if param in ("b0", "c1", "c2"):
        return ["realignment", "photon_sub", "photon_add"]
    if fixed.get("gammat") is None and param != "gammat" and state != "tmsv":
        return ["realignment_critical_time", "second_moment_critical_time"]
    if state == "tmsv":
        return ["realignment"]
    return ["realignment", "second_moment"]


def sweep_point(param: str, state: str, fixed: dict, x: float) -> list:
    """Criterion values for one grid point (runs in a worker process)."""
    vals = dict(fixed, **{param: x})
    if param == "p":
        reps = mixture_criteria(vals["w1"], vals["w2"], vals["p"])
        return [reps[k].value for k in ("second_moment", "fock", "realignment")]
    if param in ("b0", "c1", "c2"):
        ccm = SymmetricCCM(vals["b0"], vals["c1"], vals["c2"])
        return [
            _nan_on_error(lambda: gaussian_trace_norm_bound(ccm).value),
            _nan_on_error(lambda: photon_pm_criterion(ccm, "subtract").value),
            _nan_on_error(lambda: photon_pm_criterion(ccm, "add").value),
        ]
    lam, nbar = vals["lambda"], vals["nbar"]
    cols = sweep_columns(param, state, fixed)
    if cols[0] == "realignment_critical_time":
        row = []
        for name in CRITERIA:
            res = critical_time(criterion_for(name, SIGNS[state]), lam, nbar=nbar)
            row.append(math.inf if res is None else res.gamma_t)
        return row
    ch = ChannelParams(vals["gammat"] or 0.0, nbar)
    names = ["realignment"] if state == "tmsv" else list(CRITERIA)
    return [_nan_on_error(lambda n=n: _evolved_report(state, lam, ch, n).value) for n in names]


def _sweep_task(job):
    return sweep_point(*job)


def run_sweep(param, start, stop, steps, state, fixed, workers=1) -> tuple:
    """Evaluate the grid; rows come back in grid order whatever the completion order."""
    if param not in SWEEP_PARAMS:
        raise UsageError(f"--param must be one of {SWEEP_PARAMS}")
    if not start < stop:
        raise UsageError("--from must be smaller than --to")
    if not 2 <= steps <= MAX_STEPS:
        raise UsageError(f"--steps must lie in [2, {MAX_STEPS}]")
    grid = np.linspace(start, stop, steps)
    jobs = [(param, state, fixed, float(x)) for x in grid]
    if workers > 1:
        with ProcessPoolExecutor(max_workers=workers) as pool:
            rows = list(pool.map(_sweep_task, jobs, chunksize=max(1, steps // (4 * workers))))
    else:
        rows = [_sweep_task(j) for j in jobs]
    return grid, sweep_columns(param, state, fixed), rows


def write_csv(fh, param, grid, columns, rows) -> None:
    w = csv.writer(fh, lineterminator="\n")
    w.writerow([param] + columns)
    for x, row in zip(grid, rows):
        w.writerow(["%.12g" % x] + ["%.12g" % v for v in row])


def cmd_sweep(args, out) -> int:
    _need(args, "param", "start", "stop", "steps")
    fixed = {"lambda": args.lam, "gammat": args.gammat, "nbar": args.nbar,
             "p": args.p, "w1": args.w1, "w2": args.w2,
             "b0": args.b0, "c1": args.c1, "c2": args.c2}
    fixed.pop(args.param if args.param in fixed else "", None)
    needed = {"p": ("w1", "w2"), "b0": ("c1", "c2"), "c1": ("b0", "c2"), "c2": ("b0", "c1")}
    needed = needed.get(args.param, ("lambda",) if args.param != "lambda" else ())
    missing = [k for k in needed if fixed.get(k) is None]
    if missing:
        raise UsageError(f"sweep over {args.param} needs fixed values for {missing}")
    if args.param in ("lambda", "gammat", "nbar") and args.state not in STATES:
        raise UsageError("--state must be tmsv, sub or add")
    grid, columns, rows = run_sweep(args.param, args.start, args.stop, args.steps,
                                    args.state, fixed, args.workers)
    if args.param == "p":
        relevant = ("w1", "w2")
    elif args.param in ("b0", "c1", "c2"):
        relevant = ("b0", "c1", "c2")
    else:
        relevant = ("lambda", "gammat", "nbar")
    if args.out:
        with open(args.out, "w", encoding="utf-8", newline="") as fh:
            write_csv(fh, args.param, grid, columns, rows)
        inputs = {"param": args.param, "from": args.start, "to": args.stop,
                  "steps": args.steps, "state": args.state,
                  "fixed": {k: v for k, v in fixed.items() if v is not None and k in relevant}}
        _emit(record("sweep", inputs, notes={"out": args.out, "rows": len(rows),
                                            "columns": columns}), out)
    else:
        write_csv(out, args.param, grid, columns, rows)
    return EXIT_SEPARABLE


# ---------------------------------------------------------------------------
# parser
# ---------------------------------------------------------------------------


def _add_ccm(p, b0_default=None):
    p.add_argument("--b0", type=float, default=b0_default)
    p.add_argument("--c1", type=float, default=0.0)
    p.add_argument("--c2", type=float, default=0.0)


def _add_channel(p):
    p.add_argument("--gammat", type=float, default=None, help="dimensionless time Gamma t")
    p.add_argument("--rate", type=float, default=None, help="decay rate Gamma (with --time)")
    p.add_argument("--time", type=float, default=None)
    p.add_argument("--nbar", type=float, default=0.0, help="thermal occupation of the bath")


def build_parser() -> argparse.ArgumentParser:
    ap = _Parser(prog="cvrealign", description=__doc__.strip().splitlines()[0])
    ap.add_argument("--config", help="key=value file overriding defaults")
    sub = ap.add_subparsers(dest="command", parser_class=_Parser)
    sub.required = True

    p = sub.add_parser("gaussian", help="realignment test for a symmetric Gaussian state")
    _add_ccm(p)
    p.add_argument("--b1", type=float)
    p.add_argument("--b2", type=float)
    p.set_defaults(func=cmd_gaussian)

    p = sub.add_parser("photon", help="photon subtracted/added Gaussian state")
    _add_ccm(p)
    p.add_argument("--lambda", dest="lam", type=float, help="TMSV kernel instead of b0/c1/c2")
    p.add_argument("--op", choices=sorted(SIGNS), default="sub")
    p.add_argument("--m", type=int, default=1, help="photons per mode")
    p.set_defaults(func=cmd_photon)

    p = sub.add_parser("evolve", help="criteria after the damping channel")
    p.add_argument("--state", choices=sorted(STATES), default="sub")
    p.add_argument("--lambda", dest="lam", type=float)
    p.add_argument("--criterion", choices=["all"] + sorted(CRITERIA), default="all")
    _add_channel(p)
    p.set_defaults(func=cmd_evolve)

    p = sub.add_parser("critical-time", help="time at which a criterion stops detecting")
    p.add_argument("--state", choices=sorted(SIGNS), default="sub")
    p.add_argument("--lambda", dest="lam", type=float)
    p.add_argument("--nbar", type=float, default=0.0)
    p.add_argument("--rate", type=float, default=None, help="also report t = Gamma t / rate")
    p.add_argument("--criterion", default="realignment",
                   help="realignment or second-moment, optionally suffixed -sub/-add")
    p.set_defaults(func=cmd_critical_time)

    p = sub.add_parser("mixture", help="mixture of two two-mode squeezed thermal states")
    p.add_argument("--w1", type=float)
    p.add_argument("--w2", type=float)
    p.add_argument("--p", type=float)
    p.set_defaults(func=cmd_mixture)

    p = sub.add_parser("oracle", help="compare with a truncated Fock computation")
    p.add_argument("--state", choices=sorted(STATES), default="tmsv")
    p.add_argument("--lambda", dest="lam", type=float)
    p.add_argument("--cutoff", type=int, default=None, help="default: $CVREAL_CUTOFF or 40")
    p.add_argument("--no-converge", action="store_true", help="single tensor at --cutoff")
    p.add_argument("--dump", help="write the final tensor to this file")
    _add_channel(p)
    p.set_defaults(func=cmd_oracle)

    p = sub.add_parser("sweep", help="evaluate criteria on a one-parameter grid")
    p.add_argument("--param", choices=SWEEP_PARAMS)
    p.add_argument("--from", dest="start", type=float)
    p.add_argument("--to", dest="stop", type=float)
    p.add_argument("--steps", type=int)
    p.add_argument("--state", choices=sorted(STATES), default="sub")
    p.add_argument("--lambda", dest="lam", type=float)
    p.add_argument("--gammat", type=float, default=None)
    p.add_argument("--nbar", type=float, default=0.0)
    p.add_argument("--p", type=float)
    p.add_argument("--w1", type=float)
    p.add_argument("--w2", type=float)
    _add_ccm(p)
    p.add_argument("--workers", type=int, default=1)
    p.add_argument("--out", help="CSV file (default: stdout)")
    p.set_defaults(func=cmd_sweep)
    return ap


def _flag_value(key, text) -> bool:
    low = text.lower()
    if low in ("1", "true", "yes", "on"):
        return True
    if low in ("0", "false", "no", "off"):
        return False
    raise UsageError(f"config key {key} expects a boolean, got {text!r}")


def _apply_config(ap, argv) -> None:
    pre = argparse.ArgumentParser(add_help=False)
    pre.add_argument("--config")
    known, _ = pre.parse_known_args(argv)
    if not known.config:
        return
    cfg = read_config(known.config)
    for name, p in ap._subparsers._group_actions[0].choices.items():
        flags = {a.dest for a in p._actions if isinstance(a, argparse._StoreTrueAction)}
        # string defaults are converted by argparse with the option's type
        p.set_defaults(**{k: _flag_value(k, v) if k in flags else v
                          for k, v in cfg.items() if k in {a.dest for a in p._actions}})
    known_keys = set().union(*({a.dest for a in p._actions}
                               for p in ap._subparsers._group_actions[0].choices.values()))
    unknown = sorted(set(cfg) - known_keys)
    if unknown:
        raise UsageError(f"unknown config keys: {unknown}")


def main(argv=None, out=None) -> int:
    argv = sys.argv[1:] if argv is None else list(argv)
    out = sys.stdout if out is None else out
    ap = build_parser()
    try:
        _apply_config(ap, argv)
        args = ap.parse_args(argv)
        return args.func(args, out)
    except (UsageError, CVRealignError, ValueError, OSError) as exc:
        print(f"cvrealign: error: {exc}", file=sys.stderr)
        return EXIT_ERROR


if __name__ == "__main__":
    sys.exit(main())
