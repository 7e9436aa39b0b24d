"""Command-line front end. Every subcommand prints one JSON report.

Exit codes: 0 success, 2 infeasible request, 3 input error, 4 numerical failure.
Settings and targets are 1-based on the command line.
"""
from __future__ import annotations

import argparse
import hashlib
import json
import platform
import sys
import time
from importlib import metadata
from pathlib import Path

import numpy as np
import scipy

from . import boundrand, channel, improved, lossy, polytope, primary
from .errors import ConfigurationError, InfeasibleError, NumericalFailure
from .scenario import BUILTINS, Behavior, QuantumModel, born_behavior
from .simulation import guess_rate, max_standard_score

EXIT_OK, EXIT_INFEASIBLE, EXIT_INPUT, EXIT_NUMERICAL = 0, 2, 3, 4


class InputError(Exception):
    pass


def load_behavior(source: str) -> Behavior:
    """Builtin name, behavior JSON, or quantum-model JSON (detected by a "state" key)."""
    if source in BUILTINS:
        return BUILTINS[source]()
    path = Path(source)
    if not path.is_file():
        raise InputError(f"behavior {source!r} is neither a builtin ({', '.join(BUILTINS)}) nor a file")
    try:
        data = json.loads(path.read_text())
    except (OSError, json.JSONDecodeError) as exc:
        raise InputError(f"cannot parse {source}: {exc}") from exc
    if not isinstance(data, dict):
        raise InputError(f"{source}: top-level JSON value must be an object")
    try:
        if "state" in data:
            return born_behavior(QuantumModel.from_dict(data))
        return Behavior.from_dict(data)
    except ConfigurationError as exc:
        raise InputError(f"{source}: {exc}") from exc


def parse_floats(text: str) -> list[float]:
    try:
        return [float(v) for v in text.split(",") if v.strip()]
    except ValueError as exc:
        raise InputError(f"bad number list {text!r}") from exc


def parse_targets(text: str, m_b: int) -> primary.TargetSet:
    try:
        labels = [int(v) for v in text.split(",") if v.strip()]
    except ValueError as exc:
        raise InputError(f"bad target list {text!r}") from exc
    if not labels or min(labels) < 1 or max(labels) > m_b:
        raise InputError(f"targets {labels} must lie in 1..{m_b}")
    try:
        return primary.TargetSet([v - 1 for v in labels])
    except ConfigurationError as exc:
        raise InputError(str(exc)) from exc


def _profile(etas: list[float], m_b: int) -> lossy.EfficiencyProfile:
    if len(etas) == 1:
        etas = etas * m_b
    if len(etas) != m_b:
        raise InputError(f"--eta needs 1 or {m_b} values, got {len(etas)}")
    try:
        return lossy.EfficiencyProfile(tuple(etas))
    except ConfigurationError as exc:
        raise InputError(str(exc)) from exc


def _single_eta(args) -> float:
    etas = parse_floats(args.eta)
    if len(etas) != 1 or not 0 <= etas[0] <= 1:
        raise InputError(f"--eta must be a single value in [0, 1], got {args.eta!r}")
    return etas[0]


def _per_setting(values) -> dict:
    return {str(k + 1): v for k, v in enumerate(values)}


def _mc_summary(log, exact: np.ndarray, targets) -> dict:
    score, impossible = max_standard_score(log, exact)
    rate, n_target = guess_rate(log, list(targets))
    return {
        "rounds": len(log),
        "seed": log.seed,
        "max_standard_score": score,
        "rounds_in_zero_probability_cells": impossible,
        "targeted_rounds": n_target,
        "targeted_guess_rate": rate,
    }


# --- subcommands -------------------------------------------------------------


def cmd_attack(args) -> tuple[dict, int]:
    q = load_behavior(args.behavior)
    s = q.scenario
    profile = _profile(parse_floats(args.eta), s.m_b)
    target = parse_targets(args.targets, s.m_b)
    verdict = primary.feasible(profile, target)
    results = {"feasible": verdict.feasible, "margin": verdict.margin}
    if not verdict:
        if args.force:
            results["raw_taus"] = {str(y + 1): t for y, t in primary.raw_taus(profile, target).items()}
            try:
                primary.build_plan(profile, target)
            except InfeasibleError as exc:
                results["error"] = str(exc)
        return results, EXIT_INFEASIBLE
    plan = primary.build_plan(profile, target)
    induced = primary.induced_behavior(plan, q)
    expected = lossy.apply_loss_bob(q, profile)
    results["plan"] = plan.to_dict()
    results["max_deviation"] = induced.max_deviation(expected)
    results["guessing_probability"] = _per_setting(
        primary.guessing_probability(plan, q, y) for y in range(s.m_b)
    )
    if args.rounds:
        log = primary.simulate_rounds(plan, q, args.rounds, args.seed)
        results["monte_carlo"] = _mc_summary(log, induced.table, target)
    return results, EXIT_OK


def cmd_improved(args) -> tuple[dict, int]:
    q = load_behavior(args.behavior)
    s = q.scenario
    target = parse_targets(args.targets, s.m_b)
    eta = None if args.eta is None else _single_eta(args)
    try:
        plan = improved.build_improved_plan(s.m_a, s.m_b, target, eta)
    except ValueError as exc:
        raise InputError(str(exc)) from exc
    joint = improved.induced_joint(plan, q)
    results = {
        "plan": plan.to_dict(),
        "max_deviation": joint.max_deviation(lossy.apply_loss_both(q, plan.eta)),
        "guessing_probability": _per_setting(
            improved.guessing_probability_improved(plan, q, y) for y in range(s.m_b)
        ),
    }
    if args.rounds:
        log = improved.simulate_improved(plan, q, args.rounds, args.seed)
        results["monte_carlo"] = _mc_summary(log, joint.table, target)
    return results, EXIT_OK


def cmd_boundrand(args) -> tuple[dict, int]:
    q = load_behavior(args.behavior)
    eta = _single_eta(args)
    cert = boundrand.certify_bound_randomness(q, eta, args.tol)
    return cert.to_dict(), EXIT_OK


def cmd_localtest(args) -> tuple[dict, int]:
    q = load_behavior(args.behavior)
    eta = _single_eta(args)
    cert = polytope.is_local(lossy.apply_loss_both(q, eta), args.tol)
    results = {"eta": eta, "certificate": cert.to_dict()}
    if args.critical:
        crit = polytope.critical_local_eta(q, args.bisect_tol, args.tol)
        results["critical_eta"] = crit
        results["transition"] = crit is not None
    return results, EXIT_OK


def cmd_plan(args) -> tuple[dict, int]:
    results: dict = {"alpha": args.alpha}
    try:
        if args.length is not None:
            model = channel.ChannelModel(args.alpha, args.length)
            results["length"] = args.length
            results["channel_efficiency"] = channel.channel_efficiency(model)
            results["min_bases"] = channel.min_bases(model)
        bases = args.bases if args.bases is not None else results.get("min_bases")
        if bases is not None:
            results["bases"] = bases
            # with M_B large compared to |G|, the one-sided threshold is 1/(|G|+1)
            results["attack_threshold"] = 1.0 / (bases + 1)
            results["max_distance"] = channel.max_distance(args.alpha, bases)
        if args.ma is not None and args.gprime is not None:
            results["improved_threshold"] = improved.critical_eta_improved(args.ma, args.gprime)
            results["improved_parameters"] = vars(improved.tune_parameters(args.ma, args.gprime))
    except (ConfigurationError, ValueError) as exc:
        raise InputError(str(exc)) from exc
    return results, EXIT_OK


def cmd_simulate(args) -> tuple[dict, int]:
    q = load_behavior(args.behavior)
    s = q.scenario
    target = parse_targets(args.targets, s.m_b)
    if args.attack == "primary":
        profile = _profile(parse_floats(args.eta), s.m_b)
        plan = primary.build_plan(profile, target)
        log = primary.simulate_rounds(plan, q, args.rounds, args.seed)
        exact = primary.induced_behavior(plan, q).table
    else:
        eta = None if args.eta is None else _single_eta(args)
        plan = improved.build_improved_plan(s.m_a, s.m_b, target, eta)
        log = improved.simulate_improved(plan, q, args.rounds, args.seed)
        exact = improved.induced_joint(plan, q).table
    if args.log:
        with open(args.log, "w") as fh:
            log.write_jsonl(fh)
    return {"attack": args.attack, "plan": plan.to_dict(), "summary": _mc_summary(log, exact, target)}, EXIT_OK


# --- plumbing ----------------------------------------------------------------


def _versions() -> dict:
    try:
        own = metadata.version("artifact")
    except metadata.PackageNotFoundError:
        own = "unknown"
    return {"detattack": own, "numpy": np.__version__, "scipy": scipy.__version__, "python": platform.python_version()}


def _echo(args) -> dict:
    return {k: v for k, v in sorted(vars(args).items()) if k not in ("func", "out", "timing", "log")}


def _digest(args) -> str:
    h = hashlib.sha256(json.dumps(_echo(args), sort_keys=True).encode())
    source = getattr(args, "behavior", None)
    if source and source not in BUILTINS and Path(source).is_file():
        h.update(Path(source).read_bytes())
    return h.hexdigest()


def build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(prog="detattack", description=__doc__.splitlines()[0])
    sub = p.add_subparsers(dest="command", required=True)

    def common(sp, eta_default="0.5", rounds_default=0):
        sp.add_argument("--behavior", default="chsh-tsirelson", help="builtin name or JSON file")
        sp.add_argument("--eta", default=eta_default, help="efficiency or comma-separated per-setting list")
        sp.add_argument("--targets", default="1", help="comma-separated 1-based target settings")
        sp.add_argument("--rounds", type=int, default=rounds_default)
        sp.add_argument("--seed", type=int, default=0)
        sp.add_argument("--tol", type=float, default=polytope.DEFAULT_TOL)
        sp.add_argument("--out", help="write the report here instead of stdout")
        sp.add_argument("--force", action="store_true")
        sp.add_argument("--timing", action="store_true", help="add wall-clock duration (breaks byte-identity)")

    a = sub.add_parser("attack", help="one-sided efficiency attack")
    common(a)
    a.set_defaults(func=cmd_attack)

    i = sub.add_parser("improved", help="two-sided attack (default: critical efficiency)")
    common(i, eta_default=None)
    i.set_defaults(func=cmd_improved)

    b = sub.add_parser("boundrand", help="bound-randomness certificate")
    common(b)
    b.set_defaults(func=cmd_boundrand)

    lt = sub.add_parser("localtest", help="local-polytope membership of the lossy behavior")
    common(lt, eta_default="1.0")
    lt.add_argument("--critical", action="store_true", help="also bisect the critical efficiency")
    lt.add_argument("--bisect-tol", type=float, default=1e-3)
    lt.set_defaults(func=cmd_localtest)

    pl = sub.add_parser("plan", help="channel-loss planning and thresholds")
    pl.add_argument("--alpha", type=float, default=channel.DEFAULT_ALPHA, help="dB/km")
    pl.add_argument("--length", type=float, help="km")
    pl.add_argument("--bases", type=int)
    pl.add_argument("--ma", type=int, help="Alice's setting count for the improved threshold")
    pl.add_argument("--gprime", type=int, help="|G|' for the improved threshold")
    pl.add_argument("--out")
    pl.add_argument("--timing", action="store_true")
    pl.set_defaults(func=cmd_plan)

    sm = sub.add_parser("simulate", help="Monte-Carlo round log")
    common(sm, rounds_default=10000)
    sm.add_argument("--attack", choices=("primary", "improved"), default="primary")
    sm.add_argument("--log", help="write the round log as JSON lines")
    sm.set_defaults(func=cmd_simulate)
    return p


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    if getattr(args, "rounds", 0) and args.rounds < 0:
        parser.error("--rounds must be >= 0")
    start = time.perf_counter()
    status = "ok"
    try:
        results, code = args.func(args)
        if code == EXIT_INFEASIBLE:
            status = "infeasible"
    except InputError as exc:
        results, code, status = {"error": str(exc)}, EXIT_INPUT, "input_error"
    except InfeasibleError as exc:
        results, code, status = {"error": str(exc), "margin": exc.margin}, EXIT_INFEASIBLE, "infeasible"
    except NumericalFailure as exc:
        results, code, status = {"error": str(exc), "residuals": exc.residuals}, EXIT_NUMERICAL, "numerical_failure"

    report = {
        "command": args.command,
        "config": _echo(args),
        "input_digest": _digest(args),
        "status": status,
        "exit_code": code,
        "results": results,
        "versions": _versions(),
    }
    if args.timing:
        report["duration_s"] = time.perf_counter() - start
    text = json.dumps(_finite(report), indent=2, sort_keys=True, allow_nan=False, default=_json_default) + "\n"
    if args.out:
        Path(args.out).write_text(text)
    else:
        sys.stdout.write(text)
    if code == EXIT_INPUT:
        print(f"detattack: {results['error']}", file=sys.stderr)
    return code


def _finite(obj):
    """Strict JSON has no inf/nan; spell them as strings."""
    if isinstance(obj, dict):
        return {k: _finite(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [_finite(v) for v in obj]
    if isinstance(obj, (float, np.floating)) and not np.isfinite(obj):
        return str(float(obj))
    return obj


def _json_default(obj):
    if isinstance(obj, np.generic):
        return obj.item()
    raise TypeError(f"not JSON serializable: {type(obj).__name__}")


if __name__ == "__main__":
    sys.exit(main())
