"""Pipeline driver: collect / train / bounds / solve / verify.

Every command writes its artifact plus a ``.manifest.json`` recording the
config hash and the SHA-256 of inputs and outputs; ``solve`` refuses a
bounds artifact whose recorded network hash does not match the loaded
weights, and refuses bounds whose validation recorded exceedances.  All
randomness is seeded, so rerunning a command with the same config
reproduces byte-identical JSON artifacts (the SVG and wall-clock timings
are kept out of the hashed artifacts).

Exit codes: 0 success, 1 internal/verification failure, 2 missing or
inconsistent artifacts, 3 certified-infeasible or no sample found.
"""

from __future__ import annotations

import argparse
import hashlib
import json
import os
import sys

import numpy as np

from .bounds import (
    ErrorBounds,
    PartitionedBounds,
    ValidationReport,
    estimate,
    partition_and_estimate,
    validate,
)
from .hpoly import Hyperrectangle, buffer_agent_body
from .network import ReluNetwork, train
from .reachavoid import Scenario, SolveBudget, SolveReport, solve
from .seeding import derive_seed
from .systems import Dataset, builtin, collect

BOUNDS_FORMAT_VERSION = 1


class CliError(Exception):
    def __init__(self, message: str, code: int):
        super().__init__(message)
        self.code = code


def _sha256(path: str) -> str:
    h = hashlib.sha256()
    with open(path, "rb") as f:
        for chunk in iter(lambda: f.read(1 << 20), b""):
            h.update(chunk)
    return h.hexdigest()


def _canonical(obj) -> str:
    return json.dumps(obj, sort_keys=True, separators=(",", ":"))


def _write_json(path: str, obj) -> None:
    with open(path, "w") as f:
        json.dump(obj, f, indent=1, sort_keys=True)


def _require(path: str) -> str:
    if not os.path.exists(path):
        raise CliError(f"missing artifact: {path}", 2)
    return path


def _write_manifest(command: str, config: dict, inputs: list[str], outputs: list[str], path: str):
    manifest = {
        "command": command,
        "config": config,
        "config_sha256": hashlib.sha256(_canonical(config).encode()).hexdigest(),
        "inputs": {p: _sha256(p) for p in inputs},
        "outputs": {p: _sha256(p) for p in outputs},
    }
    _write_json(path, manifest)


def _parse_box(text: str) -> Hyperrectangle:
    """Box syntax ``lo1,lo2,...:hi1,hi2,...``."""
    lo, hi = text.split(":")
    return Hyperrectangle(
        [float(v) for v in lo.split(",")], [float(v) for v in hi.split(",")]
    )


def cmd_collect(args) -> int:
    system = builtin(args.system)
    k_box = system.k_box
    if args.k_margin > 0:
        # train on a slightly larger parameter box so the analysis box sits
        # strictly inside the interpolation region of the fitted model
        c, h = k_box.center, k_box.half_widths
        k_box = Hyperrectangle(c - (1 + args.k_margin) * h, c + (1 + args.k_margin) * h)
    dataset = collect(system, k_box, args.n, system.spec, args.seed)
    dataset.meta["k_margin"] = args.k_margin
    dataset.save(args.output)
    _write_manifest(
        "collect",
        {"system": args.system, "n": args.n, "seed": args.seed, "k_margin": args.k_margin},
        [],
        [args.output, args.output + ".meta.json"],
        args.output + ".manifest.json",
    )
    return 0


def cmd_train(args) -> int:
    dataset = Dataset.load(_require(args.data))
    _require(args.data + ".meta.json")
    widths = [int(w) for w in args.widths.split(",")]
    net = train(
        dataset.to_training_set(),
        widths,
        epochs=args.epochs,
        seed=args.seed,
        learning_rate=args.lr,
    )
    net.save(args.output)
    meta = {
        "system": dataset.system,
        "spec": dataset.spec.to_dict(),
        "widths": widths,
        "epochs": args.epochs,
        "seed": args.seed,
        "lr": args.lr,
        "final_mse": net.loss_history[-1],
        "data_sha256": _sha256(args.data),
    }
    _write_json(args.output + ".meta.json", meta)
    _write_manifest(
        "train",
        {"data": args.data, "widths": args.widths, "epochs": args.epochs,
         "seed": args.seed, "lr": args.lr},
        [args.data],
        [args.output, args.output + ".meta.json"],
        args.output + ".manifest.json",
    )
    print(f"trained {widths} for {args.epochs} epochs; final mse {net.loss_history[-1]:.3e}")
    return 0


def cmd_bounds(args) -> int:
    net = ReluNetwork.load(_require(args.net))
    meta_path = args.net + ".meta.json"
    system_name = args.system
    if system_name is None:
        if not os.path.exists(meta_path):
            raise CliError("no --system given and no network sidecar metadata found", 2)
        with open(meta_path) as f:
            system_name = json.load(f)["system"]
    system = builtin(system_name)
    spec = system.spec
    p0_box = _parse_box(args.p0_box) if args.p0_box else system.default_p0_box
    kwargs = dict(
        system=system,
        net=net,
        spec=spec,
        p0_box=p0_box,
        k_box=system.k_box,
        n_sample=args.n_sample,
        n_substeps=args.substeps,
        seed=args.seed,
    )
    if args.splits > 1:
        bounds = partition_and_estimate(**kwargs, splits=args.splits)
    else:
        bounds = estimate(**kwargs)
    if args.margin > 0 or args.margin_abs > 0:
        bounds = bounds.inflated(args.margin, args.margin_abs)
    validation = None
    if args.validate_factor > 0:
        validation = validate(
            bounds,
            system,
            net,
            spec,
            p0_box,
            system.k_box,
            n_substeps=args.substeps,
            seed=derive_seed(args.seed, 31),
            factor=args.validate_factor,
        )
        print(
            f"validation: {validation.n_exceeded}/{validation.n_checked} exceedances, "
            f"max ratio {validation.max_ratio:.4f}"
        )
    payload = {
        "version": BOUNDS_FORMAT_VERSION,
        "kind": "partitioned" if args.splits > 1 else "single",
        "system": system_name,
        "p0_box": p0_box.to_dict(),
        "substeps": args.substeps,
        "margin": args.margin,
        "margin_abs": args.margin_abs,
        "seed": args.seed,
        "net_sha256": _sha256(args.net),
        "bounds": bounds.to_dict(),
        "validation": validation.to_dict() if validation else None,
    }
    _write_json(args.output, payload)
    _write_manifest(
        "bounds",
        {"net": args.net, "system": system_name, "n_sample": args.n_sample,
         "substeps": args.substeps, "splits": args.splits, "margin": args.margin,
         "margin_abs": args.margin_abs, "seed": args.seed,
         "validate_factor": args.validate_factor, "p0_box": args.p0_box},
        [args.net],
        [args.output],
        args.output + ".manifest.json",
    )
    return 0


def load_bounds_file(path: str):
    with open(path) as f:
        payload = json.load(f)
    if payload.get("version") != BOUNDS_FORMAT_VERSION:
        raise CliError(f"unsupported bounds version: {payload.get('version')!r}", 2)
    if payload["kind"] == "partitioned":
        bounds = PartitionedBounds.from_dict(payload["bounds"])
    else:
        bounds = ErrorBounds.from_dict(payload["bounds"])
    validation = (
        ValidationReport.from_dict(payload["validation"]) if payload.get("validation") else None
    )
    return bounds, validation, payload


def cmd_solve(args) -> int:
    scenario = Scenario.load(_require(args.scenario))
    net = ReluNetwork.load(_require(args.net))
    bounds, validation, payload = load_bounds_file(_require(args.bounds))
    if payload["net_sha256"] != _sha256(args.net):
        raise CliError("bounds were computed for a different network (hash mismatch)", 2)
    if validation is not None and not validation.passed and not args.allow_unvalidated:
        raise CliError(
            f"bounds validation recorded {validation.n_exceeded} exceedances; "
            "refusing to certify (pass --allow-unvalidated to override)",
            2,
        )
    budget = SolveBudget(
        max_regions=args.budget_regions,
        max_seconds=args.budget_seconds,
        samples_per_region=args.samples_per_region,
    )
    report = solve(scenario, net, bounds, budget=budget, seed=args.seed)

    os.makedirs(args.output, exist_ok=True)
    report_path = os.path.join(args.output, "report.json")
    artifact = {
        "scenario": scenario.to_dict(),
        "report": report.to_dict(),
        "net_sha256": _sha256(args.net),
        "bounds_sha256": _sha256(args.bounds),
    }
    _write_json(report_path, artifact)
    _write_json(os.path.join(args.output, "timings.json"), report.timings)
    svg_path = os.path.join(args.output, "plot.svg")
    from .plotting import plot_solve  # deferred: pulls in matplotlib

    try:
        system = builtin(scenario.system) if scenario.system else None
    except ValueError:
        system = None  # plot without rollouts
    plot_solve(scenario, report, bounds, net=net, system=system, path=svg_path)
    _write_manifest(
        "solve",
        {"scenario": args.scenario, "net": args.net, "bounds": args.bounds,
         "budget_regions": args.budget_regions, "budget_seconds": args.budget_seconds,
         "samples_per_region": args.samples_per_region, "seed": args.seed},
        [args.scenario, args.net, args.bounds],
        [report_path],
        os.path.join(args.output, "manifest.json"),
    )
    print(f"outcome: {report.outcome} after {report.n_regions} regions, "
          f"{len(report.samples)} certified samples")
    if report.outcome != "found":
        return 3
    return 0


def _verify_samples(scenario: Scenario, samples, n_rollouts: int, seed: int):
    system = builtin(scenario.system)
    spec = scenario.spec
    goal = scenario.goal_poly
    buffered = [buffer_agent_body(o, scenario.agent_radius) for o in scenario.obstacle_polys]
    per_sample = []
    for idx, s in enumerate(samples):
        seeds = [derive_seed(seed, 91, idx, r) for r in range(n_rollouts)]
        ks = np.repeat(np.asarray(s.k, dtype=float)[None, :], n_rollouts, axis=0)
        positions, q = system.rollout_batch(ks, seeds)
        positions = positions + np.asarray(s.p0, dtype=float)[None, None, :]
        final = np.hstack([positions[:, -1, :], q]) if spec.n_q else positions[:, -1, :]
        reach_ok = (final @ goal.A.T <= goal.b + 1e-12).all(axis=1)
        avoid_ok = np.ones(n_rollouts, dtype=bool)
        for obs in buffered:
            inside = (positions @ obs.A.T <= obs.b[None, None, :]).all(axis=2)
            avoid_ok &= ~inside.any(axis=1)
        per_sample.append(
            {
                "sample_index": idx,
                "reach_ok": int(reach_ok.sum()),
                "avoid_ok": int(avoid_ok.sum()),
                "ok": int((reach_ok & avoid_ok).sum()),
            }
        )
    return per_sample


def cmd_verify(args) -> int:
    report_path = _require(os.path.join(args.report, "report.json"))
    with open(report_path) as f:
        artifact = json.load(f)
    scenario = Scenario.from_dict(artifact["scenario"])
    if scenario.system is None:
        raise CliError("scenario does not name a system; cannot replay rollouts", 2)
    report = SolveReport.from_dict(artifact["report"])
    if not report.samples:
        raise CliError("report contains no certified samples to verify", 2)
    per_sample = _verify_samples(scenario, report.samples, args.rollouts, args.seed)
    all_ok = all(row["ok"] == args.rollouts for row in per_sample)
    payload = {
        "n_samples": len(report.samples),
        "rollouts_per_sample": args.rollouts,
        "seed": args.seed,
        "per_sample": per_sample,
        "all_ok": all_ok,
    }
    _write_json(args.output, payload)
    _write_manifest(
        "verify",
        {"report": args.report, "rollouts": args.rollouts, "seed": args.seed},
        [report_path],
        [args.output],
        args.output + ".manifest.json",
    )
    total = sum(row["ok"] for row in per_sample)
    print(f"verify: {total}/{len(per_sample) * args.rollouts} rollouts ok")
    if not all_ok:
        print("verification FAILED: some rollouts violated reach/avoid", file=sys.stderr)
        return 1
    return 0


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="neuralparc",
        description="reach-avoid certification pipeline for black-box systems",
    )
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("collect", help="sample trajectories from a built-in system")
    p.add_argument("--system", required=True, choices=["drift2d", "boat2d"])
    p.add_argument("--n", type=int, required=True)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--k-margin", type=float, default=0.0,
                   help="relative enlargement of the sampled parameter box")
    p.add_argument("-o", "--output", required=True)
    p.set_defaults(func=cmd_collect)

    p = sub.add_parser("train", help="fit the trajectory-model network")
    p.add_argument("--data", required=True)
    p.add_argument("--widths", required=True, help="comma-separated hidden widths, e.g. 8,8,8,8")
    p.add_argument("--epochs", type=int, default=3000)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--lr", type=float, default=1e-3)
    p.add_argument("-o", "--output", required=True)
    p.set_defaults(func=cmd_train)

    p = sub.add_parser("bounds", help="estimate and validate modeling-error bounds")
    p.add_argument("--net", required=True)
    p.add_argument("--system", default=None)
    p.add_argument("--n-sample", type=int, default=10_000)
    p.add_argument("--substeps", type=int, default=10)
    p.add_argument("--splits", type=int, default=1)
    p.add_argument("--margin", type=float, default=0.0,
                   help="relative conservative inflation applied to the sampled maxima")
    p.add_argument("--margin-abs", type=float, default=0.0,
                   help="absolute floor added to every inflated bound channel")
    p.add_argument("--validate-factor", type=int, default=10,
                   help="fresh-sample multiple for the validation pass (0 disables)")
    p.add_argument("--p0-box", default=None, help="lo1,lo2:hi1,hi2 (default: system box)")
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("-o", "--output", required=True)
    p.set_defaults(func=cmd_bounds)

    p = sub.add_parser("solve", help="compute certified reach-avoid samples for a scenario")
    p.add_argument("--scenario", required=True)
    p.add_argument("--net", required=True)
    p.add_argument("--bounds", required=True)
    p.add_argument("--budget-regions", type=int, default=1000)
    p.add_argument("--budget-seconds", type=float, default=None)
    p.add_argument("--samples-per-region", type=int, default=50)
    p.add_argument("--allow-unvalidated", action="store_true")
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("-o", "--output", required=True, help="output directory")
    p.set_defaults(func=cmd_solve)

    p = sub.add_parser("verify", help="replay certified samples against the black box")
    p.add_argument("--report", required=True, help="solve output directory")
    p.add_argument("--rollouts", type=int, default=100)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("-o", "--output", required=True)
    p.set_defaults(func=cmd_verify)
    return parser


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        return args.func(args)
    except CliError as err:
        print(f"error: {err}", file=sys.stderr)
        return err.code
    except Exception as err:  # internal error
        print(f"internal error: {type(err).__name__}: {err}", file=sys.stderr)
        return 1


if __name__ == "__main__":
    sys.exit(main())
