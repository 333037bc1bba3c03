"""Command-line interface: ``baiwrc {run,sweep,complexity,validate,gen}``.

Exit codes: 0 success, 1 validation or domain failure, 2 usage error.
"""

from __future__ import annotations

import argparse
import json
import math
import subprocess
import sys
import time
import warnings
from dataclasses import dataclass, field
from pathlib import Path
from typing import Callable, Sequence

from . import experiments, harness
from .complexity import complexity_report
from .model import Instance, InstanceError, Outcome
from .strategies import POLICIES, make_policy


class ExternalArmError(RuntimeError):
    """An external arm command failed or printed something unparseable."""


@dataclass
class ExternalArmSpec:
    """A program run once per pull; its wall time is the (single) resource consumed.

    The reward is the float on the last line of standard output, clamped to
    [0, 1]; ``clamped`` counts how often clamping was needed.
    """

    command: list
    budget_scale: float
    timeout: float = 60.0
    reward_parse: str = "last-line-float"
    consumption_mode: str = "measured-seconds"
    clamped: int = field(default=0, compare=False)

    def __post_init__(self):
        if not self.command:
            raise InstanceError("command: must not be empty")
        if not self.budget_scale > 0:
            raise InstanceError("budget_scale: must be positive")
        if not self.timeout > 0:
            raise InstanceError("timeout: must be positive")

    @classmethod
    def from_dict(cls, data: dict, where: str = "arm") -> "ExternalArmSpec":
        try:
            command = data["command"]
            scale = float(data["budget_scale"])
        except (KeyError, TypeError, ValueError):
            raise InstanceError(f"{where}: needs 'command' and numeric 'budget_scale'") from None
        if isinstance(command, str):
            command = [command]
        return cls(list(command), scale, float(data.get("timeout", 60.0)))


def pull_external(
    arm: ExternalArmSpec, rng=None, clock: Callable[[], float] = time.perf_counter, runner=None
) -> Outcome:
    """Run ``arm.command`` once; consumption = min(1, elapsed / budget_scale).

    ``rng`` is accepted for interface symmetry with :func:`baiwrc.model.sample`
    and is unused. ``runner`` defaults to :func:`subprocess.run`.
    """
    runner = runner or subprocess.run
    start = clock()
    try:
        proc = runner(arm.command, capture_output=True, text=True, timeout=arm.timeout)
    except subprocess.TimeoutExpired:
        return Outcome(0.0, (1.0,))
    elapsed = clock() - start
    if proc.returncode != 0:
        raise ExternalArmError(
            f"{arm.command[0]}: exit status {proc.returncode}: {proc.stderr.strip()[-200:]}"
        )
    lines = proc.stdout.strip().splitlines()
    try:
        reward = float(lines[-1])
    except (IndexError, ValueError):
        raise ExternalArmError(f"{arm.command[0]}: cannot parse a reward from its output") from None
    if not math.isfinite(reward):
        raise ExternalArmError(f"{arm.command[0]}: non-finite reward {reward}")
    if not 0.0 <= reward <= 1.0:
        arm.clamped += 1
        warnings.warn(f"{arm.command[0]}: reward {reward} clamped to [0, 1]", stacklevel=2)
        reward = min(1.0, max(0.0, reward))
    return Outcome(reward, (min(1.0, max(0.0, elapsed) / arm.budget_scale),))


def parse_instance(path: str, tight_bernoulli_b: bool = False) -> Instance:
    """Read and fully validate an instance JSON file."""
    try:
        text = Path(path).read_text()
    except OSError as exc:
        raise InstanceError(f"{path}: {exc.strerror}") from None
    return Instance.from_json(text, tight_bernoulli_b)


def parse_external(path: str) -> tuple[list[ExternalArmSpec], float]:
    """External-arm file: {"external_arms": [{command, budget_scale, timeout}], "budget": C}."""
    try:
        data = json.loads(Path(path).read_text())
    except (OSError, json.JSONDecodeError) as exc:
        raise InstanceError(f"{path}: {exc}") from None
    arms = data.get("external_arms")
    if not isinstance(arms, list) or not arms:
        raise InstanceError("external_arms: expected a non-empty list")
    specs = [ExternalArmSpec.from_dict(a, f"external_arms[{k}]") for k, a in enumerate(arms)]
    try:
        budget = float(data["budget"])
    except (KeyError, TypeError, ValueError):
        raise InstanceError("budget: expected a number") from None
    return specs, budget


def _kv(text: str) -> tuple[str, object]:
    key, sep, value = text.partition("=")
    if not sep or not key:
        raise argparse.ArgumentTypeError(f"expected key=value, got {text!r}")
    try:
        return key, json.loads(value)
    except json.JSONDecodeError:
        return key, value


def _positive_int(text: str) -> int:
    try:
        n = int(text)
    except ValueError:
        raise argparse.ArgumentTypeError(f"not an integer: {text!r}") from None
    if n < 1:
        raise argparse.ArgumentTypeError("must be >= 1")
    return n


def _emit(text: str, out: str | None) -> None:
    if out:
        Path(out).write_text(text)
    else:
        sys.stdout.write(text)


def cmd_run(args) -> int:
    params = dict(args.policy_param or [])
    if args.external:
        return _run_external(args, params)
    inst = parse_instance(args.instance, args.tight_bernoulli_b)
    make_policy(args.policy, inst.n_arms, inst.budgets, **params)  # fail fast on bad params
    stats = harness.estimate_failure(
        inst, args.policy, args.trials, args.seed, args.threads, params, args.emit_trials
    )
    _emit(stats.to_json() + "\n", args.out)
    return 0


def _run_external(args, params) -> int:
    arms, budget = parse_external(args.external)
    lines = []
    for i in range(args.trials):
        policy = make_policy(args.policy, len(arms), [budget], **params)
        result = harness.simulate(policy, lambda k: pull_external(arms[k]), [budget])
        lines.append(json.dumps({"trial_id": i, "psi": result.psi, "tau": result.tau,
                                 "consumption": list(result.consumption),
                                 "feasible": result.feasible}))
    clamped = sum(a.clamped for a in arms)
    if clamped:
        print(f"warning: {clamped} rewards clamped to [0, 1]", file=sys.stderr)
    _emit("\n".join(lines) + "\n", args.out)
    return 0


def cmd_sweep(args) -> int:
    try:
        config = json.loads(Path(args.config).read_text())
    except (OSError, json.JSONDecodeError) as exc:
        raise InstanceError(f"{args.config}: {exc}") from None
    if args.trials is not None:
        config["trials"] = args.trials
    if args.seed is not None:
        config["seed"] = args.seed
    rows = experiments.sweep(config, threads=args.threads)
    out = args.out or config.get("out")
    if out:
        with open(out, "w", newline="") as fh:
            experiments.write_sweep_csv(rows, fh)
    else:
        experiments.write_sweep_csv(rows, sys.stdout)
    return 0


def cmd_complexity(args) -> int:
    inst = parse_instance(args.instance, args.tight_bernoulli_b)
    if inst.n_arms < 2:
        raise InstanceError("arms: complexity measures need K >= 2")
    _emit(json.dumps(complexity_report(inst).to_dict(), indent=2) + "\n", args.out)
    return 0


def cmd_validate(args) -> int:
    inst = parse_instance(args.instance, args.tight_bernoulli_b)
    print(f"ok: K={inst.n_arms} L={inst.n_resources}")
    return 0


def _gen_family(args) -> list[tuple[str, Instance]]:
    p = dict(args.param or [])
    fam = args.family
    if fam == "figure1":
        det, sto = experiments.gen_figure1_pair(float(p["d"]), float(p.get("budget", 2.0)))
        return [("det", det), ("sto", sto)]
    if fam == "appendix_b5":
        family = experiments.gen_appendixB5_family(int(p["K"]), float(p.get("budget", 100.0)))
        return [(f"Q{i + 1}", q) for i, q in enumerate(family)]
    if fam == "synthetic":
        L = int(p.get("L", 1))
        budget = p.get("budget", 1500.0)
        budgets = budget if isinstance(budget, list) else [budget] * L
        spec = experiments.SetupSpec(p["reward_shape"], p["consumption_pattern"],
                                     p["consumption_kind"], int(p.get("K", 256)), L, budgets)
        return [("instance", experiments.gen_synthetic(spec))]
    if fam == "theorem2":
        d = p["d"]
        laws = (experiments.theorem2_uniform(d) if p.get("law") == "uniform"
                else experiments.theorem2_deterministic(d))
        family = experiments.gen_theorem2_family(p["r"], laws, p["budgets"])
        return [(f"Q{i + 1}", q) for i, q in enumerate(family)]
    if fam == "theorem3":
        family = experiments.gen_theorem3_family(p["r"], p["d0"], float(p["c"]), p["budgets"])
        return [(f"Q{i + 1}", q) for i, q in enumerate(family)]
    raise ValueError(f"unknown family {fam!r}")


def cmd_gen(args) -> int:
    try:
        members = _gen_family(args)
    except KeyError as exc:
        raise InstanceError(f"missing --param {exc.args[0]}=...") from None
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    for name, inst in members:
        (out / f"{name}.json").write_text(inst.to_json() + "\n")
    print(f"wrote {len(members)} instance(s) to {out}")
    return 0


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="baiwrc", description=__doc__.splitlines()[0])
    sub = parser.add_subparsers(dest="command", required=True)

    def instance_flags(p, positional=False):
        if positional:
            p.add_argument("instance", help="instance JSON file")
        p.add_argument("--tight-bernoulli-b", action="store_true",
                       help="use b = max(d, 1 - d) for Bernoulli consumption")
        p.add_argument("--out", help="write output here instead of stdout")

    run = sub.add_parser("run", help="estimate the failure probability of a policy")
    target = run.add_mutually_exclusive_group(required=True)
    target.add_argument("--instance", help="instance JSON file")
    target.add_argument("--external", help="external-arm JSON file (prints one line per trial)")
    run.add_argument("--policy", default="shrr", choices=sorted(POLICIES))
    run.add_argument("--policy-param", type=_kv, action="append", metavar="KEY=VALUE")
    run.add_argument("--trials", type=_positive_int, default=1000)
    run.add_argument("--seed", type=int, default=0)
    run.add_argument("--threads", type=_positive_int, default=1)
    run.add_argument("--emit-trials", metavar="CSV", help="write per-trial rows")
    instance_flags(run)
    run.set_defaults(func=cmd_run)

    sw = sub.add_parser("sweep", help="run a generator grid and write CSV")
    sw.add_argument("--config", required=True, help="sweep config JSON")
    sw.add_argument("--trials", type=_positive_int)
    sw.add_argument("--seed", type=int)
    sw.add_argument("--threads", type=_positive_int, default=1)
    sw.add_argument("--out", help="CSV path (default: config 'out', else stdout)")
    sw.set_defaults(func=cmd_sweep)

    cx = sub.add_parser("complexity", help="print H terms, gamma and bounds as JSON")
    instance_flags(cx, positional=True)
    cx.set_defaults(func=cmd_complexity)

    va = sub.add_parser("validate", help="check an instance file")
    instance_flags(va, positional=True)
    va.set_defaults(func=cmd_validate)

    gen = sub.add_parser("gen", help="write a generated instance family as JSON files")
    gen.add_argument("family", choices=["figure1", "appendix_b5", "synthetic", "theorem2", "theorem3"])
    gen.add_argument("--param", type=_kv, action="append", metavar="KEY=VALUE")
    gen.add_argument("--out", required=True, help="output directory")
    gen.set_defaults(func=cmd_gen)
    return parser


def main(argv: Sequence[str] | None = None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        return args.func(args)
    except (InstanceError, ExternalArmError, ValueError, TypeError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1


if __name__ == "__main__":
    sys.exit(main())
