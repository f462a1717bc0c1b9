"""
Command bodies behind the CLI. Each returns an exit code: 0 pass, 1 a check
failed. Configuration problems raise ConfigError and become exit code 2 in
main.py.
"""
import csv
import io
import itertools
import json
import os
from typing import Callable, Dict, List, Optional, Tuple

import click
import numpy as np
from tqdm import tqdm

from Adversary_Models.Adversary_Models import (
    HONEST_STRATEGY,
    AdversaryStrategy,
    CodeConfig,
    cheating_device,
    load_attack,
    pauli_bound,
    scripted_devices,
    strategy_library,
    undetected_error_prob_bruteforce,
    undetected_error_prob_montecarlo,
)
from Experiments.config import SUITES, ExperimentConfig
from Linalg_Core.Linalg_Core import StateVector, pauli_operator, random_state
from MA_Protocol.devices import HONEST_DEVICE, DeviceBehavior
from MA_Protocol.MA_Protocol import BobImplementation, bob_honest_noverify, run_noverify, run_verify
from MBQC_Engine.MBQC_Engine import GraphSpec, MeasurementPattern, build_cluster, ideal_map
from MBQC_Engine.compiler import wire_pattern
from Security_Harness.Security_Harness import (
    CheckReport,
    adversarial_family,
    check_blindness_noverify,
    check_bob_view_blindness,
    check_correctness,
    check_security_verify,
)
from Security_Harness.composition import parallel_composition_check, serial_composition_check
from Security_Harness.nosignaling import nosignaling_batches
from Utils.helpers import (
    DERIVED_TOL,
    TOOL_VERSION,
    BlindSimError,
    ConfigError,
    canonical_json,
    log_message,
    progress_disabled,
    rng_for,
    write_json,
)

SWEEP_MAX_N = 12
SWEEP_TRIALS = 100_000
COMPOSITION_TRIALS = 200
CORRECTNESS_N = 6
CORRECTNESS_PAIRS = 50
BLINDNESS_FAMILY = 50
BLINDNESS_PROGRAM_PAIRS = 20
NOSIGNALING_TRIALS = 100_000
NOSIGNALING_BATCHES = 50
NOSIGNALING_MAX_REJECTIONS = 3
PLANTED_MIN_POWER = 0.99


# ---------------- Helpers ----------------
def load_device(source: str) -> DeviceBehavior:
    """'honest', a cheating kind name, or a JSON file with DeviceBehavior fields."""
    if source == "honest":
        return HONEST_DEVICE
    try:
        if os.path.isfile(source):
            with open(source, "r", encoding="utf-8") as f:
                return DeviceBehavior.model_validate(json.load(f))
        return cheating_device(source)
    except (OSError, ValueError, BlindSimError) as exc:
        raise ConfigError(f"Cannot load device {source!r}: {exc}") from exc


def load_bob(source: str) -> AdversaryStrategy:
    return HONEST_STRATEGY if source == "honest" else load_attack(source)


def noverify_bob(strategy: AdversaryStrategy, graph: GraphSpec) -> BobImplementation:
    """A no-verification Bob only chooses what he sends."""
    if strategy == HONEST_STRATEGY:
        return bob_honest_noverify(graph)
    n = graph.vertex_count
    strategy.check_support(n)
    if strategy.kind == "wrong_resource":
        state = StateVector.from_bits(strategy.state) if strategy.state else random_state(n, rng_for(strategy.seed, 3))
        return BobImplementation(name="wrong_resource", graph=graph, resource=state)
    if strategy.kind == "pauli_attack":
        state = StateVector(pauli_operator(strategy.pauli_map(n)) @ build_cluster(graph).amplitudes)
        return BobImplementation(name="pauli_attack", graph=graph, resource=state)
    raise ConfigError(f"{strategy.kind} has no no-verification form; use wrong_resource or pauli_attack")


def _emit(text: str, out: Optional[str]):
    if out:
        with open(out, "w", encoding="utf-8", newline="\n") as f:
            f.write(text)
    else:
        click.echo(text, nl=False)


def _random_wire(rng: np.random.Generator, sites: int, quantum_input: bool = False) -> Tuple[GraphSpec, MeasurementPattern]:
    return wire_pattern(rng.uniform(0, 2 * np.pi, size=sites - 1).round(6).tolist(), quantum_input=quantum_input)


# ---------------- run ----------------
def cmd_run(config: ExperimentConfig) -> int:
    graph, program = config.program()
    device = load_device(config.device)
    strategy = load_bob(config.bob)
    if config.variant == "noverify":
        rho_out, transcript = run_noverify(None, program, device, noverify_bob(strategy, graph), config.seed)
        e = None
    else:
        bob = strategy.as_bob(graph, rng_for(config.seed, 2))
        result = run_verify(None, program, device, bob, seed=config.seed)
        rho_out, transcript, e = result.rho_out, result.transcript, result.e
    target = ideal_map(graph, program)[:, 0]
    fidelity = float(np.real(np.vdot(target, rho_out.matrix @ target)))

    path = config.out or f"transcript_{config.variant}_{config.seed}.jsonl"
    transcript.write(path)
    summary = {
        "variant": config.variant,
        "seed": config.seed,
        "config_hash": config.config_hash,
        "tool_version": TOOL_VERSION,
        "e": e,
        "fidelity": round(fidelity, 12),
        "transcript": path,
    }
    click.echo(canonical_json(summary))
    log_message("info", f"{config.variant} run: e={e}, fidelity={fidelity:.12f}")
    return 0


# ---------------- bound-sweep ----------------
def sweep_attacks(n: int, kind: str) -> List[Dict[int, str]]:
    if kind == "none":
        return []
    if kind == "single":
        return [{j: p} for j in range(n) for p in "XYZ"]
    return [{j: p, k: q} for j, k in itertools.combinations(range(n), 2) for p in "XYZ" for q in "XYZ"]


def _attack_label(attack: Dict[int, str]) -> str:
    return "+".join(f"{p}{j}" for j, p in sorted(attack.items()))


def cmd_bound_sweep(config: ExperimentConfig) -> int:
    n = config.N
    if n > SWEEP_MAX_N:
        raise ConfigError(f"Exhaustive sweeps are capped at N={SWEEP_MAX_N}")
    for d in config.d:
        if d > n // 3:
            raise ConfigError(f"Distance {d} needs at least {d} computation positions; N={n} has {n // 3}")
    trials = config.trials_or(SWEEP_TRIALS)
    attacks = sweep_attacks(n, config.strategies)

    buf = io.StringIO()
    buf.write(f"# config_hash={config.config_hash} tool_version={TOOL_VERSION} seed={config.seed}\n")
    writer = csv.writer(buf, lineterminator="\n")
    writer.writerow(["N", "d", "strategy", "brute_force_p", "mc_estimate", "mc_stderr", "bound"])
    violations = 0
    jobs = [(d, a) for d in config.d for a in attacks]
    for i, (d, attack) in enumerate(tqdm(jobs, desc="bound-sweep", disable=progress_disabled(), leave=False)):
        code = CodeConfig(d=d)
        exact = undetected_error_prob_bruteforce(n, code, attack)
        estimate, stderr = undetected_error_prob_montecarlo(n, code, attack, trials, config.seed + i)
        bound = pauli_bound(d)
        if float(exact) > bound + 1e-12:
            violations += 1
            log_message("error", f"N={n} d={d} {_attack_label(attack)}: {float(exact)} > {bound}")
        writer.writerow([n, d, _attack_label(attack), f"{float(exact):.12g}", f"{estimate:.12g}",
                         f"{stderr:.12g}", f"{bound:.12g}"])
    _emit(buf.getvalue(), config.out)
    log_message("check", f"bound-sweep: {len(jobs)} rows, {violations} above the bound")
    return 1 if violations else 0


# ---------------- certify ----------------
def _suite_correctness(config: ExperimentConfig, seed: int) -> List[CheckReport]:
    rng = rng_for(seed, 0)
    devices = [HONEST_DEVICE] + scripted_devices()
    # N counts resource sites without verification and positions with it
    cases = [("noverify",) + _random_wire(rng, CORRECTNESS_N, quantum_input=i % 2 == 0)
             for i in range(CORRECTNESS_PAIRS)]
    cases += [("verify",) + _random_wire(rng, CORRECTNESS_N // 3, quantum_input=i % 2 == 0)
              for i in range(CORRECTNESS_PAIRS)]
    reports = []
    for variant, graph, program in tqdm(cases, desc="correctness", disable=progress_disabled()):
        for device in devices:
            dist = check_correctness(variant, program, graph, device, seed=seed)
            reports.append(CheckReport.make(
                "correctness", {"variant": variant, "program": program.model_dump(mode="json"),
                                "device": device.model_dump(mode="json")},
                seed, dist.half_trace_distance, DERIVED_TOL, variant=variant, device=device.kind))
    return reports


def _suite_blindness(config: ExperimentConfig, seed: int) -> List[CheckReport]:
    rng = rng_for(seed, 1)
    graph, program = _random_wire(rng, 4)
    family = adversarial_family(graph, BLINDNESS_FAMILY, rng)
    reports = []
    for device in [HONEST_DEVICE] + scripted_devices():
        dist = check_blindness_noverify(program, graph, family, device, seed=seed)
        reports.append(CheckReport.make(
            "blindness_noverify", {"program": program.model_dump(mode="json"), "device": device.model_dump(mode="json")},
            seed, dist.half_trace_distance, DERIVED_TOL, device=device.kind, method=dist.method,
            family=len(family)))
    # Bob keeps one qubit entangled with what he sends
    cheater = BobImplementation(name="entangled", graph=graph, resource=random_state(5, rng), retained_qubits=1)
    pairs = [(_random_wire(rng, 4)[1], _random_wire(rng, 4)[1]) for _ in range(BLINDNESS_PROGRAM_PAIRS)]
    for bob in (bob_honest_noverify(graph), cheater):
        worst = max(check_bob_view_blindness(list(pair), bob, seed=seed).half_trace_distance for pair in pairs)
        reports.append(CheckReport.make("blindness_bob_view", {"bob": bob.name, "pairs": len(pairs)}, seed,
                                        worst, DERIVED_TOL, bob=bob.name))
    return reports


def _suite_security(config: ExperimentConfig, seed: int) -> List[CheckReport]:
    reports = []
    devices = [HONEST_DEVICE, cheating_device("always_accept", output_state="1"), cheating_device("trap_blind")]
    for graph, program in (wire_pattern([]), wire_pattern([0.4])):
        n = 3 * graph.vertex_count
        result = check_security_verify(strategy_library(n), program, graph, devices, seed=seed)
        for row in result.rows:
            tol = 1e-6 if row.device == "honest" else DERIVED_TOL
            reports.append(CheckReport.make("security_verify", {"N": n, "strategy": row.strategy, "device": row.device},
                                            seed, row.measured, row.bound, tol, N=n, strategy=row.strategy,
                                            device=row.device, delta=row.delta, alpha_real=row.alpha_real,
                                            alpha_ideal=row.alpha_ideal))
    return reports


def _suite_composition(config: ExperimentConfig, seed: int) -> List[CheckReport]:
    trials = config.trials_or(COMPOSITION_TRIALS)
    reports = []
    for check in (serial_composition_check, parallel_composition_check):
        result = check(trials=trials, seed=seed)
        worst = max(result.cases, key=lambda c: c.composed - c.eps - c.eps_prime, default=None)
        measured = worst.composed if worst else 0.0
        bound = worst.eps + worst.eps_prime if worst else 0.0
        reports.append(CheckReport.make(result.check, {"trials": trials}, seed, measured, bound, DERIVED_TOL,
                                        cases=len(result.cases), failures=[c.index for c in result.failures]))
    return reports


def _suite_nosignaling(config: ExperimentConfig, seed: int) -> List[CheckReport]:
    trials = config.trials_or(NOSIGNALING_TRIALS)
    backend = "planted" if config.planted else "quantum"
    honest = nosignaling_batches(NOSIGNALING_BATCHES, trials, seed, backend=backend)
    control = nosignaling_batches(NOSIGNALING_BATCHES, trials, seed + 1, backend="planted")
    return [
        CheckReport.make("nosignaling", {"trials": trials, "backend": backend}, seed, honest.rejections,
                         NOSIGNALING_MAX_REJECTIONS, backend=backend),
        CheckReport.make("nosignaling_planted_control", {"trials": trials}, seed + 1, 1 - control.observed_power,
                         1 - PLANTED_MIN_POWER, analytic_power=control.analytic_power),
    ]


SUITE_RUNNERS: Dict[str, Callable[[ExperimentConfig, int], List[CheckReport]]] = {
    "correctness": _suite_correctness,
    "blindness": _suite_blindness,
    "security": _suite_security,
    "composition": _suite_composition,
    "nosignaling": _suite_nosignaling,
}


def cmd_certify(config: ExperimentConfig) -> int:
    names = SUITES if config.suite == "all" else (config.suite,)
    reports: List[CheckReport] = []
    for i, name in enumerate(names):
        log_message("brain", f"certify {name}")
        reports += SUITE_RUNNERS[name](config, config.seed + i)
    passed = all(r.passed for r in reports)
    document = {
        "suite": config.suite,
        "seed": config.seed,
        "config_hash": config.config_hash,
        "tool_version": TOOL_VERSION,
        "checks": [r.to_json() for r in reports],
        "pass": passed,
    }
    path = config.out or f"certify_{config.suite}_{config.seed}.json"
    write_json(path, document)
    for r in reports:
        if not r.passed:
            log_message("error", f"{r.check} failed: {r.measured:.3e} > {r.bound:.3e} ({r.details})")
    log_message("check", f"certify {config.suite}: {sum(r.passed for r in reports)}/{len(reports)} checks pass")
    return 0 if passed else 1
