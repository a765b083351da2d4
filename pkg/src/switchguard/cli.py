"""Command line interface: validate, synth, norm, simulate, attack, example.

Configs and result bundles are JSON (matrices as row-major nested lists),
traces are CSV.  Exit codes: 0 ok, 2 input error, 3 infeasible,
4 numerical failure.  All commands are deterministic under a fixed seed;
SWITCHGUARD_THREADS caps the sampling parallelism.
"""
from __future__ import annotations

import argparse
import csv
import json
import os
import sys
from concurrent.futures import ThreadPoolExecutor

import numpy as np

from . import __version__, demo
from . import operator_core as oc
from .lp_solver import LpNumericalError, format_lp
from .simulate import Scenario, attack_search, make_trace, worst_case_inputs
from .switched_model import (ChannelPlant, SwitchingAutomaton, SwitchingFIR,
                             build_modes)
from .synthesis import (SynthesisConfig, SynthesisInfeasibleError, SynthesisResult,
                        certify, performance_operator, residual_operator, synthesize)

EXIT_OK = 0
EXIT_INPUT = 2
EXIT_INFEASIBLE = 3
EXIT_NUMERICAL = 4


class ConfigError(ValueError):
    """Schema or dimension problem, carrying the offending field path."""

    def __init__(self, path: str, message: str):
        super().__init__(f"{path}: {message}")
        self.path = path


# ---------------------------------------------------------------- config I/O

def _expect(cond: bool, path: str, message: str) -> None:
    if not cond:
        raise ConfigError(path, message)


def _matrix(value, path: str) -> np.ndarray:
    _expect(isinstance(value, list) and value and all(isinstance(r, list) for r in value),
            path, "expected a non-empty nested list (matrix)")
    width = len(value[0])
    _expect(all(len(r) == width for r in value), path, "rows have unequal lengths")
    try:
        return np.array(value, dtype=float)
    except (TypeError, ValueError):
        raise ConfigError(path, "matrix entries must be numbers") from None


def parse_problem(cfg: dict):
    """Validate a config mapping and build the problem objects."""
    _expect(isinstance(cfg, dict), "$", "config must be a JSON object")
    for key in ("plant", "attack", "synthesis"):
        _expect(key in cfg, key, "missing section")

    pc = cfg["plant"]
    A = _matrix(pc.get("A"), "plant.A")
    _expect(A.shape[0] == A.shape[1], "plant.A", f"must be square, got {A.shape}")
    B = _matrix(pc.get("B"), "plant.B")
    _expect(B.shape[0] == A.shape[0], "plant.B",
            f"needs {A.shape[0]} rows, got {B.shape[0]}")
    raw_channels = pc.get("channels")
    _expect(isinstance(raw_channels, list) and raw_channels,
            "plant.channels", "expected a non-empty list")
    channels = []
    for i, ch in enumerate(raw_channels):
        C_i = _matrix(ch.get("C"), f"plant.channels[{i}].C")
        D_i = _matrix(ch.get("D"), f"plant.channels[{i}].D")
        _expect(C_i.shape[1] == A.shape[0], f"plant.channels[{i}].C",
                f"needs {A.shape[0]} columns, got {C_i.shape[1]}")
        _expect(D_i.shape == (C_i.shape[0], B.shape[1]), f"plant.channels[{i}].D",
                f"needs shape {(C_i.shape[0], B.shape[1])}, got {D_i.shape}")
        channels.append((C_i, D_i))
    x0_bound = float(pc.get("x0_bound", 1.0))
    _expect(x0_bound >= 0.0, "plant.x0_bound", "must be nonnegative")
    plant = ChannelPlant(A=A, B=B, channels=tuple(channels), x0_bound=x0_bound)

    ac = cfg["attack"]
    patterns = ac.get("patterns")
    _expect(isinstance(patterns, list) and patterns, "attack.patterns",
            "expected a non-empty list of delivered-channel sets")
    N = plant.channel_count
    for i, pat in enumerate(patterns):
        _expect(isinstance(pat, list), f"attack.patterns[{i}]", "expected a list")
        for c in pat:
            _expect(isinstance(c, int) and 1 <= c <= N, f"attack.patterns[{i}]",
                    f"channel numbers must lie in 1..{N}")
    _expect(sorted(patterns[0]) == list(range(1, N + 1)), "attack.patterns[0]",
            "pattern 0 must deliver all channels")
    model = build_modes(plant, [set(p) for p in patterns])

    mode_count = len(patterns)
    raw_auto = ac.get("automaton", "complete")
    padding = int(ac.get("padding_mode", 0))
    _expect(0 <= padding < mode_count, "attack.padding_mode",
            f"must lie in 0..{mode_count - 1}")
    if raw_auto == "complete":
        allowed = None
    else:
        allowed_mat = _matrix(raw_auto, "attack.automaton")
        _expect(allowed_mat.shape == (mode_count, mode_count), "attack.automaton",
                f"must be {mode_count}x{mode_count}")
        allowed = allowed_mat != 0.0
    initial = ac.get("initial")
    if initial is not None:
        _expect(isinstance(initial, list) and initial, "attack.initial",
                "expected a non-empty list of mode indices")
        for m in initial:
            _expect(isinstance(m, int) and 0 <= m < mode_count, "attack.initial",
                    f"mode indices must lie in 0..{mode_count - 1}")
    automaton = SwitchingAutomaton(mode_count, allowed=allowed, initial=initial,
                                   padding_mode=padding)

    sc = cfg["synthesis"]
    try:
        syncfg = SynthesisConfig(
            memory=int(sc.get("M", 1)),
            fir_length=int(sc.get("N", 5)),
            mode=str(sc.get("mode", "exact")),
            eps_bar=float(sc.get("eps_bar", 0.0)),
            verify_horizon=int(sc.get("verify_horizon", 30)),
            verify_samples=int(sc.get("verify_samples", 20)),
        )
    except (TypeError, ValueError) as exc:
        raise ConfigError("synthesis", str(exc)) from None

    seed = int(cfg.get("seed", 0))
    return plant, model, automaton, syncfg, seed


def load_config(path: str) -> dict:
    try:
        with open(path, "r", encoding="utf-8") as fh:
            return json.load(fh)
    except FileNotFoundError:
        raise ConfigError(path, "file not found") from None
    except json.JSONDecodeError as exc:
        raise ConfigError(path, f"invalid JSON: {exc}") from None


# ---------------------------------------------------------------- bundle I/O

def _fir_to_json(fir: SwitchingFIR) -> dict:
    return {
        "memory": fir.memory,
        "fir_length": fir.fir_length,
        "in_dim": fir.in_dim,
        "out_dim": fir.out_dim,
        "output_only": fir.output_only,
        "entries": [
            {"history": list(hist), "lag": lag, "matrix": mat.tolist()}
            for (hist, lag), mat in sorted(fir.coeffs.items())
        ],
    }


def _fir_from_json(data: dict) -> SwitchingFIR:
    coeffs = {(tuple(e["history"]), int(e["lag"])): np.array(e["matrix"], dtype=float)
              for e in data["entries"]}
    return SwitchingFIR(int(data["memory"]), int(data["fir_length"]),
                        int(data["in_dim"]), int(data["out_dim"]), coeffs,
                        output_only=bool(data.get("output_only", False)))


def bundle_from_result(config: dict, result: SynthesisResult, report: dict) -> dict:
    return {
        "tool": f"switchguard {__version__}",
        "config": config,
        "status": result.status,
        "mode": result.mode,
        "gamma_bar": result.gamma_bar,
        "eps_achieved": result.eps_achieved,
        "certified_bound": result.certified_bound,
        "lag0_margin": result.lag0_margin,
        "Q": _fir_to_json(result.Q),
        "Z": _fir_to_json(result.Z),
        "T": _fir_to_json(result.T),
        "certification": report,
    }


def result_from_bundle(bundle: dict) -> SynthesisResult:
    return SynthesisResult(
        gamma_bar=float(bundle["gamma_bar"]),
        eps_achieved=float(bundle["eps_achieved"]),
        certified_bound=float(bundle["certified_bound"]),
        Q=_fir_from_json(bundle["Q"]),
        Z=_fir_from_json(bundle["Z"]),
        T=_fir_from_json(bundle["T"]),
        status=str(bundle["status"]),
        mode=str(bundle["mode"]),
        lag0_margin=float(bundle["lag0_margin"]),
    )


def load_bundle(path: str):
    bundle = load_config(path)
    for key in ("config", "Q", "Z", "T", "gamma_bar"):
        _expect(key in bundle, key, "missing bundle field")
    plant, model, automaton, syncfg, seed = parse_problem(bundle["config"])
    return bundle, result_from_bundle(bundle), plant, model, automaton, syncfg, seed


def _write_json(path: str, payload: dict) -> None:
    with open(path, "w", encoding="utf-8") as fh:
        json.dump(payload, fh, indent=1, sort_keys=True)
        fh.write("\n")


def _worker_count() -> int:
    raw = os.environ.get("SWITCHGUARD_THREADS", "")
    try:
        return max(1, int(raw))
    except ValueError:
        return 1


# ----------------------------------------------------------------- commands

def cmd_validate(args) -> int:
    cfg = load_config(args.config)
    plant, model, automaton, syncfg, _ = parse_problem(cfg)
    print(f"ok: {plant.n} states, {plant.channel_count} channels "
          f"({model.p} stacked outputs), {model.mode_count} modes, "
          f"M={syncfg.memory} N={syncfg.fir_length} mode={syncfg.mode}")
    return EXIT_OK


def cmd_synth(args) -> int:
    cfg = load_config(args.config)
    if args.mode:
        cfg.setdefault("synthesis", {})["mode"] = args.mode
    if args.eps is not None:
        cfg.setdefault("synthesis", {})["eps_bar"] = args.eps
    if args.fir is not None:
        cfg.setdefault("synthesis", {})["N"] = args.fir
    plant, model, automaton, syncfg, seed = parse_problem(cfg)
    if args.dump_lp:
        from .synthesis import (assemble_lp, build_performance_rows,
                                build_residual_rows, decision_variables)
        variables = decision_variables(automaton, syncfg, plant.n, model.p)
        lp = assemble_lp(build_residual_rows(plant, model, automaton, syncfg, variables),
                         build_performance_rows(plant, model, automaton, syncfg, variables),
                         syncfg, variables)
        with open(args.dump_lp, "w", encoding="utf-8") as fh:
            fh.write(format_lp(lp, name="estimator synthesis"))
        print(f"wrote LP dump to {args.dump_lp}")
    result = synthesize(plant, model, automaton, syncfg)
    report = certify(plant, model, automaton, syncfg, result, seed=seed)
    out = args.out or "bundle.json"
    _write_json(out, bundle_from_result(cfg, result, report))
    print(f"gamma_bar        = {result.gamma_bar:.6f}")
    print(f"eps_achieved     = {result.eps_achieved:.3e}")
    print(f"certified_bound  = {result.certified_bound:.6f}")
    print(f"bundle written to {out}")
    return EXIT_OK


def _parse_sigma(text: str, mode_count: int) -> tuple[int, ...]:
    try:
        sigma = tuple(int(tok) for tok in text.split(",") if tok.strip() != "")
    except ValueError:
        raise ConfigError("--sigma", "expected comma-separated mode indices") from None
    _expect(len(sigma) > 0, "--sigma", "empty sequence")
    for m in sigma:
        _expect(0 <= m < mode_count, "--sigma", f"mode {m} outside 0..{mode_count - 1}")
    return sigma


def cmd_norm(args) -> int:
    _, result, plant, model, automaton, syncfg, seed = load_bundle(args.bundle)
    sigmas = []
    if args.sigma:
        sigmas.append(_parse_sigma(args.sigma, model.mode_count))
    else:
        rng = np.random.default_rng(seed)
        H = args.horizon or syncfg.verify_horizon
        for _ in range(args.samples):
            sigmas.append(automaton.random_sequence(H, rng))

    def evaluate(sigma):
        H = len(sigma)
        E = residual_operator(plant, result.Q, result.Z, model, sigma, H,
                              automaton.padding_mode)
        Phi = performance_operator(plant, result.Q, result.Z, model, sigma, H,
                                   automaton.padding_mode)
        return oc.induced_norm(E), oc.induced_norm(Phi)

    workers = _worker_count()
    if workers > 1 and len(sigmas) > 1:
        with ThreadPoolExecutor(max_workers=workers) as pool:
            norms = list(pool.map(evaluate, sigmas))
    else:
        norms = [evaluate(s) for s in sigmas]

    writer = csv.writer(sys.stdout)
    writer.writerow(["sigma", "eps", "gamma"])
    for sigma, (eps, gam) in zip(sigmas, norms):
        writer.writerow(["".join(map(str, sigma)), f"{eps:.12g}", f"{gam:.12g}"])
    return EXIT_OK


def _load_scenario(path: str, plant: ChannelPlant) -> Scenario:
    data = load_config(path)
    for key in ("sigma", "w"):
        _expect(key in data, f"scenario.{key}", "missing field")
    w = _matrix(data["w"], "scenario.w")
    sigma = tuple(int(m) for m in data["sigma"])
    x0 = np.array(data.get("x0", [0.0] * plant.n), dtype=float)
    return Scenario(sigma=sigma, w=oc.Signal(w), x0=x0, horizon=len(sigma),
                    x0_time=int(data.get("x0_time", 0)))


def cmd_simulate(args) -> int:
    _, result, plant, model, automaton, syncfg, _ = load_bundle(args.bundle)
    if args.scenario:
        scenario = _load_scenario(args.scenario, plant)
        scenario.validate(plant)
        predicted = None
    else:
        H = args.horizon or syncfg.verify_horizon
        sigma = (_parse_sigma(args.sigma, model.mode_count) if args.sigma
                 else (automaton.padding_mode,) * H)
        scenario, predicted = worst_case_inputs(plant, model, result, sigma,
                                                len(sigma), automaton.padding_mode)
    trace = make_trace(plant, model, result, scenario, automaton.padding_mode)
    if args.trace:
        with open(args.trace, "w", newline="", encoding="utf-8") as fh:
            writer = csv.writer(fh)
            header = (["t", "sigma"]
                      + [f"x_{i}" for i in range(plant.n)]
                      + [f"y_{j}" for j in range(model.p)]
                      + [f"xhat_{i}" for i in range(plant.n)]
                      + [f"e_{i}" for i in range(plant.n)])
            writer.writerow(header)
            for t in range(scenario.horizon):
                writer.writerow([t, scenario.sigma[t]]
                                + [f"{v:.12g}" for v in trace.x.samples[t]]
                                + [f"{v:.12g}" for v in trace.y_a.samples[t]]
                                + [f"{v:.12g}" for v in trace.x_hat.samples[t]]
                                + [f"{v:.12g}" for v in trace.e.samples[t]])
        print(f"trace written to {args.trace}")
    print(f"sup_error = {trace.sup_error:.9f}")
    if predicted is not None:
        print(f"predicted worst-case value = {predicted:.9f}")
    return EXIT_OK


def cmd_attack(args) -> int:
    _, result, plant, model, automaton, _, _ = load_bundle(args.bundle)
    sigma, value = attack_search(plant, model, result, automaton, args.horizon,
                                 strategy=args.strategy)
    print(f"sigma*  = {''.join(map(str, sigma))}")
    print(f"value   = {value:.9f}")
    print(f"certified_bound = {result.certified_bound:.9f}")
    return EXIT_OK


def _tap_diff(fir: SwitchingFIR, reference, history) -> float:
    worst = 0.0
    for k, ref in enumerate(reference):
        worst = max(worst, float(np.max(np.abs(fir.tap(history, k) - ref))))
    return worst


def cmd_example(args) -> int:
    plant = demo.demo_plant()

    nom_model = demo.nominal_model()
    nom_auto = demo.nominal_automaton()
    nom_cfg = demo.nominal_synthesis_config()
    nominal = synthesize(plant, nom_model, nom_auto, nom_cfg)

    sw_model = demo.demo_model()
    sw_auto = demo.demo_automaton()
    sw_cfg = demo.switching_synthesis_config()
    switching = synthesize(plant, sw_model, sw_auto, sw_cfg)
    relaxed_cfg = SynthesisConfig(memory=sw_cfg.memory, fir_length=sw_cfg.fir_length,
                                  mode="relaxed", eps_bar=0.1)
    try:
        relaxed = synthesize(plant, sw_model, sw_auto, relaxed_cfg)
        relaxed_line = (f"relaxed attempt (eps_bar=0.1): gamma_bar = {relaxed.gamma_bar:.4f}, "
                        f"certified bound = {relaxed.certified_bound:.4f}")
        relaxed_json = {"gamma_bar": relaxed.gamma_bar,
                        "certified_bound": relaxed.certified_bound,
                        "eps_achieved": relaxed.eps_achieved}
    except SynthesisInfeasibleError:
        relaxed_line = "relaxed attempt (eps_bar=0.1): infeasible"
        relaxed_json = None

    nominal_ok = abs(nominal.gamma_bar - demo.REFERENCE_NOMINAL_COST) \
        <= 0.01 * demo.REFERENCE_NOMINAL_COST
    switching_ok = switching.gamma_bar <= demo.REFERENCE_SWITCHING_COST * 1.01

    diff_nom = _tap_diff(nominal.T, demo.REFERENCE_NOMINAL_TAPS, (0,))
    diff_sw = {j: _tap_diff(switching.T, demo.REFERENCE_SWITCHING_TAPS[j], (j,))
               for j in (0, 1)}

    if args.json:
        payload = {
            "nominal": {"reference": demo.REFERENCE_NOMINAL_COST,
                        "gamma_bar": nominal.gamma_bar,
                        "eps_achieved": nominal.eps_achieved,
                        "met": nominal_ok,
                        "tap_diff": diff_nom},
            "switching": {"reference": demo.REFERENCE_SWITCHING_COST,
                          "gamma_bar": switching.gamma_bar,
                          "eps_achieved": switching.eps_achieved,
                          "met": switching_ok,
                          "tap_diff": {str(k): v for k, v in diff_sw.items()},
                          "relaxed": relaxed_json},
            "label_assumption": "reference table 1 ~ mode 0 (nominal), table 2 ~ mode 1 (attack)",
        }
        json.dump(payload, sys.stdout, indent=1, sort_keys=True)
        sys.stdout.write("\n")
    else:
        print(f"nominal:   reference 5.0275 vs ours {nominal.gamma_bar:.4f} "
              f"[{'ok' if nominal_ok else 'MISS'}]")
        print(f"switching: reference 32.5 vs ours {switching.gamma_bar:.4f} "
              f"[{'ok' if switching_ok else 'MISS'}] (exact mode)")
        print(relaxed_line)
        print("informational tap diff vs reference tables "
              "(optima need not be unique; references are rounded):")
        print(f"  nominal max|dT| = {diff_nom:.3f}")
        print(f"  switching max|dT| mode 0 = {diff_sw[0]:.3f}, mode 1 = {diff_sw[1]:.3f}")
        print("  label assumption: table 1 ~ mode 0 (nominal), table 2 ~ mode 1 (attack)")
    return EXIT_OK if (nominal_ok and switching_ok) else 1


# --------------------------------------------------------------------- main

def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="switchguard",
        description="Synthesize and stress-test DoS-resilient state estimators.")
    parser.add_argument("--version", action="version", version=f"switchguard {__version__}")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("validate", help="check a problem config")
    p.add_argument("config")
    p.set_defaults(func=cmd_validate)

    p = sub.add_parser("synth", help="run the synthesis and write a bundle")
    p.add_argument("config")
    p.add_argument("--out", help="bundle output path (default bundle.json)")
    p.add_argument("--mode", choices=["exact", "relaxed"])
    p.add_argument("--eps", type=float, help="relaxation bound override")
    p.add_argument("--fir", type=int, help="FIR length override")
    p.add_argument("--dump-lp", help="write the assembled LP in text format")
    p.set_defaults(func=cmd_synth)

    p = sub.add_parser("norm", help="residual/performance norms along sequences")
    p.add_argument("bundle")
    p.add_argument("--sigma", help="comma-separated mode sequence")
    p.add_argument("--samples", type=int, default=10)
    p.add_argument("--horizon", type=int)
    p.set_defaults(func=cmd_norm)

    p = sub.add_parser("simulate", help="run a scenario or the worst-case inputs")
    p.add_argument("bundle")
    p.add_argument("--scenario", help="scenario JSON file")
    p.add_argument("--worst", action="store_true",
                   help="construct worst-case inputs (default when no scenario)")
    p.add_argument("--sigma", help="attack sequence for --worst")
    p.add_argument("--horizon", type=int)
    p.add_argument("--trace", help="write the trace CSV here")
    p.set_defaults(func=cmd_simulate)

    p = sub.add_parser("attack", help="search for the worst attack sequence")
    p.add_argument("bundle")
    p.add_argument("--horizon", type=int, default=12)
    p.add_argument("--strategy", choices=["exhaustive", "greedy"], default="exhaustive")
    p.set_defaults(func=cmd_attack)

    p = sub.add_parser("example", help="run the bundled benchmark reproduction")
    p.add_argument("--json", action="store_true")
    p.set_defaults(func=cmd_example)
    return parser


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        return args.func(args)
    except ConfigError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_INPUT
    except SynthesisInfeasibleError as exc:
        print(f"infeasible: {exc}", file=sys.stderr)
        return EXIT_INFEASIBLE
    except (LpNumericalError, np.linalg.LinAlgError) as exc:
        print(f"numerical failure: {exc}", file=sys.stderr)
        return EXIT_NUMERICAL
    except ValueError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_INPUT


if __name__ == "__main__":
    raise SystemExit(main())
