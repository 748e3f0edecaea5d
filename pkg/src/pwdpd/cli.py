"""Command-line front end.

Subcommands compose through the documented file formats (IQ pairs with JSON
sidecars, plant/partition/model JSON, CSV traces). Exit codes: 0 success,
2 configuration error, 3 numerical degeneracy, 4 learning divergence. The
output root for scenario bundles defaults to the PWDPD_OUT environment
variable, then the current directory.
"""

from __future__ import annotations

import argparse
import json
import os
import sys
import traceback
from importlib import resources
from pathlib import Path

import numpy as np

from . import complexity as complexity_mod
from .basis import BasisSpec
from .dpd import load_model, save_model, trace_to_csv
from .errors import AlignmentError, ConfigError, DegenerateRegionError, DemodulationError, DivergenceError
from .metrics import aclr_single_direction
from .partition import RegionPartition
from .plant import load_plant, steer
from .presets import PLANT_PRESETS, load_plant_preset, preset_params
from .scenarios import (derive_partition, evaluate, preset_ofdm_from, run_scenario,
                        train_method)
from .signals import read_iq, write_iq
from .waveform import OfdmConfig, crest_factor_reduce, generate_ofdm, papr_ccdf

EXIT_CONFIG = 2
EXIT_DEGENERATE = 3
EXIT_DIVERGED = 4


def _out_root(args) -> Path:
    if getattr(args, "out", None):
        return Path(args.out)
    return Path(os.environ.get("PWDPD_OUT", "."))


def scenario_preset(name: str) -> dict:
    ref = resources.files("pwdpd").joinpath(f"presets/scenarios/{name}.json")
    if not ref.is_file():
        have = sorted(p.name[:-5] for p in
                      resources.files("pwdpd").joinpath("presets/scenarios").iterdir())
        raise ConfigError(f"unknown scenario preset {name!r}; have {have}")
    return json.loads(ref.read_text())


def _load_config(args) -> dict:
    if args.config and args.preset:
        raise ConfigError("give either --config or --preset, not both")
    if args.config:
        return json.loads(Path(args.config).read_text())
    if args.preset:
        return scenario_preset(args.preset)
    raise ConfigError("a scenario needs --config FILE or --preset NAME")


def cmd_generate(args) -> int:
    cfg = OfdmConfig(
        subcarrier_spacing=args.scs, fft_size=args.fft, active_subcarriers=args.active,
        oversampling=args.oversampling, num_symbols=args.symbols,
        constellation=args.constellation, cp_fraction=args.cp_fraction,
        wola_taper_samples=args.wola, seed=args.seed)
    sig, grid = generate_ofdm(cfg)
    if args.cfr_target is not None:
        sig = crest_factor_reduce(sig, args.cfr_target, args.cfr_iterations,
                                  occupied_bandwidth=cfg.occupied_bandwidth)
    stem = Path(args.output)
    write_iq(stem, sig)
    np.save(str(stem) + ".grid.npy", grid)
    stats = papr_ccdf(sig, [0.01, 0.0001])
    print(f"wrote {stem}.iq ({len(sig)} samples at {sig.sample_rate / 1e6:.2f} MHz, "
          f"occupied {cfg.occupied_bandwidth / 1e6:.2f} MHz)")
    for p, level in stats:
        print(f"PAPR @ {p:g}: {level:.2f} dB")
    return 0


def _resolve_plant(spec: str):
    if spec in PLANT_PRESETS:
        return load_plant_preset(spec), preset_params(spec)
    return load_plant(spec), None


def cmd_simulate(args) -> int:
    plant, params = _resolve_plant(args.plant)
    if args.coupling_strength is not None:
        from dataclasses import replace
        plant = replace(plant, coupling_strength=args.coupling_strength)
    if args.angle:
        plant = steer(plant, args.angle)
    sig = read_iq(args.input)
    if args.drive_rms:
        sig = sig.scaled_to_rms(args.drive_rms)
    from .plant import array_forward, observation_receive
    per_element, combined = array_forward(plant, sig)
    rng = np.random.default_rng(args.seed)
    z = observation_receive(plant, per_element, args.noise_floor, rng)
    write_iq(Path(args.output), z)
    print(f"wrote {args.output}.iq ({len(z)} samples)")
    if args.channel_bw or params:
        bw = args.channel_bw or params["channel_bw"]
        print(f"observation ACLR: {aclr_single_direction(z, bw):.2f} dBc")
    return 0


def cmd_partition(args) -> int:
    plant, params = _resolve_plant(args.plant)
    if params is None:
        raise ConfigError("partition needs a named preset (drive level and waveform)")
    ofdm = preset_ofdm_from(params)
    part, info = derive_partition(plant, params, ofdm, seed=args.seed,
                                  method=args.method, order=args.order,
                                  target_error=args.target_error,
                                  n_regions=args.regions)
    if args.output:
        part.save(args.output)
    print(f"{info['method']} partition, K = {part.n_regions} "
          f"(fit residual {info['fit_residual']:.4f})")
    print(f"{'region':>6} {'u_k':>10} {'v_k':>10} {'share':>8} {'Q_k':>5}")
    for k in range(part.n_regions):
        order = part.orders[k] if part.orders else "-"
        print(f"{k:>6} {part.edges[k]:>10.4f} {part.edges[k + 1]:>10.4f} "
              f"{info['sample_share'][k]:>8.3f} {order:>5}")
    return 0


def cmd_train(args) -> int:
    plant, params = _resolve_plant(args.plant)
    if params is None:
        raise ConfigError("train needs a named preset")
    config = {
        "basis": {"family": args.family, "max_order": args.order,
                  "memory_depth": args.memory, "cross_memory_depth": args.cross_memory},
        "learn": {"mu": args.mu, "block_size": args.block_size,
                  "iterations": args.iterations, "prune_threshold_db": args.prune},
        "ila": {"iterations": args.iterations, "block_size": args.block_size},
    }
    spec_single = BasisSpec(args.family, args.order, args.memory, args.cross_memory)
    partitions = {}
    if args.method.startswith("pw"):
        if args.partition:
            partitions["taylor"] = RegionPartition.load(args.partition)
            partitions["kmeans"] = partitions["taylor"]
        else:
            ofdm = preset_ofdm_from(params)
            partitions["taylor"], _ = derive_partition(plant, params, ofdm, seed=args.seed)
    model, trace = train_method(args.method, plant, params, config, spec_single,
                                partitions, seed=args.seed)
    save_model(model, args.output)
    trace_to_csv(trace, str(args.output) + ".trace.csv")
    last = trace[-1] if trace else None
    print(f"wrote {args.output}.dpd.json/.bin "
          f"({int(model.active_mask.sum())}/{model.gamma.size} active coefficients)")
    if last:
        print(f"final error power: {last.error_power_dbc:.2f} dBc")
    return 0


def cmd_evaluate(args) -> int:
    plant, params = _resolve_plant(args.plant)
    if params is None:
        raise ConfigError("evaluate needs a named preset")
    model = load_model(args.model) if args.model else None
    ofdm_eval = preset_ofdm_from(params, num_symbols=args.symbols)
    angles = np.arange(-50.0, 50.01, 2.0) if args.trp else None
    res = evaluate(plant, params, ofdm_eval, model, seed=args.seed, trp_angles=angles,
                   noise_floor_dbc=params.get("noise_floor_dbc"),
                   noise_averages=args.noise_averages)
    print(json.dumps({k: round(v, 4) for k, v in res.metrics.items()},
                     indent=2, sort_keys=True))
    if args.output:
        Path(args.output).write_text(json.dumps(res.metrics, indent=2, sort_keys=True) + "\n")
    return 0


def cmd_complexity(args) -> int:
    if args.preset == "reference" or args.params is None:
        params = complexity_mod.reference_params()
    else:
        params = complexity_mod.ComplexityParams(**json.loads(Path(args.params).read_text()))
    ledger = complexity_mod.full_ledger(params, exact_division=args.exact_division)
    print(complexity_mod.format_ledger(ledger))
    if args.json_out:
        Path(args.json_out).write_text(json.dumps(ledger, indent=2, sort_keys=True) + "\n")
    return 0


def _run_bundle(config: dict, outdir: Path, workers: int) -> dict:
    """Run a scenario, leaving a machine-readable error record on failure."""
    try:
        return run_scenario(config, outdir, workers=workers)
    except Exception as exc:
        outdir.mkdir(parents=True, exist_ok=True)
        record = {"error": type(exc).__name__, "message": str(exc), "config": config}
        (outdir / "error.json").write_text(json.dumps(record, indent=2, sort_keys=True) + "\n")
        raise


def cmd_scenario(args) -> int:
    config = _load_config(args)
    outdir = _out_root(args) / (args.name or config.get("kind", "scenario"))
    payload = _run_bundle(config, outdir, args.workers)
    print(f"bundle written to {outdir}")
    summary = {"kind": payload.get("kind")}
    if "methods" in payload:
        summary["aclr_dbc"] = {m: round(v["aclr_dbc"], 2) for m, v in payload["methods"].items()}
    print(json.dumps(summary, indent=2, sort_keys=True))
    return 0


def cmd_sweep(args) -> int:
    config = _load_config(args)
    if config.get("kind") not in ("powersweep", "anglesweep"):
        raise ConfigError("sweep expects a powersweep or anglesweep config")
    outdir = _out_root(args) / (args.name or config["kind"])
    _run_bundle(config, outdir, args.workers)
    print(f"bundle written to {outdir}")
    return 0


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="pwdpd",
                                     description="piecewise closed-loop DPD workbench")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("generate", help="generate an OFDM excitation")
    p.add_argument("--scs", type=float, default=120e3)
    p.add_argument("--fft", type=int, default=4096)
    p.add_argument("--active", type=int, default=3168)
    p.add_argument("--oversampling", type=int, default=5)
    p.add_argument("--symbols", type=int, default=1)
    p.add_argument("--constellation", default="64QAM")
    p.add_argument("--cp-fraction", type=float, default=0.07)
    p.add_argument("--wola", type=int, default=256)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--cfr-target", type=float, default=None, help="PAPR target in dB")
    p.add_argument("--cfr-iterations", type=int, default=10)
    p.add_argument("--output", required=True, help="output stem")
    p.set_defaults(func=cmd_generate)

    p = sub.add_parser("simulate", help="run a signal through a plant")
    p.add_argument("--plant", required=True, help="preset name or plant JSON path")
    p.add_argument("--input", required=True)
    p.add_argument("--output", required=True)
    p.add_argument("--drive-rms", type=float, default=None)
    p.add_argument("--angle", type=float, default=0.0)
    p.add_argument("--coupling-strength", type=float, default=None)
    p.add_argument("--noise-floor", type=float, default=None, help="dBc")
    p.add_argument("--channel-bw", type=float, default=None)
    p.add_argument("--seed", type=int, default=0)
    p.set_defaults(func=cmd_simulate)

    p = sub.add_parser("partition", help="derive an amplitude partition")
    p.add_argument("--plant", required=True)
    p.add_argument("--method", choices=["taylor", "kmeans"], default="taylor")
    p.add_argument("--order", type=int, default=5)
    p.add_argument("--target-error", type=float, default=0.01)
    p.add_argument("--regions", type=int, default=None, help="K for kmeans")
    p.add_argument("--seed", type=int, default=17)
    p.add_argument("--output", default=None)
    p.set_defaults(func=cmd_partition)

    p = sub.add_parser("train", help="train a DPD model against a preset plant")
    p.add_argument("--plant", required=True)
    p.add_argument("--method", default="pwcl_orth")
    p.add_argument("--family", default="full_dual_input")
    p.add_argument("--order", type=int, default=9)
    p.add_argument("--memory", type=int, default=3)
    p.add_argument("--cross-memory", type=int, default=2)
    p.add_argument("--mu", type=float, default=1.0)
    p.add_argument("--block-size", type=int, default=20000)
    p.add_argument("--iterations", type=int, default=10)
    p.add_argument("--prune", type=float, default=None, help="threshold in dB")
    p.add_argument("--partition", default=None, help="partition JSON path")
    p.add_argument("--seed", type=int, default=7)
    p.add_argument("--output", required=True, help="model stem")
    p.set_defaults(func=cmd_train)

    p = sub.add_parser("evaluate", help="evaluate a model (or the bare plant)")
    p.add_argument("--plant", required=True)
    p.add_argument("--model", default=None, help="model stem from train")
    p.add_argument("--symbols", type=int, default=4)
    p.add_argument("--trp", action="store_true", help="include the TRP angle sweep")
    p.add_argument("--noise-averages", type=int, default=1)
    p.add_argument("--seed", type=int, default=777)
    p.add_argument("--output", default=None)
    p.set_defaults(func=cmd_evaluate)

    p = sub.add_parser("complexity", help="print the FLOP ledger")
    p.add_argument("--preset", default="reference")
    p.add_argument("--params", default=None, help="JSON file with ComplexityParams fields")
    p.add_argument("--exact-division", action="store_true",
                   help="evaluate pruned cells without per-region ceilings")
    p.add_argument("--json-out", default=None)
    p.set_defaults(func=cmd_complexity)

    for name, help_text in (("scenario", "run a scenario bundle"),
                            ("sweep", "run a sweep scenario")):
        p = sub.add_parser(name, help=help_text)
        p.add_argument("--config", default=None, help="scenario config JSON")
        p.add_argument("--preset", default=None, help="shipped scenario preset name")
        p.add_argument("--out", default=None, help="output root (default $PWDPD_OUT or .)")
        p.add_argument("--name", default=None, help="bundle directory name")
        p.add_argument("--workers", type=int, default=1)
        p.set_defaults(func=cmd_scenario if name == "scenario" else cmd_sweep)

    return parser


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        return args.func(args)
    except (ConfigError, DemodulationError, FileNotFoundError, json.JSONDecodeError) as exc:
        print(f"configuration error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except (DegenerateRegionError, AlignmentError) as exc:
        print(f"numerical degeneracy: {exc}", file=sys.stderr)
        return EXIT_DEGENERATE
    except DivergenceError as exc:
        print(f"learning diverged: {exc}", file=sys.stderr)
        return EXIT_DIVERGED
    except Exception:
        traceback.print_exc()
        return 1


if __name__ == "__main__":
    sys.exit(main())
