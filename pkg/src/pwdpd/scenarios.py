"""Config-driven experiment pipelines and their output bundles.

Every scenario is deterministic given its seed: waveform seeds, learning
block seeds, and observation noise all derive from the config. A run writes
its artifacts plus a manifest.json listing each file with a sha256 checksum,
so identical configs produce identical bundles.
"""

from __future__ import annotations

import hashlib
import json
import math
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, replace
from pathlib import Path

import numpy as np

from . import complexity as complexity_mod
from .basis import BasisSpec
from .basis import descriptors_json as basis_descriptors_json
from .dpd import (DpdModel, LearnConfig, estimate_gain, learn, predistort, save_model,
                  trace_to_csv)
from .errors import ConfigError
from .ila import ila_learn
from .metrics import (aclr_single_direction, aclr_trp, beam_pattern, evm, nmse, psd)
from .partition import RegionPartition, fit_amam, kmeans_partition, partition_regions
from .plant import ArrayPlant, PaModel, array_forward, observation_receive, steer
from .presets import load_plant_preset, preset_params
from .signals import IqSignal
from .waveform import OfdmConfig, crest_factor_reduce, generate_ofdm, papr_at

SCENARIO_KINDS = ("linearization", "powersweep", "anglesweep", "partition",
                  "pruning", "complexity")

METHODS = ("none", "pwcl_orth", "pwcl_selforth", "pwcl_kmeans", "cl_orth", "cl_selforth",
           "pw_ila", "ila")


def build_linear8() -> ArrayPlant:
    """Ideal 8-element linear array (sanity plant)."""
    n = 8
    ident = np.zeros((n, n, 1), dtype=np.complex128)
    for i in range(n):
        ident[i, i, 0] = 1.0
    elements = tuple(PaModel("memoryless_poly", {(1, 0): 1.0 + 0.0j}) for _ in range(n))
    return ArrayPlant(elements, np.ones(n, dtype=complex), ident,
                      np.ones((n, 1), dtype=complex), np.ones(n, dtype=complex))


class SimulatedLoop:
    """Closed-loop source backed by a simulated plant.

    next_block synthesizes a fresh crest-factor-reduced OFDM block (new data
    every call unless fixed_data is set); transmit runs the array forward
    and the phase-aligned observation combiner, adding receiver noise when
    requested.
    """

    def __init__(self, plant: ArrayPlant, ofdm: OfdmConfig, drive_rms: float,
                 cfr_target_papr_db: float | None = None, cfr_iterations: int = 10,
                 seed: int = 0, fixed_data: bool = False):
        self.plant = plant
        self.ofdm = ofdm
        self.drive_rms = drive_rms
        self.cfr_target_papr_db = cfr_target_papr_db
        self.cfr_iterations = cfr_iterations
        self.seed = seed
        self.fixed_data = fixed_data
        self._counter = 0
        self._noise_rng = np.random.default_rng(np.random.SeedSequence([seed, 0xFEED]))

    def make_block(self, n: int, seed: int) -> IqSignal:
        stride = self.ofdm.symbol_stride
        symbols = max(1, math.ceil((n - self.ofdm.wola_taper_samples) / stride))
        cfg = replace(self.ofdm, num_symbols=symbols, seed=seed)
        sig, _ = generate_ofdm(cfg)
        if self.cfr_target_papr_db is not None:
            sig = crest_factor_reduce(sig, self.cfr_target_papr_db, self.cfr_iterations,
                                      occupied_bandwidth=cfg.occupied_bandwidth)
        sig = sig.scaled_to_rms(self.drive_rms)
        return IqSignal(sig.samples[:n], sig.sample_rate, seed)

    def next_block(self, n: int) -> IqSignal:
        if not self.fixed_data:
            self._counter += 1
        return self.make_block(n, self.seed + self._counter)

    def transmit(self, x: IqSignal, noise_floor_dbc: float | None = None) -> IqSignal:
        per_element, _ = array_forward(self.plant, x)
        return observation_receive(self.plant, per_element, noise_floor_dbc, self._noise_rng)


def ramp_probe(amax: float, sample_rate: float, n: int = 32768,
               phase_rate: float = 1e-3) -> IqSignal:
    """Slow full-scale envelope ramp (power-sweep characterization probe).

    The envelope rises linearly to amax while the phase rotates slowly, so
    plant memory taps add coherently and the observed response is the static
    amplitude curve rather than a memory-smeared cloud.
    """
    env = np.linspace(0.0, amax, n)
    phase = np.exp(2j * np.pi * phase_rate * np.arange(n))
    return IqSignal(env * phase, sample_rate)


def derive_partition(plant: ArrayPlant, preset: dict, ofdm: OfdmConfig, seed: int,
                     method: str = "taylor", order: int = 5, target_error: float = 0.01,
                     n_regions: int | None = None, fit_order: int = 9,
                     block: int = 40000, min_share: float = 0.025) -> tuple[RegionPartition, dict]:
    """Amplitude partition from a characterization pass.

    An OFDM block sets the amplitude range and the per-region sample shares;
    the amplitude response itself is extracted from a slow full-scale ramp
    probe, whose scatter-free response makes the fitted derivatives (and so
    the Taylor partition) reproducible. K-means partitioning clusters the
    OFDM block's envelope directly. A trailing region holding less than
    min_share of the waveform samples is merged into its neighbor: such a
    region cannot support the per-region coefficient estimation downstream.
    """
    loop = SimulatedLoop(plant, ofdm, preset["drive_rms"], preset.get("cfr_target_papr_db"),
                         preset.get("cfr_iterations", 10), seed=seed)
    a1 = loop.next_block(block)
    env = np.abs(a1.samples)
    amax = float(env.max())
    if method == "taylor":
        probe = ramp_probe(amax, a1.sample_rate)
        per_element, _ = array_forward(plant, probe)
        zp = observation_receive(plant, per_element)
        ghat = estimate_gain(probe, zp)
        model = fit_amam(probe, zp.with_samples(zp.samples / ghat), fit_order)
        part = partition_regions(model, model.a_max, order, target_error)
        fit_residual = model.fit_residual
    elif method == "kmeans":
        if n_regions is None:
            raise ConfigError("kmeans partitioning needs n_regions")
        z = loop.transmit(a1)
        ghat = estimate_gain(a1, z)
        part = kmeans_partition(a1, n_regions)
        fit_residual = 0.0
    else:
        raise ConfigError(f"unknown partition method {method!r}")
    while part.n_regions > 1 and float(np.mean(part.region_index(env) == part.n_regions - 1)) < min_share:
        edges = np.delete(part.edges, part.n_regions - 1)
        part = RegionPartition(edges,
                               part.orders[:-1] if part.orders else None,
                               part.target_error[:-1] if part.target_error else None)
    shares = [float(np.mean(part.region_index(env) == k)) for k in range(part.n_regions)]
    info = {
        "method": method,
        "edges": part.edges.tolist(),
        "sample_share": shares,
        "fit_residual": fit_residual,
        "ghat_abs": abs(ghat),
    }
    return part, info


@dataclass
class EvalResult:
    metrics: dict
    psd_freqs: np.ndarray
    psd_db: np.ndarray
    beam: object | None = None


def evaluate(plant: ArrayPlant, preset: dict, ofdm: OfdmConfig, model: DpdModel | None,
             seed: int, trp_angles: np.ndarray | None = None,
             noise_floor_dbc: float | None = None, noise_averages: int = 1,
             resolution_bins: int = 2048) -> EvalResult:
    """Fresh-data evaluation of one DPD model (or the no-DPD reference)."""
    cfg = replace(ofdm, seed=seed)
    sig, grid = generate_ofdm(cfg)
    if preset.get("cfr_target_papr_db") is not None:
        sig = crest_factor_reduce(sig, preset["cfr_target_papr_db"],
                                  preset.get("cfr_iterations", 10),
                                  occupied_bandwidth=cfg.occupied_bandwidth)
    a1 = sig.scaled_to_rms(preset["drive_rms"])
    x = predistort(model, a1) if model is not None else a1
    per_element, _ = array_forward(plant, x)
    rng = np.random.default_rng(np.random.SeedSequence([seed, 0xA11]))
    obs = np.zeros(len(x), dtype=np.complex128)
    for _ in range(max(1, noise_averages)):
        z_i = observation_receive(plant, per_element, noise_floor_dbc, rng)
        obs += z_i.samples
    z = IqSignal(obs / max(1, noise_averages), x.sample_rate)
    ghat = estimate_gain(a1, z)
    y = z.with_samples(z.samples / ghat)

    channel_bw = preset["channel_bw"]
    metrics = {
        "aclr_dbc": aclr_single_direction(z, channel_bw, resolution_bins=resolution_bins),
        "evm_percent": evm(grid, y, cfg),
        "nmse_db": nmse(a1, y),
        "papr_1pct_db": papr_at(x, 0.01),
        "ghat_abs": abs(ghat),
        "drive_rms": preset["drive_rms"],
    }
    beam = None
    if trp_angles is not None:
        beam = beam_pattern(plant, x, trp_angles, channel_bw,
                            resolution_bins=resolution_bins, per_element=per_element)
        metrics["aclr_trp_dbc"] = aclr_trp(beam)
    freqs, db = psd(z, resolution_bins)
    return EvalResult(metrics, freqs, db, beam)


def _base_spec(config: dict) -> BasisSpec:
    basis_cfg = config.get("basis", {})
    return BasisSpec(
        family=basis_cfg.get("family", "full_dual_input"),
        max_order=basis_cfg.get("max_order", 9),
        memory_depth=basis_cfg.get("memory_depth", 3),
        cross_memory_depth=basis_cfg.get("cross_memory_depth", 2),
    )


def load_scenario_plant(config: dict) -> tuple[ArrayPlant, dict]:
    name = config.get("preset", "array8-deep")
    if name == "linear8":
        plant = build_linear8()
        preset = preset_params("array8-deep")
        preset["drive_rms"] = config.get("drive_rms", 0.25)
        preset["cfr_target_papr_db"] = None
        preset["noise_floor_dbc"] = None
    else:
        plant = load_plant_preset(name)
        preset = preset_params(name)
    if "drive_rms" in config:
        preset["drive_rms"] = config["drive_rms"]
    if "cfr_target_papr_db" in config:
        preset["cfr_target_papr_db"] = config["cfr_target_papr_db"]
    if "noise_floor_dbc" in config:
        preset["noise_floor_dbc"] = config["noise_floor_dbc"]
    if "coupling_strength" in config:
        plant = replace(plant, coupling_strength=config["coupling_strength"])
    return plant, preset


def train_method(method: str, plant: ArrayPlant, preset: dict, config: dict,
                 spec_single: BasisSpec, partitions: dict,
                 seed: int) -> tuple[DpdModel | None, list]:
    """Train one method name from METHODS; returns (model, trace).

    partitions maps "taylor"/"kmeans" to RegionPartition objects; pwcl_kmeans
    uses the kmeans entry, every other piecewise method the taylor entry.
    """
    if method == "none":
        return None, []
    learn_cfg = config.get("learn", {})
    ila_cfg = config.get("ila", {})
    ofdm = preset_ofdm_from(preset)
    noise = preset.get("noise_floor_dbc")
    if method.startswith("pw"):
        key = "kmeans" if method == "pwcl_kmeans" else "taylor"
        spec = spec_single.with_partition(partitions[key])
    else:
        spec = spec_single
    loop = SimulatedLoop(plant, ofdm, preset["drive_rms"], preset.get("cfr_target_papr_db"),
                         preset.get("cfr_iterations", 10), seed=seed)
    if method in ("pw_ila", "ila"):
        return ila_learn(loop, spec,
                         iterations=ila_cfg.get("iterations", 4),
                         block_size=ila_cfg.get("block_size", 50000),
                         noise_floor_dbc=noise,
                         clip_headroom=ila_cfg.get("clip_headroom", 1.15))
    rule = "self_orthogonalized" if method.endswith("selforth") else "orthogonal_bfs"
    cfg = LearnConfig(
        mu=learn_cfg.get("mu", 1.0),
        block_size=learn_cfg.get("block_size", 20000),
        iterations=learn_cfg.get("iterations", 10),
        rule=rule,
        prune_threshold_db=learn_cfg.get("prune_threshold_db"),
        noise_floor_dbc=noise,
        stats_blocks=learn_cfg.get("stats_blocks", 2),
    )
    return learn(loop, spec, cfg)


def preset_ofdm_from(preset: dict, num_symbols: int = 1, seed: int = 0) -> OfdmConfig:
    return OfdmConfig(num_symbols=num_symbols, seed=seed, **preset["ofdm"])


def _write_json(path: Path, payload) -> None:
    path.write_text(json.dumps(payload, indent=2, sort_keys=True) + "\n")


def _write_csv(path: Path, header: str, rows) -> None:
    lines = [header]
    lines += [",".join(f"{v:.10g}" if isinstance(v, float) else str(v) for v in row)
              for row in rows]
    path.write_text("\n".join(lines) + "\n")


def write_manifest(outdir: Path, config: dict) -> Path:
    entries = []
    for path in sorted(outdir.rglob("*")):
        if path.is_file() and path.name != "manifest.json":
            digest = hashlib.sha256(path.read_bytes()).hexdigest()
            entries.append({"name": str(path.relative_to(outdir)),
                            "sha256": digest, "bytes": path.stat().st_size})
    manifest = {"schema_version": 1, "config": config, "artifacts": entries}
    path = outdir / "manifest.json"
    _write_json(path, manifest)
    return path


def run_linearization(config: dict, outdir: Path) -> dict:
    seed = config.get("seed", 1)
    plant, preset = load_scenario_plant(config)
    spec_single = _base_spec(config)
    methods = config.get("methods", ["none", "pwcl_orth"])
    for m in methods:
        if m not in METHODS:
            raise ConfigError(f"unknown method {m!r}; have {METHODS}")

    ofdm_train = preset_ofdm_from(preset)
    part_cfg = config.get("partition", {})
    partitions: dict = {}
    part_info = None
    if any(m.startswith("pw") for m in methods):
        taylor, part_info = derive_partition(
            plant, preset, ofdm_train, seed=seed * 1000 + 17,
            method="taylor",
            order=part_cfg.get("order", 5),
            target_error=part_cfg.get("target_error", 0.01),
        )
        partitions["taylor"] = taylor
        taylor.save(outdir / "partition.json")
        if "pwcl_kmeans" in methods:
            km, km_info = derive_partition(
                plant, preset, ofdm_train, seed=seed * 1000 + 17,
                method="kmeans", n_regions=taylor.n_regions)
            partitions["kmeans"] = km
            km.save(outdir / "partition_kmeans.json")
            part_info = {"taylor": part_info, "kmeans": km_info}

    eval_cfg = config.get("eval", {})
    ofdm_eval = preset_ofdm_from(preset, num_symbols=eval_cfg.get("num_symbols", 4))
    angles = None
    if eval_cfg.get("trp_angles", True):
        spec_a = eval_cfg.get("trp_angles")
        if isinstance(spec_a, dict):
            angles = np.arange(spec_a["start"], spec_a["stop"] + 1e-9, spec_a["step"])
        elif spec_a is True:
            angles = np.arange(-50.0, 50.0 + 1e-9, 2.0)

    results = {}
    for idx, method in enumerate(methods):
        model, trace = train_method(method, plant, preset, config, spec_single,
                                    partitions, seed=seed * 100 + idx)
        if model is not None:
            save_model(model, outdir / method)
            trace_to_csv(trace, outdir / f"trace_{method}.csv")
        res = evaluate(plant, preset, ofdm_eval, model, seed=seed * 100 + 7,
                       trp_angles=angles, noise_floor_dbc=preset.get("noise_floor_dbc"),
                       noise_averages=eval_cfg.get("noise_averages", 1))
        _write_csv(outdir / f"psd_{method}.csv", "freq_hz,psd_db_hz",
                   zip(res.psd_freqs.tolist(), res.psd_db.tolist()))
        if res.beam is not None:
            _write_csv(outdir / f"beam_{method}.csv",
                       "angle_deg,inband_power,adjacent_low,adjacent_high",
                       zip(res.beam.angles_deg.tolist(), res.beam.inband_power.tolist(),
                           res.beam.adjacent_power_low.tolist(),
                           res.beam.adjacent_power_high.tolist()))
        entry = dict(res.metrics)
        if model is not None:
            entry["coefficients"] = int(model.gamma.size)
            entry["active_coefficients"] = int(model.active_mask.sum())
            entry["gamma_norm"] = float(np.linalg.norm(model.gamma))
            entry["final_error_power_dbc"] = trace[-1].error_power_dbc if trace else None
        results[method] = entry

    payload = {"kind": "linearization", "partition": part_info, "methods": results}
    _write_json(outdir / "metrics.json", payload)
    return payload


def _powersweep_point(args: tuple) -> dict:
    config, outdir_str, offset_db, idx = args
    sub = dict(config)
    sub_seed = config.get("seed", 1) + 31 * idx
    sub["seed"] = sub_seed
    plant, preset = load_scenario_plant(sub)
    preset = dict(preset)
    preset["drive_rms"] = preset["drive_rms"] * 10 ** (offset_db / 20)
    spec_single = _base_spec(sub)
    methods = sub.get("methods", ["none", "pwcl_orth", "pw_ila"])
    ofdm_train = preset_ofdm_from(preset)
    partitions = {}
    if any(m.startswith("pw") for m in methods):
        partitions["taylor"], _ = derive_partition(
            plant, preset, ofdm_train, seed=sub_seed * 1000 + 17,
            order=sub.get("partition", {}).get("order", 5),
            target_error=sub.get("partition", {}).get("target_error", 0.01))
    ofdm_eval = preset_ofdm_from(preset, num_symbols=sub.get("eval", {}).get("num_symbols", 2))
    row = {"offset_db": offset_db}
    for j, method in enumerate(methods):
        model, _ = train_method(method, plant, preset, sub, spec_single, partitions,
                                seed=sub_seed * 100 + j)
        res = evaluate(plant, preset, ofdm_eval, model, seed=sub_seed * 100 + 7,
                       noise_floor_dbc=preset.get("noise_floor_dbc"))
        row[method] = {"aclr_dbc": res.metrics["aclr_dbc"],
                       "evm_percent": res.metrics["evm_percent"]}
    return row


def run_powersweep(config: dict, outdir: Path, workers: int = 1) -> dict:
    offsets = config.get("offsets_db", [-10, -8, -6, -4, -2, 0])
    jobs = [(config, str(outdir), float(o), i) for i, o in enumerate(offsets)]
    if workers > 1:
        with ProcessPoolExecutor(max_workers=workers) as pool:
            rows = list(pool.map(_powersweep_point, jobs))
    else:
        rows = [_powersweep_point(j) for j in jobs]
    methods = config.get("methods", ["none", "pwcl_orth", "pw_ila"])
    csv_rows = []
    for row in rows:
        for m in methods:
            csv_rows.append((row["offset_db"], m, row[m]["aclr_dbc"], row[m]["evm_percent"]))
    _write_csv(outdir / "powersweep.csv", "offset_db,method,aclr_dbc,evm_percent", csv_rows)
    payload = {"kind": "powersweep", "offsets_db": list(offsets), "rows": rows}
    _write_json(outdir / "metrics.json", payload)
    return payload


def run_anglesweep(config: dict, outdir: Path, workers: int = 1) -> dict:
    """Train at 0 degrees, evaluate the frozen model across steering angles."""
    seed = config.get("seed", 1)
    plant, preset = load_scenario_plant(config)
    angles = config.get("angles", [0, 10, 20, 30, 40, 50])
    spec_single = _base_spec(config)
    method = config.get("method", "pwcl_orth")
    ofdm_train = preset_ofdm_from(preset)
    partitions = {}
    if method.startswith("pw"):
        plant0 = steer(plant, 0.0)
        partitions["taylor"], _ = derive_partition(plant0, preset, ofdm_train,
                                                   seed=seed * 1000 + 17)
    plant0 = steer(plant, 0.0)
    model, _ = train_method(method, plant0, preset, config, spec_single, partitions,
                            seed=seed * 100)
    ofdm_eval = preset_ofdm_from(preset, num_symbols=config.get("eval", {}).get("num_symbols", 2))
    rows = []
    for ang in angles:
        steered = steer(plant, float(ang))
        res = evaluate(steered, preset, ofdm_eval, model, seed=seed * 100 + 7,
                       noise_floor_dbc=None)
        rows.append((float(ang), res.metrics["aclr_dbc"], res.metrics["evm_percent"]))
    _write_csv(outdir / "angle_sweep.csv", "angle_deg,aclr_dbc,evm_percent", rows)
    payload = {"kind": "anglesweep", "coupling_strength": plant.coupling_strength,
               "rows": [{"angle_deg": a, "aclr_dbc": b, "evm_percent": c} for a, b, c in rows]}
    _write_json(outdir / "metrics.json", payload)
    return payload


def run_partition_demo(config: dict, outdir: Path) -> dict:
    seed = config.get("seed", 1)
    plant, preset = load_scenario_plant(config)
    ofdm = preset_ofdm_from(preset)
    part_cfg = config.get("partition", {})
    taylor, taylor_info = derive_partition(
        plant, preset, ofdm, seed=seed * 1000 + 17, method="taylor",
        order=part_cfg.get("order", 5), target_error=part_cfg.get("target_error", 0.01))
    km, km_info = derive_partition(
        plant, preset, ofdm, seed=seed * 1000 + 17, method="kmeans",
        n_regions=taylor.n_regions)
    taylor.save(outdir / "partition_taylor.json")
    km.save(outdir / "partition_kmeans.json")
    payload = {"kind": "partition", "taylor": taylor_info, "kmeans": km_info}
    _write_json(outdir / "metrics.json", payload)
    return payload


def run_pruning_study(config: dict, outdir: Path) -> dict:
    seed = config.get("seed", 1)
    threshold = config.get("prune_threshold_db", -40.0)
    base = dict(config)
    base["methods"] = ["pwcl_orth"]
    base.setdefault("learn", {})
    plant, preset = load_scenario_plant(base)
    spec_single = _base_spec(base)
    ofdm_train = preset_ofdm_from(preset)
    partition_obj, part_info = derive_partition(plant, preset, ofdm_train,
                                                seed=seed * 1000 + 17)
    ofdm_eval = preset_ofdm_from(preset, num_symbols=base.get("eval", {}).get("num_symbols", 2))

    results = {}
    for label, th in (("unpruned", None), ("pruned", threshold)):
        cfg = dict(base)
        cfg["learn"] = dict(base.get("learn", {}), prune_threshold_db=th)
        model, trace = train_method("pwcl_orth", plant, preset, cfg, spec_single,
                                    {"taylor": partition_obj}, seed=seed * 100)
        save_model(model, outdir / label)
        trace_to_csv(trace, outdir / f"trace_{label}.csv")
        res = evaluate(plant, preset, ofdm_eval, model, seed=seed * 100 + 7,
                       noise_floor_dbc=preset.get("noise_floor_dbc"))
        results[label] = {
            "aclr_dbc": res.metrics["aclr_dbc"],
            "evm_percent": res.metrics["evm_percent"],
            "coefficients": int(model.gamma.size),
            "active_coefficients": int(model.active_mask.sum()),
        }

    _write_json(outdir / "bf_descriptors.json",
                basis_descriptors_json(spec_single.with_partition(partition_obj)))

    learn_cfg = base.get("learn", {})
    params = complexity_mod.params_from_spec(
        spec_single.with_partition(partition_obj),
        b_cl=learn_cfg.get("block_size", 20000), i_cl=learn_cfg.get("iterations", 10),
        b_ila=50000, i_ila=4,
        n_pw_pruned=results["pruned"]["active_coefficients"])
    pruned_cost = complexity_mod.flops("pwcl_orth_pruned", params)["learn_total"]
    unpruned_params = replace(params, n_pw_pruned=params.n_pw)
    unpruned_cost = complexity_mod.flops("pwcl_orth_pruned", unpruned_params)["learn_total"]
    payload = {
        "kind": "pruning",
        "partition": part_info,
        "threshold_db": threshold,
        "unpruned": results["unpruned"],
        "pruned": results["pruned"],
        "learn_flops_per_sample": {"unpruned": unpruned_cost, "pruned": pruned_cost,
                                   "reduction": 1 - pruned_cost / unpruned_cost},
    }
    _write_json(outdir / "metrics.json", payload)
    return payload


def run_complexity(config: dict, outdir: Path) -> dict:
    pcfg = config.get("params", "reference")
    if pcfg == "reference":
        params = complexity_mod.reference_params()
    else:
        params = complexity_mod.ComplexityParams(**pcfg)
    ledger = complexity_mod.full_ledger(params, exact_division=config.get("exact_division", False))
    (outdir / "ledger.txt").write_text(complexity_mod.format_ledger(ledger) + "\n")
    payload = {"kind": "complexity", "params": params.__dict__, "ledger": ledger}
    _write_json(outdir / "metrics.json", payload)
    return payload


def run_scenario(config: dict, outdir: str | Path, workers: int = 1) -> dict:
    """Dispatch a scenario config; returns the metrics payload."""
    if not isinstance(config, dict) or "kind" not in config:
        raise ConfigError("scenario config must be an object with a 'kind' field")
    if config.get("schema_version", 1) != 1:
        raise ConfigError("unsupported scenario schema_version")
    kind = config["kind"]
    outdir = Path(outdir)
    outdir.mkdir(parents=True, exist_ok=True)
    if kind == "linearization":
        payload = run_linearization(config, outdir)
    elif kind == "powersweep":
        payload = run_powersweep(config, outdir, workers)
    elif kind == "anglesweep":
        payload = run_anglesweep(config, outdir, workers)
    elif kind == "partition":
        payload = run_partition_demo(config, outdir)
    elif kind == "pruning":
        payload = run_pruning_study(config, outdir)
    elif kind == "complexity":
        payload = run_complexity(config, outdir)
    else:
        raise ConfigError(f"unknown scenario kind {kind!r}; have {SCENARIO_KINDS}")
    write_manifest(outdir, config)
    return payload
