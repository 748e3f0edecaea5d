"""Piecewise injection predistorter and closed-loop decorrelation learning.

The predistorter injects a weighted basis-function correction into the
transmit signal: out = a1 + Psi(a1) @ gamma, so gamma = 0 is the exact
identity. Learning iterates blocks through the closed loop (predistort ->
plant -> observe), forms the error e = z - Ghat a1, and descends along the
block cross-correlation between the basis and the error:

  self_orthogonalized:  gamma <- gamma - (mu / Ghat) R^-1 (Psi^H e / N)
  orthogonal_bfs:       gamma_orth <- gamma_orth - (mu / Ghat) (Psi_orth^H e / N)

The correlation is conjugated and 1/N-normalized relative to the transposed
unnormalized form sometimes written for this update; with unit-sample-power
orthogonalized columns this makes the per-coefficient correlations directly
comparable across block sizes. The 1/Ghat factor compensates the closed-loop
gain (the error sees the correction through the plant's linear gain), so
mu in (0, 2) is the stability range independent of drive level and array
size, with mu <= 1 giving monotone error contraction on a linear loop.

Pruning (orthogonal rule only): the first block's correlation vector selects
the retained set; later blocks freeze coefficients whose correlation falls
below the threshold but keep them in the predistortion path.
"""

from __future__ import annotations

import json
from dataclasses import dataclass, field
from pathlib import Path
from typing import Protocol

import numpy as np

from . import basis as basis_mod
from .basis import BasisSpec
from .errors import AlignmentError, ConfigError, DegenerateRegionError, DivergenceError
from .signals import IqSignal

LEARN_RULES = ("self_orthogonalized", "orthogonal_bfs")

# ridge on the learning statistics Gram: piecewise high-order columns can be
# 1e-15 relative power in low-amplitude regions, and unregularized whitening
# would amplify block-to-block sampling noise on those directions into the
# correction path; the floor freezes directions below ~ -50 dB relative power
STATS_LOADING = 1e-5


@dataclass
class DpdModel:
    """Predistorter state: coefficients plus the basis they bind to."""

    gamma: np.ndarray
    spec: BasisSpec
    ghat: complex = 1.0 + 0.0j
    orthogonal_domain: bool = False
    whitener: np.ndarray | None = None
    active_mask: np.ndarray | None = None

    def __post_init__(self):
        self.gamma = np.asarray(self.gamma, dtype=np.complex128)
        if self.gamma.size != self.spec.n_basis_total:
            raise ConfigError(
                f"gamma length {self.gamma.size} != basis size {self.spec.n_basis_total}")
        if self.orthogonal_domain and self.whitener is None:
            raise ConfigError("orthogonal-domain model requires its whitener")
        if self.active_mask is None:
            self.active_mask = np.ones(self.gamma.size, dtype=bool)
        else:
            self.active_mask = np.asarray(self.active_mask, dtype=bool)
            if self.active_mask.size != self.gamma.size:
                raise ConfigError("active_mask length must match gamma")

    @property
    def partition(self):
        return self.spec.partition

    def native_gamma(self) -> np.ndarray:
        """Coefficients in the non-orthogonalized basis domain."""
        if not self.orthogonal_domain:
            return self.gamma
        # Psi_orth = Psi (L^H)^-1  =>  native = (L^H)^-1 gamma_orth
        return np.linalg.solve(self.whitener.conj().T, self.gamma)

    @classmethod
    def zero(cls, spec: BasisSpec, orthogonal_domain: bool = False,
             whitener: np.ndarray | None = None) -> "DpdModel":
        return cls(np.zeros(spec.n_basis_total, dtype=np.complex128), spec,
                   orthogonal_domain=orthogonal_domain, whitener=whitener)


@dataclass
class LearnConfig:
    mu: float = 0.25
    block_size: int = 20000
    iterations: int = 10
    rule: str = "orthogonal_bfs"
    prune_threshold_db: float | None = None
    noise_floor_dbc: float | None = None
    stats_blocks: int = 2  # block multiples for the precomputed statistics pass

    def __post_init__(self):
        if not 0 < self.mu < 2:
            raise ConfigError("mu must lie in (0, 2)")
        if self.block_size < 1 or self.iterations < 1:
            raise ConfigError("block_size and iterations must be positive")
        if self.rule not in LEARN_RULES:
            raise ConfigError(f"rule must be one of {LEARN_RULES}")
        if self.prune_threshold_db is not None and self.rule != "orthogonal_bfs":
            raise ConfigError("pruning requires the orthogonal_bfs rule")
        if self.stats_blocks < 1:
            raise ConfigError("stats_blocks must be >= 1")


@dataclass
class TraceRecord:
    iteration: int
    error_power_dbc: float
    nmse_db: float
    active_count: int
    zeta: np.ndarray | None = field(default=None, repr=False)


class ClosedLoopSource(Protocol):
    """Signal source for closed-loop learning.

    next_block yields a fresh block of the (pre-DPD) transmit signal;
    transmit runs the predistorted block through the plant and returns the
    observation receiver output.
    """

    def next_block(self, n: int) -> IqSignal: ...

    def transmit(self, x: IqSignal, noise_floor_dbc: float | None = None) -> IqSignal: ...


def predistort(model: DpdModel, a1: IqSignal, chunk: int = 16384) -> IqSignal:
    """Apply the injection predistorter; gamma = 0 returns a1 unchanged."""
    corr = basis_mod.apply_gamma(model.spec, a1.samples, model.native_gamma(), chunk)
    return a1.with_samples(a1.samples + corr)


def estimate_gain(a1: IqSignal, z: IqSignal) -> complex:
    """LS estimate of the effective linear gain: (a1^H z) / (a1^H a1)."""
    if len(a1) != len(z):
        raise ConfigError("gain estimation requires equal-length signals")
    denom = np.vdot(a1.samples, a1.samples)
    if denom == 0:
        raise ConfigError("cannot estimate gain from a zero-energy signal")
    return complex(np.vdot(a1.samples, z.samples) / denom)


def error_signal(z: IqSignal, a1: IqSignal, ghat: complex) -> IqSignal:
    """Learning error e = z - ghat * a1."""
    if len(a1) != len(z):
        raise ConfigError("error signal requires equal-length signals")
    return z.with_samples(z.samples - ghat * a1.samples)


def align(reference: IqSignal, measured: IqSignal) -> tuple[int, complex]:
    """Integer-lag delay and unit phasor relating measured to reference.

    measured(n) ~ phase * reference(n - delay). Raises AlignmentError when
    the normalized correlation peak is below 0.2.
    """
    ref = reference.samples
    mea = measured.samples
    size = 1 << int(np.ceil(np.log2(ref.size + mea.size - 1)))
    spec = np.fft.fft(mea, size) * np.conj(np.fft.fft(ref, size))
    corr = np.fft.ifft(spec)
    peak = int(np.argmax(np.abs(corr)))
    norm = np.linalg.norm(ref) * np.linalg.norm(mea)
    if norm == 0 or np.abs(corr[peak]) / norm < 0.2:
        raise AlignmentError("correlation peak below 0.2; signals do not overlap")
    delay = peak if peak <= size // 2 else peak - size
    phase = corr[peak] / np.abs(corr[peak])
    return delay, complex(phase)


def apply_alignment(measured: IqSignal, delay: int, phase: complex) -> IqSignal:
    """Undo the (delay, phase) found by align, zero-padding exposed edges."""
    x = np.conj(phase) * measured.samples
    out = np.zeros_like(x)
    if delay >= 0:
        out[:x.size - delay] = x[delay:]
    else:
        out[-delay:] = x[:x.size + delay]
    return measured.with_samples(out)


def prune_select(zeta: np.ndarray, threshold_db: float, reference_power: float) -> np.ndarray:
    """Active mask from normalized correlations.

    zeta is the block-normalized cross-correlation (Psi^H e / N, unit-power
    columns); entries are compared in dB against sqrt(reference_power). The
    learner passes the block's residual error power, so each entry reads as
    the share of the residual distortion carried by that basis function
    (sum |zeta|^2 equals the spanned error power), which is invariant to
    drive level and stays comparable across iterations as the loop
    converges.
    """
    mag = np.abs(np.asarray(zeta))
    with np.errstate(divide="ignore"):
        level_db = 20 * np.log10(mag / np.sqrt(reference_power))
    return level_db > threshold_db


def distortion_power_identity(zeta: np.ndarray, e: IqSignal) -> tuple[float, float, float]:
    """Error power vs sum |zeta_j|^2 with their relative gap.

    Equality holds when e lies in the span of the orthonormal columns behind
    zeta; an unspanned component makes the left side strictly larger.
    """
    lhs = float(np.mean(np.abs(e.samples) ** 2))
    rhs = float(np.sum(np.abs(zeta) ** 2))
    gap = abs(lhs - rhs) / max(lhs, np.finfo(float).tiny)
    if lhs == 0 and rhs == 0:
        gap = 0.0
    return lhs, rhs, gap


def _block_solve_lower(whitener: np.ndarray, vec: np.ndarray, b1: int) -> np.ndarray:
    """L^-1 vec per region block (maps native correlations to the orthogonal domain)."""
    out = np.empty_like(vec)
    for k in range(vec.size // b1):
        sl = slice(k * b1, (k + 1) * b1)
        out[sl] = np.linalg.solve(whitener[sl, sl], vec[sl])
    return out


def learn(source: ClosedLoopSource, spec: BasisSpec, cfg: LearnConfig,
          init: DpdModel | None = None) -> tuple[DpdModel, list[TraceRecord]]:
    """Block-adaptive closed-loop learning.

    A leading statistics block fixes the covariance inverse (self-orth rule)
    or the per-region Cholesky whitener (orthogonal rule); both are treated
    as precomputed thereafter. Each iteration transmits freshly predistorted
    data, re-estimates the linear gain, and updates along the normalized
    error correlation. Divergence (error power growing by more than 10 dB
    over three iterations) raises DivergenceError with the trace attached.
    """
    b_total = spec.n_basis_total
    b1 = spec.n_basis_single
    if cfg.block_size < 10 * b_total:
        raise ConfigError(
            f"block_size {cfg.block_size} < 10 x coefficient count {b_total}")

    stats = source.next_block(cfg.stats_blocks * cfg.block_size)
    gram = basis_mod.gram_matrix(spec, stats.samples)
    for k in range(spec.n_regions):
        sl = slice(k * b1, (k + 1) * b1)
        if np.abs(np.diag(gram[sl, sl])).max() <= 0:
            raise DegenerateRegionError(k, f"region {k} received no samples in the statistics block")
    gram = gram + (STATS_LOADING * np.trace(gram).real / b_total) * np.eye(b_total)
    orthogonal = cfg.rule == "orthogonal_bfs"
    if orthogonal:
        whitener = basis_mod.block_cholesky(gram, b1, spec.n_regions)
        cov_inv = None
    else:
        whitener = None
        cov_inv = np.linalg.inv(gram)

    if init is not None:
        if init.orthogonal_domain != orthogonal:
            raise ConfigError("init model domain does not match the learning rule")
        model = DpdModel(init.gamma.copy(), spec, init.ghat, orthogonal,
                         whitener if orthogonal else None,
                         init.active_mask.copy())
    else:
        model = DpdModel.zero(spec, orthogonal_domain=orthogonal, whitener=whitener)

    prune = cfg.prune_threshold_db is not None
    pd_mask: np.ndarray | None = None
    trace: list[TraceRecord] = []
    err_powers: list[float] = []

    for i in range(1, cfg.iterations + 1):
        a1 = source.next_block(cfg.block_size)
        x = predistort(model, a1)
        z = source.transmit(x, noise_floor_dbc=cfg.noise_floor_dbc)
        ghat = estimate_gain(a1, z)
        err = error_signal(z, a1, ghat)

        p_err = float(np.mean(np.abs(err.samples) ** 2))
        p_lin = abs(ghat) ** 2 * a1.power
        err_powers.append(p_err)

        zeta = basis_mod.cross_correlation(spec, a1.samples, err.samples)
        if orthogonal:
            zeta = _block_solve_lower(whitener, zeta, b1)

        if prune:
            mask_now = prune_select(zeta, cfg.prune_threshold_db, p_err)
            if pd_mask is None:
                pd_mask = mask_now.copy()
            update_mask = pd_mask & mask_now
        else:
            update_mask = np.ones(b_total, dtype=bool)

        step = zeta if orthogonal else cov_inv @ zeta
        model.gamma[update_mask] -= (cfg.mu / ghat) * step[update_mask]
        model.ghat = ghat

        if p_lin <= 0:
            err_dbc = np.inf
        else:
            err_dbc = 10 * np.log10(max(p_err, np.finfo(float).tiny) / p_lin)
        trace.append(TraceRecord(i, float(err_dbc), float(err_dbc),
                                 int(update_mask.sum()), zeta.copy()))

        if i >= 4 and err_powers[-1] > 10 * err_powers[-4]:
            raise DivergenceError(
                f"error power grew >10 dB between iterations {i - 3} and {i}", trace)

    if prune and pd_mask is not None:
        model.active_mask = pd_mask
        model.gamma[~pd_mask] = 0.0
    return model, trace


def static_response(model: DpdModel, amplitudes: np.ndarray, settle: int = 64) -> np.ndarray:
    """|predistorted| amplitude at each input amplitude after memory settles.

    Feeds a staircase (each amplitude held for ``settle`` samples) and reads
    the final sample of each step, giving the composite DPD AM/AM curve.
    """
    amplitudes = np.asarray(amplitudes, dtype=float)
    stair = np.repeat(amplitudes.astype(np.complex128), settle)
    sig = IqSignal(stair, 1.0)
    out = predistort(model, sig)
    return np.abs(out.samples[settle - 1::settle])


def trace_to_csv(trace: list[TraceRecord], path: str | Path) -> None:
    lines = ["iteration,error_power_dbc,nmse_db,active_count"]
    for rec in trace:
        lines.append(f"{rec.iteration},{rec.error_power_dbc:.6f},{rec.nmse_db:.6f},{rec.active_count}")
    Path(path).write_text("\n".join(lines) + "\n")


def save_model(model: DpdModel, stem: str | Path) -> tuple[Path, Path]:
    """Write <stem>.dpd.json (header) and <stem>.dpd.bin (payload).

    Payload layout: gamma as interleaved float64 re/im, then the whitener
    (row-major interleaved) when present.
    """
    stem = Path(stem)
    header_path = stem.with_suffix(".dpd.json")
    payload_path = stem.with_suffix(".dpd.bin")
    header = {
        "spec": model.spec.to_dict(),
        "ghat": [model.ghat.real, model.ghat.imag],
        "orthogonal_domain": model.orthogonal_domain,
        "active_mask": [int(v) for v in model.active_mask],
        "n_coefficients": int(model.gamma.size),
        "has_whitener": model.whitener is not None,
    }
    header_path.write_text(json.dumps(header, indent=2, sort_keys=True) + "\n")
    chunks = [model.gamma]
    if model.whitener is not None:
        chunks.append(model.whitener.ravel())
    flat = np.concatenate(chunks)
    buf = np.empty(2 * flat.size, dtype="<f8")
    buf[0::2] = flat.real
    buf[1::2] = flat.imag
    buf.tofile(payload_path)
    return header_path, payload_path


def load_model(stem: str | Path) -> DpdModel:
    stem = Path(stem)
    header_path = stem.with_suffix(".dpd.json")
    payload_path = stem.with_suffix(".dpd.bin")
    if not header_path.exists() or not payload_path.exists():
        raise ConfigError(f"missing model files for {stem}")
    header = json.loads(header_path.read_text())
    spec = BasisSpec.from_dict(header["spec"])
    n = int(header["n_coefficients"])
    raw = np.fromfile(payload_path, dtype="<f8")
    flat = raw[0::2] + 1j * raw[1::2]
    gamma = flat[:n]
    whitener = None
    if header["has_whitener"]:
        whitener = flat[n:n + n * n].reshape(n, n)
    return DpdModel(
        gamma, spec,
        ghat=complex(header["ghat"][0], header["ghat"][1]),
        orthogonal_domain=header["orthogonal_domain"],
        whitener=whitener,
        active_mask=np.asarray(header["active_mask"], dtype=bool),
    )
