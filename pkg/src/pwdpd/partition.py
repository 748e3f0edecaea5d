"""Amplitude-range partitioning for piecewise models.

Two partitioners are provided: a Taylor-remainder driven construction that
sizes each region so a degree-Q polynomial can approximate the device's
AM/AM curve to a target error, and a 1-D K-means reference partitioner.
"""

from __future__ import annotations

import json
import math
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from .errors import ConfigError
from .signals import IqSignal


@dataclass
class RegionPartition:
    """Contiguous amplitude regions covering [0, a_max].

    edges has K+1 ascending entries starting at 0; region k spans
    [edges[k], edges[k+1]), with the last region closed at the top.
    Amplitudes beyond the top edge are assigned to the last region.
    """

    edges: np.ndarray
    orders: list[int] | None = None
    target_error: list[float] | None = None

    def __post_init__(self):
        self.edges = np.asarray(self.edges, dtype=float)
        if self.edges.ndim != 1 or self.edges.size < 2:
            raise ConfigError("partition needs at least two edges")
        if self.edges[0] != 0.0:
            raise ConfigError("partition must start at amplitude 0")
        if np.any(np.diff(self.edges) <= 0):
            raise ConfigError("partition edges must be strictly increasing")
        for name in ("orders", "target_error"):
            val = getattr(self, name)
            if val is not None and len(val) != self.n_regions:
                raise ConfigError(f"{name} must have one entry per region")

    @property
    def n_regions(self) -> int:
        return self.edges.size - 1

    @property
    def widths(self) -> np.ndarray:
        return np.diff(self.edges)

    @property
    def a_max(self) -> float:
        return float(self.edges[-1])

    def region_index(self, amplitudes: np.ndarray) -> np.ndarray:
        """Region index per amplitude; values above the top edge clamp to the last region."""
        amplitudes = np.asarray(amplitudes, dtype=float)
        return np.minimum(
            np.searchsorted(self.edges[1:-1], amplitudes, side="right"),
            self.n_regions - 1,
        )

    def to_dict(self) -> dict:
        return {
            "edges": self.edges.tolist(),
            "orders": list(self.orders) if self.orders is not None else None,
            "target_error": list(self.target_error) if self.target_error is not None else None,
        }

    @classmethod
    def from_dict(cls, d: dict) -> "RegionPartition":
        return cls(np.asarray(d["edges"], dtype=float), d.get("orders"), d.get("target_error"))

    def save(self, path: str | Path) -> None:
        Path(path).write_text(json.dumps(self.to_dict(), indent=2, sort_keys=True) + "\n")

    @classmethod
    def load(cls, path: str | Path) -> "RegionPartition":
        return cls.from_dict(json.loads(Path(path).read_text()))


@dataclass
class AmAmModel:
    """Polynomial fit of the memoryless amplitude response f(a) on [0, a_max].

    Coefficients are stored over the normalized argument t = a / a_max for
    conditioning; ``coefficients`` exposes the physical-domain expansion.
    """

    scaled_coeffs: np.ndarray
    a_max: float
    fit_residual: float = 0.0
    warnings: list[str] = field(default_factory=list)

    def __post_init__(self):
        self.scaled_coeffs = np.asarray(self.scaled_coeffs, dtype=float)
        if self.a_max <= 0:
            raise ConfigError("a_max must be positive")

    @classmethod
    def from_coefficients(cls, coeffs, a_max: float) -> "AmAmModel":
        """Build from physical-domain ascending coefficients of f(a)."""
        coeffs = np.asarray(coeffs, dtype=float)
        scaled = coeffs * a_max ** np.arange(coeffs.size)
        return cls(scaled, a_max)

    @property
    def coefficients(self) -> np.ndarray:
        """Physical-domain ascending coefficients."""
        return self.scaled_coeffs / self.a_max ** np.arange(self.scaled_coeffs.size)

    def __call__(self, a) -> np.ndarray:
        return np.polynomial.polynomial.polyval(np.asarray(a, dtype=float) / self.a_max,
                                                self.scaled_coeffs)

    def derivative_values(self, a, order: int) -> np.ndarray:
        """Evaluate f^(order)(a)."""
        dcoef = np.polynomial.polynomial.polyder(self.scaled_coeffs, order)
        t = np.asarray(a, dtype=float) / self.a_max
        return np.polynomial.polynomial.polyval(t, dcoef) / self.a_max ** order

    def derivative_max(self, lo: float, hi: float, order: int, grid: int = 1000) -> float:
        """Max |f^(order)| over [lo, hi] by dense grid evaluation."""
        a = np.linspace(lo, hi, grid)
        return float(np.max(np.abs(self.derivative_values(a, order))))


def fit_amam(a1: IqSignal, z: IqSignal, fit_order: int = 9) -> AmAmModel:
    """Least-squares polynomial fit of |z| versus |a1|.

    Both even and odd powers (plus a constant) are admitted since the fit is
    over the amplitude domain. A warning is recorded on the result when the
    amplitude spread (max/min) is below 2.
    """
    if len(a1) != len(z):
        raise ConfigError("fit_amam requires equal-length, aligned signals")
    if fit_order < 3:
        raise ConfigError("fit_order must be >= 3")
    x = np.abs(a1.samples)
    y = np.abs(z.samples)
    a_max = float(x.max())
    if a_max == 0:
        raise ConfigError("input signal is identically zero")
    t = x / a_max
    vander = np.polynomial.polynomial.polyvander(t, fit_order)
    coeffs, *_ = np.linalg.lstsq(vander, y, rcond=None)
    residual = float(np.sqrt(np.mean((vander @ coeffs - y) ** 2)))
    model = AmAmModel(coeffs, a_max, fit_residual=residual)
    x_min = float(x.min())
    if x_min > 0 and a_max / x_min < 2:
        model.warnings.append(
            f"amplitude spread max/min = {a_max / x_min:.2f} < 2; fit may be poorly conditioned")
    return model


def _converge_width(model: AmAmModel, u: float, a_max: float, order: int,
                    target: float, delta: float, deriv_tiny: float) -> float:
    """Fixed-point iteration for one region's width starting from the
    conservative interval [u, a_max]."""
    width_prev = 0.0
    hi = a_max
    width = a_max - u
    for j in range(200):
        fmax = model.derivative_max(u, hi, order + 1)
        if fmax <= deriv_tiny:
            # remainder vanishes on the interval: region extends to the top
            return a_max - u
        width = (math.factorial(order + 1) * target / fmax) ** (1.0 / (order + 1))
        if j > 20:
            width = 0.5 * (width + width_prev)
        hi = min(u + width, a_max)
        if abs(width - width_prev) <= delta:
            break
        width_prev = width
    return width


def partition_regions(model: AmAmModel, a_max: float, order: int, target_error: float,
                      delta: float | None = None,
                      min_region_fraction: float = 0.02) -> RegionPartition:
    """Greedy left-to-right Taylor-remainder partitioning.

    Each region is the widest interval on which a degree-``order`` polynomial
    approximates the fitted amplitude response within ``target_error``
    (Lagrange remainder bound, derivative maximum by dense grid search). The
    per-region width iteration starts from the conservative interval
    reaching a_max and stops when it changes by less than ``delta``. A final
    region narrower than ``min_region_fraction * a_max`` is merged into its
    neighbor to avoid sample-starved regions.
    """
    if order < 1:
        raise ConfigError("order must be >= 1")
    if target_error <= 0:
        raise ConfigError("target_error must be positive")
    if a_max <= 0:
        raise ConfigError("a_max must be positive")
    if delta is None:
        delta = 1e-4 * a_max
    if delta <= 0:
        raise ConfigError("delta must be positive")

    scale = max(1.0, float(np.max(np.abs(model.scaled_coeffs))))
    deriv_tiny = 1e4 * np.finfo(float).eps * scale

    edges = [0.0]
    while edges[-1] < a_max - 1e-12 * a_max:
        u = edges[-1]
        width = _converge_width(model, u, a_max, order, target_error, delta, deriv_tiny)
        edges.append(min(u + width, a_max))
        if len(edges) > 257:
            raise ConfigError("partition produced more than 256 regions; "
                              "raise target_error or lower the fit order")
    edges[-1] = a_max
    if len(edges) > 2 and (edges[-1] - edges[-2]) < min_region_fraction * a_max:
        del edges[-2]
    k = len(edges) - 1
    return RegionPartition(np.asarray(edges), orders=[order] * k, target_error=[target_error] * k)


def kmeans_partition(a1: IqSignal, n_regions: int, max_iter: int = 100) -> RegionPartition:
    """1-D K-means over the envelope; boundaries at midpoints between centroids.

    Deterministic: centroids are seeded at the (i+0.5)/K quantiles of the
    sorted amplitudes.
    """
    if n_regions < 1:
        raise ConfigError("n_regions must be >= 1")
    env = np.abs(a1.samples)
    distinct = np.unique(env)
    if n_regions > distinct.size:
        raise ConfigError(
            f"n_regions={n_regions} exceeds the {distinct.size} distinct amplitude values")
    a_max = float(env.max())
    if n_regions == 1:
        return RegionPartition(np.asarray([0.0, a_max]))

    centroids = np.quantile(env, (np.arange(n_regions) + 0.5) / n_regions)
    for _ in range(max_iter):
        assign = np.argmin(np.abs(env[:, None] - centroids[None, :]), axis=1)
        new = centroids.copy()
        for k in range(n_regions):
            members = env[assign == k]
            if members.size:
                new[k] = members.mean()
        new.sort()
        if np.allclose(new, centroids, rtol=0, atol=1e-12 * max(a_max, 1.0)):
            centroids = new
            break
        centroids = new
    mids = 0.5 * (centroids[:-1] + centroids[1:])
    edges = np.concatenate([[0.0], mids, [a_max]])
    return RegionPartition(edges)
