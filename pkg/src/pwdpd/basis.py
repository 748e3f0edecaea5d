"""Nonlinear basis-function sets, piecewise data matrices, and orthogonalization.

Each basis function is one of three shapes over the complex baseband signal x:

  aligned  x(n-m) |x(n-m)|^(q-1)                    lags=(m,)
  cross    x(n-ms) |x(n-me)|^(q-1)                  lags=(ms, me), ms != me
  conj     x*(n-mc) x(n-mq)^2 |x(n-mq)|^(q-3)       lags=(mc, mq), mc != mq

with q the odd nonlinearity order. Families enumerate deterministic ordered
subsets of these; the aligned order-1 lag-0 term (x itself) is always index 0,
which the learners rely on. Piecewise specs replicate the set per region and
zero every row outside the region owning that sample's envelope, so the Gram
matrix is exactly block-diagonal by region.
"""

from __future__ import annotations

from dataclasses import dataclass, replace

import numpy as np

from .errors import ConfigError, DegenerateRegionError
from .partition import RegionPartition
from .signals import IqSignal

FAMILIES = ("memoryless", "memory_poly", "gmp", "full_dual_input")

COVARIANCE_LOADING = 1e-10


@dataclass(frozen=True)
class BfTerm:
    """One basis function: shape family, odd order q, and its lag tuple."""

    family: str
    order: int
    lags: tuple[int, ...]

    def to_dict(self) -> dict:
        return {"family": self.family, "order": self.order, "lags": list(self.lags)}

    @property
    def instantaneous(self) -> bool:
        return all(m == 0 for m in self.lags)


@dataclass(frozen=True)
class BasisSpec:
    family: str
    max_order: int = 9
    memory_depth: int = 0
    cross_memory_depth: int = 0
    partition: RegionPartition | None = None
    # full_dual_input only: per-term-family orders (P1,P2,P3) and memories (M1..M6)
    orders: tuple[int, int, int] | None = None
    memories: tuple[int, int, int, int, int, int] | None = None

    def __post_init__(self):
        if self.family not in FAMILIES:
            raise ConfigError(f"unknown basis family {self.family!r}")
        for q in (self.max_order,) + tuple(self.orders or ()):
            if q < 1 or q % 2 == 0:
                raise ConfigError(f"nonlinearity orders must be odd and >= 1, got {q}")
        if self.memory_depth < 0 or self.cross_memory_depth < 0:
            raise ConfigError("memory depths must be non-negative")
        if self.family == "full_dual_input":
            if self.orders is None:
                object.__setattr__(self, "orders", (self.max_order,) * 3)
            if self.memories is None:
                object.__setattr__(self, "memories", (self.memory_depth,) * 6)
            if len(self.orders) != 3 or len(self.memories) != 6:
                raise ConfigError("full_dual_input needs 3 orders and 6 memory depths")

    @property
    def n_regions(self) -> int:
        return self.partition.n_regions if self.partition is not None else 1

    @property
    def n_basis_single(self) -> int:
        return len(enumerate_bfs(self))

    @property
    def n_basis_total(self) -> int:
        return self.n_regions * self.n_basis_single

    @property
    def n_instantaneous_single(self) -> int:
        return sum(term.instantaneous for term in enumerate_bfs(self))

    def without_partition(self) -> "BasisSpec":
        return replace(self, partition=None)

    def with_partition(self, partition: RegionPartition | None) -> "BasisSpec":
        return replace(self, partition=partition)

    def to_dict(self) -> dict:
        return {
            "family": self.family,
            "max_order": self.max_order,
            "memory_depth": self.memory_depth,
            "cross_memory_depth": self.cross_memory_depth,
            "orders": list(self.orders) if self.orders else None,
            "memories": list(self.memories) if self.memories else None,
            "partition": self.partition.to_dict() if self.partition is not None else None,
        }

    @classmethod
    def from_dict(cls, d: dict) -> "BasisSpec":
        part = d.get("partition")
        return cls(
            family=d["family"],
            max_order=d["max_order"],
            memory_depth=d.get("memory_depth", 0),
            cross_memory_depth=d.get("cross_memory_depth", 0),
            partition=RegionPartition.from_dict(part) if part else None,
            orders=tuple(d["orders"]) if d.get("orders") else None,
            memories=tuple(d["memories"]) if d.get("memories") else None,
        )


def enumerate_bfs(spec: BasisSpec) -> list[BfTerm]:
    """Deterministic ordered basis-function list for one region of the spec.

    The full_dual_input family drops the pure-delay beta^0 terms and the
    equal-lag cross/conj terms, which coincide with aligned terms once the
    beam weights are lumped into the coefficients; with all orders 9 and
    memories 3 the surviving set has 116 entries.
    """
    terms: list[BfTerm] = []
    if spec.family == "memoryless":
        for p in range((spec.max_order + 1) // 2):
            terms.append(BfTerm("aligned", 2 * p + 1, (0,)))
    elif spec.family == "memory_poly":
        for p in range((spec.max_order + 1) // 2):
            for m in range(spec.memory_depth + 1):
                terms.append(BfTerm("aligned", 2 * p + 1, (m,)))
    elif spec.family == "gmp":
        for p in range((spec.max_order + 1) // 2):
            for m in range(spec.memory_depth + 1):
                terms.append(BfTerm("aligned", 2 * p + 1, (m,)))
        for p in range(1, (spec.max_order + 1) // 2):
            for m in range(spec.memory_depth + 1):
                for c in range(1, spec.cross_memory_depth + 1):
                    terms.append(BfTerm("cross", 2 * p + 1, (m, m + c)))
        for p in range(1, (spec.max_order + 1) // 2):
            for m in range(spec.memory_depth + 1):
                for c in range(1, spec.cross_memory_depth + 1):
                    terms.append(BfTerm("cross", 2 * p + 1, (m, m - c)))
    else:  # full_dual_input
        p1, p2, p3 = spec.orders
        m1, _, m3, m4, m5, m6 = spec.memories
        for p in range((p1 + 1) // 2):
            for m in range(m1 + 1):
                terms.append(BfTerm("aligned", 2 * p + 1, (m,)))
        for p in range(1, (p2 + 1) // 2):
            for ms in range(m3 + 1):
                for me in range(m4 + 1):
                    if ms != me:
                        terms.append(BfTerm("cross", 2 * p + 1, (ms, me)))
        for p in range(1, (p3 + 1) // 2):
            for mc in range(m5 + 1):
                for mq in range(m6 + 1):
                    if mc != mq:
                        terms.append(BfTerm("conj", 2 * p + 1, (mc, mq)))
    return terms


def _lag_span(terms: list[BfTerm]) -> tuple[int, int]:
    """(max_lag, max_lead) over all term lags; leads arise from GMP cross terms."""
    lags = [m for t in terms for m in t.lags]
    return max(max(lags), 0), max(-min(lags), 0)


class _LagCache:
    """Lagged views (zero-padded history/future) over one block of a signal."""

    def __init__(self, x: np.ndarray, start: int, n: int, max_lag: int, max_lead: int):
        lo = start - max_lag
        hi = start + n + max_lead
        window = np.zeros(hi - lo, dtype=np.complex128)
        src_lo, src_hi = max(lo, 0), min(hi, x.size)
        if src_hi > src_lo:
            window[src_lo - lo:src_hi - lo] = x[src_lo:src_hi]
        self._window = window
        self._offset = start - lo
        self._n = n
        self._shifted: dict[int, np.ndarray] = {}
        self._env_pow: dict[tuple[int, int], np.ndarray] = {}

    def shifted(self, lag: int) -> np.ndarray:
        if lag not in self._shifted:
            a = self._offset - lag
            self._shifted[lag] = self._window[a:a + self._n]
        return self._shifted[lag]

    def env_power(self, lag: int, exponent: int) -> np.ndarray:
        """|x(n-lag)|^exponent for even exponent >= 2."""
        key = (lag, exponent)
        if key not in self._env_pow:
            base = self._env_pow.get((lag, 2))
            if base is None:
                s = self.shifted(lag)
                base = (s.real * s.real + s.imag * s.imag)
                self._env_pow[(lag, 2)] = base
            self._env_pow[key] = base ** (exponent // 2) if exponent != 2 else base
        return self._env_pow[key]


def _term_column(term: BfTerm, cache: _LagCache) -> np.ndarray:
    q = term.order
    if term.family == "aligned":
        (m,) = term.lags
        col = cache.shifted(m)
        return col * cache.env_power(m, q - 1) if q > 1 else col
    if term.family == "cross":
        ms, me = term.lags
        return cache.shifted(ms) * cache.env_power(me, q - 1)
    # conj
    mc, mq = term.lags
    col = np.conj(cache.shifted(mc)) * cache.shifted(mq) ** 2
    if q > 3:
        col = col * cache.env_power(mq, q - 3)
    return col


def base_matrix(spec: BasisSpec, x: np.ndarray, start: int, n: int) -> np.ndarray:
    """Dense single-region matrix (n x B1) for rows start..start+n-1 of x."""
    terms = enumerate_bfs(spec)
    max_lag, max_lead = _lag_span(terms)
    cache = _LagCache(x, start, n, max_lag, max_lead)
    cols = [_term_column(t, cache) for t in terms]
    return np.stack(cols, axis=1)


def region_rows(spec: BasisSpec, x: np.ndarray, start: int, n: int) -> np.ndarray | None:
    """Region index per row (keyed on the instantaneous envelope), or None."""
    if spec.partition is None:
        return None
    return spec.partition.region_index(np.abs(x[start:start + n]))


@dataclass
class BasisMatrix:
    """Realized data matrix for one sample block.

    values is N x B with B = n_regions * B1; the region-k column block is the
    base set masked to rows whose envelope falls in region k. whitener holds
    the block-diagonal lower-triangular L with Psi_orth = Psi (L^H)^-1 when
    orthogonalized.
    """

    values: np.ndarray
    spec: BasisSpec
    orthogonalized: bool = False
    whitener: np.ndarray | None = None
    region_index: np.ndarray | None = None
    block: tuple[int, int] = (0, 0)

    @property
    def n_basis_single(self) -> int:
        return self.spec.n_basis_single


def build_matrix(spec: BasisSpec, a1: IqSignal, block: tuple[int, int] | None = None) -> BasisMatrix:
    """Assemble the (piecewise-masked) data matrix over one block of a1."""
    x = a1.samples
    if block is None:
        block = (0, x.size)
    start, n = block
    if start < 0 or n <= 0 or start + n > x.size:
        raise ConfigError(f"block {block} outside signal of length {x.size}")
    psi0 = base_matrix(spec, x, start, n)
    ridx = region_rows(spec, x, start, n)
    if ridx is None:
        values = psi0
    else:
        b1 = psi0.shape[1]
        values = np.zeros((n, spec.n_regions * b1), dtype=np.complex128)
        for k in range(spec.n_regions):
            rows = ridx == k
            values[rows, k * b1:(k + 1) * b1] = psi0[rows]
    return BasisMatrix(values, spec, region_index=ridx, block=(start, n))


def block_cholesky(gram: np.ndarray, b1: int, n_regions: int) -> np.ndarray:
    """Per-region Cholesky of a block-diagonal Gram; DegenerateRegionError on failure."""
    whitener = np.zeros_like(gram)
    for k in range(n_regions):
        sl = slice(k * b1, (k + 1) * b1)
        block = gram[sl, sl]
        if not np.all(np.isfinite(block)) or np.abs(np.diag(block)).min() <= 0:
            raise DegenerateRegionError(k, f"region {k} has empty or zero-power basis columns")
        try:
            whitener[sl, sl] = np.linalg.cholesky(block)
        except np.linalg.LinAlgError:
            raise DegenerateRegionError(
                k, f"region {k} Gram matrix is rank deficient") from None
    return whitener


def orthogonalize(bm: BasisMatrix, stats_signal: IqSignal | None = None) -> BasisMatrix:
    """Whiten the matrix so the sample Gram Psi^H Psi / N is the identity.

    The Gram is block-diagonal by region (disjoint row supports), so a
    per-region Cholesky factor is computed and inverted against the columns.
    When stats_signal is given, the whitener is derived from that signal's
    statistics instead of the matrix's own block.
    """
    if bm.orthogonalized:
        raise ConfigError("matrix is already orthogonalized")
    n, b = bm.values.shape
    if n < 10 * b:
        raise ConfigError(f"need at least 10 rows per column to orthogonalize (N={n}, B={b})")
    b1 = bm.n_basis_single
    k = bm.spec.n_regions
    if stats_signal is not None:
        gram_src = build_matrix(bm.spec, stats_signal).values
        gram = gram_src.conj().T @ gram_src / gram_src.shape[0]
    else:
        gram = bm.values.conj().T @ bm.values / n
    whitener = block_cholesky(gram, b1, k)
    values = np.zeros_like(bm.values)
    for r in range(k):
        sl = slice(r * b1, (r + 1) * b1)
        lk = whitener[sl, sl]
        # columns <- columns (L^H)^-1, done as a triangular solve
        values[:, sl] = np.linalg.solve(lk.conj(), bm.values[:, sl].T).T
    return BasisMatrix(values, bm.spec, orthogonalized=True, whitener=whitener,
                       region_index=bm.region_index, block=bm.block)


def gram_matrix(spec: BasisSpec, x: np.ndarray, chunk: int = 16384) -> np.ndarray:
    """Block-diagonal sample Gram Psi^H Psi / N accumulated chunk-wise."""
    b1 = spec.n_basis_single
    k = spec.n_regions
    gram = np.zeros((k * b1, k * b1), dtype=np.complex128)
    n_total = x.size
    for start in range(0, n_total, chunk):
        n = min(chunk, n_total - start)
        psi0 = base_matrix(spec, x, start, n)
        ridx = region_rows(spec, x, start, n)
        if ridx is None:
            gram[:b1, :b1] += psi0.conj().T @ psi0
        else:
            for r in range(k):
                rows = psi0[ridx == r]
                if rows.size:
                    sl = slice(r * b1, (r + 1) * b1)
                    gram[sl, sl] += rows.conj().T @ rows
    return gram / n_total


def precompute_covariance(spec: BasisSpec, training: IqSignal,
                          loading: float = COVARIANCE_LOADING) -> tuple[np.ndarray, np.ndarray]:
    """Sample covariance of the basis vector and its inverse.

    Diagonal loading of loading * trace/B guarantees invertibility even for
    nearly empty regions.
    """
    b = spec.n_basis_total
    if len(training) < 10 * b:
        raise ConfigError(f"training signal must have at least 10*B = {10 * b} samples")
    cov = gram_matrix(spec, training.samples)
    cov = cov + (loading * np.trace(cov).real / b) * np.eye(b)
    return cov, np.linalg.inv(cov)


def apply_gamma(spec: BasisSpec, x: np.ndarray, gamma: np.ndarray,
                chunk: int = 16384) -> np.ndarray:
    """Correction signal Psi @ gamma without materializing the masked matrix."""
    b1 = spec.n_basis_single
    out = np.zeros(x.size, dtype=np.complex128)
    if not np.any(gamma):
        return out
    for start in range(0, x.size, chunk):
        n = min(chunk, x.size - start)
        psi0 = base_matrix(spec, x, start, n)
        ridx = region_rows(spec, x, start, n)
        if ridx is None:
            out[start:start + n] = psi0 @ gamma
        else:
            seg = out[start:start + n]
            for k in range(spec.n_regions):
                rows = ridx == k
                if np.any(rows):
                    seg[rows] = psi0[rows] @ gamma[k * b1:(k + 1) * b1]
    return out


def cross_correlation(spec: BasisSpec, x: np.ndarray, err: np.ndarray,
                      chunk: int = 16384) -> np.ndarray:
    """Region-stacked sample cross-correlation Psi^H e / N."""
    b1 = spec.n_basis_single
    acc = np.zeros(spec.n_basis_total, dtype=np.complex128)
    for start in range(0, x.size, chunk):
        n = min(chunk, x.size - start)
        psi0 = base_matrix(spec, x, start, n)
        ridx = region_rows(spec, x, start, n)
        e = err[start:start + n]
        if ridx is None:
            acc += psi0.conj().T @ e
        else:
            for k in range(spec.n_regions):
                rows = ridx == k
                if np.any(rows):
                    acc[k * b1:(k + 1) * b1] += psi0[rows].conj().T @ e[rows]
    return acc / x.size


def regularized_lstsq(a: np.ndarray, b: np.ndarray,
                      loading: float = COVARIANCE_LOADING) -> np.ndarray:
    """Least squares via QR on the diagonally loaded augmented system.

    Solves min ||a c - b||^2 + lam ||c||^2 with lam = loading * trace(a^H a)/B,
    the same loading policy as precompute_covariance.
    """
    n, cols = a.shape
    lam = loading * float(np.sum(np.abs(a) ** 2)) / cols
    aug = np.vstack([a, np.sqrt(lam) * np.eye(cols, dtype=a.dtype)])
    rhs = np.concatenate([b, np.zeros(cols, dtype=b.dtype)])
    q, r = np.linalg.qr(aug)
    return np.linalg.solve(r, q.conj().T @ rhs)


def descriptors_json(spec: BasisSpec) -> list[dict]:
    """JSON-ready BF descriptor list (pruning reports, complexity accounting)."""
    return [t.to_dict() for t in enumerate_bfs(spec)]
