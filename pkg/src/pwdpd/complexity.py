"""FLOP-count model for the DPD main path and parameter learning.

Cost model: complex multiply 6 FLOPs, complex-real multiply 2, complex add 2.
Main-path entries are FLOPs per transmitted sample; learning entries are the
total learning cost normalized by the iterations x block-size training
samples, so both columns are comparable per-sample figures.

The five accounted configurations:

  pw_ila            piecewise ILA, per-region LS
  cl_self_orth      single-polynomial closed loop, self-orthogonalized rule
  cl_orth_bfs       single-polynomial closed loop, orthogonalized basis
  pwcl_self_orth    piecewise closed loop, self-orthogonalized rule
  pwcl_orth_pruned  piecewise closed loop, orthogonalized + pruned basis
"""

from __future__ import annotations

import math
from dataclasses import dataclass

from .errors import ConfigError

CONFIGS = ("pw_ila", "cl_self_orth", "cl_orth_bfs", "pwcl_self_orth", "pwcl_orth_pruned")


@dataclass(frozen=True)
class ComplexityParams:
    """Basis-set cardinalities and learning schedule.

    n_isp / n_ipw: instantaneous (lag-0) BF counts for the single-polynomial
    and piecewise structures; n_sp / n_pw: full BF counts; n_pw_pruned: the
    piecewise count survived by pruning.
    """

    n_isp: int
    n_ipw: int
    n_sp: int
    n_pw: int
    k: int
    b_cl: int
    i_cl: int
    b_ila: int
    i_ila: int
    n_pw_pruned: int | None = None

    def __post_init__(self):
        for name in ("n_isp", "n_ipw", "n_sp", "n_pw", "k", "b_cl", "i_cl", "b_ila", "i_ila"):
            if getattr(self, name) <= 0:
                raise ConfigError(f"{name} must be positive")
        if self.n_pw_pruned is not None:
            if not 0 < self.n_pw_pruned <= self.n_pw:
                raise ConfigError("n_pw_pruned must lie in (0, n_pw]")


def reference_params() -> ComplexityParams:
    """Parameter set of the reference numeric ledger."""
    return ComplexityParams(n_isp=5, n_ipw=15, n_sp=116, n_pw=348, k=3,
                            b_cl=20000, i_cl=10, b_ila=50000, i_ila=4, n_pw_pruned=96)


def params_from_spec(spec, b_cl: int, i_cl: int, b_ila: int, i_ila: int,
                     n_pw_pruned: int | None = None) -> ComplexityParams:
    """Derive the cardinalities from a BasisSpec with a partition."""
    single = spec.without_partition()
    n_sp = single.n_basis_single
    n_isp = single.n_instantaneous_single
    k = spec.n_regions
    return ComplexityParams(n_isp=n_isp, n_ipw=k * n_isp, n_sp=n_sp, n_pw=k * n_sp,
                            k=k, b_cl=b_cl, i_cl=i_cl, b_ila=b_ila, i_ila=i_ila,
                            n_pw_pruned=n_pw_pruned)


def _ceil(x: float) -> int:
    return int(math.ceil(x - 1e-12))


def flops(config: str, p: ComplexityParams, exact_division: bool = False) -> dict:
    """Per-sample FLOP ledger for one DPD configuration.

    exact_division evaluates the pruned Filt/Orth cells without the
    per-region ceilings (the reference numeric ledger appears to reflect
    unequal per-region pruned counts; both readings agree when the pruned
    count divides evenly by K).
    """
    if config not in CONFIGS:
        raise ConfigError(f"config must be one of {CONFIGS}")
    flags: list[str] = []
    k = p.k
    ipw_k = _ceil(p.n_ipw / k)
    pw_k = _ceil(p.n_pw / k)
    cl_samples = p.i_cl * p.b_cl
    ila_samples = p.i_ila * p.b_ila

    if config == "pw_ila":
        bf_gen = 2 * ipw_k - 1
        filt = 8 * pw_k - 2
        orth = 0.0
        learn_bf_gen = ila_samples * (2 * ipw_k + 1) / ila_samples
        learn_est = (4 * p.i_ila * k * pw_k ** 2
                     * (_ceil(p.b_ila / k) + _ceil(p.n_pw / (3 * k)))) / ila_samples
        flags.append(
            "learning entries are per-sample normalized; the widely quoted 2.7e9 "
            "figure for this column is not derivable from the symbolic formula "
            "with these parameters (it appears un-normalized)")
        flags.append("learning BF-gen formula gives 11/sample where the numeric "
                     "table prints 9")
    elif config == "cl_self_orth":
        bf_gen = 2 * p.n_isp - 1
        filt = 8 * p.n_sp - 2
        orth = 0.0
        learn_bf_gen = 0.0
        learn_est = (p.i_cl * p.b_cl * p.n_sp * (4 * p.n_sp + 6)) / cl_samples
    elif config == "cl_orth_bfs":
        bf_gen = 2 * p.n_isp - 1
        filt = 8 * p.n_sp - 2
        orth = 2 * p.n_sp ** 2
        learn_bf_gen = 0.0
        learn_est = (p.i_cl * p.n_sp * (8 * p.b_cl + 2)) / cl_samples
    elif config == "pwcl_self_orth":
        bf_gen = 2 * ipw_k - 1
        filt = 8 * pw_k - 2
        orth = 0.0
        learn_bf_gen = 0.0
        learn_est = (p.i_cl * p.b_cl * pw_k * (4 * p.n_pw / k + 6)) / cl_samples
    else:  # pwcl_orth_pruned
        if p.n_pw_pruned is None:
            raise ConfigError("pwcl_orth_pruned requires n_pw_pruned")
        pr_k = _ceil(p.n_pw_pruned / k)
        pr_k_exact = p.n_pw_pruned / k
        bf_gen = 2 * pr_k - 1
        if exact_division:
            filt = 8 * pr_k_exact - 2
            orth = 2 * pr_k_exact ** 2
        else:
            filt = 8 * pr_k - 2
            orth = 2 * _ceil(pr_k_exact ** 2)
        learn_bf_gen = 0.0
        learn_est = (8 * p.b_cl * pw_k + 2 * pr_k * p.i_cl
                     + 8 * pr_k * p.b_cl * (p.i_cl - 1)) / cl_samples

    return {
        "config": config,
        "bf_gen": float(bf_gen),
        "filt": float(filt),
        "orth": float(orth),
        "dpd_total": float(bf_gen + filt + orth),
        "learn_bf_gen": float(learn_bf_gen),
        "learn_est": float(learn_est),
        "learn_total": float(learn_bf_gen + learn_est),
        "flags": flags,
    }


def full_ledger(p: ComplexityParams, exact_division: bool = False) -> dict:
    """Ledger rows for every configuration (pruned column only when counts given)."""
    rows = {}
    for config in CONFIGS:
        if config == "pwcl_orth_pruned" and p.n_pw_pruned is None:
            continue
        rows[config] = flops(config, p, exact_division)
    return rows


def format_ledger(rows: dict) -> str:
    """Fixed-width text table of a full ledger."""
    cols = list(rows)
    fields = [("DPD BF gen.", "bf_gen"), ("DPD Filt.", "filt"), ("DPD Orth.", "orth"),
              ("DPD total", "dpd_total"), ("Learn BF gen.", "learn_bf_gen"),
              ("Learn est.", "learn_est"), ("Learn total", "learn_total")]
    width = max(len(c) for c in cols) + 2
    lines = [" " * 15 + "".join(f"{c:>{width}}" for c in cols)]
    for label, key in fields:
        cells = "".join(f"{rows[c][key]:>{width},.1f}" for c in cols)
        lines.append(f"{label:<15}{cells}")
    notes = [f"note ({c}): {msg}" for c in cols for msg in rows[c]["flags"]]
    return "\n".join(lines + notes)
