"""Conditional multivariate Granger causality into a single target.

For each variable v, the full model regresses the target on an intercept
plus lags 1..max_lag of every variable; the reduced model drops v's lags.
The RSS-based F statistic decides whether v's history improves prediction
of the target beyond everything else's history.  Only the target's
equation is fit: the test is used purely for feature selection.
"""

from __future__ import annotations

import math
import warnings
from dataclasses import dataclass
from enum import Enum

import numpy as np
import scipy.linalg

from .data import TimeSeriesDataset
from .errors import InsufficientHistory, InvalidArgument
from .stats import RANK_RTOL, benjamini_hochberg, f_cdf, ols


class FeatureMethod(str, Enum):
    """How a forecaster's input variables were chosen; doubles as the
    experiment variant name."""

    VANILLA = "vanilla"
    GC = "gc"
    PCMCI_PLUS = "pcmci+"
    DPCMCI_PLUS = "dpcmci+"


@dataclass(frozen=True)
class FeatureSet:
    """Input-variable roster for one forecaster variant.

    The target is always a member: its own history is available to
    every model.
    """

    method: FeatureMethod
    features: tuple[str, ...]

    def __post_init__(self):
        object.__setattr__(self, "features", tuple(self.features))

    def to_dict(self) -> dict:
        return {"method": self.method.value, "features": list(self.features)}


@dataclass(frozen=True)
class GrangerResult:
    variable: str
    f_statistic: float
    p_value: float
    dof: tuple[int, int]
    selected: bool

    def to_dict(self) -> dict:
        return {
            "variable": self.variable,
            "F": self.f_statistic,
            "p": self.p_value,
            "dof": list(self.dof),
            "selected": self.selected,
        }


def lagged_design(values: np.ndarray, max_lag: int) -> np.ndarray:
    """Stack lags 1..max_lag of every column over rows t = max_lag..T-1.

    Column layout: variable i owns the max_lag consecutive columns
    starting at i * max_lag, ordered by increasing lag.
    """
    T, N = values.shape
    n_obs = T - max_lag
    out = np.empty((n_obs, N * max_lag), dtype=np.float64)
    for i in range(N):
        for lag in range(1, max_lag + 1):
            out[:, i * max_lag + (lag - 1)] = values[max_lag - lag : T - lag, i]
    return out


def mvgc_test(
    dataset: TimeSeriesDataset,
    target: str | None = None,
    max_lag: int = 21,
    alpha: float = 0.05,
) -> list[GrangerResult]:
    """Granger F-tests of every non-target variable into the target.

    Expects a preprocessed (imputed, normalized) dataset.  Collinear lag
    columns are dropped before testing (pivoted QR, most dependent
    columns first) with a warning; a variable whose lag columns all drop
    out scores F = 0, p = 1.  ``selected`` flags come from
    Benjamini-Hochberg FDR across the N-1 tests at ``alpha``.
    """
    if max_lag < 1:
        raise InvalidArgument(f"max_lag must be >= 1, got {max_lag}")
    target = target if target is not None else dataset.target_name
    if target not in dataset.variable_names:
        raise InvalidArgument(f"unknown target {target!r}")
    values = dataset.values
    T, N = values.shape
    if T <= N * max_lag + max_lag + 10:
        raise InsufficientHistory(
            f"T = {T} but conditional Granger testing at max_lag {max_lag} "
            f"with {N} variables needs T > {N * max_lag + max_lag + 10}"
        )

    lagged = lagged_design(values, max_lag)
    design = np.column_stack([np.ones(lagged.shape[0]), lagged])
    response = values[max_lag:, dataset.variable_names.index(target)]

    kept = _independent_columns(design)
    n_dropped = design.shape[1] - kept.size
    if n_dropped:
        warnings.warn(
            f"dropped {n_dropped} collinear lag column(s) before Granger "
            f"testing",
            stacklevel=2,
        )
    full_fit = ols(design[:, kept], response)
    n_obs = full_fit.n_obs
    d2 = n_obs - full_fit.n_params

    results: list[tuple[str, float, float, tuple[int, int]]] = []
    for i, name in enumerate(dataset.variable_names):
        if name == target:
            continue
        var_cols = set(range(1 + i * max_lag, 1 + (i + 1) * max_lag))
        reduced_cols = np.array([c for c in kept if c not in var_cols], dtype=int)
        d1 = kept.size - reduced_cols.size
        if d1 == 0:
            results.append((name, 0.0, 1.0, (0, d2)))
            continue
        reduced_fit = ols(design[:, reduced_cols], response)
        f_stat, p = _f_test(reduced_fit.rss, full_fit.rss, d1, d2)
        results.append((name, f_stat, p, (d1, d2)))

    mask = benjamini_hochberg([r[2] for r in results], alpha)
    return [
        GrangerResult(
            variable=name, f_statistic=f, p_value=p, dof=dof, selected=bool(sel)
        )
        for (name, f, p, dof), sel in zip(results, mask)
    ]


def select_features_gc(
    results: list[GrangerResult], dataset: TimeSeriesDataset
) -> FeatureSet:
    """Target plus every selected variable, in dataset column order."""
    chosen = {r.variable for r in results if r.selected}
    chosen.add(dataset.target_name)
    return FeatureSet(
        method=FeatureMethod.GC,
        features=tuple(v for v in dataset.variable_names if v in chosen),
    )


def results_to_dict(
    results: list[GrangerResult],
    dataset: TimeSeriesDataset,
    max_lag: int,
    alpha: float,
) -> dict:
    return {
        "method": "mvgc",
        "target": dataset.target_name,
        "max_lag": max_lag,
        "alpha": alpha,
        "variables": list(dataset.variable_names),
        "results": [r.to_dict() for r in results],
        "features": list(select_features_gc(results, dataset).features),
    }


def _independent_columns(design: np.ndarray) -> np.ndarray:
    """Indices of a maximal well-conditioned column subset (pivoted QR)."""
    _, R, piv = scipy.linalg.qr(design, mode="economic", pivoting=True)
    diag = np.abs(np.diag(R))
    if diag.size == 0 or diag[0] == 0.0:
        return np.array([], dtype=int)
    rank = int(np.sum(diag > RANK_RTOL * diag[0]))
    return np.sort(piv[:rank])


def _f_test(rss_r: float, rss_f: float, d1: int, d2: int) -> tuple[float, float]:
    if d2 < 1:
        raise InsufficientHistory("no residual degrees of freedom")
    num = max(rss_r - rss_f, 0.0) / d1
    if rss_f <= 0.0:
        # perfect full fit: any reduction in fit is infinitely significant
        return (math.inf, 0.0) if num > 0.0 else (0.0, 1.0)
    f_stat = num / (rss_f / d2)
    return f_stat, 1.0 - f_cdf(f_stat, d1, d2)
