"""Multi-feature Granger causality.

The target series is first reduced to residues: the conditional CDF of each
value given its own past (and, optionally, the past of other series), so the
residue carries only the target's new information. The residues are then
compared with the lagged source for every delay: Pearson correlation and
binned MI give a delay profile, and a bivariate HCR fit per delay gives a
coefficient field that PCA compresses into a few delay-dependent features.
"""
from __future__ import annotations

import logging
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from typing import Mapping

import numpy as np
from threadpoolctl import threadpool_limits

from . import hcr
from .decoupling import decouple
from .errors import InvalidInput
from .infoflow import DEFAULT_BINS, mutual_information_binned
from .normalization import fit_quantile_map, forward_quantile, normalize_table
from .table import SampleTable

logger = logging.getLogger(__name__)

MIN_OVERLAP = 100


@dataclass(frozen=True)
class ResidueSeries:
    """Residues ``R_t`` for ``t = start .. length - 1`` of a series of ``length``."""

    values: np.ndarray
    lags: int
    source: str
    mode: str
    model: object
    start: int
    length: int
    conditioned_on: tuple = ()

    def __len__(self) -> int:
        return len(self.values)


def _lagged(series: np.ndarray, lags, start: int) -> np.ndarray:
    T = series.size
    return np.column_stack([series[start - k:T - k] for k in lags])


def fit_residues(x, lags: int = 2, degree: int = hcr.DEFAULT_DEGREE, mode: str = "distribution",
                 source: str = "x", exogenous: Mapping[str, np.ndarray] | None = None,
                 exogenous_lags: int | None = None, ridge: float = hcr.DEFAULT_RIDGE,
                 grid_size: int = hcr.DEFAULT_GRID,
                 floor: float = hcr.DEFAULT_FLOOR, iterations: int = 2) -> ResidueSeries:
    """Remove from ``x`` the information contained in its past.

    ``mode="distribution"`` regresses the moments of ``x_t`` on basis features
    of ``x_{t-1} .. x_{t-lags}`` and returns the conditional CDF value of
    ``x_t``. ``mode="linear"`` returns the classical residue ``x_t`` minus its
    least-squares linear prediction, quantile-normalized to [0, 1].

    ``exogenous`` adds lags ``1 .. exogenous_lags`` of further series to the
    conditioning set (distribution mode only). Each of the ``iterations``
    passes re-extracts the previous residues with the same conditioning
    features; a second pass mops up what one imperfect model leaves behind.
    """
    x = np.asarray(x, dtype=float)
    if lags < 1:
        raise InvalidInput("lag order must be at least 1")
    if mode not in ("distribution", "linear"):
        raise InvalidInput(f"unknown residue mode {mode!r}")
    exogenous = dict(exogenous or {})
    if source in exogenous:
        raise InvalidInput(f"series {source!r} cannot be its own exogenous input")
    if exogenous and mode != "distribution":
        raise InvalidInput("exogenous conditioning requires distribution mode")
    ex_lags = int(exogenous_lags if exogenous_lags is not None else lags) if exogenous else 0
    for name, series in exogenous.items():
        if np.asarray(series).shape != x.shape:
            raise InvalidInput(f"exogenous series {name!r} differs in length from the target")
    T = x.size
    start = max(lags, ex_lags)
    n_features = lags * degree + len(exogenous) * ex_lags * degree if mode == "distribution" \
        else lags
    if T - start <= n_features + 1:
        raise InvalidInput(f"series of length {T} is too short for {n_features} lag features")

    own_lags = range(1, lags + 1)
    if mode == "linear":
        design = np.column_stack([np.ones(T - start), _lagged(x, own_lags, start)])
        coef, *_ = np.linalg.lstsq(design, x[start:], rcond=None)
        raw = x[start:] - design @ coef
        values = forward_quantile(fit_quantile_map(raw), raw)
        return ResidueSeries(np.atleast_1d(values), lags, source, mode, coef, start, T)

    hcr._check_unit(x, f"series {source!r}")
    names = [f"{source}[t-{k}]" for k in own_lags]
    blocks = [_lagged(x, own_lags, start)]
    for name, series in exogenous.items():
        series = hcr._check_unit(series, f"series {name!r}")
        names += [f"{name}[t-{k}]" for k in range(1, ex_lags + 1)]
        blocks.append(_lagged(series, range(1, ex_lags + 1), start))
    if iterations < 1:
        raise InvalidInput("iterations must be at least 1")
    target = f"{source}[t]"
    features = np.column_stack(blocks)
    values = x[start:]
    models = []
    for _ in range(iterations):
        table = SampleTable([target, *names], np.column_stack([values, features]))
        model = hcr.fit_moment_regression(table, target, names, degree, ridge)
        values = hcr.rows_cdf(model.row_coefficients(features), values, grid_size, floor)
        models.append(model)
    return ResidueSeries(values, lags, source, mode, models[0] if iterations == 1 else models,
                         start, T, tuple(exogenous))


def _aligned(residues: ResidueSeries, y: np.ndarray, delay: int):
    first = max(residues.start, delay)
    r = residues.values[first - residues.start:]
    return r, y[first - delay:residues.length - delay]


def _check_delays(residues: ResidueSeries, y, max_delay: int) -> np.ndarray:
    y = np.asarray(y, dtype=float)
    if y.size != residues.length:
        raise InvalidInput(f"source length {y.size} differs from target length {residues.length}")
    if max_delay < 0:
        raise InvalidInput("max_delay must be non-negative")
    overlap = residues.length - max(residues.start, max_delay)
    if overlap < MIN_OVERLAP:
        raise InvalidInput(f"max_delay {max_delay} leaves only {overlap} aligned pairs "
                           f"(need {MIN_OVERLAP})")
    return y


@dataclass(frozen=True)
class DelayProfile:
    delays: np.ndarray
    correlation: np.ndarray
    mi: np.ndarray
    argmax_delay: int
    n_pairs: np.ndarray

    @property
    def peak_abs_correlation(self) -> float:
        return float(np.max(np.abs(self.correlation)))

    def to_rows(self):
        return [(int(d), float(c), float(m)) for d, c, m in
                zip(self.delays, self.correlation, self.mi)]


def delay_profile(residues: ResidueSeries, y, max_delay: int = 10,
                  bins: int = DEFAULT_BINS) -> DelayProfile:
    """Correlation and MI between ``R_t`` and ``y_{t - dt}`` for dt = 0..max_delay."""
    y = _check_delays(residues, y, max_delay)
    delays = np.arange(max_delay + 1)
    corr = np.empty(delays.size)
    mi = np.empty(delays.size)
    counts = np.empty(delays.size, dtype=int)
    for i, d in enumerate(delays):
        r, s = _aligned(residues, y, int(d))
        rc, sc = r - r.mean(), s - s.mean()
        denom = np.sqrt(np.dot(rc, rc) * np.dot(sc, sc))
        corr[i] = np.dot(rc, sc) / denom if denom > 0 else 0.0
        mi[i] = mutual_information_binned(r, s, bins).value
        counts[i] = r.size
    # np.argmax returns the first maximum, i.e. the smallest delay on ties
    return DelayProfile(delays, corr, mi, int(delays[np.argmax(np.abs(corr))]), counts)


@dataclass(frozen=True)
class DelayCoefficientField:
    """Bivariate HCR coefficients ``a[dt, j, k]``; j indexes the residue, k the source."""

    degree: int
    delays: np.ndarray
    coeffs: np.ndarray

    def block(self) -> np.ndarray:
        """The (j, k >= 1) coefficients flattened per delay: ``(n_delays, m*m)``."""
        return self.coeffs[:, 1:, 1:].reshape(len(self.delays), -1)

    def to_rows(self):
        m = self.degree
        return [(int(d), j, k, float(self.coeffs[i, j, k]))
                for i, d in enumerate(self.delays)
                for j in range(m + 1) for k in range(m + 1)]


def delay_coefficients(residues: ResidueSeries, y, max_delay: int = 10,
                       degree: int = hcr.DEFAULT_DEGREE) -> DelayCoefficientField:
    y = _check_delays(residues, y, max_delay)
    hcr._check_unit(y, "source series")
    delays = np.arange(max_delay + 1)
    coeffs = np.stack([
        hcr.fit_joint(np.column_stack(_aligned(residues, y, int(d))), degree).coeffs
        for d in delays
    ])
    return DelayCoefficientField(degree, delays, coeffs)


@dataclass(frozen=True)
class DelayFeatureDecomposition:
    """Principal directions of the coefficient field across delays.

    ``directions`` has one unit vector per row over the ``index`` of (j, k)
    pairs; ``scores[dt, i]`` is the projection of delay dt on direction i.
    """

    rank: int
    index: tuple
    directions: np.ndarray
    scores: np.ndarray
    eigenvalues: np.ndarray
    variance_fraction: float
    mean: np.ndarray
    delays: np.ndarray

    def reconstruct(self) -> np.ndarray:
        """Rank-r approximation of the flattened field, ``(n_delays, m*m)``."""
        return self.scores @ self.directions + self.mean

    def to_dict(self) -> dict:
        return {
            "rank": self.rank,
            "index": [list(ix) for ix in self.index],
            "delays": self.delays.tolist(),
            "directions": self.directions.tolist(),
            "scores": self.scores.tolist(),
            "eigenvalues": self.eigenvalues.tolist(),
            "variance_fraction": self.variance_fraction,
            "mean": self.mean.tolist(),
        }


def pca_reduce(field: DelayCoefficientField, rank: int | None = None,
               variance: float | None = None, center: bool = False) -> DelayFeatureDecomposition:
    """PCA over delays of the (j, k >= 1) coefficient block.

    Pass either ``rank`` or a ``variance`` fraction to reach; by default the
    second-moment matrix is uncentered, so departures from independence are
    decomposed directly.
    """
    M = field.block()
    n_delays, dim = M.shape
    if n_delays < 2:
        raise InvalidInput("PCA needs at least two delays")
    limit = min(n_delays, dim)
    mean = M.mean(axis=0) if center else np.zeros(dim)
    X = M - mean
    second = X.T @ X / n_delays
    evals, evecs = np.linalg.eigh(second)
    order = np.argsort(evals)[::-1]
    evals = np.clip(evals[order], 0.0, None)
    evecs = evecs[:, order]
    total = float(evals.sum())
    if rank is None:
        if variance is None:
            rank = 1
        else:
            if not 0 < variance <= 1:
                raise InvalidInput("variance target must be in (0, 1]")
            frac = np.cumsum(evals) / total if total > 0 else np.ones(dim)
            rank = int(np.searchsorted(frac, variance - 1e-12) + 1)
            rank = min(rank, limit)
    if not 1 <= rank <= limit:
        raise InvalidInput(f"rank {rank} outside 1..{limit}")
    directions = evecs[:, :rank].T.copy()
    captured = float(evals[:rank].sum() / total) if total > 0 else 1.0
    m = field.degree
    index = tuple((j, k) for j in range(1, m + 1) for k in range(1, m + 1))
    return DelayFeatureDecomposition(rank, index, directions, X @ directions.T, evals,
                                     captured, mean, field.delays.copy())


def delay_spectrum(profile: DelayProfile):
    """DFT magnitudes of the mean-removed correlation-vs-delay sequence.

    Returns ``(frequencies, magnitudes)`` for frequencies 0 .. 1/2 in cycles
    per time step.
    """
    c = np.asarray(profile.correlation, dtype=float)
    if c.size < 4:
        raise InvalidInput("a delay spectrum needs at least 4 delays")
    mags = np.abs(np.fft.rfft(c - c.mean()))
    freqs = np.fft.rfftfreq(c.size)
    return freqs, mags


@dataclass
class PairResult:
    source: str
    target: str
    profile: DelayProfile
    field: DelayCoefficientField
    decomposition: DelayFeatureDecomposition
    residues: ResidueSeries

    @property
    def peak_delay(self) -> int:
        return self.profile.argmax_delay

    @property
    def peak_abs_correlation(self) -> float:
        return self.profile.peak_abs_correlation

    def summary(self) -> dict:
        return {
            "source": self.source,
            "target": self.target,
            "peak_delay": self.peak_delay,
            "peak_abs_correlation": self.peak_abs_correlation,
            "peak_mi_nats": float(self.profile.mi.max()),
            "a11_argmax_delay": int(self.field.delays[np.argmax(np.abs(self.field.coeffs[:, 1, 1]))]),
            "rank1_variance_fraction": self.decomposition.variance_fraction
            if self.decomposition.rank == 1 else None,
            "conditioned_on": list(self.residues.conditioned_on),
        }


@dataclass
class GrangerReport:
    pairs: list
    decoupled: bool
    settings: dict = field(default_factory=dict)

    def pair(self, source: str, target: str) -> PairResult:
        for p in self.pairs:
            if p.source == source and p.target == target:
                return p
        raise KeyError((source, target))

    def to_dict(self) -> dict:
        return {"decoupled": self.decoupled, "settings": self.settings,
                "pairs": [p.summary() for p in self.pairs]}


def analyze_pair(target_series, source_series, lags: int = 2, max_delay: int = 10,
                 degree: int = hcr.DEFAULT_DEGREE, source: str = "y", target: str = "x",
                 exogenous=None, bins: int = DEFAULT_BINS, rank: int = 1,
                 mode: str = "distribution", iterations: int = 2) -> PairResult:
    """Residues, delay profile, coefficient field and PCA for one ordered pair."""
    res = fit_residues(target_series, lags, degree, mode, target, exogenous,
                       max_delay if exogenous else None, iterations=iterations)
    y = np.asarray(source_series, dtype=float)
    prof = delay_profile(res, y, max_delay, bins)
    fld = delay_coefficients(res, y, max_delay, degree)
    dec = pca_reduce(fld, rank=min(rank, len(fld.delays), degree * degree))
    return PairResult(source, target, prof, fld, dec, res)


def multivariate_granger(panel: SampleTable, lags: int = 2, max_delay: int = 10,
                         degree: int = hcr.DEFAULT_DEGREE, decouple_first: bool = True,
                         sweeps: int = 2, condition_on_others: bool | None = None,
                         bins: int = DEFAULT_BINS, rank: int = 1,
                         residue_iterations: int = 2,
                         workers: int | None = None) -> GrangerReport:
    """Profile every ordered pair of series, ranked by peak |correlation|.

    With ``decouple_first`` the panel is decoupled contemporaneously (each
    time step a row) and, for each pair, the target's residues also have the
    past of every third series removed, so influence relayed through another
    series of the panel is not attributed to the source.
    """
    if panel.n_columns < 2:
        raise InvalidInput("multivariate Granger analysis needs at least two series")
    if condition_on_others is None:
        condition_on_others = decouple_first
    table, _ = normalize_table(panel)
    if decouple_first:
        table = decouple(table, sweeps=sweeps, degree=degree, track=False).result
    names = table.names

    def run(pair):
        src, tgt = pair
        exo = {c: table.column(c) for c in names if c not in (src, tgt)} \
            if condition_on_others else None
        try:
            return analyze_pair(table.column(tgt), table.column(src), lags, max_delay, degree,
                                src, tgt, exo, bins, rank, iterations=residue_iterations)
        except InvalidInput as exc:
            raise InvalidInput(f"pair {src} -> {tgt}: {exc}") from exc

    pairs = [(s, t) for s in names for t in names if s != t]
    if workers and workers > 1:
        # one BLAS thread per worker avoids oversubscribing the cores
        with threadpool_limits(limits=1), ThreadPoolExecutor(max_workers=workers) as pool:
            results = list(pool.map(run, pairs))
    else:
        results = [run(p) for p in pairs]
    results.sort(key=lambda r: -r.peak_abs_correlation)
    settings = {"lags": lags, "max_delay": max_delay, "degree": degree, "sweeps": sweeps,
                "condition_on_others": condition_on_others, "bins": bins, "rank": rank,
                "residue_iterations": residue_iterations}
    return GrangerReport(results, decouple_first, settings)
