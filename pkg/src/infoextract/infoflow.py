"""Mutual information estimators and direct mutual information.

All values are in nats. The binned estimator is the B x B histogram plug-in
with Miller-Madow correction; the HCR estimator integrates a fitted bivariate
polynomial density. Direct mutual information removes the candidate
intermediate variables from both sides by extraction before measuring.
"""
from __future__ import annotations

from dataclasses import dataclass, field
from typing import Sequence

import numpy as np
from scipy import stats

from . import hcr
from .errors import InvalidInput, Unsupported
from .extraction import fit_extraction
from .table import SampleTable

NATS_PER_BIT = float(np.log(2.0))
DEFAULT_BINS = 16


@dataclass(frozen=True)
class MiEstimate:
    value: float
    method: str
    params: dict
    n: int
    details: dict = field(default_factory=dict)

    def bits(self) -> float:
        return self.value / NATS_PER_BIT

    def to_dict(self, units: str = "nats") -> dict:
        scale = 1.0 if units == "nats" else 1.0 / NATS_PER_BIT
        out = {"value": self.value * scale, "method": self.method, "params": self.params,
               "n": self.n, "units": units}
        for key, val in self.details.items():
            out[key] = val * scale if isinstance(val, float) else val
        return out


def _bin_index(u, bins):
    u = hcr._check_unit(u, "binned MI inputs")
    return np.minimum((u * bins).astype(np.intp), bins - 1)


def _entropy_mm(labels, n):
    """Miller-Madow corrected plug-in entropy of integer labels."""
    counts = np.bincount(labels)
    # sorted so that relabelling (e.g. transposing a histogram) gives identical sums
    counts = np.sort(counts[counts > 0])
    p = counts / n
    return float(-(p * np.log(p)).sum() + (counts.size - 1) / (2.0 * n))


def _mi_labels(a, b, n_b_labels, n):
    joint = a * n_b_labels + b
    return _entropy_mm(a, n) + _entropy_mm(b, n) - _entropy_mm(joint, n)


def mutual_information_binned(u, v, bins: int = DEFAULT_BINS) -> MiEstimate:
    """Histogram plug-in MI with Miller-Madow bias correction, clamped at 0."""
    u = np.asarray(u, dtype=float)
    v = np.asarray(v, dtype=float)
    if u.shape != v.shape or u.ndim != 1:
        raise InvalidInput(f"columns differ in shape: {u.shape} vs {v.shape}")
    if bins < 2:
        raise InvalidInput("need at least 2 bins")
    if u.size == 0:
        raise InvalidInput("cannot estimate MI from empty columns")
    a, b = _bin_index(u, bins), _bin_index(v, bins)
    n = u.size
    raw = _mi_labels(a, b, bins, n)
    return MiEstimate(max(raw, 0.0), "binned", {"bins": int(bins)}, int(n),
                      {"unclamped": raw})


def hcr_mi_from_model(model: hcr.JointDensityModel, grid: int = 64,
                      floor: float = hcr.DEFAULT_FLOOR) -> tuple[float, float]:
    """(quadratic approximation, calibrated grid plug-in) for a bivariate model."""
    if model.dims != 2:
        raise InvalidInput("HCR mutual information needs a bivariate model")
    a = model.coeffs
    quadratic = 0.5 * float(np.sum(a[1:, 1:] ** 2))
    mid = (np.arange(grid) + 0.5) / grid
    F = hcr.legendre_matrix(mid, model.degree)
    raw = F @ a @ F.T
    rho = np.maximum(raw, floor)
    rho /= rho.mean()
    rx = rho.mean(axis=1, keepdims=True)
    ry = rho.mean(axis=0, keepdims=True)
    plugin = float(np.mean(rho * np.log(rho / (rx * ry))))
    return quadratic, max(plugin, 0.0)


def mutual_information_hcr(u, v, degree: int = hcr.DEFAULT_DEGREE, grid: int = 64) -> MiEstimate:
    u = hcr._check_unit(u, "HCR MI inputs")
    v = hcr._check_unit(v, "HCR MI inputs")
    if u.shape != v.shape:
        raise InvalidInput("columns differ in length")
    model = hcr.fit_joint(np.column_stack([u, v]), degree)
    quadratic, plugin = hcr_mi_from_model(model, grid)
    return MiEstimate(plugin, "hcr-plugin", {"degree": degree, "grid": grid}, int(u.size),
                      {"quadratic": quadratic, "plugin": plugin})


def direct_mutual_information(table: SampleTable, x: str, y: str, z: Sequence[str] = (),
                              method=None, degree: int = hcr.DEFAULT_DEGREE,
                              bins: int = DEFAULT_BINS, **options) -> MiEstimate:
    """MI between ``x`` and ``y`` after extracting each one given ``z`` only.

    ``details["raw"]`` carries the plain binned I(X;Y) for contrast.
    """
    z = tuple(z)
    if x == y:
        raise InvalidInput("x and y must be different columns")
    if x in z or y in z:
        raise InvalidInput("x and y must not be among the intermediate columns")
    xl = fit_extraction(table, x, z, method, degree, **options)
    yl = fit_extraction(table, y, z, method, degree, **options)
    xb, yb = xl.forward(table), yl.forward(table)
    direct = mutual_information_binned(xb, yb, bins)
    raw = mutual_information_binned(table.column(x), table.column(y), bins)
    return MiEstimate(direct.value, "direct-binned",
                      {"bins": bins, "degree": degree, "method": xl.method, "z": list(z)},
                      table.n_rows, {"raw": raw.value})


def conditional_mi_reference(table: SampleTable, x: str, y: str, z: Sequence[str] = (),
                             bins: int = 8) -> MiEstimate:
    """Binned ``I(X; Y,Z) - I(X; Z)`` for at most two conditioning columns."""
    z = tuple(z)
    if len(z) > 2:
        raise Unsupported("the binned conditional-MI reference handles at most 2 "
                          "conditioning columns")
    if bins < 2:
        raise InvalidInput("need at least 2 bins")
    n = table.n_rows
    xa = _bin_index(table.column(x), bins)
    if not z:
        est = mutual_information_binned(table.column(x), table.column(y), bins)
        return MiEstimate(est.value, "cmi-binned", {"bins": bins, "z": []}, n,
                          {"difference": est.value})
    zl = np.zeros(n, dtype=np.intp)
    for col in z:
        zl = zl * bins + _bin_index(table.column(col), bins)
    nz = bins ** len(z)
    yz = _bin_index(table.column(y), bins) * nz + zl
    diff = _mi_labels(xa, yz, bins * nz, n) - _mi_labels(xa, zl, nz, n)
    return MiEstimate(max(diff, 0.0), "cmi-binned", {"bins": bins, "z": list(z)}, n,
                      {"difference": float(diff)})


def spearman(u, v) -> float:
    """Pearson correlation of average ranks; 0 if either column is constant."""
    ru, rv = stats.rankdata(u), stats.rankdata(v)
    su, sv = ru.std(), rv.std()
    if su == 0 or sv == 0:
        return 0.0
    return float(np.mean((ru - ru.mean()) * (rv - rv.mean())) / (su * sv))


def ks_uniform(u) -> float:
    """Kolmogorov-Smirnov distance between the sample and U[0, 1]."""
    return float(stats.kstest(np.asarray(u, dtype=float), "uniform").statistic)


def mi_matrix(table: SampleTable, bins: int = DEFAULT_BINS) -> np.ndarray:
    k = table.n_columns
    out = np.zeros((k, k))
    for i in range(k):
        for j in range(i + 1, k):
            out[i, j] = out[j, i] = mutual_information_binned(
                table.data[:, i], table.data[:, j], bins).value
    return out
