"""Hierarchical correlation reconstruction: polynomial densities on [0, 1]^d.

Densities are linear combinations of products of orthonormal shifted Legendre
polynomials. Coefficients of a joint model are plain sample means of basis
products. Evaluated densities are calibrated on a uniform grid as
``max(rho, floor) / Z`` and integrated with the trapezoid rule, which gives a
strictly increasing, piecewise-linear conditional CDF.

Two routes lead to a conditional density of one variable given others:

* :func:`conditional_slice` substitutes the conditioning values into a fitted
  :class:`JointDensityModel`;
* :class:`MomentRegressionModel` predicts each moment ``f_i(x)`` from basis
  features of the conditioning columns by ridge least squares and assembles
  ``1 + sum_i f_i(x) a_i(y)``.

Both reduce to a per-row vector of coefficients ``c_0..c_m`` of the target
basis; :func:`rows_cdf` and :func:`rows_quantile` turn such rows into CDF
values and inverse-CDF values in bulk.
"""
from __future__ import annotations

import itertools
import math
from dataclasses import dataclass, field

import numpy as np

from .errors import CapacityExceeded, InvalidInput, NumericalFailure
from .table import SampleTable

DEFAULT_DEGREE = 4
DEFAULT_GRID = 1024
DEFAULT_FLOOR = 0.1
DEFAULT_RIDGE = 1e-6
MAX_TENSOR_ENTRIES = 10**7
_ROW_CHUNK = 2048


# --------------------------------------------------------------------------
# basis


@dataclass(frozen=True)
class HcrBasis:
    """Orthonormal shifted Legendre polynomials ``f_0..f_m`` on [0, 1]."""

    degree: int

    def __post_init__(self):
        if int(self.degree) != self.degree or self.degree < 0:
            raise InvalidInput(f"basis degree must be a non-negative integer, got {self.degree}")

    def __call__(self, i, x):
        return basis_eval(self, i, x)

    def matrix(self, x) -> np.ndarray:
        """Evaluate all basis functions: returns shape ``x.shape + (m + 1,)``."""
        return legendre_matrix(x, self.degree)


def legendre_matrix(x, degree: int) -> np.ndarray:
    x = np.asarray(x, dtype=float)
    t = 2.0 * x - 1.0
    out = np.empty(x.shape + (degree + 1,))
    out[..., 0] = 1.0
    if degree >= 1:
        out[..., 1] = t
    for k in range(1, degree):
        out[..., k + 1] = ((2 * k + 1) * t * out[..., k] - k * out[..., k - 1]) / (k + 1)
    out *= np.sqrt(2.0 * np.arange(degree + 1) + 1.0)
    return out


def basis_eval(basis: HcrBasis, i: int, x):
    """Value of ``f_i`` at ``x`` (scalar or array) in [0, 1]."""
    if int(i) != i or not 0 <= i <= basis.degree:
        raise InvalidInput(f"basis index {i} outside 0..{basis.degree}")
    arr = np.asarray(x, dtype=float)
    if np.any((arr < 0.0) | (arr > 1.0)) or not np.all(np.isfinite(arr)):
        raise InvalidInput("basis arguments must lie in [0, 1]")
    out = legendre_matrix(arr, int(i))[..., int(i)]
    return float(out) if out.ndim == 0 else out


def _check_unit(values, what="values"):
    arr = np.asarray(values, dtype=float)
    if not np.all(np.isfinite(arr)) or np.any((arr < 0.0) | (arr > 1.0)):
        raise InvalidInput(f"{what} must lie in [0, 1]; normalize the data first")
    return arr


def _as_matrix(table) -> np.ndarray:
    if isinstance(table, SampleTable):
        return table.data
    arr = np.asarray(table, dtype=float)
    if arr.ndim == 1:
        arr = arr[:, None]
    return arr


def _row_kron(mats, n: int) -> np.ndarray:
    """Row-wise Kronecker product, C order (first matrix varies slowest)."""
    out = np.ones((n, 1))
    for mat in mats:
        out = (out[:, :, None] * mat[:, None, :]).reshape(n, -1)
    return out


# --------------------------------------------------------------------------
# joint model


@dataclass(frozen=True)
class JointDensityModel:
    """Coefficient tensor ``a[i_1, ..., i_d]`` of a d-variate HCR density."""

    coeffs: np.ndarray

    def __post_init__(self):
        c = np.asarray(self.coeffs, dtype=float)
        if c.ndim < 1 or len(set(c.shape)) != 1:
            raise InvalidInput(f"coefficient tensor must be a hypercube, got shape {c.shape}")
        c = np.array(c)
        c.setflags(write=False)
        object.__setattr__(self, "coeffs", c)

    @property
    def dims(self) -> int:
        return self.coeffs.ndim

    @property
    def degree(self) -> int:
        return self.coeffs.shape[0] - 1

    def to_dict(self) -> dict:
        return {
            "kind": "joint",
            "dims": self.dims,
            "degree": self.degree,
            "coeffs": self.coeffs.ravel(order="C").tolist(),
        }

    @classmethod
    def from_dict(cls, payload: dict) -> "JointDensityModel":
        d, m = int(payload["dims"]), int(payload["degree"])
        flat = np.asarray(payload["coeffs"], dtype=float)
        if flat.size != (m + 1) ** d:
            raise InvalidInput("coefficient list length does not match dims/degree")
        return cls(flat.reshape((m + 1,) * d))


def fit_joint(table, degree: int = DEFAULT_DEGREE,
              max_entries: int = MAX_TENSOR_ENTRIES) -> JointDensityModel:
    """Estimate every coefficient as the sample mean of its basis product.

    Sums are exact (``math.fsum``), so the result does not depend on how the
    rows are ordered or chunked.
    """
    data = _as_matrix(table)
    if data.ndim != 2 or data.shape[0] < 1 or data.shape[1] < 1:
        raise InvalidInput("fit_joint needs at least one row and one column")
    if int(degree) != degree or degree < 0:
        raise InvalidInput(f"degree must be a non-negative integer, got {degree}")
    _check_unit(data, "fit_joint inputs")
    n, d = data.shape
    size = (degree + 1) ** d
    if size > max_entries:
        raise CapacityExceeded(
            f"coefficient tensor of {size} entries exceeds the cap of {max_entries}")
    basis = [legendre_matrix(data[:, k], degree) for k in range(d)]
    coeffs = np.empty(size)
    for flat, idx in enumerate(itertools.product(range(degree + 1), repeat=d)):
        if not any(idx):
            coeffs[flat] = 1.0
            continue
        prod = basis[0][:, idx[0]].copy()
        for k in range(1, d):
            prod *= basis[k][:, idx[k]]
        coeffs[flat] = math.fsum(prod) / n
    return JointDensityModel(coeffs.reshape((degree + 1,) * d))


def eval_raw_density(model: JointDensityModel, point) -> float:
    """Uncalibrated density ``sum a * prod f`` at one point; may be negative."""
    point = np.asarray(point, dtype=float).ravel()
    if point.size != model.dims:
        raise InvalidInput(f"point has {point.size} coordinates, model has {model.dims}")
    _check_unit(point, "density arguments")
    vals = legendre_matrix(point, model.degree)
    out = model.coeffs
    for k in range(model.dims):
        out = np.tensordot(vals[k], out, axes=([0], [0]))
    return float(out)


def slice_coefficients(model: JointDensityModel, target_axis: int, given) -> np.ndarray:
    """Per-row target-basis coefficients after substituting the other axes.

    ``given`` has shape ``(n, d - 1)`` with the conditioning values in axis
    order with ``target_axis`` removed. Returns shape ``(n, m + 1)``.
    """
    d, m = model.dims, model.degree
    if not 0 <= target_axis < d:
        raise InvalidInput(f"target axis {target_axis} outside 0..{d - 1}")
    given = np.asarray(given, dtype=float)
    if given.ndim == 1:
        given = given.reshape(1, -1)
    if given.shape[1] != d - 1:
        raise InvalidInput(f"expected {d - 1} conditioning values, got {given.shape[1]}")
    _check_unit(given, "conditioning values")
    moved = np.moveaxis(model.coeffs, target_axis, 0).reshape(m + 1, -1)
    kr = _row_kron([legendre_matrix(given[:, k], m) for k in range(d - 1)], given.shape[0])
    return kr @ moved.T


# --------------------------------------------------------------------------
# calibration and row-wise CDFs


@dataclass(frozen=True)
class CalibratedDensity1D:
    """A positive density on a uniform grid with its trapezoid CDF."""

    grid: np.ndarray
    density: np.ndarray
    Z: float
    cumulative: np.ndarray
    floor: float = DEFAULT_FLOOR

    def cdf(self, x):
        out = _interp_cdf(self.cumulative[None, :], np.atleast_1d(np.asarray(x, float)))
        return float(out[0]) if np.ndim(x) == 0 else out

    def quantile(self, u):
        out = _interp_quantile(self.cumulative[None, :], np.atleast_1d(np.asarray(u, float)))
        return float(out[0]) if np.ndim(u) == 0 else out

    def pdf(self, x):
        return np.interp(x, self.grid, self.density)


def unit_grid(grid_size: int) -> np.ndarray:
    if grid_size < 2:
        raise InvalidInput("grid size must be at least 2")
    return np.linspace(0.0, 1.0, int(grid_size))


def calibrate_rows(raw: np.ndarray, floor: float = DEFAULT_FLOOR):
    """Apply ``max(raw, floor) / Z`` row-wise; returns (density, Z, cumulative)."""
    if not floor > 0:
        raise InvalidInput("calibration floor must be positive")
    raw = np.atleast_2d(raw)
    G = raw.shape[1]
    dx = 1.0 / (G - 1)
    clipped = np.maximum(raw, floor)
    cum = np.zeros_like(clipped)
    np.cumsum(0.5 * dx * (clipped[:, 1:] + clipped[:, :-1]), axis=1, out=cum[:, 1:])
    Z = cum[:, -1].copy()
    density = clipped / Z[:, None]
    cum /= Z[:, None]
    cum[:, -1] = 1.0
    return density, Z, cum


def calibrate(raw, floor: float = DEFAULT_FLOOR) -> CalibratedDensity1D:
    raw = np.asarray(raw, dtype=float)
    density, Z, cum = calibrate_rows(raw[None, :], floor)
    return CalibratedDensity1D(unit_grid(raw.size), density[0], float(Z[0]), cum[0], floor)


def _interp_cdf(cum: np.ndarray, x: np.ndarray) -> np.ndarray:
    G = cum.shape[1]
    pos = np.clip(x, 0.0, 1.0) * (G - 1)
    k = np.minimum(pos.astype(np.intp), G - 2)
    frac = pos - k
    rows = np.arange(cum.shape[0]) if cum.shape[0] == x.shape[0] else np.zeros(x.shape[0], np.intp)
    lo = cum[rows, k]
    return np.clip(lo + frac * (cum[rows, k + 1] - lo), 0.0, 1.0)


def _interp_quantile(cum: np.ndarray, u: np.ndarray) -> np.ndarray:
    n, G = cum.shape[0], cum.shape[1]
    if n != u.shape[0]:
        cum = np.broadcast_to(cum[0], (u.shape[0], G))
        n = u.shape[0]
    u = np.clip(u, 0.0, 1.0)
    # one binary search over all rows: offset row r by 2r so the rows concatenate sorted
    offset = 2.0 * np.arange(n)
    flat = (cum + offset[:, None]).ravel()
    idx = np.searchsorted(flat, u + offset, side="right") - np.arange(n) * G - 1
    k = np.clip(idx, 0, G - 2)
    rows = np.arange(n)
    lo, hi = cum[rows, k], cum[rows, k + 1]
    frac = np.clip((u - lo) / (hi - lo), 0.0, 1.0)
    return (k + frac) / (G - 1)


def _rows_apply(coeffs, values, grid_size, floor, fn):
    coeffs = np.atleast_2d(np.asarray(coeffs, dtype=float))
    values = np.asarray(values, dtype=float)
    if coeffs.shape[0] != values.shape[0]:
        raise InvalidInput("coefficient rows and values differ in length")
    F = legendre_matrix(unit_grid(grid_size), coeffs.shape[1] - 1)
    out = np.empty(values.shape[0])
    for start in range(0, values.shape[0], _ROW_CHUNK):
        sl = slice(start, start + _ROW_CHUNK)
        _, _, cum = calibrate_rows(coeffs[sl] @ F.T, floor)
        out[sl] = fn(cum, values[sl])
    return out


def rows_cdf(coeffs, x, grid_size: int = DEFAULT_GRID, floor: float = DEFAULT_FLOOR):
    """Calibrated CDF of each row's density ``sum_i c_i f_i`` at that row's x."""
    return _rows_apply(coeffs, x, grid_size, floor, _interp_cdf)


def rows_quantile(coeffs, u, grid_size: int = DEFAULT_GRID, floor: float = DEFAULT_FLOOR):
    """Inverse of :func:`rows_cdf` for each row at level u."""
    return _rows_apply(coeffs, u, grid_size, floor, _interp_quantile)


def density_from_coefficients(coeffs, grid_size: int = DEFAULT_GRID,
                              floor: float = DEFAULT_FLOOR) -> CalibratedDensity1D:
    coeffs = np.asarray(coeffs, dtype=float).ravel()
    grid = unit_grid(grid_size)
    raw = legendre_matrix(grid, coeffs.size - 1) @ coeffs
    return calibrate(raw, floor)


def conditional_slice(model: JointDensityModel, target_axis: int, given,
                      grid_size: int = DEFAULT_GRID,
                      floor: float = DEFAULT_FLOOR) -> CalibratedDensity1D:
    """Calibrated density of one axis with the other axes held at ``given``."""
    if grid_size < 64:
        raise InvalidInput("grid size must be at least 64")
    given = np.asarray(given, dtype=float).reshape(1, -1)
    c = slice_coefficients(model, target_axis, given)[0]
    return density_from_coefficients(c, grid_size, floor)


# --------------------------------------------------------------------------
# moment regression


@dataclass(frozen=True)
class MomentRegressionModel:
    """Ridge regressions predicting each moment ``f_i(target)`` from features.

    ``features`` lists the retained features: ``(column, j)`` stands for
    ``f_j(column)`` and ``(column, j, column2, k)`` for the product
    ``f_j(column) * f_k(column2)``. ``weights`` has shape
    ``(len(features), degree)`` and ``bias`` shape ``(degree,)``.
    """

    degree: int
    given: tuple
    features: tuple
    weights: np.ndarray
    bias: np.ndarray
    ridge: float = DEFAULT_RIDGE
    interactions: bool = False
    dropped: tuple = field(default=())

    def feature_matrix(self, given_values) -> np.ndarray:
        given_values = np.asarray(given_values, dtype=float)
        if given_values.ndim == 1:
            given_values = given_values[None, :]
        if given_values.shape[1] != len(self.given):
            raise InvalidInput(
                f"expected {len(self.given)} conditioning values, got {given_values.shape[1]}")
        _check_unit(given_values, "conditioning values")
        return _build_features(given_values, self.given, self.features, self.degree)

    def predict_moments(self, given_values) -> np.ndarray:
        """Predicted ``a_1..a_m`` per row, shape ``(n, m)``."""
        phi = self.feature_matrix(given_values)
        return phi @ self.weights + self.bias

    def row_coefficients(self, given_values) -> np.ndarray:
        moments = self.predict_moments(given_values)
        return np.column_stack([np.ones(moments.shape[0]), moments])

    def to_dict(self) -> dict:
        return {
            "kind": "regression",
            "degree": self.degree,
            "given": list(self.given),
            "features": [list(f) for f in self.features],
            "weights": self.weights.tolist(),
            "bias": self.bias.tolist(),
            "ridge": self.ridge,
            "interactions": self.interactions,
            "dropped": [list(f) for f in self.dropped],
        }

    @classmethod
    def from_dict(cls, payload: dict) -> "MomentRegressionModel":
        m = int(payload["degree"])
        feats = tuple(tuple(f) for f in payload["features"])
        w = np.asarray(payload["weights"], dtype=float).reshape(len(feats), m)
        return cls(m, tuple(payload["given"]), feats, w,
                   np.asarray(payload["bias"], dtype=float), float(payload["ridge"]),
                   bool(payload["interactions"]),
                   tuple(tuple(f) for f in payload.get("dropped", [])))


def _candidate_features(given, degree, interactions):
    feats = [(c, j) for c in given for j in range(1, degree + 1)]
    if interactions:
        for a, b in itertools.combinations(given, 2):
            feats += [(a, j, b, k) for j in range(1, degree + 1) for k in range(1, degree + 1)]
    return feats


def _build_features(values, given, features, degree):
    pos = {c: i for i, c in enumerate(given)}
    basis = {c: legendre_matrix(values[:, pos[c]], degree) for c in given}
    phi = np.empty((values.shape[0], len(features)))
    for col, feat in enumerate(features):
        phi[:, col] = basis[feat[0]][:, feat[1]]
        if len(feat) == 4:
            phi[:, col] *= basis[feat[2]][:, feat[3]]
    return phi


def fit_moment_regression(table: SampleTable, target: str, given, degree: int = DEFAULT_DEGREE,
                          ridge: float = DEFAULT_RIDGE,
                          interactions: bool = False) -> MomentRegressionModel:
    """Fit ``a_i(y)`` for i = 1..m by ridge least squares on basis features.

    The intercept is not penalized, so an empty conditioning set yields the
    marginal moments ``mean f_i(x)``.
    """
    given = tuple(given)
    if degree < 1:
        raise InvalidInput("moment regression needs degree >= 1")
    if target in given:
        raise InvalidInput(f"target {target!r} is also a conditioning column")
    x = _check_unit(table.column(target), f"column {target!r}")
    y = _check_unit(table.columns(list(given)), "conditioning columns") if given else \
        np.empty((table.n_rows, 0))
    n = table.n_rows
    candidates = _candidate_features(given, degree, interactions)
    phi = _build_features(y, given, candidates, degree)
    if n <= len(candidates) + 1:
        raise InvalidInput(f"{n} rows are too few for {len(candidates) + 1} regression features")

    var = phi.var(axis=0) if candidates else np.empty(0)
    keep = var > 1e-12
    features = tuple(f for f, k in zip(candidates, keep) if k)
    dropped = tuple(f for f, k in zip(candidates, keep) if not k)
    phi = phi[:, keep]

    targets = legendre_matrix(x, degree)[:, 1:]
    t_mean = targets.mean(axis=0)
    if not features:
        weights = np.zeros((0, degree))
        bias = t_mean
    else:
        mu = phi.mean(axis=0)
        centered = phi - mu
        gram = centered.T @ centered / n + ridge * np.eye(len(features))
        rhs = centered.T @ (targets - t_mean) / n
        try:
            weights = np.linalg.solve(gram, rhs)
        except np.linalg.LinAlgError as exc:
            raise NumericalFailure(f"moment regression normal equations are singular: {exc}")
        bias = t_mean - mu @ weights
    if not (np.all(np.isfinite(weights)) and np.all(np.isfinite(bias))):
        raise NumericalFailure("moment regression produced non-finite weights")
    return MomentRegressionModel(degree, given, features, weights, bias, ridge,
                                 interactions, dropped)


def predict_conditional(model: MomentRegressionModel, given_row,
                        grid_size: int = DEFAULT_GRID,
                        floor: float = DEFAULT_FLOOR) -> CalibratedDensity1D:
    """Calibrated ``1 + sum_i f_i(x) a_i(given_row)`` on the grid."""
    c = model.row_coefficients(np.asarray(given_row, dtype=float).reshape(1, -1))[0]
    return density_from_coefficients(c, grid_size, floor)


def model_from_dict(payload: dict):
    kind = payload.get("kind")
    if kind == "joint":
        return JointDensityModel.from_dict(payload)
    if kind == "regression":
        return MomentRegressionModel.from_dict(payload)
    raise InvalidInput(f"unknown model kind {kind!r}")
