"""CSV ingestion/emission and seeded synthetic generators.

Random streams come from the Philox4x64-10 counter-based generator
(``numpy.random.Philox``) seeded with a 64-bit integer. Uniforms are formed
from the top 53 bits of each raw 64-bit output as ``(k + 0.5) / 2**53``,
which never hits 0 or 1, and Gaussians are their inverse normal CDF
(``scipy.special.ndtri``). Draw order is fixed per generator and documented
in each function, so a spec plus seed always yields the same table.
"""
from __future__ import annotations

import csv
import json
import math
import os
from dataclasses import dataclass, field

import numpy as np
from scipy.special import ndtri

from .errors import FormatError, InvalidInput, ParseError, RefusedOverwrite
from .normalization import normalize_table
from .table import SampleTable

KINDS = ("gaussian-copula", "markov-chain", "lagged-pair", "lagged-chain", "independent")

_DEFAULTS = {
    "gaussian-copula": {"n": 10000, "rho": 0.7, "dims": 2},
    "markov-chain": {"n": 10000, "alpha": 1.0, "beta": 1.0, "noise_z": 1.0, "noise_y": 1.0},
    "lagged-pair": {"n": 5000, "delay": 3, "coupling": 0.8, "noise": 0.6},
    "lagged-chain": {"n": 5000, "delay_xy": 2, "delay_yz": 3, "coupling": 0.8, "noise": 0.6},
    "independent": {"n": 10000, "dims": 3},
}


@dataclass(frozen=True)
class GeneratorSpec:
    kind: str
    params: dict = field(default_factory=dict)
    seed: int = 0

    def resolved(self) -> dict:
        if self.kind not in _DEFAULTS:
            raise InvalidInput(f"unknown generator kind {self.kind!r}; choose from {KINDS}")
        unknown = set(self.params) - set(_DEFAULTS[self.kind])
        if unknown:
            raise InvalidInput(f"unknown parameter(s) {sorted(unknown)} for {self.kind}")
        return {**_DEFAULTS[self.kind], **self.params}

    def to_dict(self) -> dict:
        return {"kind": self.kind, "params": self.resolved(), "seed": self.seed}

    @classmethod
    def from_dict(cls, payload: dict) -> "GeneratorSpec":
        return cls(payload["kind"], dict(payload.get("params", {})), int(payload.get("seed", 0)))

    @classmethod
    def from_json(cls, path) -> "GeneratorSpec":
        with open(path) as fh:
            return cls.from_dict(json.load(fh))


class _Stream:
    def __init__(self, seed: int):
        if not 0 <= seed < 2**64:
            raise InvalidInput("seed must be a 64-bit unsigned integer")
        self._bits = np.random.Philox(seed)

    def uniform(self, size) -> np.ndarray:
        raw = self._bits.random_raw(size)
        return ((raw >> np.uint64(11)).astype(float) + 0.5) * 2.0**-53

    def normal(self, size) -> np.ndarray:
        return ndtri(self.uniform(size))


def _positive_int(params, name, minimum=1):
    value = params[name]
    if int(value) != value or value < minimum:
        raise InvalidInput(f"parameter {name} must be an integer >= {minimum}, got {value}")
    return int(value)


def _finite(params, name, positive=False):
    value = float(params[name])
    if not math.isfinite(value) or (positive and value <= 0):
        raise InvalidInput(f"parameter {name} must be {'positive' if positive else 'finite'}")
    return value


def _gaussian_copula(p, s: _Stream) -> SampleTable:
    # n*dims normals in row-major order, then mixed by the Cholesky factor
    n, d = _positive_int(p, "n"), _positive_int(p, "dims", 2)
    rho = _finite(p, "rho")
    if not -1.0 / (d - 1) < rho < 1.0:
        raise InvalidInput(f"parameter rho={rho} does not give a valid correlation matrix")
    corr = np.full((d, d), rho)
    np.fill_diagonal(corr, 1.0)
    latent = s.normal(n * d).reshape(n, d) @ np.linalg.cholesky(corr).T
    names = ["x", "y"] if d == 2 else [f"x{i + 1}" for i in range(d)]
    return SampleTable(names, latent)


def _markov_chain(p, s: _Stream) -> SampleTable:
    # draws: x (n), z-noise (n), y-noise (n); x -> z -> y so x is independent of y given z
    n = _positive_int(p, "n")
    a, b = _finite(p, "alpha"), _finite(p, "beta")
    sz, sy = _finite(p, "noise_z", True), _finite(p, "noise_y", True)
    x = s.normal(n)
    z = a * x + sz * s.normal(n)
    y = b * z + sy * s.normal(n)
    return SampleTable(["x", "y", "z"], np.column_stack([x, y, z]))


def _lagged_pair(p, s: _Stream) -> SampleTable:
    # draws: y (n + delay, first `delay` are burn-in), noise (n)
    n, d = _positive_int(p, "n"), _positive_int(p, "delay", 0)
    c, sd = _finite(p, "coupling"), _finite(p, "noise", True)
    y = s.normal(n + d)
    x = c * y[:n] + sd * s.normal(n)
    return SampleTable(["x", "y"], np.column_stack([x, y[d:]]))


def _lagged_chain(p, s: _Stream) -> SampleTable:
    # x white; y_t = c x_{t-d1} + noise; z_t = c y_{t-d2} + noise; burn-in d1 + d2
    n = _positive_int(p, "n")
    d1, d2 = _positive_int(p, "delay_xy", 0), _positive_int(p, "delay_yz", 0)
    c, sd = _finite(p, "coupling"), _finite(p, "noise", True)
    total = n + d1 + d2
    x = s.normal(total)
    y = np.full(total, np.nan)
    y[d1:] = c * x[:total - d1] + sd * s.normal(total - d1)
    z = np.full(total, np.nan)
    z[d1 + d2:] = c * y[d1:total - d2] + sd * s.normal(total - d1 - d2)
    keep = slice(d1 + d2, total)
    return SampleTable(["x", "y", "z"], np.column_stack([x[keep], y[keep], z[keep]]))


def _independent(p, s: _Stream) -> SampleTable:
    n, d = _positive_int(p, "n"), _positive_int(p, "dims")
    return SampleTable([f"x{i + 1}" for i in range(d)], s.normal(n * d).reshape(n, d))


_GENERATORS = {
    "gaussian-copula": _gaussian_copula,
    "markov-chain": _markov_chain,
    "lagged-pair": _lagged_pair,
    "lagged-chain": _lagged_chain,
    "independent": _independent,
}


def generate(spec: GeneratorSpec, normalized: bool = False) -> SampleTable:
    """Build the synthetic table described by ``spec`` (raw scale by default)."""
    params = spec.resolved()
    table = _GENERATORS[spec.kind](params, _Stream(int(spec.seed)))
    if normalized:
        table, _ = normalize_table(table)
    return table


def synth(kind: str, seed: int = 0, normalized: bool = False, **params) -> SampleTable:
    """Shorthand for ``generate(GeneratorSpec(kind, params, seed))``."""
    return generate(GeneratorSpec(kind, params, seed), normalized)


# --------------------------------------------------------------------------
# CSV


def load_csv(path, delimiter: str = ",", drop_missing: bool = False) -> SampleTable:
    """Read a header + decimal-real CSV file into a validated table."""
    with open(path, newline="") as fh:
        rows = list(csv.reader(fh, delimiter=delimiter))
    while rows and not any(cell.strip() for cell in rows[-1]):
        rows.pop()
    if not rows:
        raise InvalidInput(f"{path}: file is empty")
    header = [h.strip() for h in rows[0]]
    if any(h == "" for h in header):
        raise InvalidInput(f"{path}: empty column name in header")
    if len(set(header)) != len(header):
        raise InvalidInput(f"{path}: duplicate column names in header")
    values, missing = [], []
    for lineno, row in enumerate(rows[1:], start=2):
        if len(row) != len(header):
            raise FormatError(f"{path}: line {lineno} has {len(row)} cells, expected {len(header)}")
        if any(cell.strip() == "" for cell in row):
            missing.append(lineno)
            continue
        parsed = []
        for col, cell in zip(header, row):
            try:
                v = float(cell)
            except ValueError:
                raise ParseError(f"{path}: line {lineno}, column {col!r}: cannot parse {cell!r}",
                                 lineno, col) from None
            if not math.isfinite(v):
                raise ParseError(f"{path}: line {lineno}, column {col!r}: non-finite value {cell!r}",
                                 lineno, col)
            parsed.append(v)
        values.append(parsed)
    if missing and not drop_missing:
        raise FormatError(f"{path}: missing cells on line(s) {missing[:20]}")
    if not values:
        raise InvalidInput(f"{path}: no data rows")
    return SampleTable(header, np.array(values, dtype=float))


def write_csv(table: SampleTable, path, force: bool = False) -> None:
    """Write header plus rows with 17 significant digits (exact roundtrip)."""
    if any(name == "" for name in table.names):
        raise InvalidInput("column names must be non-empty")
    if os.path.exists(path) and not force:
        raise RefusedOverwrite(f"{path} exists; pass force=True (--force) to overwrite")
    try:
        with open(path, "w", newline="") as fh:
            writer = csv.writer(fh, lineterminator="\n")
            writer.writerow(table.names)
            for row in table.data:
                writer.writerow(["%.17g" % v for v in row])
    except OSError as exc:
        raise OSError(f"cannot write {path}: {exc}") from exc
