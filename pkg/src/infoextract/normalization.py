"""Empirical quantile normalization of raw columns to the [0, 1] scale and back.

A fitted :class:`QuantileMap` is the empirical CDF of one column with the
``(rank - 0.5) / n`` plotting position; tied values share their average rank.
Between sample values the map interpolates linearly, outside the sample hull
it clamps, so forward images never leave ``[0.5/n, 1 - 0.5/n]``.
"""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .errors import InvalidInput
from .table import SampleTable

__all__ = [
    "QuantileMap",
    "fit_quantile_map",
    "forward_quantile",
    "inverse_quantile",
    "normalize_table",
    "denormalize_table",
]


@dataclass(frozen=True)
class QuantileMap:
    """Empirical CDF of one column.

    Attributes
    ----------
    sorted_values : ndarray
        Ascending sample values (with repetitions).
    knots : ndarray
        Distinct sample values; each one represents its tie group.
    levels : ndarray
        Quantile level of each knot, ``(average rank - 0.5) / n``.
    """

    sorted_values: np.ndarray
    knots: np.ndarray
    levels: np.ndarray

    @property
    def n(self) -> int:
        return len(self.sorted_values)

    @property
    def tie_groups(self) -> list[tuple[int, int]]:
        """Half-open index ranges into ``sorted_values`` of equal values."""
        _, starts, counts = np.unique(self.sorted_values, return_index=True,
                                      return_counts=True)
        return [(int(s), int(s + c)) for s, c in zip(starts, counts)]

    def forward(self, x):
        return forward_quantile(self, x)

    def inverse(self, u):
        return inverse_quantile(self, u)

    def to_dict(self) -> dict:
        return {"sorted_values": self.sorted_values.tolist()}

    @classmethod
    def from_dict(cls, payload: dict) -> "QuantileMap":
        return fit_quantile_map(payload["sorted_values"])


def fit_quantile_map(column) -> QuantileMap:
    """Fit the empirical CDF of ``column``.

    >>> m = fit_quantile_map([3.0, 1.0, 2.0])
    >>> [round(float(u), 4) for u in m.forward([3.0, 1.0, 2.0])]
    [0.8333, 0.1667, 0.5]
    """
    values = np.asarray(column, dtype=float).ravel()
    if values.size == 0:
        raise InvalidInput("cannot fit a quantile map to an empty column")
    bad = np.flatnonzero(~np.isfinite(values))
    if bad.size:
        raise InvalidInput(f"non-finite value at row {int(bad[0])}")
    sorted_values = np.sort(values, kind="stable")
    n = sorted_values.size
    knots, starts, counts = np.unique(sorted_values, return_index=True,
                                      return_counts=True)
    # ranks are 1-based; a group occupying ranks s+1..s+c has mean rank s + (c+1)/2
    avg_rank = starts + (counts + 1) / 2.0
    levels = (avg_rank - 0.5) / n
    for arr in (sorted_values, knots, levels):
        arr.setflags(write=False)
    return QuantileMap(sorted_values, knots, levels)


def forward_quantile(qmap: QuantileMap, x):
    """Map raw value(s) to the quantile scale; scalar in, scalar out."""
    arr = np.asarray(x, dtype=float)
    if not np.all(np.isfinite(arr)):
        raise InvalidInput("forward_quantile requires finite input")
    if qmap.knots.size == 1:
        out = np.full(arr.shape, qmap.levels[0])
    else:
        out = np.interp(arr, qmap.knots, qmap.levels)
    out = np.clip(out, 0.0, 1.0)
    return float(out) if out.ndim == 0 else out


def inverse_quantile(qmap: QuantileMap, u):
    """Map quantile level(s) in [0, 1] back to the raw scale."""
    arr = np.asarray(u, dtype=float)
    if not np.all(np.isfinite(arr)) or np.any((arr < 0.0) | (arr > 1.0)):
        raise InvalidInput("inverse_quantile requires levels in [0, 1]")
    if qmap.knots.size == 1:
        out = np.full(arr.shape, qmap.knots[0])
    else:
        out = np.interp(arr, qmap.levels, qmap.knots)
    return float(out) if out.ndim == 0 else out


def normalize_table(table: SampleTable) -> tuple[SampleTable, list[QuantileMap]]:
    """Quantile-normalize every column; returns the new table and the maps."""
    if table.n_columns == 0 or table.n_rows == 0:
        raise InvalidInput("cannot normalize an empty table")
    maps = []
    out = np.empty_like(table.data)
    for j, name in enumerate(table.names):
        try:
            qmap = fit_quantile_map(table.data[:, j])
        except InvalidInput as exc:
            raise InvalidInput(f"column {name!r}: {exc}") from exc
        maps.append(qmap)
        out[:, j] = forward_quantile(qmap, table.data[:, j])
    return SampleTable(table.names, out), maps


def denormalize_table(table: SampleTable, maps) -> SampleTable:
    if len(maps) != table.n_columns:
        raise InvalidInput(f"{len(maps)} maps for {table.n_columns} columns")
    out = np.column_stack([inverse_quantile(q, table.data[:, j])
                           for j, q in enumerate(maps)])
    return SampleTable(table.names, out)
