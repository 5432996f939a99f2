"""Decoupling a table into independent components by chained extractions."""
from __future__ import annotations

import logging
from dataclasses import dataclass, field
from typing import Sequence

import numpy as np

from . import hcr
from .errors import InvalidInput
from .extraction import (ExtractionLayer, apply_extraction, fit_extraction,
                         invert_layers, layers_from_dict, layers_to_dict)
from .infoflow import DEFAULT_BINS, mutual_information_binned, spearman
from .table import SampleTable

logger = logging.getLogger(__name__)


@dataclass
class DependenceReport:
    """Pairwise |Spearman| and binned MI (nats) over all column pairs."""

    names: tuple
    spearman: np.ndarray
    mi: np.ndarray
    bins: int
    history: list = field(default_factory=list)

    @property
    def max_spearman(self) -> float:
        return float(self.spearman.max()) if self.spearman.size else 0.0

    @property
    def max_mi(self) -> float:
        return float(self.mi.max()) if self.mi.size else 0.0

    def to_dict(self) -> dict:
        return {
            "names": list(self.names),
            "bins": self.bins,
            "abs_spearman": self.spearman.tolist(),
            "mi_nats": self.mi.tolist(),
            "max_abs_spearman": self.max_spearman,
            "max_mi_nats": self.max_mi,
            "history": list(self.history),
        }


def dependence_report(table: SampleTable, bins: int = DEFAULT_BINS) -> DependenceReport:
    if table.n_columns < 2:
        raise InvalidInput("a dependence report needs at least two columns")
    if bins < 4:
        raise InvalidInput("a dependence report needs at least 4 bins")
    k = table.n_columns
    sp = np.zeros((k, k))
    mi = np.zeros((k, k))
    for i in range(k):
        for j in range(i + 1, k):
            u, v = table.data[:, i], table.data[:, j]
            sp[i, j] = sp[j, i] = abs(spearman(u, v))
            mi[i, j] = mi[j, i] = mutual_information_binned(u, v, bins).value
    return DependenceReport(table.names, sp, mi, bins)


def cross_mi(decoupled: SampleTable, original: SampleTable, bins: int = DEFAULT_BINS) -> np.ndarray:
    """MI between decoupled column i and original column j (diagonal zeroed)."""
    k = decoupled.n_columns
    out = np.zeros((k, k))
    for i in range(k):
        for j in range(k):
            if i != j:
                out[i, j] = mutual_information_binned(
                    decoupled.data[:, i], original.column(decoupled.names[j]), bins).value
    return out


@dataclass
class DecoupledDataset:
    layers: list
    result: SampleTable
    order_used: tuple
    iterations: int
    history: list = field(default_factory=list)
    invertible: bool = True

    def to_dict(self) -> dict:
        return {
            "order": list(self.order_used),
            "sweeps": self.iterations,
            "invertible": self.invertible,
            **layers_to_dict(self.layers),
        }

    @classmethod
    def from_dict(cls, payload: dict, result: SampleTable) -> "DecoupledDataset":
        return cls(layers_from_dict(payload), result, tuple(payload["order"]),
                   int(payload["sweeps"]), [], bool(payload.get("invertible", True)))


def _resolve_order(table: SampleTable, order) -> tuple:
    if order is None or order == "natural":
        return table.names
    order = tuple(order)
    if sorted(order) != sorted(table.names):
        raise InvalidInput(f"order {list(order)} is not a permutation of {list(table.names)}")
    return order


def _history_entry(step, table, bins, original=None):
    rep = dependence_report(table, bins)
    entry = {"sweep": step, "max_abs_spearman": rep.max_spearman, "max_mi_nats": rep.max_mi,
             "mi_nats": rep.mi.tolist()}
    if original is not None:
        entry["max_cross_mi_nats"] = float(cross_mi(table, original, bins).max())
    return entry


def decouple(table: SampleTable, order="natural", method=None,
             degree: int = hcr.DEFAULT_DEGREE, sweeps: int = 2,
             conditioning: str = "current", bins: int = DEFAULT_BINS,
             track: bool = True, **options) -> DecoupledDataset:
    """Extract every column given all the others, column by column, ``sweeps`` times.

    With ``conditioning="current"`` each extraction conditions on the other
    columns in their present, partly transformed state, which keeps the whole
    chain invertible. ``conditioning="original"`` (experimental) conditions on
    the state at the start of the sweep; the result is then not invertible.
    """
    if table.n_columns < 2:
        raise InvalidInput("decoupling needs at least two columns")
    if sweeps < 1:
        raise InvalidInput("sweeps must be at least 1")
    if conditioning not in ("current", "original"):
        raise InvalidInput(f"unknown conditioning mode {conditioning!r}")
    order = _resolve_order(table, order)
    original = table
    history = [_history_entry(0, table, bins, original)] if track else []
    layers: list[ExtractionLayer] = []
    for sweep in range(1, sweeps + 1):
        start = table
        for col in order:
            given = [c for c in order if c != col]
            source = table if conditioning == "current" else start
            try:
                layer = fit_extraction(source, col, given, method, degree, **options)
            except InvalidInput as exc:
                raise InvalidInput(f"sweep {sweep}, column {col!r}: {exc}") from exc
            layers.append(layer)
            if conditioning == "current":
                table = apply_extraction(layer, table)
            else:
                table = table.with_column(col, layer.forward(start))
        if track:
            history.append(_history_entry(sweep, table, bins, original))
            logger.info("sweep %d: max |spearman| %.4f, max MI %.4f nats", sweep,
                        history[-1]["max_abs_spearman"], history[-1]["max_mi_nats"])
    return DecoupledDataset(layers, table, order, sweeps, history,
                            invertible=conditioning == "current")


def reconstruct(decoupled: DecoupledDataset) -> SampleTable:
    """Unwind the layer stack to recover the normalized input table."""
    if not decoupled.invertible:
        raise InvalidInput("this decoupling was built with original-state conditioning "
                           "and cannot be inverted")
    return invert_layers(decoupled.layers, decoupled.result)


def symmetric_extract(table: SampleTable, method=None, degree: int = hcr.DEFAULT_DEGREE,
                      columns: Sequence[str] | None = None, **options) -> SampleTable:
    """Extract each column given all other *original* columns at once.

    Order-independent by construction and not invertible.
    """
    if table.n_columns < 2:
        raise InvalidInput("symmetric extraction needs at least two columns")
    names = tuple(columns) if columns is not None else table.names
    out = np.array(table.data, copy=True)
    for col in names:
        given = [c for c in table.names if c != col]
        layer = fit_extraction(table, col, given, method, degree, **options)
        out[:, table.names.index(col)] = layer.forward(table)
    return SampleTable(table.names, out)
