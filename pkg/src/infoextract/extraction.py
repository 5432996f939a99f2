"""Conditional-CDF extraction ``x -> CDF_{X|Y=y}(x)`` and its inverse.

An :class:`ExtractionLayer` removes from one target column the information
carried by a set of conditioning columns. Given the untouched conditioning
columns the transform is a bijection on [0, 1] for every row, so a stack of
layers can always be unwound in reverse order.
"""
from __future__ import annotations

import logging
from dataclasses import dataclass
from typing import Sequence

import numpy as np

from . import hcr
from .errors import InvalidInput
from .table import SampleTable

logger = logging.getLogger(__name__)

JOINT = "joint"
REGRESSION = "regression"
_ALIASES = {
    "joint": JOINT, "joint-slice": JOINT,
    "regression": REGRESSION, "moment-regression": REGRESSION,
}


def resolve_method(method, n_given: int) -> str:
    """Default: joint slicing for at most two conditioning columns."""
    if method is None or method == "auto":
        return REGRESSION if n_given > 2 else JOINT
    try:
        return _ALIASES[method]
    except KeyError:
        raise InvalidInput(f"unknown extraction method {method!r}") from None


@dataclass(frozen=True)
class ExtractionLayer:
    target: str
    given: tuple
    method: str
    model: object
    grid_size: int = hcr.DEFAULT_GRID
    floor: float = hcr.DEFAULT_FLOOR

    def _coefficients(self, table: SampleTable) -> np.ndarray:
        given = table.columns(list(self.given)) if self.given else np.empty((table.n_rows, 0))
        if self.method == JOINT:
            return hcr.slice_coefficients(self.model, 0, given)
        return self.model.row_coefficients(given)

    def forward(self, table: SampleTable) -> np.ndarray:
        x = hcr._check_unit(table.column(self.target), f"column {self.target!r}")
        return hcr.rows_cdf(self._coefficients(table), x, self.grid_size, self.floor)

    def inverse(self, table: SampleTable) -> np.ndarray:
        u = hcr._check_unit(table.column(self.target), f"column {self.target!r}")
        return hcr.rows_quantile(self._coefficients(table), u, self.grid_size, self.floor)

    def to_dict(self) -> dict:
        return {
            "target": self.target,
            "given": list(self.given),
            "method": self.method,
            "grid_size": self.grid_size,
            "floor": self.floor,
            "model": self.model.to_dict(),
        }

    @classmethod
    def from_dict(cls, payload: dict) -> "ExtractionLayer":
        return cls(payload["target"], tuple(payload["given"]), payload["method"],
                   hcr.model_from_dict(payload["model"]), int(payload["grid_size"]),
                   float(payload["floor"]))


def fit_extraction(table: SampleTable, target: str, given: Sequence[str] = (),
                   method=None, degree: int = hcr.DEFAULT_DEGREE,
                   grid_size: int = hcr.DEFAULT_GRID, floor: float = hcr.DEFAULT_FLOOR,
                   ridge: float = hcr.DEFAULT_RIDGE,
                   interactions: bool = False) -> ExtractionLayer:
    """Fit the conditional model of ``target`` given ``given`` on ``table``.

    ``method`` is ``"joint"`` (slice a joint HCR density), ``"regression"``
    (moment regression) or ``None`` for the size-based default.
    """
    given = tuple(given)
    if target in given:
        raise InvalidInput(f"target {target!r} cannot also be conditioned on")
    if len(set(given)) != len(given):
        raise InvalidInput(f"duplicate conditioning columns {list(given)}")
    if grid_size < 64:
        raise InvalidInput("grid size must be at least 64")
    method = resolve_method(method, len(given))
    if method == JOINT:
        model = hcr.fit_joint(table.columns([target, *given]), degree)
    else:
        model = hcr.fit_moment_regression(table, target, given, degree, ridge, interactions)
        if model.dropped:
            logger.info("extraction of %s: dropped constant features %s", target, model.dropped)
    return ExtractionLayer(target, given, method, model, int(grid_size), float(floor))


def apply_extraction(layer: ExtractionLayer, table: SampleTable) -> SampleTable:
    return table.with_column(layer.target, layer.forward(table))


def invert_extraction(layer: ExtractionLayer, table: SampleTable) -> SampleTable:
    """Undo :func:`apply_extraction`; needs the conditioning columns as they were."""
    return table.with_column(layer.target, layer.inverse(table))


def apply_layers(layers, table: SampleTable) -> SampleTable:
    for layer in layers:
        table = apply_extraction(layer, table)
    return table


def invert_layers(layers, table: SampleTable) -> SampleTable:
    for layer in reversed(list(layers)):
        table = invert_extraction(layer, table)
    return table


def iterate_extraction(table: SampleTable, target: str, given: Sequence[str] = (),
                       method=None, degree: int = hcr.DEFAULT_DEGREE, k: int = 2,
                       **options) -> list[ExtractionLayer]:
    """Extract ``target`` repeatedly, refitting on each previous output."""
    if k < 1:
        raise InvalidInput("iteration count must be at least 1")
    layers = []
    for it in range(k):
        try:
            layer = fit_extraction(table, target, given, method, degree, **options)
        except InvalidInput as exc:
            raise InvalidInput(f"iteration {it + 1}: {exc}") from exc
        layers.append(layer)
        table = apply_extraction(layer, table)
    return layers


def layers_to_dict(layers) -> dict:
    return {"layers": [layer.to_dict() for layer in layers]}


def layers_from_dict(payload: dict) -> list[ExtractionLayer]:
    return [ExtractionLayer.from_dict(p) for p in payload["layers"]]
