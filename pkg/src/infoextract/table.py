"""The column-oriented sample container passed between all stages."""
from __future__ import annotations

from typing import Iterable, Mapping, Sequence

import numpy as np

from .errors import InvalidInput


class SampleTable:
    """Named real-valued columns of equal length.

    Values are stored as a float64 matrix of shape ``(n_rows, n_columns)``.
    Construction validates names (non-empty, unique) and rejects NaN/inf.
    The table is treated as immutable: every transform returns a new table.
    """

    __slots__ = ("_names", "_data", "_index")

    def __init__(self, names: Sequence[str], data):
        names = tuple(str(n) for n in names)
        data = np.asarray(data, dtype=float)
        if data.ndim == 1 and len(names) == 1:
            data = data[:, None]
        if data.ndim != 2 or data.shape[1] != len(names):
            raise InvalidInput(
                f"data of shape {data.shape} does not match {len(names)} column names")
        for name in names:
            if name == "":
                raise InvalidInput("column names must be non-empty")
        if len(set(names)) != len(names):
            raise InvalidInput(f"duplicate column names in {list(names)}")
        bad = ~np.isfinite(data)
        if bad.any():
            row, col = np.argwhere(bad)[0]
            raise InvalidInput(
                f"non-finite value in column {names[col]!r} at row {row}")
        data = np.ascontiguousarray(data)
        data.setflags(write=False)
        self._names = names
        self._data = data
        self._index = {n: i for i, n in enumerate(names)}

    @classmethod
    def from_columns(cls, columns: Mapping[str, Iterable[float]]) -> "SampleTable":
        names = list(columns)
        cols = [np.asarray(list(v) if not isinstance(v, np.ndarray) else v, dtype=float)
                for v in columns.values()]
        lengths = {len(c) for c in cols}
        if len(lengths) > 1:
            raise InvalidInput(f"columns have unequal lengths {sorted(lengths)}")
        if not cols:
            return cls([], np.empty((0, 0)))
        return cls(names, np.column_stack(cols))

    @property
    def names(self) -> tuple[str, ...]:
        return self._names

    @property
    def data(self) -> np.ndarray:
        return self._data

    @property
    def n_rows(self) -> int:
        return self._data.shape[0]

    @property
    def n_columns(self) -> int:
        return len(self._names)

    def __len__(self) -> int:
        return self.n_rows

    def __contains__(self, name) -> bool:
        return name in self._index

    def __getitem__(self, name: str) -> np.ndarray:
        return self.column(name)

    def __eq__(self, other) -> bool:
        if not isinstance(other, SampleTable):
            return NotImplemented
        return self._names == other._names and np.array_equal(self._data, other._data)

    def __repr__(self) -> str:
        return f"SampleTable(names={list(self._names)}, n_rows={self.n_rows})"

    def column(self, name: str) -> np.ndarray:
        try:
            return self._data[:, self._index[name]]
        except KeyError:
            raise InvalidInput(f"missing column {name!r}") from None

    def columns(self, names: Sequence[str]) -> np.ndarray:
        """Return the selected columns as an ``(n_rows, len(names))`` matrix."""
        missing = [n for n in names if n not in self._index]
        if missing:
            raise InvalidInput(f"missing columns {missing}")
        return self._data[:, [self._index[n] for n in names]]

    def select(self, names: Sequence[str]) -> "SampleTable":
        return SampleTable(list(names), self.columns(names))

    def with_column(self, name: str, values) -> "SampleTable":
        """Replace (or append) one column, returning a new table."""
        values = np.asarray(values, dtype=float)
        if values.shape != (self.n_rows,):
            raise InvalidInput(
                f"column {name!r} has shape {values.shape}, expected ({self.n_rows},)")
        data = np.array(self._data, copy=True)
        if name in self._index:
            data[:, self._index[name]] = values
            return SampleTable(self._names, data)
        return SampleTable(self._names + (name,), np.column_stack([data, values]))

    def to_dict(self) -> dict[str, np.ndarray]:
        return {n: self.column(n) for n in self._names}
