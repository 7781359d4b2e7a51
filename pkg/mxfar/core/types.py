"""
Type definitions for panels, kernels, reference signals and grids
"""

from enum import Enum
from typing import Optional, Tuple, Sequence
from dataclasses import dataclass, field

import numpy as np

from mxfar.exceptions import IngestionError


class KernelKind(str, Enum):
    """Kernel functions available for local-linear weighting"""
    EPANECHNIKOV = "epanechnikov"
    GAUSSIAN = "gaussian"


def _frozen(array: np.ndarray) -> np.ndarray:
    array = np.array(array, copy=True)
    array.setflags(write=False)
    return array


@dataclass(frozen=True)
class Panel:
    """N subjects x k channels x T time points with group labels"""
    values: np.ndarray
    group_of: np.ndarray
    subject_ids: Tuple[str, ...]
    exogenous: Optional[np.ndarray] = None

    def __post_init__(self):
        values = np.asarray(self.values, dtype=float)
        if values.ndim != 3 or min(values.shape) < 1:
            raise IngestionError(f"Panel values must be a non-empty (subject, channel, time) array, got shape {values.shape}")
        if not np.all(np.isfinite(values)):
            bad = np.argwhere(~np.isfinite(values))[0]
            raise IngestionError(f"Panel contains a non-finite value at subject={bad[0]}, channel={bad[1] + 1}, time={bad[2] + 1}")

        groups = np.asarray(self.group_of, dtype=int).reshape(-1)
        if groups.shape[0] != values.shape[0]:
            raise IngestionError(f"Expected {values.shape[0]} group labels, got {groups.shape[0]}")
        present = np.unique(groups)
        if present[0] != 0 or not np.array_equal(present, np.arange(present.shape[0])):
            raise IngestionError(f"Group labels must form 0..G-1, got {present.tolist()}")

        ids = tuple(str(s) for s in self.subject_ids)
        if len(ids) != values.shape[0]:
            raise IngestionError(f"Expected {values.shape[0]} subject ids, got {len(ids)}")
        if len(set(ids)) != len(ids):
            raise IngestionError("Subject ids must be unique")

        exogenous = self.exogenous
        if exogenous is not None:
            exogenous = np.asarray(exogenous, dtype=float)
            if exogenous.shape != (values.shape[0], values.shape[2]):
                raise IngestionError(f"Exogenous series must have shape {(values.shape[0], values.shape[2])}, got {exogenous.shape}")
            if not np.all(np.isfinite(exogenous)):
                raise IngestionError("Exogenous series contains non-finite values")
            exogenous = _frozen(exogenous)

        object.__setattr__(self, "values", _frozen(values))
        object.__setattr__(self, "group_of", _frozen(groups))
        object.__setattr__(self, "subject_ids", ids)
        object.__setattr__(self, "exogenous", exogenous)

    @property
    def n_subjects(self) -> int:
        return self.values.shape[0]

    @property
    def n_channels(self) -> int:
        return self.values.shape[1]

    @property
    def n_time(self) -> int:
        return self.values.shape[2]

    @property
    def n_groups(self) -> int:
        return int(self.group_of.max()) + 1

    def group_members(self, group: int) -> np.ndarray:
        return np.flatnonzero(self.group_of == group)

    def with_values(self, values: np.ndarray) -> "Panel":
        """Same subjects and groups, new observations"""
        return Panel(values=values, group_of=self.group_of, subject_ids=self.subject_ids, exogenous=self.exogenous)

    def window(self, start: int, stop: int) -> "Panel":
        """Time slice [start, stop) for every subject"""
        exogenous = None if self.exogenous is None else self.exogenous[:, start:stop]
        return Panel(values=self.values[:, :, start:stop], group_of=self.group_of,
                     subject_ids=self.subject_ids, exogenous=exogenous)

    def truncated(self, n_time: int) -> "Panel":
        return self.window(0, n_time)

    def subset(self, subjects: Sequence[int]) -> "Panel":
        """Panel restricted to some subjects, group labels re-indexed to stay contiguous"""
        index = np.asarray(subjects, dtype=int)
        _, groups = np.unique(self.group_of[index], return_inverse=True)
        exogenous = None if self.exogenous is None else self.exogenous[index]
        return Panel(values=self.values[index], group_of=groups,
                     subject_ids=tuple(self.subject_ids[i] for i in index), exogenous=exogenous)


@dataclass(frozen=True)
class ReferenceSignal:
    """Per-subject reference values; unusable entries are NaN and flagged"""
    values: np.ndarray
    usable: np.ndarray

    def pooled(self, start: int = 0) -> np.ndarray:
        """Usable values from time index ``start`` onwards, pooled across subjects"""
        mask = self.usable[:, start:]
        return self.values[:, start:][mask]


@dataclass(frozen=True)
class ReferenceGrid:
    """M equal-length segments of the clipped reference support"""
    edges: np.ndarray
    points: np.ndarray = field(init=False)

    def __post_init__(self):
        edges = np.asarray(self.edges, dtype=float)
        object.__setattr__(self, "edges", _frozen(edges))
        object.__setattr__(self, "points", _frozen(0.5 * (edges[:-1] + edges[1:])))

    @property
    def size(self) -> int:
        return self.points.shape[0]

    def segment_of(self, u) -> np.ndarray:
        """
        Segment index of each reference value.

        Segments are left-closed/right-open except the last, which is closed;
        values outside the grid snap to the end segments.
        """
        index = np.searchsorted(self.edges, np.asarray(u, dtype=float), side="right") - 1
        return np.clip(index, 0, self.size - 1)
