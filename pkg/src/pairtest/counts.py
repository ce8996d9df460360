"""Domain types: count tables, model selector, parameter vectors."""

from __future__ import annotations

import enum
from dataclasses import dataclass, field
from typing import Iterable, Sequence

import numpy as np

from . import _kernels
from .errors import DataError, InvalidParameterError

__all__ = ["ModelKind", "GroupCounts", "CombinedCounts", "ModelParams", "JointProbs"]


class ModelKind(enum.Enum):
    """Intra-subject correlation model selector."""

    ROSNER = "rosner"
    DONNER = "donner"

    @property
    def code(self) -> int:
        return _kernels.ROSNER if self is ModelKind.ROSNER else _kernels.DONNER

    @property
    def label(self) -> str:
        return "Rosner" if self is ModelKind.ROSNER else "Donner"

    @property
    def kappa_name(self) -> str:
        """Name of the nuisance parameter under this model."""
        return "R" if self is ModelKind.ROSNER else "rho"

    @classmethod
    def parse(cls, value: "ModelKind | str") -> "ModelKind":
        if isinstance(value, cls):
            return value
        try:
            return cls(str(value).strip().lower())
        except ValueError:
            raise InvalidParameterError(
                f"unknown model {value!r}; expected 'rosner' or 'donner'") from None


@dataclass(frozen=True)
class GroupCounts:
    """Counts for one group: bilateral (m0, m1, m2) and unilateral (n0, n1)."""

    m0: int = 0
    m1: int = 0
    m2: int = 0
    n0: int = 0
    n1: int = 0

    def __post_init__(self):
        for name in ("m0", "m1", "m2", "n0", "n1"):
            v = getattr(self, name)
            if not isinstance(v, (int, np.integer)) or isinstance(v, bool) or v < 0:
                raise DataError(f"count {name}={v!r} must be a nonnegative integer")
        if self.m_plus == 0 and self.n_plus == 0:
            raise DataError("a group must contain at least one subject")

    @property
    def m_plus(self) -> int:
        return self.m0 + self.m1 + self.m2

    @property
    def n_plus(self) -> int:
        return self.n0 + self.n1


@dataclass(frozen=True)
class CombinedCounts:
    """Per-group counts for a combined unilateral/bilateral dataset.

    Group labels are carried alongside the counts; the numeric group
    index is the position in ``groups``.  The homogeneity tests require
    at least two groups, but single-group tables are accepted here so
    the likelihood pieces can be evaluated on them directly.
    """

    groups: tuple[GroupCounts, ...]
    labels: tuple[str, ...] = ()

    def __post_init__(self):
        groups = tuple(self.groups)
        object.__setattr__(self, "groups", groups)
        if len(groups) < 1:
            raise DataError("no groups")
        labels = tuple(str(x) for x in self.labels) if self.labels else tuple(
            str(i + 1) for i in range(len(groups)))
        if len(labels) != len(groups):
            raise DataError(f"{len(labels)} labels for {len(groups)} groups")
        if len(set(labels)) != len(labels):
            raise DataError("group labels must be unique")
        object.__setattr__(self, "labels", labels)

    @classmethod
    def from_arrays(cls, m: Sequence[Sequence[int]], n: Sequence[Sequence[int]],
                    labels: Iterable[str] = ()) -> "CombinedCounts":
        """Build from (g, 3) bilateral and (g, 2) unilateral count rows."""
        m = [tuple(int(v) for v in row) for row in m]
        n = [tuple(int(v) for v in row) for row in n]
        if len(m) != len(n):
            raise DataError("bilateral and unilateral tables disagree on group count")
        groups = tuple(GroupCounts(r[0], r[1], r[2], s[0], s[1]) for r, s in zip(m, n))
        return cls(groups, tuple(labels))

    @property
    def g(self) -> int:
        return len(self.groups)

    def m_array(self) -> np.ndarray:
        return np.array([[gc.m0, gc.m1, gc.m2] for gc in self.groups], dtype=np.float64)

    def n_array(self) -> np.ndarray:
        return np.array([[gc.n0, gc.n1] for gc in self.groups], dtype=np.float64)

    def m_plus(self) -> np.ndarray:
        return np.array([gc.m_plus for gc in self.groups], dtype=np.float64)

    def n_plus(self) -> np.ndarray:
        return np.array([gc.n_plus for gc in self.groups], dtype=np.float64)

    def reordered(self, order: Sequence[int]) -> "CombinedCounts":
        """The same table with groups permuted."""
        order = list(order)
        if sorted(order) != list(range(self.g)):
            raise DataError(f"order {order!r} is not a permutation of 0..{self.g - 1}")
        return CombinedCounts(tuple(self.groups[i] for i in order),
                              tuple(self.labels[i] for i in order))


@dataclass(frozen=True)
class JointProbs:
    """Probabilities of 0, 1 or 2 responses for one bilateral subject."""

    p0: float
    p1: float
    p2: float

    def as_array(self) -> np.ndarray:
        return np.array([self.p0, self.p1, self.p2])


def _check_kappa(pis: np.ndarray, kappa: float, kind: ModelKind) -> None:
    lo, hi = _kernels.kappa_bounds_kernel(pis, kind.code)
    name = kind.kappa_name
    if kappa < lo:
        raise InvalidParameterError(
            f"{name}={kappa:.6g} is below the lower bound {lo:.6g} "
            f"required for nonnegative joint probabilities")
    if kappa > hi:
        raise InvalidParameterError(
            f"{name}={kappa:.6g} is above the upper bound {hi:.6g} "
            f"required for nonnegative joint probabilities")


@dataclass(frozen=True)
class ModelParams:
    """Parameter vector (pi_1, ..., pi_g, kappa) for one of the two models."""

    pis: tuple[float, ...]
    kappa: float
    kind: ModelKind

    def __post_init__(self):
        pis = tuple(float(p) for p in self.pis)
        object.__setattr__(self, "pis", pis)
        object.__setattr__(self, "kappa", float(self.kappa))
        object.__setattr__(self, "kind", ModelKind.parse(self.kind))
        if len(pis) < 1:
            raise InvalidParameterError("at least one proportion is required")
        for p in pis:
            if not (0.0 < p < 1.0) or not np.isfinite(p):
                raise InvalidParameterError(f"proportion {p!r} must lie strictly in (0, 1)")
        if not np.isfinite(self.kappa):
            raise InvalidParameterError(f"kappa={self.kappa!r} must be finite")
        _check_kappa(self.pis_array(), self.kappa, self.kind)

    @property
    def g(self) -> int:
        return len(self.pis)

    def pis_array(self) -> np.ndarray:
        return np.array(self.pis, dtype=np.float64)

    def as_vector(self) -> np.ndarray:
        """The stacked (g+1,) parameter vector."""
        return np.array(list(self.pis) + [self.kappa], dtype=np.float64)
