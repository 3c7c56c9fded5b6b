"""Hyperparameter domains, sampling and the unit-cube transform."""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Iterator, Mapping

import numpy as np
from sklearn.base import BaseEstimator, TransformerMixin

from .validation import check_rng


class DomainError(ValueError):
    """A value or unit coordinate falls outside its domain."""


@dataclass(frozen=True)
class Uniform:
    lo: float
    hi: float

    def __post_init__(self):
        if not (math.isfinite(self.lo) and math.isfinite(self.hi)) or not self.lo < self.hi:
            raise ValueError(f"{type(self).__name__} needs finite lo < hi, got [{self.lo}, {self.hi}]")

    kind = "uniform"

    def to_unit(self, value):
        self._check_value(value)
        return (value - self.lo) / (self.hi - self.lo)

    def from_unit(self, u):
        _check_unit(u)
        return min(max(self.lo + u * (self.hi - self.lo), self.lo), self.hi)

    def sample(self, rng):
        return self.from_unit(float(rng.random()))

    def contains(self, value):
        return self.lo <= value <= self.hi

    def _check_value(self, value):
        if not self.contains(value):
            raise DomainError(f"{value!r} outside [{self.lo}, {self.hi}]")


@dataclass(frozen=True)
class LogUniform(Uniform):
    def __post_init__(self):
        super().__post_init__()
        if self.lo <= 0:
            raise ValueError(f"LogUniform needs lo > 0, got {self.lo}")

    kind = "loguniform"

    def to_unit(self, value):
        self._check_value(value)
        lo, hi = math.log(self.lo), math.log(self.hi)
        return (math.log(value) - lo) / (hi - lo)

    def from_unit(self, u):
        _check_unit(u)
        if u == 0.0 or u == 1.0:
            # exp(log(x)) is not always x
            return self.hi if u else self.lo
        lo, hi = math.log(self.lo), math.log(self.hi)
        return min(max(math.exp(lo + u * (hi - lo)), self.lo), self.hi)


@dataclass(frozen=True)
class IntUniform(Uniform):
    lo: int
    hi: int

    def __post_init__(self):
        if int(self.lo) != self.lo or int(self.hi) != self.hi:
            raise ValueError("IntUniform bounds must be integers")
        super().__post_init__()

    kind = "int"

    def from_unit(self, u):
        _check_unit(u)
        # round half-up
        return min(max(int(math.floor(self.lo + u * (self.hi - self.lo) + 0.5)), self.lo), self.hi)

    def sample(self, rng):
        return int(rng.integers(self.lo, self.hi + 1))


DOMAIN_TYPES = {cls.kind: cls for cls in (Uniform, LogUniform, IntUniform)}


def _check_unit(u):
    if not 0.0 <= u <= 1.0:
        raise DomainError(f"unit coordinate {u!r} outside [0, 1]")


def to_unit(domain, value):
    return domain.to_unit(value)


def from_unit(domain, u):
    return domain.from_unit(u)


class SearchSpace:
    """Ordered, named collection of domains. The order fixes the TPE vector layout."""

    def __init__(self, dimensions):
        dims = list(dimensions.items()) if isinstance(dimensions, Mapping) else list(dimensions)
        names = [name for name, _ in dims]
        if len(set(names)) != len(names):
            raise ValueError(f"duplicate dimension names in {names}")
        if not dims:
            raise ValueError("a search space needs at least one dimension")
        self._dims = tuple((str(name), domain) for name, domain in dims)

    @property
    def names(self):
        return [name for name, _ in self._dims]

    def __iter__(self) -> Iterator[tuple[str, Uniform]]:
        return iter(self._dims)

    def __len__(self):
        return len(self._dims)

    def __getitem__(self, name):
        for key, domain in self._dims:
            if key == name:
                return domain
        raise KeyError(name)

    def __eq__(self, other):
        return isinstance(other, SearchSpace) and self._dims == other._dims

    def __repr__(self):
        inner = ", ".join(f"{n}={d!r}" for n, d in self._dims)
        return f"SearchSpace({inner})"

    def validate(self, values):
        missing = [n for n in self.names if n not in values]
        extra = [n for n in values if n not in self.names]
        if missing or extra:
            raise DomainError(f"config mismatch: missing={missing} extra={extra}")
        for name, domain in self._dims:
            if not domain.contains(values[name]):
                raise DomainError(f"{name}={values[name]!r} outside {domain!r}")

    def to_spec(self):
        return [{"name": n, "type": d.kind, "lo": d.lo, "hi": d.hi} for n, d in self._dims]

    @classmethod
    def from_spec(cls, spec):
        dims = []
        for entry in spec:
            try:
                kind = DOMAIN_TYPES[entry["type"]]
            except KeyError:
                raise ValueError(f"unknown domain type {entry.get('type')!r}") from None
            lo, hi = entry["lo"], entry["hi"]
            if kind is IntUniform:
                lo, hi = int(lo), int(hi)
            else:
                lo, hi = float(lo), float(hi)
            dims.append((entry["name"], kind(lo, hi)))
        return cls(dims)


@dataclass(frozen=True)
class Config(Mapping):
    """One point of a search space plus a tag recording where it came from."""

    values: Mapping[str, float]
    tag: str = ""

    def __getitem__(self, key):
        return self.values[key]

    def __iter__(self):
        return iter(self.values)

    def __len__(self):
        return len(self.values)

    def __hash__(self):
        return hash((tuple(sorted(self.values.items())), self.tag))

    def to_json(self):
        return {k: format_value(v) for k, v in self.values.items()}

    @classmethod
    def from_json(cls, payload, tag=""):
        return cls({k: parse_value(v) for k, v in payload.items()}, tag)


def format_value(value):
    """17 significant digits so logged values round-trip bit-exactly."""
    if isinstance(value, (int, np.integer)) and not isinstance(value, bool):
        return str(int(value))
    return format(float(value), ".17g")


def parse_value(text):
    text = str(text)
    if text.lstrip("-").isdigit():
        return int(text)
    return float(text)


def default_space():
    """Learning rate, weight decay, momentum complement and batch size.

    Momentum is stored as ``m`` and trainers use ``1 - m``, so the usual 0.9
    momentum corresponds to ``m = 0.1``.
    """
    return SearchSpace([
        ("l", LogUniform(1e-6, 10.0)),
        ("w", LogUniform(1e-6, 10.0)),
        ("m", LogUniform(1e-6, 1.0)),
        ("b", IntUniform(16, 256)),
    ])


def sample(space, rng, tag=""):
    rng = check_rng(rng)
    return Config({name: domain.sample(rng) for name, domain in space}, tag)


def config_to_unit(space, config):
    return np.array([domain.to_unit(config[name]) for name, domain in space], dtype=float)


def config_from_unit(space, u, tag=""):
    u = np.clip(np.asarray(u, dtype=float), 0.0, 1.0)
    return Config({name: domain.from_unit(float(x)) for (name, domain), x in zip(space, u)}, tag)


class UnitCubeTransformer(TransformerMixin, BaseEstimator):
    """Maps configurations to rows of ``[0, 1]^d`` and back.

    Parameters
    ----------
    space : SearchSpace or None
        Space defining the column order. ``None`` means :func:`default_space`.
    """

    def __init__(self, space=None):
        self.space = space

    def fit(self, X=None, y=None):
        self.space_ = self.space if self.space is not None else default_space()
        self.n_features_in_ = len(self.space_)
        self.feature_names_in_ = np.array(self.space_.names, dtype=object)
        return self

    def transform(self, X):
        if not hasattr(self, "space_"):
            self.fit()
        rows = [config_to_unit(self.space_, row) for row in X]
        return np.array(rows, dtype=float).reshape(len(rows), len(self.space_))

    def inverse_transform(self, X):
        if not hasattr(self, "space_"):
            self.fit()
        X = np.atleast_2d(np.asarray(X, dtype=float))
        if X.shape[1] != len(self.space_):
            raise ValueError(f"expected {len(self.space_)} columns, got {X.shape[1]}")
        return [config_from_unit(self.space_, row) for row in X]

    def get_feature_names_out(self, input_features=None):
        return np.array(self.space_.names, dtype=object)
