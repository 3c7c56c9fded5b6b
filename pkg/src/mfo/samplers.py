"""Configuration samplers: uniform random and a Tree-structured Parzen Estimator."""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np
from scipy.special import ndtr, ndtri
from sklearn.base import BaseEstimator

from .search_space import config_from_unit, config_to_unit, sample
from .validation import check_int, check_real, check_rng

BANDWIDTH_FLOOR = 1e-3


@dataclass(frozen=True)
class Observation:
    config: object
    objective: float

    def __post_init__(self):
        if not math.isfinite(self.objective):
            raise ValueError(f"objective must be finite, got {self.objective}")


def random_suggest(space, rng, tag="random"):
    return sample(space, rng, tag)


def tpe_split(history, gamma):
    """Top ``ceil(gamma * N)`` observations by objective (earlier first on ties) and the rest."""
    history = list(history)
    if not history:
        raise ValueError("tpe_split needs at least one observation")
    n_good = math.ceil(gamma * len(history))
    order = sorted(range(len(history)), key=lambda i: (-history[i].objective, i))
    good_idx = set(order[:n_good])
    good = [history[i] for i in order[:n_good]]
    bad = [obs for i, obs in enumerate(history) if i not in good_idx]
    return good, bad


def scott_bandwidth(points):
    """Per-dimension Scott bandwidth ``N^(-1/(d+4)) * std``, floored at 1e-3."""
    n, d = points.shape
    sigma = points.std(axis=0, ddof=1) if n > 1 else np.zeros(d)
    return np.maximum(n ** (-1.0 / (d + 4)) * sigma, BANDWIDTH_FLOOR)


class ParzenMixture:
    """Mixture of Gaussian kernels truncated to ``[0, 1]^d``, one kernel per point.

    ``multivariate=True`` uses product kernels (one joint component per point);
    otherwise every dimension is an independent 1-d mixture.
    """

    def __init__(self, points, bandwidth, multivariate=True):
        self.mu = np.atleast_2d(np.asarray(points, dtype=float))
        self.h = np.asarray(bandwidth, dtype=float)
        self.multivariate = multivariate
        lo = (0.0 - self.mu) / self.h
        hi = (1.0 - self.mu) / self.h
        self._cdf_lo, self._cdf_hi = ndtr(lo), ndtr(hi)
        # centres lie inside the cube, so every kernel keeps at least half its mass
        self._log_mass = np.log(np.maximum(self._cdf_hi - self._cdf_lo, 1e-300))

    def sample(self, n, rng):
        n_points, d = self.mu.shape
        if self.multivariate:
            comp = rng.integers(n_points, size=n)[:, None].repeat(d, axis=1)
        else:
            comp = rng.integers(n_points, size=(n, d))
        cols = np.arange(d)[None, :]
        lo, hi = self._cdf_lo[comp, cols], self._cdf_hi[comp, cols]
        u = lo + rng.random((n, d)) * (hi - lo)
        u = np.clip(u, 1e-300, 1 - 1e-16)
        x = self.mu[comp, cols] + self.h[None, :] * ndtri(u)
        return np.clip(x, 0.0, 1.0)

    def log_pdf(self, x):
        x = np.atleast_2d(x)
        z = (x[:, None, :] - self.mu[None, :, :]) / self.h[None, None, :]
        log_k = -0.5 * z * z - 0.5 * math.log(2 * math.pi) - np.log(self.h)[None, None, :] - self._log_mass[None, :, :]
        n_points = self.mu.shape[0]
        if self.multivariate:
            return _logsumexp(log_k.sum(axis=2), axis=1) - math.log(n_points)
        return (_logsumexp(log_k, axis=1) - math.log(n_points)).sum(axis=1)


def _logsumexp(a, axis):
    m = np.max(a, axis=axis, keepdims=True)
    m = np.where(np.isfinite(m), m, 0.0)
    return np.squeeze(m, axis=axis) + np.log(np.sum(np.exp(a - m), axis=axis))


def tpe_suggest(space, history, params, rng):
    """Suggest one config; returns ``(config, log l - log g of the chosen candidate)``.

    Falls back to random sampling until ``params.n_startup`` observations exist.
    """
    rng = check_rng(rng)
    history = list(history)
    if len(history) < params.n_startup:
        return random_suggest(space, rng, tag="tpe-startup"), None
    good, bad = tpe_split(history, params.gamma)
    good_x = np.array([config_to_unit(space, o.config) for o in good])
    # both densities share the good set's bandwidth
    bandwidth = scott_bandwidth(good_x)
    below = ParzenMixture(good_x, bandwidth, params.multivariate)
    candidates = below.sample(params.n_candidates, rng)
    score = below.log_pdf(candidates)
    if bad:
        bad_x = np.array([config_to_unit(space, o.config) for o in bad])
        above = ParzenMixture(bad_x, bandwidth, params.multivariate)
        score = score - above.log_pdf(candidates)
    best = int(np.argmax(score))
    return config_from_unit(space, candidates[best], tag="tpe"), float(score[best])


class RandomSampler(BaseEstimator):
    """Independent uniform draws; history is ignored."""

    kind = "random"

    def __init__(self, space=None):
        self.space = space

    def suggest(self, history, rng, space=None):
        return random_suggest(space or self.space, rng), None

    def fit(self, history=None):
        return self


class TPESampler(BaseEstimator):
    """Tree-structured Parzen Estimator over the unit cube of a search space.

    Parameters
    ----------
    gamma : float
        Fraction of observations treated as good.
    n_startup : int
        Random suggestions before the density model kicks in.
    n_candidates : int
        Draws from the good-density per suggestion.
    multivariate : bool
        Joint product kernels instead of independent per-dimension mixtures.
    generations : int
        How many batches the runner splits the first round's configurations into.
    space : SearchSpace or None
        Space used by :meth:`suggest` when none is passed.
    """

    kind = "tpe"

    def __init__(self, gamma=0.25, n_startup=10, n_candidates=24, multivariate=True,
                 generations=4, space=None):
        self.gamma = gamma
        self.n_startup = n_startup
        self.n_candidates = n_candidates
        self.multivariate = multivariate
        self.generations = generations
        self.space = space

    def _validate(self):
        check_real(self.gamma, "gamma", 0.0, 1.0, False, False)
        check_int(self.n_startup, "n_startup", minimum=1)
        check_int(self.n_candidates, "n_candidates", minimum=1)
        check_int(self.generations, "generations", minimum=1)

    def fit(self, history):
        """Store a history snapshot so :meth:`suggest` can be called without one."""
        self._validate()
        self.history_ = list(history)
        return self

    def suggest(self, history=None, rng=None, space=None):
        self._validate()
        if history is None:
            history = getattr(self, "history_", [])
        return tpe_suggest(space or self.space, history, self, rng)


def build_sampler(spec):
    spec = dict(spec or {})
    kind = spec.pop("kind", "random")
    spec.pop("objective", None)
    if kind == "random":
        return RandomSampler()
    if kind == "tpe":
        return TPESampler(**spec)
    raise ValueError(f"unknown sampler kind {kind!r}")
