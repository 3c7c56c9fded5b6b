"""Learning-rate-aware surrogate of CNN training with slow-starting good configs.

Observed accuracy after training progress ``U`` with last step size ``lr``::

    V = A(config) * (1 - exp(-kappa * U)) * (1 - beta * min(1, lr / l_ref)) + noise

clamped to ``[chance, 1]``. ``A`` is a Gaussian bump around a hidden optimum in
decades of learning rate and weight decay. Progress per step is
``g(lr / l_ref) / (r * steps_per_epoch)`` with ``g(x) = x * exp(1 - x)``, so a
config's progress peaks at its own ideal step size while the transient penalty
punishes any snapshot taken at a large learning rate.
"""

from __future__ import annotations

import math
from dataclasses import asdict, dataclass, replace

import numpy as np

from ..validation import check_int, derive_seed
from .base import Trainer

CHANCE = 0.01


def progress_rate(x):
    """``x * exp(1 - x)``: zero at rest, one at ``x == 1``, vanishing for huge steps."""
    if x <= 0.0:
        return 0.0
    if x > 700.0:
        return 0.0
    return x * math.exp(1.0 - x)


@dataclass(frozen=True)
class SurrogateTask:
    log_l_opt: float
    log_w_opt: float
    sigma_l: float = 0.5
    sigma_w: float = 1.0
    a_min: float = 0.05
    a_max: float = 0.75
    kappa: float = 5.0
    beta: float = 0.3
    l_ref: float | None = None
    noise: float = 0.002
    chance: float = CHANCE
    seed: int = 0

    def __post_init__(self):
        if not 0.0 < self.a_min < self.a_max < 1.0:
            raise ValueError("need 0 < a_min < a_max < 1")
        if self.sigma_l <= 0 or self.sigma_w <= 0 or self.kappa <= 0:
            raise ValueError("sigma_l, sigma_w and kappa must be positive")
        if not 0.0 <= self.beta <= 1.0:
            raise ValueError("beta must lie in [0, 1]")
        if self.noise < 0:
            raise ValueError("noise must be non-negative")
        if self.l_ref is None:
            object.__setattr__(self, "l_ref", 10.0 ** self.log_l_opt)
        if self.l_ref <= 0:
            raise ValueError("l_ref must be positive")

    @classmethod
    def from_seed(cls, seed, **overrides):
        """Draw the hidden optimum: ``l*`` log-uniform on [1e-3, 1], ``w*`` on [1e-5, 1e-2]."""
        rng = np.random.default_rng(derive_seed(seed, 0x5A))
        log_l = float(rng.uniform(-3.0, 0.0))
        log_w = float(rng.uniform(-5.0, -2.0))
        return cls(log_l, log_w, seed=int(seed), **overrides)

    @property
    def l_opt(self):
        return 10.0 ** self.log_l_opt

    @property
    def w_opt(self):
        return 10.0 ** self.log_w_opt

    def asymptote(self, config):
        dl = math.log10(config["l"]) - self.log_l_opt
        dw = math.log10(config["w"]) - self.log_w_opt
        quality = math.exp(-dl * dl / (2 * self.sigma_l ** 2) - dw * dw / (2 * self.sigma_w ** 2))
        return self.a_min + (self.a_max - self.a_min) * quality

    def replace(self, **changes):
        return replace(self, **changes)


class SurrogateTrainer(Trainer):
    """Trainer over a :class:`SurrogateTask`; ``r`` is the full training length."""

    kind = "surrogate"
    required = ("l", "w")

    def __init__(self, task, r, steps_per_epoch=10):
        self.task = task
        self.r = check_int(r, "r", minimum=1)
        self._spe = check_int(steps_per_epoch, "steps_per_epoch", minimum=1)

    def steps_per_epoch(self, config):
        return self._spe

    def _init_state(self, state):
        state.scalars["progress"] = 0.0

    def _train_steps(self, state, lrs):
        scale = 1.0 / (self.r * state.steps_per_epoch)
        l_ref = self.task.l_ref
        u = state.scalars["progress"]
        for lr in lrs:
            u += progress_rate(lr / l_ref) * scale
        state.scalars["progress"] = u

    def clean_metric(self, state):
        """Noise-free metric; at ``last_lr == 0`` this is ``A * (1 - exp(-kappa U))``."""
        task = self.task
        base = task.asymptote(state.config) * (1.0 - math.exp(-task.kappa * state.scalars["progress"]))
        return base * (1.0 - task.beta * min(1.0, state.last_lr / task.l_ref))

    def evaluate(self, state):
        value = self.clean_metric(state)
        if self.task.noise > 0:
            rng = np.random.default_rng([state.seed, state.epochs_trained])
            value += self.task.noise * float(rng.standard_normal())
        return min(max(value, self.task.chance), 1.0)

    def true_quality(self, config):
        return self.task.asymptote(config)

    def to_spec(self):
        spec = {"kind": self.kind, "r": self.r, "steps_per_epoch": self._spe}
        spec.update(asdict(self.task))
        return spec
