"""Input validation helpers shared by the estimators and plan builders."""

import math
import numbers

import numpy as np


class InvalidPlanError(ValueError):
    """Raised when (eta, s_min, r) cannot form a promotion plan."""


class InfeasibleBudgetError(ValueError):
    """Raised when a budget cannot pay for even a single full-length trial."""


def check_int(value, name, minimum=None):
    if isinstance(value, bool) or not isinstance(value, numbers.Integral):
        raise TypeError(f"{name} must be an integer, got {value!r}")
    value = int(value)
    if minimum is not None and value < minimum:
        raise ValueError(f"{name} must be >= {minimum}, got {value}")
    return value


def check_real(value, name, low=None, high=None, low_inclusive=True, high_inclusive=True):
    if isinstance(value, bool) or not isinstance(value, numbers.Real):
        raise TypeError(f"{name} must be a real number, got {value!r}")
    value = float(value)
    if not math.isfinite(value):
        raise ValueError(f"{name} must be finite, got {value}")
    if low is not None:
        if value < low or (value == low and not low_inclusive):
            raise ValueError(f"{name}={value} is below its lower bound {low}")
    if high is not None:
        if value > high or (value == high and not high_inclusive):
            raise ValueError(f"{name}={value} is above its upper bound {high}")
    return value


def check_eta(eta):
    return check_int(eta, "eta", minimum=2)


def check_rng(random_state):
    """Turn ``None``, an int seed, a seed sequence or a Generator into a Generator."""
    if isinstance(random_state, np.random.Generator):
        return random_state
    return np.random.default_rng(random_state)


def derive_seed(*keys):
    """Stable 63-bit seed derived from a tuple of non-negative integers."""
    state = np.random.SeedSequence([int(k) for k in keys]).generate_state(2, dtype=np.uint32)
    return int((int(state[0]) << 31) ^ int(state[1]))


def int_log(r, eta):
    """Largest ``s`` with ``eta**s <= r``, computed without floating point."""
    check_int(r, "r", minimum=1)
    check_eta(eta)
    s, power = 0, 1
    while power * eta <= r:
        power *= eta
        s += 1
    return s
