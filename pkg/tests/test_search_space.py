import math

import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st
from sklearn.base import clone

from mfo.search_space import (
    Config,
    DomainError,
    IntUniform,
    LogUniform,
    SearchSpace,
    Uniform,
    UnitCubeTransformer,
    config_from_unit,
    config_to_unit,
    default_space,
    from_unit,
    sample,
    to_unit,
)

unit = st.floats(0.0, 1.0, allow_nan=False)


def test_loguniform_endpoints():
    d = LogUniform(1e-6, 10.0)
    assert d.from_unit(0.0) == 1e-6
    assert d.from_unit(1.0) == 10.0
    assert to_unit(d, 1e-6) == 0.0
    assert to_unit(d, 10.0) == 1.0


def test_loguniform_midpoint_is_geometric_mean():
    d = LogUniform(1e-4, 1.0)
    assert math.isclose(d.from_unit(0.5), 1e-2, rel_tol=1e-12)


def test_loguniform_sample_median():
    # median of log-uniform on [1e-6, 10] is 10**-2.5
    rng = np.random.default_rng(7)
    d = LogUniform(1e-6, 10.0)
    draws = np.array([d.sample(rng) for _ in range(20000)])
    assert abs(np.log10(np.median(draws)) + 2.5) < 0.05
    assert draws.min() >= 1e-6 and draws.max() <= 10.0


def test_int_uniform_rounds_half_up():
    d = IntUniform(16, 256)
    assert d.from_unit(0.0) == 16
    assert d.from_unit(1.0) == 256
    # 16 + 0.5/240 * 240 = 16.5 -> 17
    assert d.from_unit(0.5 / 240) == 17
    assert isinstance(d.from_unit(0.3), int)


def test_int_uniform_samples_cover_bounds():
    rng = np.random.default_rng(0)
    d = IntUniform(1, 3)
    assert {d.sample(rng) for _ in range(200)} == {1, 2, 3}


@pytest.mark.parametrize("bad", [(1.0, 1.0), (2.0, 1.0), (float("nan"), 1.0)])
def test_uniform_rejects_bad_bounds(bad):
    with pytest.raises(ValueError):
        Uniform(*bad)


def test_loguniform_rejects_nonpositive():
    with pytest.raises(ValueError):
        LogUniform(0.0, 1.0)


def test_out_of_domain_values_raise():
    with pytest.raises(DomainError):
        LogUniform(1e-6, 10.0).to_unit(20.0)
    with pytest.raises(DomainError):
        from_unit(Uniform(0, 1), 1.5)


@given(u=unit)
def test_continuous_round_trip(u):
    for d in (Uniform(-3.0, 5.0), LogUniform(1e-6, 10.0)):
        x = d.from_unit(u)
        assert d.contains(x)
        assert math.isclose(d.to_unit(x), u, rel_tol=1e-12, abs_tol=1e-12)


@given(u=unit)
def test_int_round_trip_is_idempotent(u):
    d = IntUniform(16, 256)
    x = d.from_unit(u)
    assert d.from_unit(d.to_unit(x)) == x


@given(seed=st.integers(0, 2**32 - 1))
def test_samples_stay_inside_default_space(seed):
    space = default_space()
    config = sample(space, np.random.default_rng(seed))
    space.validate(config)
    u = config_to_unit(space, config)
    assert np.all((u >= 0) & (u <= 1))


def test_sampling_is_deterministic():
    space = default_space()
    a = sample(space, 11)
    b = sample(space, 11)
    assert a == b


def test_space_spec_round_trip():
    space = default_space()
    assert SearchSpace.from_spec(space.to_spec()) == space
    assert space.names == ["l", "w", "m", "b"]


def test_space_rejects_duplicates_and_unknown_types():
    with pytest.raises(ValueError):
        SearchSpace([("a", Uniform(0, 1)), ("a", Uniform(0, 1))])
    with pytest.raises(ValueError):
        SearchSpace.from_spec([{"name": "a", "type": "beta", "lo": 0, "hi": 1}])


def test_validate_reports_missing_and_extra():
    space = default_space()
    with pytest.raises(DomainError):
        space.validate({"l": 0.1})
    with pytest.raises(DomainError):
        space.validate({"l": 0.1, "w": 1e-4, "m": 0.1, "b": 128, "x": 1})
    with pytest.raises(DomainError):
        space.validate({"l": 100.0, "w": 1e-4, "m": 0.1, "b": 128})


@given(seed=st.integers(0, 2**31))
def test_config_json_round_trip_is_exact(seed):
    config = sample(default_space(), seed)
    back = Config.from_json(config.to_json())
    assert dict(back) == dict(config)
    assert isinstance(back["b"], int)


def test_unit_cube_transformer():
    space = default_space()
    tf = UnitCubeTransformer(space)
    configs = [sample(space, s) for s in range(5)]
    X = tf.fit_transform(configs)
    assert X.shape == (5, 4)
    back = tf.inverse_transform(X)
    for a, b in zip(configs, back):
        assert b["b"] == a["b"]
        for name in ("l", "w", "m"):
            assert math.isclose(a[name], b[name], rel_tol=1e-12)
    assert list(tf.get_feature_names_out()) == space.names
    assert clone(tf).get_params() == {"space": space}


def test_unit_cube_transformer_checks_columns():
    with pytest.raises(ValueError):
        UnitCubeTransformer().fit().inverse_transform(np.zeros((2, 3)))


def test_config_from_unit_clips():
    config = config_from_unit(default_space(), [-0.5, 1.5, 0.5, 0.5])
    assert config["l"] == 1e-6 and config["w"] == 10.0
