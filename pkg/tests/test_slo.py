"""SLO levels, aggregate compliance and the reward identity."""
import math

import numpy as np
import pytest
from hypothesis import given, strategies as st

from slobench.env.actions import StreamConfig, enumerate_actions
from slobench.env.generator import TraceModel, synthesize
from slobench.env.metrics import MetricsBatch, MetricsSample
from slobench.errors import ConfigError, DomainError
from slobench.slo import (MBPS, PRESETS, ComplianceBreakdown, SloThresholds, batch_rewards,
                          compliance, compliance_levels, preset, reward, slo_level)
from oracles import level_oracle

BASIC = preset("basic")
pos = st.floats(1e-6, 1e9, allow_nan=False)
samples = st.builds(MetricsSample, cpu=st.floats(0, 3), mem=st.floats(0, 3),
                    throughput=st.floats(0, 1e8), latency=st.floats(0, 5),
                    render_scale=st.floats(0, 10), thermal=st.integers(0, 3),
                    stream_count=st.sampled_from([1, 2, 5, 10, 15, 20]))


def test_level_examples():
    assert slo_level(10 * MBPS, upper=10 * MBPS) == 1.0
    assert slo_level(1 / 10, upper=1 / 15) == pytest.approx(2 / 3, rel=1e-15)
    assert slo_level(5, lower=5) == 1.0
    assert slo_level(0, upper=1) == 1.0
    assert slo_level(2, upper=1) == 0.5 and slo_level(3, upper=1) == pytest.approx(1 / 3)


def test_level_contract_errors():
    with pytest.raises(DomainError):
        slo_level(-1.0, upper=1.0)
    with pytest.raises(ValueError):
        slo_level(1.0)
    with pytest.raises(ValueError):
        slo_level(1.0, upper=1.0, lower=1.0)


def test_aggregate_examples():
    b = ComplianceBreakdown.from_levels(1, 1, 1, 1, 1)
    assert b.s_overall == 1.0 and reward(b) == 1.0
    b = ComplianceBreakdown.from_levels(1, 0, 1, 1, 1)
    assert (b.s_qoe, b.s_qos, b.s_overall) == (0.5, 1.0, 0.75)
    assert reward(b) == 0.75


@given(pos, pos)
def test_levels_match_oracle_and_stay_in_unit_interval(v, b):
    for kind in ("max", "min"):
        got = slo_level(v, **{"upper" if kind == "max" else "lower": b})
        assert got == level_oracle(v, b, kind)
        assert 0.0 <= got <= 1.0


@given(pos, pos, pos)
def test_max_level_monotone_nonincreasing(a, b, bound):
    lo, hi = sorted((a, b))
    assert slo_level(lo, upper=bound) >= slo_level(hi, upper=bound)
    assert slo_level(lo, lower=bound) <= slo_level(hi, lower=bound)


@given(st.floats(1e-3, 1e6), st.floats(1e-3, 1e6), st.floats(1e-3, 1e3))
def test_max_level_unit_invariant(v, bound, scale):
    assert slo_level(v * scale, upper=bound * scale) == pytest.approx(slo_level(v, upper=bound),
                                                                    rel=1e-12)


@given(samples, st.sampled_from(sorted(PRESETS)))
def test_breakdown_identities_and_reward(sample, name):
    slos = preset(name)
    b = compliance(sample, slos)
    assert abs(b.s_qoe - (b.s_rs + b.s_sf) / 2) <= 1e-15
    assert abs(b.s_qos - (b.s_lat + b.s_tp + b.s_ts) / 3) <= 1e-15
    assert abs(b.s_overall - (b.s_qoe + b.s_qos) / 2) <= 1e-15
    assert all(0 <= getattr(b, f) <= 1 for f in ("s_rs", "s_sf", "s_lat", "s_tp", "s_ts",
                                                  "s_qoe", "s_qos", "s_overall"))
    assert reward(b) == b.s_overall


def test_vectorised_levels_match_scalar_path():
    rng = np.random.default_rng(0)
    n = 1000
    batch = MetricsBatch(cpu=rng.uniform(0, 1, n), mem=rng.uniform(0, 1, n),
                         throughput=rng.uniform(0, 3e6, n), latency=rng.uniform(0, 0.3, n),
                         render_scale=rng.uniform(0, 4, n), thermal=rng.integers(0, 4, n),
                         stream_count=rng.choice([1, 2, 5, 10, 15, 20], n))
    batch.throughput[:5] = 0.0
    for name in PRESETS:
        slos = preset(name)
        levels = compliance_levels(batch, slos)
        rewards = batch_rewards(batch, slos)
        for i, s in enumerate(batch):
            b = compliance(s, slos)
            assert list(levels[i]) == [b.s_rs, b.s_sf, b.s_lat, b.s_tp, b.s_ts]
            assert abs(rewards[i] - b.s_overall) <= 1e-15


def test_first_slo_change_is_unattainable_noise_free():
    model = TraceModel(jitter_sigma=0, size_sigma=0, metric_sigma=0, hot_probability=0)
    slos = preset("slo-change-1")
    best = max(batch_rewards(synthesize(c, 1, model, rng=np.random.default_rng(0)), slos)[0]
               for c in enumerate_actions())
    assert best < 1.0
    top = synthesize(StreamConfig(20, 720, 30), 1, model, rng=np.random.default_rng(0))
    assert batch_rewards(top, slos)[0] < 1.0


def test_threshold_validation():
    with pytest.raises(ConfigError):
        SloThresholds(tp_max=0, lat_max=1, sf_min=1, rs_max=1, ts_max=1)
    with pytest.raises(ConfigError):
        SloThresholds(tp_max=1, lat_max=1, sf_min=1, rs_max=1, ts_max=-1)
    with pytest.raises(ConfigError):
        SloThresholds.from_mapping({"tp_max": 1, "lat_max": 1, "sf_min": 1, "rs_max": 1})
    with pytest.raises(ConfigError):
        preset("nope")
    assert SloThresholds(tp_max=1, lat_max=1, sf_min=1, rs_max=1, ts_max=0).ts_max == 0


def test_presets_use_decimal_megabits():
    assert BASIC.tp_max == 1_250_000.0
    assert preset("slo-change-1").tp_max == 32_000.0
    assert math.isclose(preset("slo-change-1").lat_max, 1 / 30)
    assert preset("slo-change-2").sf_min == 10
