"""Cost accounting: analytic formulas, parameter enumeration and the MAC counter agree."""
import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from nes2net import core, profiler
from nes2net.core import Tensor
from nes2net.layers import Conv1d, Linear
from nes2net.models import VARIANTS, ModelConfig, build_model, canonical_config


@pytest.fixture(scope="module")
def canonical():
    return {v: build_model(canonical_config(v), 0) for v in VARIANTS}


def test_linear_and_conv_formulas(rng):
    assert profiler.linear_cost(1024, 128) == (131_200, 131_072)
    assert profiler.conv_cost(16, 16, 3) == (784, 768)
    lin = Linear(1024, 128, rng)
    with core.count_macs() as counter:
        lin(Tensor(np.zeros((1024, 200), dtype=np.float32)))
    assert counter.total == 26_214_400
    assert lin.num_parameters() == 131_200


def test_conv_macs_at_one_frame(rng):
    conv = Conv1d(8, 8, 1, rng)
    with core.count_macs() as counter:
        conv(Tensor(np.ones((8, 1), dtype=np.float32)))
    assert counter.total == 64


def test_frames_must_be_positive(canonical):
    with pytest.raises(ValueError):
        profiler.analytic_rows(canonical_config("nes2net"), 0)
    with pytest.raises(ValueError):
        profiler.instrumented_macs(canonical["nes2net"], 0)


@pytest.mark.parametrize("variant", VARIANTS)
def test_canonical_counts_verified(canonical, variant):
    report = profiler.verify_counts(canonical[variant], 200)
    assert all(v == 0 for v in report.values()), report


@pytest.mark.parametrize("variant", VARIANTS)
def test_params_equal_enumeration(canonical, variant):
    model = canonical[variant]
    rep = profiler.profile(model, 200)
    assert rep.total_params == sum(p.size for p in model.parameters())
    assert rep.total_params == sum(r.params for r in rep.rows)
    assert rep.total_macs == sum(r.macs for r in rep.rows)


def test_dr_shares(canonical):
    rep = profiler.profile(canonical["res2net_dr"], 200)
    assert rep.row("dr") == profiler.CostRow("dr", 131_200, 26_214_400)
    assert 0 <= rep.dr_params_share <= 1 and 0 <= rep.dr_macs_share <= 1
    nes = profiler.profile(canonical["nes2net"], 200)
    assert nes.dr_params_share == 0 and nes.dr_macs_share == 0


@pytest.mark.parametrize("variant", VARIANTS)
def test_macs_linear_in_frames(variant):
    cfg = canonical_config(variant)
    per_utt = {}
    for t in (1, 2, 3):
        per_utt[t] = {r.layer: r.macs for r in profiler.analytic_rows(cfg, t)}
    for layer in per_utt[1]:
        slope = per_utt[2][layer] - per_utt[1][layer]
        assert per_utt[3][layer] - per_utt[2][layer] == slope
        const = per_utt[1][layer] - slope
        assert const >= 0
        if layer == "head":
            assert slope == 0 and const == 2 * cfg.working_width * cfg.num_classes


def test_params_independent_of_frames():
    cfg = canonical_config("nes2net_x")
    a = [r.params for r in profiler.analytic_rows(cfg, 1)]
    b = [r.params for r in profiler.analytic_rows(cfg, 500)]
    assert a == b


variants = st.sampled_from(VARIANTS)


@given(variants, st.sampled_from([16, 32, 48]), st.sampled_from([2, 4]), st.sampled_from([1, 2]),
       st.sampled_from(["shared", "channel", "context"]), st.integers(1, 9), st.sampled_from([1, 3, 5]))
def test_random_configs_verify(variant, n, s1, s2, attention, frames, kernel):
    cfg = ModelConfig(variant=variant, input_dim=n, s1=s1, s2=s2, se_ratio=2, blocks=2, scale=2,
                      reduced_dim=8, pool_bottleneck=3, pool_attention=attention, kernel=kernel,
                      frontend_layers=frames % 3)
    report = profiler.verify_counts(build_model(cfg, 0), frames)
    assert all(v == 0 for v in report.values()), report


def test_tsv_round_trip(canonical):
    rep = profiler.profile(canonical["nes2net_x"], 200)
    assert profiler.parse_tsv(rep.to_tsv()) == rep.rows
    table = rep.to_table()
    for r in rep.rows:
        assert f"{r.params:,}" in table and f"{r.macs:,}" in table


def test_buffers_not_counted_as_params(canonical):
    model = canonical["nes2net"]
    rep = profiler.profile(model, 200)
    assert rep.extra["buffers"] == profiler.buffer_count(model) > 0
    assert rep.total_params == model.num_parameters()
