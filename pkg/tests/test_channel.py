"""Propagation models, noise accounting, fading, and SNR composition."""

import math

import pytest

from linksim.channel import (Channel, PropagationSpec, RadioParams,
                             apply_nakagami, dbm_to_w, friis_path_loss,
                             link_snr, log_distance_path_loss,
                             noise_power_dbm, w_to_dbm)
from linksim.engine import derive_stream
from linksim.traces import DirectedLink, MobilityTrace, parse_snr_trace

AB = DirectedLink("A", "B")
F = 5.22e9


def static_mobility(d_m: float) -> MobilityTrace:
    return MobilityTrace.static({"A": (0, 0, 0), "B": (d_m, 0, 0)})


def test_friis_reference_values():
    assert friis_path_loss(6.0, F) == pytest.approx(62.364218, abs=1e-5)
    assert friis_path_loss(18.0, F) == pytest.approx(71.906643, abs=1e-5)


def test_friis_doubling_adds_6dB():
    for d in (1.0, 6.0, 50.0):
        delta = friis_path_loss(2 * d, F) - friis_path_loss(d, F)
        assert delta == pytest.approx(20 * math.log10(2), abs=1e-12)


def test_friis_near_field_guard():
    with pytest.raises(ValueError, match="below reference distance"):
        friis_path_loss(0.4, F)
    with pytest.raises(ValueError):
        friis_path_loss(6.0, 0.0)


def test_log_distance_gamma2_equals_friis():
    for d in range(1, 201):
        assert abs(log_distance_path_loss(d, 2.0, 1.0, F)
                   - friis_path_loss(d, F)) < 1e-9


def test_log_distance_exponent_arithmetic():
    d0 = 1.0
    base = friis_path_loss(d0, F)
    assert log_distance_path_loss(10 * d0, 1.7, d0, F) == pytest.approx(
        base + 17.0, abs=1e-9)
    assert log_distance_path_loss(10 * d0, 2.5, d0, F) == pytest.approx(
        base + 25.0, abs=1e-9)
    with pytest.raises(ValueError):
        log_distance_path_loss(0.5, 2.0, 1.0, F)


def test_noise_power_values():
    assert noise_power_dbm(20e6, 7.0) == pytest.approx(-93.98970, abs=1e-4)
    assert noise_power_dbm(20e6, 0.0) == pytest.approx(-100.98970, abs=1e-4)
    assert noise_power_dbm(1.0, 0.0) == pytest.approx(-174.0, abs=1e-12)


def test_nakagami_zero_power():
    rng = derive_stream(1, "fading.t")
    assert all(apply_nakagami(0.0, 1.25, rng) == 0.0 for _ in range(10))


def test_nakagami_mean_and_variance():
    rng = derive_stream(2, "fading.mc")
    n = 200_000
    for m in (0.5, 1.25, 5.0):
        total = 0.0
        total_sq = 0.0
        for _ in range(n):
            x = apply_nakagami(1.0, m, rng)
            total += x
            total_sq += x * x
        mean = total / n
        var = total_sq / n - mean * mean
        assert abs(mean - 1.0) < 0.01
        assert abs(var / mean ** 2 - 1.0 / m) < 0.05 / m


def test_nakagami_large_m_is_nearly_deterministic():
    rng = derive_stream(3, "fading.large")
    n = 20_000
    draws = [apply_nakagami(2.5, 1e4, rng) for _ in range(n)]
    mean = sum(draws) / n
    var = sum((x - mean) ** 2 for x in draws) / n
    assert var / mean ** 2 < 1e-3


def test_nakagami_validation():
    rng = derive_stream(4, "fading.v")
    with pytest.raises(ValueError):
        apply_nakagami(-1.0, 1.25, rng)
    with pytest.raises(ValueError):
        apply_nakagami(1.0, 0.4, rng)


def test_radio_params_bounds():
    with pytest.raises(ValueError):
        RadioParams(tx_power_dbm=18.0)
    with pytest.raises(ValueError):
        RadioParams(bandwidth_hz=0.0)


def test_propagation_spec_validation():
    trace = parse_snr_trace("t_us,tx,rx,snr_db\n0,A,B,23.5\n")
    with pytest.raises(ValueError, match="no fading overlay"):
        PropagationSpec("trace", trace=trace, nakagami_m=1.25)
    with pytest.raises(ValueError):
        PropagationSpec("trace")
    with pytest.raises(ValueError):
        PropagationSpec("friis", trace=trace)
    with pytest.raises(ValueError):
        PropagationSpec("logdist", gamma=-1.0)
    with pytest.raises(ValueError):
        PropagationSpec("warp")


def test_link_snr_trace_replay_is_verbatim():
    trace = parse_snr_trace(
        "t_us,tx,rx,snr_db\n1000000,A,B,23.5\n2000000,A,B,19.25\n"
    )
    spec = PropagationSpec("trace", trace=trace)
    params = RadioParams()
    mob = static_mobility(6.0)
    assert link_snr(spec, params, AB, mob, 1_000_000) == 23.5
    assert link_snr(spec, params, AB, mob, 1_500_000) == 23.5
    assert link_snr(spec, params, AB, mob, 2_000_000) == 19.25


def test_link_snr_friis_composition():
    spec = PropagationSpec("friis")
    params = RadioParams(tx_power_dbm=17.0, rf_gain_db_per_end=-7.0,
                         noise_figure_db=7.0)
    got = link_snr(spec, params, AB, static_mobility(6.0), 0)
    assert got == pytest.approx(34.6255, abs=1e-3)


def test_link_snr_monotone_in_distance():
    spec = PropagationSpec("friis")
    params = RadioParams()
    prev = math.inf
    for d in range(1, 120):
        snr = link_snr(spec, params, AB, static_mobility(float(d)), 0)
        assert snr < prev
        prev = snr


def test_link_snr_fading_preserves_mean_linear_snr():
    spec = PropagationSpec("friis", nakagami_m=1.25)
    params = RadioParams()
    mob = static_mobility(6.0)
    base = link_snr(PropagationSpec("friis"), params, AB, mob, 0)
    rng = derive_stream(11, "fading.A->B")
    n = 200_000
    total = 0.0
    for _ in range(n):
        total += 10 ** (link_snr(spec, params, AB, mob, 0, rng) / 10)
    assert abs(total / n / 10 ** (base / 10) - 1.0) < 0.01


def test_channel_fading_stream_is_per_link_and_seeded():
    spec = PropagationSpec("friis", nakagami_m=1.25)

    def draws(seed):
        ch = Channel(spec, RadioParams(), static_mobility(6.0))
        ch.bind_seed(seed)
        return [ch.snr(AB, 0) for _ in range(50)]

    assert draws(1) == draws(1)
    assert draws(1) != draws(2)


def test_dbm_w_round_trip():
    for dbm in (-90.0, 0.0, 17.0):
        assert w_to_dbm(dbm_to_w(dbm)) == pytest.approx(dbm, abs=1e-9)
