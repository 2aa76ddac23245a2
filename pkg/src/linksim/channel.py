"""Receiver SNR production: trace replay or analytic propagation models.

Analytic mode composes tx power, per-end RF gain, a path loss model (Friis
free space or log-distance), optional Nakagami-m fast fading on the linear
received power, and thermal noise. Trace replay bypasses all of it and
returns recorded values verbatim.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

from .engine import RngStream
from .traces import DirectedLink, MobilityTrace, SnrTrace

SPEED_OF_LIGHT = 299_792_458.0
MIN_FRIIS_DISTANCE_M = 0.5   # near-field guard


@dataclass(frozen=True)
class RadioParams:
    tx_power_dbm: float = 17.0
    rf_gain_db_per_end: float = -7.0   # antenna gain minus inline attenuator
    bandwidth_hz: float = 20e6
    center_freq_hz: float = 5.22e9
    noise_figure_db: float = 7.0

    def __post_init__(self) -> None:
        if not 0.0 <= self.tx_power_dbm <= 17.0:
            raise ValueError(f"tx_power_dbm out of [0, 17]: {self.tx_power_dbm}")
        if self.bandwidth_hz <= 0:
            raise ValueError("bandwidth_hz must be > 0")
        if self.center_freq_hz <= 0:
            raise ValueError("center_freq_hz must be > 0")


TRACE = "trace"
FRIIS = "friis"
LOGDIST = "logdist"


@dataclass(frozen=True)
class PropagationSpec:
    """Which SNR source drives the link: trace replay or an analytic model."""

    model: str
    trace: SnrTrace | None = None
    gamma: float = 2.0
    ref_distance_m: float = 1.0
    nakagami_m: float | None = None

    def __post_init__(self) -> None:
        if self.model not in (TRACE, FRIIS, LOGDIST):
            raise ValueError(f"unknown propagation model {self.model!r}")
        if self.model == TRACE:
            if self.trace is None:
                raise ValueError("trace model requires an SnrTrace")
            if self.nakagami_m is not None:
                raise ValueError("trace replay admits no fading overlay")
        else:
            if self.trace is not None:
                raise ValueError(f"{self.model} model must not carry a trace")
        if self.gamma <= 0:
            raise ValueError("gamma must be > 0")
        if self.ref_distance_m <= 0:
            raise ValueError("ref_distance_m must be > 0")
        if self.nakagami_m is not None and self.nakagami_m < 0.5:
            raise ValueError("nakagami_m must be >= 0.5")


def friis_path_loss(d_m: float, f_hz: float,
                    min_distance_m: float = MIN_FRIIS_DISTANCE_M) -> float:
    """Free-space path loss in dB: 20 log10(4 pi d f / c)."""
    if f_hz <= 0:
        raise ValueError("f_hz must be > 0")
    if d_m < min_distance_m:
        raise ValueError(
            f"below reference distance: d={d_m} m < {min_distance_m} m"
        )
    return 20.0 * math.log10(4.0 * math.pi * d_m * f_hz / SPEED_OF_LIGHT)


def log_distance_path_loss(d_m: float, gamma: float, ref_distance_m: float,
                           f_hz: float) -> float:
    """Friis at the reference distance plus 10*gamma*log10(d/d0)."""
    if ref_distance_m <= 0:
        raise ValueError("ref_distance_m must be > 0")
    if d_m < ref_distance_m:
        raise ValueError(
            f"below reference distance: d={d_m} m < {ref_distance_m} m"
        )
    ref_loss = friis_path_loss(ref_distance_m, f_hz,
                               min_distance_m=ref_distance_m)
    return ref_loss + 10.0 * gamma * math.log10(d_m / ref_distance_m)


def apply_nakagami(power_w: float, m: float, rng: RngStream) -> float:
    """One Nakagami-m block-fading draw: gamma with shape m, mean power_w."""
    if power_w < 0:
        raise ValueError("power_w must be >= 0")
    if m < 0.5:
        raise ValueError("m must be >= 0.5")
    if power_w == 0.0:
        return 0.0
    return rng.gamma(m, power_w / m)


def noise_power_dbm(bandwidth_hz: float, noise_figure_db: float) -> float:
    """Thermal noise floor: -174 dBm/Hz integrated over the bandwidth plus NF."""
    if bandwidth_hz <= 0:
        raise ValueError("bandwidth_hz must be > 0")
    return -174.0 + 10.0 * math.log10(bandwidth_hz) + noise_figure_db


def dbm_to_w(dbm: float) -> float:
    return 10.0 ** ((dbm - 30.0) / 10.0)


def w_to_dbm(w: float) -> float:
    return 10.0 * math.log10(max(w, 1e-300)) + 30.0


def link_snr(spec: PropagationSpec, params: RadioParams, link: DirectedLink,
             mobility: MobilityTrace, t_us: int,
             fading_rng: RngStream | None = None) -> float:
    """Receiver SNR in dB for one frame on link at t_us.

    Trace replay returns the recorded value and ignores params. Analytic
    models derive rx power from the distance at t_us; when fading is
    configured a fresh draw is taken from fading_rng (one per frame).
    """
    if spec.model == TRACE:
        assert spec.trace is not None
        return spec.trace.snr_at(link, t_us)
    d_m = mobility.link_distance(link.tx, link.rx, t_us)
    if spec.model == FRIIS:
        loss_db = friis_path_loss(d_m, params.center_freq_hz)
    else:
        loss_db = log_distance_path_loss(
            d_m, spec.gamma, spec.ref_distance_m, params.center_freq_hz
        )
    rx_dbm = params.tx_power_dbm + 2.0 * params.rf_gain_db_per_end - loss_db
    if spec.nakagami_m is not None:
        if fading_rng is None:
            raise ValueError("fading configured but no fading stream supplied")
        rx_dbm = w_to_dbm(apply_nakagami(dbm_to_w(rx_dbm), spec.nakagami_m,
                                         fading_rng))
    return rx_dbm - noise_power_dbm(params.bandwidth_hz, params.noise_figure_db)


@dataclass
class Channel:
    """Bound SNR source for one simulation instance.

    Owns the per-link fading streams so that replaying a recorded trace
    consumes exactly the same non-fading streams as the original run.
    """

    spec: PropagationSpec
    params: RadioParams
    mobility: MobilityTrace
    _fading: dict[DirectedLink, RngStream] = field(default_factory=dict)
    _root_seed: int = 0

    def bind_seed(self, root_seed: int) -> None:
        self._root_seed = root_seed

    def snr(self, link: DirectedLink, t_us: int) -> float:
        rng = None
        if self.spec.nakagami_m is not None:
            rng = self._fading.get(link)
            if rng is None:
                rng = RngStream(self._root_seed, f"fading.{link}")
                self._fading[link] = rng
        return link_snr(self.spec, self.params, link, self.mobility, t_us, rng)
