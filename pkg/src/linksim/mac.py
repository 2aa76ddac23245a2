"""802.11 DCF MAC over a half-duplex point-to-point medium.

Stations run the classic contention cycle (DIFS, uniform backoff with freeze
on busy, DATA, SIFS, ACK) with exponential contention-window doubling and a
bounded retry chain. The medium is reserved NAV-style for the whole
DATA+SIFS+ACK exchange; transmissions that start in the same slot collide.

Rate control is either a fixed mode or a Minstrel-style controller keeping
per-mode EWMA success statistics with periodic lookaround probing.
"""

from __future__ import annotations

from collections import deque
from dataclasses import dataclass
from typing import Callable, Optional

from . import phy
from .channel import Channel
from .engine import EventQueue, RngStream
from .phy import DELIVERED, MODES, PhyMode, frame_duration_us
from .traces import DirectedLink

COLLIDED = "collided"

ACCEPTED = "accepted"
DROPPED_FULL = "dropped_full"


@dataclass(frozen=True)
class DcfParams:
    slot_us: int = 9
    sifs_us: int = 16
    difs_us: int = 34
    cw_min: int = 15
    cw_max: int = 1023
    retry_limit: int = 7
    ack_bytes: int = 14
    queue_capacity: int = 500
    # Rates eligible for control responses; ACKs go out at the highest
    # basic rate not above the data rate. A single low basic rate keeps
    # ACKs robust on asymmetric links.
    basic_rates_mbps: tuple[int, ...] = (6,)

    def __post_init__(self) -> None:
        if self.difs_us != self.sifs_us + 2 * self.slot_us:
            raise ValueError("difs must equal sifs + 2*slot")
        for cw in (self.cw_min, self.cw_max):
            if cw < 1 or (cw + 1) & cw:
                raise ValueError(f"contention window {cw} not of form 2^k - 1")
        if self.cw_max < self.cw_min:
            raise ValueError("cw_max must be >= cw_min")
        if self.retry_limit < 1:
            raise ValueError("retry_limit must be >= 1")
        if self.queue_capacity < 1:
            raise ValueError("queue_capacity must be >= 1")
        if not self.basic_rates_mbps:
            raise ValueError("at least one basic rate required")
        for rate in self.basic_rates_mbps:
            phy.mode_for_rate(rate)


def ack_mode_for(data_mode: PhyMode, params: DcfParams) -> PhyMode:
    """Highest basic rate <= the data rate; lowest basic rate as fallback."""
    eligible = [r for r in params.basic_rates_mbps if r <= data_mode.data_rate_mbps]
    rate = max(eligible) if eligible else min(params.basic_rates_mbps)
    return phy.mode_for_rate(rate)


def backoff_slots(cw: int, rng: RngStream) -> int:
    """Uniform backoff draw in [0, cw] slots."""
    if cw < 0:
        raise ValueError("cw must be >= 0")
    return rng.randint(0, cw)


class TxQueue:
    """Bounded FIFO with tail drop."""

    def __init__(self, capacity: int):
        if capacity < 1:
            raise ValueError("capacity must be >= 1")
        self.capacity = capacity
        self._frames: deque = deque()
        self.drops = 0

    def __len__(self) -> int:
        return len(self._frames)

    def enqueue(self, frame) -> str:
        if len(self._frames) >= self.capacity:
            self.drops += 1
            return DROPPED_FULL
        self._frames.append(frame)
        return ACCEPTED

    def dequeue(self):
        return self._frames.popleft() if self._frames else None


class FixedRate:
    """Trivial controller: one mode for every frame."""

    def __init__(self, mode: PhyMode):
        self.mode = mode

    def select(self, mpdu_bytes: int, now_us: int) -> PhyMode:
        return self.mode

    def report(self, mode: PhyMode, attempts: int, successes: int) -> None:
        pass


class Minstrel:
    """Statistics-driven auto-rate control.

    Per-mode success probabilities are EWMA-smoothed over fixed update
    intervals; the mode maximizing estimated throughput is used, with every
    tenth frame probing a randomly chosen other mode. Modes that cannot beat
    the current best even at perfect delivery are probed at most once per
    interval so lookaround does not dominate airtime. Unattempted modes get
    one forced probe up front.
    """

    EWMA_WEIGHT = 0.75
    UPDATE_INTERVAL_US = 100_000
    PROBE_PERIOD = 10

    def __init__(self, params: DcfParams, rng: RngStream,
                 modes: tuple[PhyMode, ...] = MODES):
        self.params = params
        self.rng = rng
        self.modes = modes
        n = len(modes)
        self._index = {mode.id: i for i, mode in enumerate(modes)}
        self.ewma = [0.0] * n
        self.window_attempts = [0] * n
        self.window_successes = [0] * n
        self.total_attempts = [0] * n
        self.probed_this_interval = [False] * n
        self.frame_count = 0
        self._next_update_us = self.UPDATE_INTERVAL_US
        self._ett_cache: dict[int, list[float]] = {}

    def _tx_times(self, mpdu_bytes: int) -> list[float]:
        """Expected medium time per mode: DIFS + mean backoff + DATA + SIFS + ACK."""
        cached = self._ett_cache.get(mpdu_bytes)
        if cached is None:
            p = self.params
            base = p.difs_us + p.slot_us * p.cw_min / 2.0 + p.sifs_us
            cached = [
                base
                + frame_duration_us(mpdu_bytes, m)
                + frame_duration_us(p.ack_bytes, ack_mode_for(m, p))
                for m in self.modes
            ]
            self._ett_cache[mpdu_bytes] = cached
        return cached

    def update_window(self, mode_id: int, attempts: int, successes: int) -> None:
        """Fold one interval's counters for one mode into its EWMA."""
        if attempts < successes:
            raise ValueError("attempts must be >= successes")
        if attempts == 0:
            return
        sample = successes / attempts
        w = self.EWMA_WEIGHT
        self.ewma[mode_id] = (1.0 - w) * sample + w * self.ewma[mode_id]

    def _maybe_update(self, now_us: int) -> None:
        if now_us < self._next_update_us:
            return
        for i in range(len(self.modes)):
            self.update_window(i, self.window_attempts[i], self.window_successes[i])
            self.window_attempts[i] = 0
            self.window_successes[i] = 0
            self.probed_this_interval[i] = False
        interval = self.UPDATE_INTERVAL_US
        self._next_update_us = now_us - (now_us % interval) + interval

    def _argmax_tput(self, mpdu_bytes: int) -> tuple[int, float]:
        ett = self._tx_times(mpdu_bytes)
        bits = 8 * mpdu_bytes
        best = 0
        best_tput = -1.0
        for i, e in enumerate(self.ewma):
            tput = e * bits / ett[i]
            if tput > best_tput:
                best_tput = tput
                best = i
        return best, best_tput

    def best_mode(self, mpdu_bytes: int) -> PhyMode:
        """Current throughput-maximizing mode (lowest mode before any sample)."""
        best, best_tput = self._argmax_tput(mpdu_bytes)
        return self.modes[best if best_tput > 0.0 else 0]

    def select(self, mpdu_bytes: int, now_us: int) -> PhyMode:
        self._maybe_update(now_us)
        for i, total in enumerate(self.total_attempts):
            if total == 0:
                self.probed_this_interval[i] = True
                return self.modes[i]
        best, best_tput = self._argmax_tput(mpdu_bytes)
        if best_tput <= 0.0:
            return self.modes[0]
        self.frame_count += 1
        n = len(self.modes)
        if n > 1 and self.frame_count % self.PROBE_PERIOD == 0:
            r = self.rng.randint(0, n - 2)
            cand = r if r < best else r + 1
            ett = self._tx_times(mpdu_bytes)
            if (8 * mpdu_bytes / ett[cand] > best_tput
                    or not self.probed_this_interval[cand]):
                self.probed_this_interval[cand] = True
                return self.modes[cand]
        return self.modes[best]

    def report(self, mode: PhyMode, attempts: int, successes: int) -> None:
        i = self._index[mode.id]
        self.window_attempts[i] += attempts
        self.window_successes[i] += successes
        self.total_attempts[i] += attempts


class _Exchange:
    """One in-flight DATA(+ACK) exchange owned by its sender."""

    __slots__ = ("sender", "frame", "mode", "t_start", "data_end",
                 "reservation_end", "ack_dur_us", "collided")

    def __init__(self, sender, frame, mode, t_start, data_end,
                 reservation_end, ack_dur_us):
        self.sender = sender
        self.frame = frame
        self.mode = mode
        self.t_start = t_start
        self.data_end = data_end
        self.reservation_end = reservation_end
        self.ack_dur_us = ack_dur_us
        self.collided = False


class Medium:
    """Shared half-duplex medium between exactly two stations."""

    def __init__(self) -> None:
        self.stations: list[Station] = []
        self.busy_until = 0
        self._active: list[_Exchange] = []

    def register(self, station: "Station") -> None:
        if len(self.stations) >= 2:
            raise ValueError("point-to-point medium supports two stations")
        self.stations.append(station)

    def begin_tx(self, exchange: _Exchange) -> list[_Exchange]:
        """Admit a transmission; returns concurrently active exchanges."""
        now = exchange.t_start
        self._active = [e for e in self._active if e.data_end > now]
        partners = list(self._active)
        self._active.append(exchange)
        if exchange.reservation_end > self.busy_until:
            self.busy_until = exchange.reservation_end
        for station in self.stations:
            if station is not exchange.sender:
                station.on_medium_busy(now)
        return partners


@dataclass
class StationStats:
    data_frames: int = 0          # MAC frames completed (delivered or dropped)
    data_attempts: int = 0        # PHY transmissions of data frames
    frames_delivered: int = 0
    frames_dropped: int = 0       # retry limit exceeded
    queue_drops: int = 0
    acks_sent: int = 0
    duplicates_suppressed: int = 0


class Station:
    """One 802.11 DCF endpoint: queue, contention, retransmissions, rate control."""

    def __init__(self, node: str, engine: EventQueue, medium: Medium,
                 channel: Channel, params: DcfParams, root_seed: int,
                 rate_control=None, processing_delay_us: int = 0,
                 event_log=None, trace_sink: Optional[Callable] = None):
        self.node = node
        self.engine = engine
        self.medium = medium
        self.channel = channel
        self.params = params
        self.peer: Station | None = None
        self.rate_control = rate_control or FixedRate(MODES[0])
        self.processing_delay_us = processing_delay_us
        self.event_log = event_log
        self.trace_sink = trace_sink
        self.queue = TxQueue(params.queue_capacity)
        self.stats = StationStats()
        self.backoff_rng = RngStream(root_seed, f"mac.backoff.{node}")
        self._rx_rng: RngStream | None = None   # for frames this station receives
        self._root_seed = root_seed
        self.rx_handlers: list[Callable] = []
        self.cw = params.cw_min
        self._frame = None
        self._mode: PhyMode | None = None
        self._exchange: _Exchange | None = None
        self._attempts = 0
        self._mac_seq = 0
        self._timer = None
        self._slots = 0
        self._difs_end = 0
        self._last_rx_seq: int | None = None
        self._tx_link: DirectedLink | None = None
        self._rx_link: DirectedLink | None = None
        medium.register(self)

    def attach_peer(self, peer: "Station") -> None:
        self.peer = peer
        self._rx_rng = RngStream(self._root_seed, f"phy.rx.{peer.node}->{self.node}")
        self._tx_link = DirectedLink(self.node, peer.node)
        self._rx_link = DirectedLink(peer.node, self.node)

    # -- transmit path -------------------------------------------------

    def enqueue_packet(self, packet) -> str:
        outcome = self.queue.enqueue(packet)
        if outcome == DROPPED_FULL:
            self.stats.queue_drops += 1
            if self.event_log is not None:
                self.event_log.drop(self.engine.clock_us, self.node,
                                    packet.seq, 0, "queue_full")
        elif self._frame is None:
            self._service_next(self.engine.clock_us)
        return outcome

    def _service_next(self, idle_floor_us: int) -> None:
        frame = self.queue.dequeue()
        if frame is None:
            return
        self._frame = frame
        self._mac_seq += 1
        self._attempts = 0
        self._mode = self.rate_control.select(frame.mpdu_bytes,
                                              self.engine.clock_us)
        self._arm_access(idle_floor_us, backoff_slots(self.cw, self.backoff_rng))

    def _arm_access(self, idle_floor_us: int, slots: int) -> None:
        p = self.params
        idle_from = self.engine.clock_us
        if self.medium.busy_until > idle_from:
            idle_from = self.medium.busy_until
        if idle_floor_us > idle_from:
            idle_from = idle_floor_us
        self._difs_end = idle_from + p.difs_us
        self._slots = slots
        self._timer = self.engine.schedule(
            self._difs_end + slots * p.slot_us, self._on_access_granted
        )

    def on_medium_busy(self, t_busy_us: int) -> None:
        """Freeze a pending backoff; fully elapsed slots stay consumed."""
        timer = self._timer
        if timer is None or timer[0] <= t_busy_us:
            return   # nothing pending, or firing in this very slot (collision)
        self.engine.cancel(timer)
        self._timer = None
        if t_busy_us > self._difs_end:
            consumed = (t_busy_us - self._difs_end) // self.params.slot_us
            remaining = self._slots - min(consumed, self._slots)
        else:
            remaining = self._slots
        self._arm_access(self.medium.busy_until, remaining)

    def _on_access_granted(self) -> None:
        self._timer = None
        now = self.engine.clock_us
        frame = self._frame
        mode = self._mode
        self._attempts += 1
        data_dur = frame_duration_us(frame.mpdu_bytes, mode)
        ack_dur = frame_duration_us(self.params.ack_bytes,
                                    ack_mode_for(mode, self.params))
        data_end = now + data_dur
        exchange = _Exchange(self, frame, mode, now, data_end,
                             data_end + self.params.sifs_us + ack_dur, ack_dur)
        partners = self.medium.begin_tx(exchange)
        if partners:
            exchange.collided = True
            for p in partners:
                p.collided = True
        self._exchange = exchange
        if self.event_log is not None:
            self.event_log.tx(now, self.node, "data", self._tx_link,
                              mode.data_rate_mbps, frame.seq, self._attempts,
                              data_dur)
        self.engine.schedule(data_end, self._on_data_end)

    def _on_data_end(self) -> None:
        exchange = self._exchange
        t = exchange.data_end
        frame = exchange.frame
        mode = exchange.mode
        peer = self.peer
        if exchange.collided:
            outcome = COLLIDED
            if self.event_log is not None:
                self.event_log.rx(t, peer.node, "data", self._tx_link,
                                  mode.data_rate_mbps, frame.seq,
                                  self._attempts, None, COLLIDED)
        else:
            snr_db = self.channel.snr(self._tx_link, t)
            outcome = phy.receive(frame.mpdu_bytes, mode, snr_db, peer._rx_rng)
            if self.event_log is not None:
                self.event_log.rx(t, peer.node, "data", self._tx_link,
                                  mode.data_rate_mbps, frame.seq,
                                  self._attempts, snr_db, outcome)
            if self.trace_sink is not None:
                self.trace_sink(t, self._tx_link, snr_db)
        if outcome == DELIVERED:
            peer._deliver(frame, self._mac_seq, t)
            self._handle_ack(exchange)
        else:
            self._handle_failure(exchange)

    def _handle_ack(self, exchange: _Exchange) -> None:
        """Receiver ACKs after SIFS; the ACK itself crosses the reverse link."""
        peer = self.peer
        mode = exchange.mode
        ack_start = exchange.data_end + self.params.sifs_us
        ack_end = exchange.reservation_end
        ack_mode = ack_mode_for(mode, self.params)
        peer.stats.acks_sent += 1
        snr_db = self.channel.snr(self._rx_link, ack_end)
        outcome = phy.receive(self.params.ack_bytes, ack_mode, snr_db,
                              self._rx_rng)
        if self.event_log is not None:
            frame = exchange.frame
            self.event_log.tx(ack_start, peer.node, "ack", self._rx_link,
                              ack_mode.data_rate_mbps, frame.seq,
                              self._attempts, exchange.ack_dur_us)
            self.event_log.rx(ack_end, self.node, "ack", self._rx_link,
                              ack_mode.data_rate_mbps, frame.seq,
                              self._attempts, snr_db, outcome)
        if self.trace_sink is not None:
            self.trace_sink(ack_end, self._rx_link, snr_db)
        if outcome == DELIVERED:
            self._complete(success=True, next_floor_us=ack_end)
        else:
            self._handle_failure(exchange)

    def _handle_failure(self, exchange: _Exchange) -> None:
        p = self.params
        timeout_at = exchange.data_end + p.sifs_us + exchange.ack_dur_us + p.slot_us
        if self._attempts > p.retry_limit:
            if self.event_log is not None:
                self.event_log.drop(exchange.data_end, self.node,
                                    exchange.frame.seq, self._attempts,
                                    "retry_limit")
            self._complete(success=False, next_floor_us=timeout_at)
        else:
            self.cw = min(2 * (self.cw + 1) - 1, p.cw_max)
            self._arm_access(timeout_at, backoff_slots(self.cw, self.backoff_rng))

    def _complete(self, success: bool, next_floor_us: int) -> None:
        self.rate_control.report(self._mode, self._attempts, int(success))
        self.stats.data_frames += 1
        self.stats.data_attempts += self._attempts
        if success:
            self.stats.frames_delivered += 1
        else:
            self.stats.frames_dropped += 1
        self.cw = self.params.cw_min
        self._frame = None
        self._mode = None
        self._service_next(next_floor_us)

    # -- receive path --------------------------------------------------

    def _deliver(self, frame, mac_seq: int, t_us: int) -> None:
        """Hand a received frame to the applications.

        Handlers get the raw MAC delivery time; the node's processing delay
        is additive latency accounting that applications fold into their own
        timestamps, so it never perturbs medium timing.
        """
        if mac_seq == self._last_rx_seq:
            self.stats.duplicates_suppressed += 1
            return
        self._last_rx_seq = mac_seq
        for handler in self.rx_handlers:
            handler(frame, t_us)


def build_point_to_point(engine: EventQueue, channel: Channel,
                         params: DcfParams, root_seed: int,
                         node_a: str, node_b: str,
                         rate_control_factory=None,
                         processing_delay_us: int = 0,
                         event_log=None,
                         trace_sink: Optional[Callable] = None,
                         ) -> tuple["Station", "Station", Medium]:
    """Wire two stations onto one medium with symmetric configuration."""
    medium = Medium()

    def make_rc(node: str):
        if rate_control_factory is None:
            return None
        return rate_control_factory(node)

    st_a = Station(node_a, engine, medium, channel, params, root_seed,
                   rate_control=make_rc(node_a),
                   processing_delay_us=processing_delay_us,
                   event_log=event_log, trace_sink=trace_sink)
    st_b = Station(node_b, engine, medium, channel, params, root_seed,
                   rate_control=make_rc(node_b),
                   processing_delay_us=processing_delay_us,
                   event_log=event_log, trace_sink=trace_sink)
    st_a.attach_peer(st_b)
    st_b.attach_peer(st_a)
    return st_a, st_b, medium
