"""Scenario configuration, simulation assembly, and run artifacts.

A scenario is described by an INI-style config file (sections: scenario,
nodes, radio, propagation, traffic, mac). Runs write per-second series CSVs,
an optional packet-level event log, a summary, and a manifest embedding the
exact config text so any run can be reproduced bit-for-bit.
"""

from __future__ import annotations

import configparser
import hashlib
import io
import json
from dataclasses import dataclass, field, replace
from pathlib import Path
from typing import Callable

from . import __version__, metrics, phy
from .channel import (FRIIS, LOGDIST, TRACE, Channel, PropagationSpec,
                      RadioParams)
from .engine import EventQueue, RngStream
from .mac import DcfParams, FixedRate, Minstrel, Station, StationStats, \
    build_point_to_point
from .traces import (DirectedLink, MobilityTrace, SnrTrace, load_mobility,
                     load_snr_trace, SNR_HEADER)
from .traffic import PingApp, PingConfig, UdpFlowConfig, UdpSink, UdpSource

PING = "ping"
UDP_UNI = "udp_uni"
UDP_BIDI = "udp_bidi"
TRAFFIC_KINDS = (PING, UDP_UNI, UDP_BIDI)


class ConfigError(ValueError):
    """Invalid or inconsistent scenario configuration."""


@dataclass
class ScenarioConfig:
    duration_s: int = 300
    seed: int = 1
    log_events: bool = True
    out_dir: str | None = None
    # topology: static positions or a mobility file (exactly one source)
    nodes: dict[str, tuple[float, float, float]] | None = None
    mobility_file: Path | None = None
    mobility: MobilityTrace | None = None        # API injection
    # propagation
    model: str = FRIIS
    trace_file: Path | None = None
    snr_trace: SnrTrace | None = None            # API injection
    gamma: float = 2.0
    ref_distance_m: float = 1.0
    nakagami_m: float | None = None
    radio: RadioParams = field(default_factory=RadioParams)
    # traffic
    traffic_kind: str = UDP_UNI
    src: str = "Master"
    dst: str = "ClientA"
    payload_bytes: int = 1472
    offered_load_bps: float = 54e6
    interval_us: int = 100_000
    start_us: int = 0
    stop_us: int | None = None
    processing_delay_us: int = 0
    # mac
    rate_control: str = "minstrel"
    fixed_mode_mbps: int = 54
    queue_capacity: int = 500
    retry_limit: int = 7
    basic_rates_mbps: tuple[int, ...] = (6,)
    # provenance (filled by the parser, used by manifests)
    config_text: str | None = None
    base_dir: Path | None = None

    def validate(self) -> None:
        if self.duration_s <= 0:
            raise ConfigError("duration_s must be > 0")
        if self.traffic_kind not in TRAFFIC_KINDS:
            raise ConfigError(f"unknown traffic kind {self.traffic_kind!r}")
        if self.src == self.dst:
            raise ConfigError("traffic src and dst must differ")
        if self.model not in (TRACE, FRIIS, LOGDIST):
            raise ConfigError(f"unknown propagation model {self.model!r}")
        if self.model == TRACE:
            if self.trace_file is None and self.snr_trace is None:
                raise ConfigError("trace model requires trace_file")
            if self.nakagami_m is not None:
                raise ConfigError("trace replay admits no fading overlay")
        elif self.trace_file is not None or self.snr_trace is not None:
            raise ConfigError(f"{self.model} model must not carry a trace")
        topo_sources = sum(
            x is not None for x in (self.nodes, self.mobility_file, self.mobility)
        )
        if topo_sources != 1:
            raise ConfigError(
                "exactly one of node positions or a mobility file is required"
            )
        if self.nodes is not None:
            for node in (self.src, self.dst):
                if node not in self.nodes:
                    raise ConfigError(f"traffic endpoint {node!r} not in [nodes]")
        if self.rate_control not in ("minstrel", "fixed"):
            raise ConfigError(f"unknown rate_control {self.rate_control!r}")
        phy.mode_for_rate(self.fixed_mode_mbps)
        if self.stop_us is not None and self.stop_us < self.start_us:
            raise ConfigError("traffic stop must not precede start")
        if self.processing_delay_us < 0:
            raise ConfigError("processing_delay_us must be >= 0")

    @property
    def effective_stop_us(self) -> int:
        return self.stop_us if self.stop_us is not None else self.duration_s * 1_000_000


_SECTION_KEYS = {
    "scenario": {"duration_s", "seed", "log_events", "out_dir"},
    "radio": {"tx_power_dbm", "rf_gain_db_per_end", "bandwidth_hz",
              "center_freq_hz", "noise_figure_db"},
    "propagation": {"model", "trace_file", "gamma", "ref_distance_m",
                    "nakagami_m"},
    "traffic": {"kind", "src", "dst", "payload_bytes", "offered_load_bps",
                "interval_us", "start_s", "stop_s", "processing_delay_us"},
    "mac": {"rate_control", "fixed_mode_mbps", "queue_capacity",
            "retry_limit", "ack_basic_rates"},
}

_MODEL_KEYS = {
    TRACE: {"model", "trace_file"},
    FRIIS: {"model", "nakagami_m"},
    LOGDIST: {"model", "gamma", "ref_distance_m", "nakagami_m"},
}


def _convert(section: str, key: str, raw: str, to: Callable):
    try:
        return to(raw)
    except ValueError:
        raise ConfigError(f"[{section}] {key}: cannot parse {raw!r}") from None


def _get_bool(section: str, key: str, raw: str) -> bool:
    value = raw.strip().lower()
    if value in ("true", "yes", "on", "1"):
        return True
    if value in ("false", "no", "off", "0"):
        return False
    raise ConfigError(f"[{section}] {key}: expected a boolean, got {raw!r}")


def parse_config_text(text: str, base_dir: Path | None = None) -> ScenarioConfig:
    parser = configparser.ConfigParser(interpolation=None,
                                       inline_comment_prefixes=(";", "#"))
    parser.optionxform = str   # node names are case sensitive
    try:
        parser.read_string(text)
    except configparser.Error as exc:
        raise ConfigError(f"malformed config: {exc}") from None

    for section in parser.sections():
        if section not in (*_SECTION_KEYS, "nodes"):
            raise ConfigError(f"unknown section [{section}]")
        if section != "nodes":
            allowed = _SECTION_KEYS[section]
            for key in parser[section]:
                if key not in allowed:
                    raise ConfigError(f"unknown key {key!r} in [{section}]")

    cfg = ScenarioConfig(config_text=text, base_dir=base_dir)

    def resolve(raw_path: str) -> Path:
        p = Path(raw_path)
        if not p.is_absolute() and base_dir is not None:
            p = base_dir / p
        return p

    if parser.has_section("scenario"):
        s = parser["scenario"]
        if "duration_s" in s:
            cfg.duration_s = _convert("scenario", "duration_s", s["duration_s"], int)
        if "seed" in s:
            cfg.seed = _convert("scenario", "seed", s["seed"], int)
        if "log_events" in s:
            cfg.log_events = _get_bool("scenario", "log_events", s["log_events"])
        if "out_dir" in s:
            cfg.out_dir = s["out_dir"].strip()

    if not parser.has_section("nodes"):
        raise ConfigError("missing [nodes] section")
    nodes_sec = parser["nodes"]
    if "mobility_file" in nodes_sec:
        if len(nodes_sec) > 1:
            raise ConfigError("[nodes] cannot mix mobility_file with positions")
        cfg.mobility_file = resolve(nodes_sec["mobility_file"])
    else:
        positions = {}
        for node, raw in nodes_sec.items():
            parts = [p.strip() for p in raw.split(",")]
            if len(parts) != 3:
                raise ConfigError(f"[nodes] {node}: expected 'x,y,z', got {raw!r}")
            positions[node] = tuple(
                _convert("nodes", node, p, float) for p in parts
            )
        if not positions:
            raise ConfigError("[nodes] must define positions or mobility_file")
        cfg.nodes = positions

    if parser.has_section("radio"):
        r = parser["radio"]
        kwargs = {
            key: _convert("radio", key, r[key], float) for key in r
        }
        try:
            cfg.radio = RadioParams(**kwargs)
        except ValueError as exc:
            raise ConfigError(f"[radio]: {exc}") from None

    if not parser.has_section("propagation"):
        raise ConfigError("missing [propagation] section")
    p = parser["propagation"]
    if "model" not in p:
        raise ConfigError("[propagation] must set model")
    cfg.model = p["model"].strip()
    if cfg.model not in _MODEL_KEYS:
        raise ConfigError(f"[propagation] unknown model {cfg.model!r}")
    for key in p:
        if key not in _MODEL_KEYS[cfg.model]:
            raise ConfigError(
                f"[propagation] key {key!r} not valid for model {cfg.model!r}"
            )
    if "trace_file" in p:
        cfg.trace_file = resolve(p["trace_file"])
    if "gamma" in p:
        cfg.gamma = _convert("propagation", "gamma", p["gamma"], float)
    elif cfg.model == LOGDIST:
        raise ConfigError("[propagation] logdist model requires gamma")
    if "ref_distance_m" in p:
        cfg.ref_distance_m = _convert("propagation", "ref_distance_m",
                                      p["ref_distance_m"], float)
    if "nakagami_m" in p:
        cfg.nakagami_m = _convert("propagation", "nakagami_m",
                                  p["nakagami_m"], float)

    if not parser.has_section("traffic"):
        raise ConfigError("missing [traffic] section")
    t = parser["traffic"]
    for key in ("kind", "src", "dst"):
        if key not in t:
            raise ConfigError(f"[traffic] must set {key}")
    cfg.traffic_kind = t["kind"].strip()
    cfg.src = t["src"].strip()
    cfg.dst = t["dst"].strip()
    if "payload_bytes" in t:
        cfg.payload_bytes = _convert("traffic", "payload_bytes",
                                     t["payload_bytes"], int)
    if "offered_load_bps" in t:
        cfg.offered_load_bps = _convert("traffic", "offered_load_bps",
                                        t["offered_load_bps"], float)
    if "interval_us" in t:
        cfg.interval_us = _convert("traffic", "interval_us", t["interval_us"], int)
    if "start_s" in t:
        cfg.start_us = int(
            _convert("traffic", "start_s", t["start_s"], float) * 1e6 + 0.5
        )
    if "stop_s" in t:
        cfg.stop_us = int(
            _convert("traffic", "stop_s", t["stop_s"], float) * 1e6 + 0.5
        )
    if "processing_delay_us" in t:
        cfg.processing_delay_us = _convert("traffic", "processing_delay_us",
                                           t["processing_delay_us"], int)

    if parser.has_section("mac"):
        m = parser["mac"]
        if "rate_control" in m:
            cfg.rate_control = m["rate_control"].strip()
        if "fixed_mode_mbps" in m:
            cfg.fixed_mode_mbps = _convert("mac", "fixed_mode_mbps",
                                           m["fixed_mode_mbps"], int)
        if "queue_capacity" in m:
            cfg.queue_capacity = _convert("mac", "queue_capacity",
                                          m["queue_capacity"], int)
        if "retry_limit" in m:
            cfg.retry_limit = _convert("mac", "retry_limit", m["retry_limit"], int)
        if "ack_basic_rates" in m:
            cfg.basic_rates_mbps = tuple(
                _convert("mac", "ack_basic_rates", part.strip(), int)
                for part in m["ack_basic_rates"].split(",")
            )

    cfg.validate()
    return cfg


def parse_config(path: str | Path) -> ScenarioConfig:
    path = Path(path)
    try:
        text = path.read_text(encoding="utf-8")
    except OSError as exc:
        raise ConfigError(f"cannot read config {path}: {exc}") from None
    return parse_config_text(text, base_dir=path.parent)


class CsvEventLog:
    """Streams the packet-level event log as CSV rows."""

    HEADER = "t_us,node,event,kind,link,mode_mbps,seq,attempt,dur_us,snr_db,outcome"

    def __init__(self, fh: io.TextIOBase):
        self._fh = fh
        self._write = fh.write
        self._write(self.HEADER + "\n")

    def tx(self, t, node, kind, link, mode_mbps, seq, attempt, dur_us):
        self._write(f"{t},{node},tx,{kind},{link},{mode_mbps},{seq},"
                    f"{attempt},{dur_us},,\n")

    def rx(self, t, node, kind, link, mode_mbps, seq, attempt, snr_db, outcome):
        snr = "" if snr_db is None else repr(snr_db)
        self._write(f"{t},{node},rx,{kind},{link},{mode_mbps},{seq},"
                    f"{attempt},,{snr},{outcome}\n")

    def drop(self, t, node, seq, attempts, reason):
        self._write(f"{t},{node},drop,data,,,{seq},{attempts},,,{reason}\n")


class TraceCsvRecorder:
    """Collects one SNR sample per PHY reception in the canonical trace format."""

    def __init__(self, fh: io.TextIOBase):
        self._write = fh.write
        self._write(SNR_HEADER + "\n")
        self.rows = 0

    def __call__(self, t_us: int, link: DirectedLink, snr_db: float) -> None:
        self._write(f"{t_us},{link.tx},{link.rx},{snr_db!r}\n")
        self.rows += 1


@dataclass
class SimRun:
    """Results of one simulation execution."""

    seed: int
    duration_s: int
    throughput: dict[str, metrics.PerSecondSeries]
    rtt: metrics.PerSecondSeries | None
    rtt_samples: list[tuple[int, int]]
    stats: dict[str, StationStats]

    def mean_throughput_mbps(self, flow: str) -> float:
        series = self.throughput[flow]
        if not series.values:
            return 0.0
        return sum(series.values.values()) / len(series.values) / 1000.0

    def min_rtt_us(self) -> int | None:
        if not self.rtt_samples:
            return None
        return min(rtt for _, rtt in self.rtt_samples)

    def attempts_per_frame(self, node: str) -> float:
        st = self.stats[node]
        if st.data_frames == 0:
            return 0.0
        return st.data_attempts / st.data_frames


def _build_mobility(cfg: ScenarioConfig) -> MobilityTrace:
    if cfg.mobility is not None:
        return cfg.mobility
    if cfg.mobility_file is not None:
        return load_mobility(cfg.mobility_file)
    return MobilityTrace.static(cfg.nodes)


def _build_channel(cfg: ScenarioConfig, mobility: MobilityTrace) -> Channel:
    if cfg.model == TRACE:
        trace = cfg.snr_trace if cfg.snr_trace is not None \
            else load_snr_trace(cfg.trace_file)
        spec = PropagationSpec(TRACE, trace=trace)
    else:
        spec = PropagationSpec(cfg.model, gamma=cfg.gamma,
                               ref_distance_m=cfg.ref_distance_m,
                               nakagami_m=cfg.nakagami_m)
    channel = Channel(spec, cfg.radio, mobility)
    channel.bind_seed(cfg.seed)
    return channel


def run_scenario(cfg: ScenarioConfig, event_log=None,
                 trace_sink=None) -> SimRun:
    """Build and execute one simulation instance, returning its metrics."""
    cfg.validate()
    mobility = _build_mobility(cfg)
    for node in (cfg.src, cfg.dst):
        if node not in mobility.nodes():
            raise ConfigError(f"traffic endpoint {node!r} has no mobility data")
    channel = _build_channel(cfg, mobility)
    dcf = DcfParams(queue_capacity=cfg.queue_capacity,
                    retry_limit=cfg.retry_limit,
                    basic_rates_mbps=cfg.basic_rates_mbps)
    engine = EventQueue()

    if cfg.rate_control == "minstrel":
        def rc_factory(node: str):
            return Minstrel(dcf, RngStream(cfg.seed, f"minstrel.{node}"))
    else:
        fixed_mode = phy.mode_for_rate(cfg.fixed_mode_mbps)

        def rc_factory(node: str):
            return FixedRate(fixed_mode)

    st_src, st_dst, _ = build_point_to_point(
        engine, channel, dcf, cfg.seed, cfg.src, cfg.dst,
        rate_control_factory=rc_factory,
        processing_delay_us=cfg.processing_delay_us,
        event_log=event_log, trace_sink=trace_sink,
    )

    stop_us = min(cfg.effective_stop_us, cfg.duration_s * 1_000_000)
    sinks: dict[str, UdpSink] = {}
    ping_app = None
    if cfg.traffic_kind == PING:
        ping_app = PingApp(engine, st_src, st_dst, PingConfig(
            src=cfg.src, dst=cfg.dst, interval_us=cfg.interval_us,
            payload_bytes=cfg.payload_bytes, start_us=cfg.start_us,
            stop_us=stop_us,
        ), flow=f"ping.{cfg.src}->{cfg.dst}")
    else:
        directions = [(st_src, st_dst)]
        if cfg.traffic_kind == UDP_BIDI:
            directions.append((st_dst, st_src))
        for sender, receiver in directions:
            flow = f"udp.{sender.node}->{receiver.node}"
            UdpSource(engine, sender, UdpFlowConfig(
                src=sender.node, dst=receiver.node,
                offered_load_bps=cfg.offered_load_bps,
                payload_bytes=cfg.payload_bytes,
                start_us=cfg.start_us, stop_us=stop_us,
            ), flow)
            sinks[flow] = UdpSink(receiver, flow)

    engine.run_until(cfg.duration_s * 1_000_000)

    throughput = {
        flow: metrics.throughput_series(sink.records(), cfg.duration_s, _label(flow))
        for flow, sink in sinks.items()
    }
    rtt_series = None
    rtt_samples: list[tuple[int, int]] = []
    if ping_app is not None:
        rtt_samples = ping_app.samples
        rtt_series = metrics.rtt_median_series(
            rtt_samples, cfg.duration_s, _label(f"ping.{cfg.src}->{cfg.dst}")
        )
    return SimRun(
        seed=cfg.seed, duration_s=cfg.duration_s, throughput=throughput,
        rtt=rtt_series, rtt_samples=rtt_samples,
        stats={st.node: st.stats for st in (st_src, st_dst)},
    )


def _label(flow: str) -> str:
    return flow.replace("->", ">")


def _file_label(flow: str) -> str:
    return flow.replace("udp.", "").replace("ping.", "").replace("->", "_to_")


def execute_run(cfg: ScenarioConfig, out_dir: str | Path,
                overrides: dict | None = None) -> tuple[SimRun, dict]:
    """Run a scenario and write its artifacts; returns (run, manifest)."""
    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    outputs: list[str] = []
    log_fh = None
    event_log = None
    if cfg.log_events:
        log_fh = open(out / "events.csv", "w", encoding="utf-8", newline="")
        event_log = CsvEventLog(log_fh)
        outputs.append("events.csv")
    try:
        run = run_scenario(cfg, event_log=event_log)
    finally:
        if log_fh is not None:
            log_fh.close()

    for flow, series in run.throughput.items():
        name = f"throughput_{_file_label(flow)}.csv"
        series.save(out / name)
        outputs.append(name)
    if run.rtt is not None:
        name = f"rtt_{_file_label(f'{cfg.src}->{cfg.dst}')}.csv"
        run.rtt.save(out / name)
        outputs.append(name)

    summary = {
        "seed": cfg.seed,
        "duration_s": cfg.duration_s,
        "mean_throughput_mbps": {
            flow: run.mean_throughput_mbps(flow) for flow in run.throughput
        },
        "min_rtt_us": run.min_rtt_us(),
        "rtt_samples": len(run.rtt_samples),
        "stations": {
            node: vars(st) for node, st in run.stats.items()
        },
    }
    (out / "summary.json").write_text(json.dumps(summary, indent=2) + "\n",
                                      encoding="utf-8")
    outputs.append("summary.json")

    manifest = {
        "version": __version__,
        "seed": cfg.seed,
        "duration_s": cfg.duration_s,
        "overrides": overrides or {},
        "base_dir": str(cfg.base_dir) if cfg.base_dir else None,
        "config_sha256": hashlib.sha256(
            (cfg.config_text or "").encode("utf-8")
        ).hexdigest(),
        "config_text": cfg.config_text,
        "inputs": _input_hashes(cfg),
        "outputs": outputs,
    }
    (out / "manifest.json").write_text(json.dumps(manifest, indent=2) + "\n",
                                       encoding="utf-8")
    return run, manifest


def _input_hashes(cfg: ScenarioConfig) -> dict[str, str]:
    hashes = {}
    for path in (cfg.trace_file, cfg.mobility_file):
        if path is not None:
            hashes[str(path)] = hashlib.sha256(Path(path).read_bytes()).hexdigest()
    return hashes


def execute_record(cfg: ScenarioConfig, out_file: str | Path) -> SimRun:
    """Run an analytic scenario while recording per-reception SNR samples."""
    cfg.validate()
    if cfg.model == TRACE:
        raise ConfigError("cannot record a trace from a trace-replay run")
    out_path = Path(out_file)
    out_path.parent.mkdir(parents=True, exist_ok=True)
    with open(out_path, "w", encoding="utf-8", newline="") as fh:
        recorder = TraceCsvRecorder(fh)
        run = run_scenario(cfg, trace_sink=recorder)
    return run


def rerun_from_manifest(manifest_path: str | Path,
                        out_dir: str | Path) -> tuple[SimRun, dict]:
    """Reproduce a run from its manifest's embedded config."""
    doc = json.loads(Path(manifest_path).read_text(encoding="utf-8"))
    if not doc.get("config_text"):
        raise ConfigError("manifest carries no embedded config text")
    base = Path(doc["base_dir"]) if doc.get("base_dir") else None
    cfg = parse_config_text(doc["config_text"], base_dir=base)
    for key, value in doc.get("overrides", {}).items():
        cfg = replace(cfg, **{key: value})
    cfg.validate()
    return execute_run(cfg, out_dir, overrides=doc.get("overrides", {}))
