"""Packet-level simulator for an IEEE 802.11a point-to-point wireless link.

The simulator can replay recorded per-frame SNR traces and waypoint mobility
traces, or run analytic propagation models (Friis / log-distance, optional
Nakagami fast fading), on top of a deterministic discrete-event engine with
labeled random streams. A metrics pipeline compares runs against reference
experiments via per-second relative/absolute error CDFs and accuracy gains.
"""

__version__ = "0.1.0"
