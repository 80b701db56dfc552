"""File formats: curve/histogram CSV, JSON summaries, binary streams.

All text outputs are deterministic byte-for-byte given identical data:
CSV floats use fixed 12-significant-digit scientific notation (or
shortest round-trip form for raw timestamps), and JSON is emitted with
sorted keys and fixed indentation. Event streams use a compact binary
record: a 16-byte little-endian header (magic "GCEV", u16 version,
u16 detector_id, u64 count) followed by count float64 timestamps.
"""

from __future__ import annotations

import json
import struct
from pathlib import Path

import numpy as np

from .detection import CoincidenceHistogram, EventStream

_MAGIC = b"GCEV"
_VERSION = 1
_HEADER = struct.Struct("<4sHHQ")


def write_curve_csv(path, taus, values) -> None:
    """Write a correlation curve as rows of "tau_s,g2"."""
    taus = np.asarray(taus, dtype=float)
    values = np.asarray(values, dtype=float)
    lines = ["tau_s,g2"]
    lines.extend(f"{t:.11e},{v:.11e}" for t, v in zip(taus, values))
    Path(path).write_text("\n".join(lines) + "\n")


def read_curve_csv(path) -> tuple[np.ndarray, np.ndarray]:
    data = np.loadtxt(path, delimiter=",", skiprows=1, ndmin=2)
    return data[:, 0], data[:, 1]


def write_columns_csv(path, header: list[str], columns: list[np.ndarray]) -> None:
    """Write aligned numeric columns under the given header names."""
    if len(header) != len(columns):
        raise ValueError("one header name per column required")
    rows = zip(*[np.asarray(c, dtype=float) for c in columns])
    lines = [",".join(header)]
    lines.extend(",".join(f"{x:.11e}" for x in row) for row in rows)
    Path(path).write_text("\n".join(lines) + "\n")


def write_histogram(path_csv, path_meta, hist: CoincidenceHistogram) -> None:
    """Write histogram counts as CSV plus a JSON metadata sidecar."""
    lines = ["tau_bin_center_s,count"]
    lines.extend(
        f"{t:.11e},{c}" for t, c in zip(hist.bin_centers, hist.counts)
    )
    Path(path_csv).write_text("\n".join(lines) + "\n")
    meta = {
        "bin_width_s": hist.bin_width,
        "tau_min_s": hist.tau_min,
        "tau_max_s": hist.tau_max,
        "total_pairs": int(hist.total_pairs),
        "metadata": hist.metadata,
    }
    write_json(path_meta, meta)


def read_histogram(path_csv, path_meta) -> CoincidenceHistogram:
    """Rebuild a histogram from its CSV and metadata sidecar.

    Counts are authoritative from the CSV; binning comes from the
    sidecar because bin centers in the CSV are rounded to 12 digits.
    """
    data = np.loadtxt(path_csv, delimiter=",", skiprows=1, ndmin=2)
    counts = data[:, 1]
    if np.any(counts != np.round(counts)):
        raise ValueError("histogram counts must be integers")
    meta = json.loads(Path(path_meta).read_text())
    return CoincidenceHistogram(
        bin_width=float(meta["bin_width_s"]),
        tau_min=float(meta["tau_min_s"]),
        tau_max=float(meta["tau_max_s"]),
        counts=counts.astype(np.int64),
        total_pairs=int(meta["total_pairs"]),
        metadata=dict(meta.get("metadata", {})),
    )


def write_event_stream(path, stream: EventStream) -> None:
    """Write a stream as the binary GCEV record."""
    header = _HEADER.pack(_MAGIC, _VERSION, stream.detector_id, len(stream))
    body = stream.timestamps.astype("<f8").tobytes()
    Path(path).write_bytes(header + body)


def read_event_stream(path, duration: float | None = None, rate: float = 0.0) -> EventStream:
    """Read a binary GCEV record back into an EventStream.

    The binary record does not carry duration or rate (they live in the
    run manifest); pass them in, or the duration defaults to just past
    the final timestamp.
    """
    blob = Path(path).read_bytes()
    if len(blob) < _HEADER.size:
        raise ValueError(f"{path}: truncated stream header")
    magic, version, detector_id, count = _HEADER.unpack_from(blob)
    if magic != _MAGIC:
        raise ValueError(f"{path}: not an event-stream file")
    if version != _VERSION:
        raise ValueError(f"{path}: unsupported stream version {version}")
    expected = _HEADER.size + 8 * count
    if len(blob) != expected:
        raise ValueError(f"{path}: expected {expected} bytes, found {len(blob)}")
    times = np.frombuffer(blob, dtype="<f8", offset=_HEADER.size)
    if duration is None:
        duration = float(np.nextafter(times[-1], np.inf)) if times.size else 0.0
    return EventStream(detector_id, times.copy(), duration, rate, None)


def write_stream_csv(path, stream: EventStream) -> None:
    """Write timestamps as CSV with shortest round-trip precision."""
    lines = ["timestamp_s"]
    lines.extend(repr(float(t)) for t in stream.timestamps)
    Path(path).write_text("\n".join(lines) + "\n")


def write_json(path, payload: dict) -> None:
    """Write JSON with sorted keys so equal payloads give equal bytes."""
    Path(path).write_text(json.dumps(payload, indent=2, sort_keys=True) + "\n")


def read_json(path) -> dict:
    return json.loads(Path(path).read_text())
