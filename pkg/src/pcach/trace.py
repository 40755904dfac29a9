"""Connectivity trace data model, (de)serialization, timeline normalization
and WiFi gap detection.

A trace is a time-ordered sequence of periodic measurement samples taken on
one phone. Each sample records the active network (WiFi / cellular / none),
the connected SSID when on WiFi, the set of visible WiFi networks and the
per-application traffic counters accumulated since the previous sample.

Two derived notions drive everything downstream:

* the *normalized timeline*: cellular samples taken while a WiFi network the
  user has connected to before was visible are relabeled as WiFi, exposing
  every offloading opportunity;
* *WiFi gaps*: intervals between a cut event (WiFi -> cellular between two
  samples at most 10 minutes apart) and the next resume event
  (cellular -> WiFi between consecutive samples).
"""

from __future__ import annotations

import csv
import io
import json
from bisect import bisect_left
from dataclasses import dataclass, replace
from enum import Enum
from typing import Iterable, Optional, Sequence

from .errors import (
    EmptyTraceError,
    TraceParseError,
    TraceValidationError,
)

CUT_MAX_SPACING_S = 600          # WiFi->cellular counts as a cut only when
                                 # samples are no more than 10 minutes apart
GAP_EXCLUDE_THRESHOLD_S = 86400  # gaps of a day or more are flagged, kept out
                                 # of duration statistics

DEFAULT_PERIOD_S = 300
DEFAULT_NIGHT_WINDOW = (20, 8)   # [20:00, 08:00) local time

SECONDS_PER_DAY = 86400
# 1970-01-01 was a Thursday; offset so that Monday maps to 0.
_EPOCH_WEEKDAY = 3


class ActiveNetwork(Enum):
    WIFI = "WIFI"
    CELLULAR = "CELL"
    NONE = "NONE"


@dataclass(frozen=True)
class AppTrafficRecord:
    """Traffic counters of one application within one sampling period."""

    app_id: str
    up_bytes: int
    down_bytes: int
    running: bool

    def __post_init__(self):
        if not self.app_id:
            raise TraceValidationError("app_id must be non-empty")
        if self.up_bytes < 0 or self.down_bytes < 0:
            raise TraceValidationError(
                f"negative byte count for app {self.app_id!r}: "
                f"up={self.up_bytes} down={self.down_bytes}"
            )

    @property
    def total_bytes(self) -> int:
        return self.up_bytes + self.down_bytes


@dataclass(frozen=True)
class MeasurementSample:
    """One periodic sensing record."""

    timestamp: int
    active_network: ActiveNetwork
    connected_ssid: Optional[str]
    visible_ssids: frozenset[str]
    apps: tuple[AppTrafficRecord, ...]

    def __post_init__(self):
        object.__setattr__(self, "visible_ssids", frozenset(self.visible_ssids))
        object.__setattr__(self, "apps", tuple(self.apps))
        if self.active_network is ActiveNetwork.WIFI:
            if not self.connected_ssid:
                raise TraceValidationError(
                    f"t={self.timestamp}: WIFI sample without connected_ssid"
                )
        elif self.connected_ssid is not None:
            raise TraceValidationError(
                f"t={self.timestamp}: connected_ssid set on a "
                f"{self.active_network.name} sample"
            )
        if self.connected_ssid is not None and self.connected_ssid not in self.visible_ssids:
            raise TraceValidationError(
                f"t={self.timestamp}: connected ssid {self.connected_ssid!r} "
                "missing from visible set"
            )
        seen = set()
        for rec in self.apps:
            if rec.app_id in seen:
                raise TraceValidationError(
                    f"t={self.timestamp}: duplicate app record {rec.app_id!r}"
                )
            seen.add(rec.app_id)

    @property
    def total_bytes(self) -> int:
        return sum(rec.total_bytes for rec in self.apps)


@dataclass(frozen=True)
class Trace:
    """Time-ordered samples of one phone."""

    phone_id: str
    samples: tuple[MeasurementSample, ...]
    nominal_period_s: int = DEFAULT_PERIOD_S

    def __post_init__(self):
        object.__setattr__(self, "samples", tuple(self.samples))
        if self.nominal_period_s <= 0:
            raise TraceValidationError("nominal_period_s must be positive")
        prev = None
        for s in self.samples:
            if prev is not None and s.timestamp <= prev:
                raise TraceValidationError(
                    f"timestamps not strictly increasing at t={s.timestamp}"
                )
            prev = s.timestamp

    def __len__(self) -> int:
        return len(self.samples)

    @property
    def start_time(self) -> int:
        if not self.samples:
            raise EmptyTraceError(f"trace {self.phone_id!r} has no samples")
        return self.samples[0].timestamp

    @property
    def end_time(self) -> int:
        if not self.samples:
            raise EmptyTraceError(f"trace {self.phone_id!r} has no samples")
        return self.samples[-1].timestamp

    def timestamps(self) -> list[int]:
        return [s.timestamp for s in self.samples]


@dataclass(frozen=True)
class PreferredNetworkProfile:
    """Networks the phone has connected to, plus home/work identification."""

    preferred: frozenset[str]
    top3: tuple[str, ...]
    home_ssid: Optional[str]
    work_ssid: Optional[str]

    def __post_init__(self):
        object.__setattr__(self, "preferred", frozenset(self.preferred))
        object.__setattr__(self, "top3", tuple(self.top3))
        if len(self.top3) > 3:
            raise TraceValidationError("top3 holds at most 3 SSIDs")
        if not set(self.top3) <= self.preferred:
            raise TraceValidationError("top3 must be a subset of preferred")
        for ssid in (self.home_ssid, self.work_ssid):
            if ssid is not None and ssid not in self.preferred:
                raise TraceValidationError(
                    f"{ssid!r} is not a preferred network"
                )

    def to_dict(self) -> dict:
        return {
            "preferred": sorted(self.preferred),
            "top3": list(self.top3),
            "home_ssid": self.home_ssid,
            "work_ssid": self.work_ssid,
        }

    @classmethod
    def from_dict(cls, d: dict) -> "PreferredNetworkProfile":
        return cls(
            preferred=frozenset(d["preferred"]),
            top3=tuple(d["top3"]),
            home_ssid=d.get("home_ssid"),
            work_ssid=d.get("work_ssid"),
        )


@dataclass(frozen=True)
class WiFiGap:
    """A cut event paired with the next resume event, if any."""

    cut_time: int
    resume_time: Optional[int] = None

    def __post_init__(self):
        if self.resume_time is not None and self.resume_time <= self.cut_time:
            raise TraceValidationError(
                f"resume_time {self.resume_time} not after cut_time {self.cut_time}"
            )

    @property
    def duration_s(self) -> Optional[int]:
        if self.resume_time is None:
            return None
        return self.resume_time - self.cut_time

    @property
    def open(self) -> bool:
        """True when no resume was observed before the trace ended."""
        return self.resume_time is None

    @property
    def excluded(self) -> bool:
        """True for gaps of one day or more, kept out of duration statistics."""
        return self.duration_s is not None and self.duration_s >= GAP_EXCLUDE_THRESHOLD_S


def local_seconds(timestamp: int, utc_offset_s: int = 0) -> int:
    """Seconds since local midnight for a UTC epoch timestamp."""
    return (timestamp + utc_offset_s) % SECONDS_PER_DAY


def local_hour(timestamp: int, utc_offset_s: int = 0) -> float:
    return local_seconds(timestamp, utc_offset_s) / 3600.0


def local_day_index(timestamp: int, utc_offset_s: int = 0) -> int:
    return (timestamp + utc_offset_s) // SECONDS_PER_DAY


def is_weekday(timestamp: int, utc_offset_s: int = 0) -> bool:
    """Monday..Friday in local time."""
    return (local_day_index(timestamp, utc_offset_s) + _EPOCH_WEEKDAY) % 7 < 5


def in_hour_window(timestamp: int, window: tuple[int, int], utc_offset_s: int = 0) -> bool:
    """True when the local hour falls inside [start, end), wrapping past midnight."""
    start, end = window
    hour = local_hour(timestamp, utc_offset_s)
    if start <= end:
        return start <= hour < end
    return hour >= start or hour < end


# ---------------------------------------------------------------------------
# Serialization: JSONL and flat CSV wire formats.
# ---------------------------------------------------------------------------

_CSV_FIELDS = ("phone_id", "t", "active", "ssid", "visible", "app_id", "up", "down", "running")


def _sample_to_obj(sample: MeasurementSample) -> dict:
    return {
        "t": sample.timestamp,
        "active": sample.active_network.value,
        "ssid": sample.connected_ssid,
        "visible": sorted(sample.visible_ssids),
        "apps": [
            {"id": a.app_id, "up": a.up_bytes, "down": a.down_bytes, "running": a.running}
            for a in sample.apps
        ],
    }


def trace_to_jsonl(trace: Trace) -> bytes:
    lines = [
        json.dumps(_sample_to_obj(s), separators=(",", ":"), ensure_ascii=False)
        for s in trace.samples
    ]
    return ("\n".join(lines) + "\n").encode("utf-8")


def trace_to_csv(trace: Trace) -> bytes:
    out = io.StringIO()
    writer = csv.writer(out, lineterminator="\n")
    writer.writerow(_CSV_FIELDS)
    for s in trace.samples:
        base = [
            trace.phone_id,
            s.timestamp,
            s.active_network.value,
            s.connected_ssid or "",
            ";".join(sorted(s.visible_ssids)),
        ]
        if s.apps:
            for a in s.apps:
                writer.writerow(base + [a.app_id, a.up_bytes, a.down_bytes,
                                        "true" if a.running else "false"])
        else:
            writer.writerow(base + ["", "", "", ""])
    return out.getvalue().encode("utf-8")


def _parse_active(raw: str, line_no: int) -> ActiveNetwork:
    try:
        return ActiveNetwork(raw)
    except ValueError:
        raise TraceParseError(f"unknown active network {raw!r}", line_no) from None


def _build_sample(t, active, ssid, visible, apps, line_no) -> MeasurementSample:
    try:
        return MeasurementSample(
            timestamp=t,
            active_network=active,
            connected_ssid=ssid,
            visible_ssids=frozenset(visible),
            apps=tuple(apps),
        )
    except TraceValidationError as exc:
        raise TraceParseError(str(exc), line_no) from None


def _parse_jsonl(data: bytes) -> list[tuple[int, MeasurementSample]]:
    samples = []
    for line_no, raw in enumerate(data.splitlines(), start=1):
        line = raw.strip()
        if not line:
            continue
        try:
            obj = json.loads(line)
        except json.JSONDecodeError as exc:
            raise TraceParseError(f"invalid JSON ({exc.msg})", line_no) from None
        try:
            t = int(obj["t"])
            active = _parse_active(str(obj["active"]), line_no)
            ssid = obj.get("ssid")
            visible = [str(v) for v in obj.get("visible", [])]
            apps = [
                AppTrafficRecord(
                    app_id=str(a["id"]),
                    up_bytes=int(a["up"]),
                    down_bytes=int(a["down"]),
                    running=bool(a["running"]),
                )
                for a in obj.get("apps", [])
            ]
        except TraceParseError:
            raise
        except (KeyError, TypeError, ValueError, TraceValidationError) as exc:
            raise TraceParseError(str(exc), line_no) from None
        samples.append((line_no, _build_sample(t, active, ssid, visible, apps, line_no)))
    return samples


def _parse_bool(raw: str, line_no: int) -> bool:
    low = raw.strip().lower()
    if low in ("true", "1"):
        return True
    if low in ("false", "0"):
        return False
    raise TraceParseError(f"invalid boolean {raw!r}", line_no)


def _parse_csv(data: bytes) -> tuple[Optional[str], list[tuple[int, MeasurementSample]]]:
    text = data.decode("utf-8")
    reader = csv.reader(io.StringIO(text))
    rows = []
    for line_no, row in enumerate(reader, start=1):
        if not row or all(not c.strip() for c in row):
            continue
        if line_no == 1 and [c.strip() for c in row[:2]] == ["phone_id", "t"]:
            continue  # header
        if len(row) != len(_CSV_FIELDS):
            raise TraceParseError(
                f"expected {len(_CSV_FIELDS)} columns, got {len(row)}", line_no
            )
        rows.append((line_no, row))

    phone_id: Optional[str] = None
    # group consecutive rows of the same sample by (t, active, ssid, visible)
    by_key: dict[int, dict] = {}
    order: list[int] = []
    for line_no, row in rows:
        pid, t_raw, active_raw, ssid_raw, visible_raw, app_id, up, down, running = row
        if phone_id is None:
            phone_id = pid
        elif pid != phone_id:
            raise TraceParseError(
                f"phone_id {pid!r} differs from {phone_id!r}", line_no
            )
        try:
            t = int(t_raw)
        except ValueError:
            raise TraceParseError(f"invalid timestamp {t_raw!r}", line_no) from None
        active = _parse_active(active_raw, line_no)
        ssid = ssid_raw if ssid_raw else None
        visible = [v for v in visible_raw.split(";") if v]
        if t not in by_key:
            by_key[t] = {
                "line_no": line_no, "active": active, "ssid": ssid,
                "visible": visible, "apps": [],
            }
            order.append(t)
        entry = by_key[t]
        if app_id:
            try:
                entry["apps"].append(AppTrafficRecord(
                    app_id=app_id,
                    up_bytes=int(up),
                    down_bytes=int(down),
                    running=_parse_bool(running, line_no),
                ))
            except (ValueError, TraceValidationError) as exc:
                raise TraceParseError(str(exc), line_no) from None

    samples = []
    for t in order:
        e = by_key[t]
        samples.append((e["line_no"],
                        _build_sample(t, e["active"], e["ssid"], e["visible"],
                                      e["apps"], e["line_no"])))
    return phone_id, samples


def ingest_trace(source, fmt: str = "jsonl", phone_id: str = "",
                 nominal_period_s: int = DEFAULT_PERIOD_S) -> Trace:
    """Parse a byte stream in one of the two wire formats into a Trace.

    Samples are sorted by timestamp; duplicate timestamps collapse to the
    last record seen in input order. ``phone_id`` is taken from the CSV rows
    when present, otherwise from the argument.
    """
    if hasattr(source, "read"):
        data = source.read()
    else:
        data = source
    if isinstance(data, str):
        data = data.encode("utf-8")
    if not isinstance(data, (bytes, bytearray)):
        raise TraceParseError(f"unsupported source type {type(source).__name__}")

    fmt = fmt.lower()
    if fmt == "jsonl":
        csv_phone, numbered = None, _parse_jsonl(bytes(data))
    elif fmt == "csv":
        csv_phone, numbered = _parse_csv(bytes(data))
    else:
        raise TraceParseError(f"unknown trace format {fmt!r}")

    if not numbered:
        raise EmptyTraceError("source contains no samples")

    # stable sort, then collapse duplicate timestamps keeping the last record
    numbered.sort(key=lambda pair: pair[1].timestamp)
    collapsed: list[MeasurementSample] = []
    for _, sample in numbered:
        if collapsed and collapsed[-1].timestamp == sample.timestamp:
            collapsed[-1] = sample
        else:
            collapsed.append(sample)

    return Trace(
        phone_id=csv_phone if csv_phone else phone_id,
        samples=tuple(collapsed),
        nominal_period_s=nominal_period_s,
    )


def read_trace(path, fmt: Optional[str] = None,
               nominal_period_s: int = DEFAULT_PERIOD_S) -> Trace:
    """Load a trace file; the format defaults from the file suffix."""
    from pathlib import Path

    p = Path(path)
    if fmt is None:
        fmt = "csv" if p.suffix.lower() == ".csv" else "jsonl"
    with open(p, "rb") as fh:
        return ingest_trace(fh, fmt=fmt, phone_id=p.stem,
                            nominal_period_s=nominal_period_s)


def write_trace(trace: Trace, path, fmt: Optional[str] = None) -> None:
    from pathlib import Path

    p = Path(path)
    if fmt is None:
        fmt = "csv" if p.suffix.lower() == ".csv" else "jsonl"
    payload = trace_to_csv(trace) if fmt == "csv" else trace_to_jsonl(trace)
    p.write_bytes(payload)


# ---------------------------------------------------------------------------
# Preferred-network profile and timeline normalization.
# ---------------------------------------------------------------------------

def derive_preferred_profile(
    trace: Trace,
    night_window: tuple[int, int] = DEFAULT_NIGHT_WINDOW,
    utc_offset_s: int = 0,
) -> PreferredNetworkProfile:
    """Build the preferred-network profile from connection history.

    preferred: every SSID the phone connected to in the trace;
    top3: the three preferred SSIDs seen most often in WiFi scans;
    home/work: the preferred SSID seen most often during the night window
    and its daytime complement. Ties break toward the lexicographically
    smaller SSID.
    """
    if not trace.samples:
        raise EmptyTraceError("cannot derive a profile from an empty trace")

    preferred = {s.connected_ssid for s in trace.samples if s.connected_ssid is not None}
    if not preferred:
        return PreferredNetworkProfile(frozenset(), (), None, None)

    total = {ssid: 0 for ssid in preferred}
    night = {ssid: 0 for ssid in preferred}
    day = {ssid: 0 for ssid in preferred}
    for s in trace.samples:
        at_night = in_hour_window(s.timestamp, night_window, utc_offset_s)
        for ssid in s.visible_ssids:
            if ssid in total:
                total[ssid] += 1
                if at_night:
                    night[ssid] += 1
                else:
                    day[ssid] += 1

    def best(counts: dict[str, int]) -> str:
        return min(counts, key=lambda ssid: (-counts[ssid], ssid))

    ranked = sorted(preferred, key=lambda ssid: (-total[ssid], ssid))
    return PreferredNetworkProfile(
        preferred=frozenset(preferred),
        top3=tuple(ranked[:3]),
        home_ssid=best(night),
        work_ssid=best(day),
    )


def normalize_timeline(trace: Trace, profile: PreferredNetworkProfile) -> Trace:
    """Relabel cellular samples that see a preferred WiFi network as WiFi.

    The connected SSID becomes the lexicographically first preferred network
    in the visible set. All other samples pass through unchanged; the result
    is the modified timeline every downstream analysis runs on.
    """
    if not profile.preferred:
        return trace
    changed = False
    new_samples = []
    for s in trace.samples:
        if s.active_network is ActiveNetwork.CELLULAR:
            hits = s.visible_ssids & profile.preferred
            if hits:
                new_samples.append(replace(
                    s, active_network=ActiveNetwork.WIFI, connected_ssid=min(hits)
                ))
                changed = True
                continue
        new_samples.append(s)
    if not changed:
        return trace
    return Trace(trace.phone_id, tuple(new_samples), trace.nominal_period_s)


# ---------------------------------------------------------------------------
# Gap detection.
# ---------------------------------------------------------------------------

def is_cut_transition(prev: MeasurementSample, cur: MeasurementSample) -> bool:
    """WiFi -> cellular between samples no more than 10 minutes apart."""
    return (
        prev.active_network is ActiveNetwork.WIFI
        and cur.active_network is ActiveNetwork.CELLULAR
        and cur.timestamp - prev.timestamp <= CUT_MAX_SPACING_S
    )


def is_resume_transition(prev: MeasurementSample, cur: MeasurementSample) -> bool:
    """Cellular -> WiFi between consecutive samples."""
    return (
        prev.active_network is ActiveNetwork.CELLULAR
        and cur.active_network is ActiveNetwork.WIFI
    )


def detect_gaps(trace: Trace) -> list[WiFiGap]:
    """Pair cut events with the first subsequent resume event.

    Off-network samples (state NONE) neither produce events nor let a pending
    cut pair up: a pending gap that meets a NONE sample stays open. A cut that
    never meets a resume before the trace ends is reported as an open gap.
    """
    gaps: list[WiFiGap] = []
    pending_cut: Optional[int] = None
    for prev, cur in zip(trace.samples, trace.samples[1:]):
        if cur.active_network is ActiveNetwork.NONE:
            if pending_cut is not None:
                gaps.append(WiFiGap(cut_time=pending_cut))
                pending_cut = None
            continue
        if is_cut_transition(prev, cur):
            pending_cut = cur.timestamp
        elif pending_cut is not None and is_resume_transition(prev, cur):
            gaps.append(WiFiGap(cut_time=pending_cut, resume_time=cur.timestamp))
            pending_cut = None
    if pending_cut is not None:
        gaps.append(WiFiGap(cut_time=pending_cut))
    return gaps


def closed_gaps(gaps: Iterable[WiFiGap]) -> list[WiFiGap]:
    """Gaps admitted to duration statistics: resumed and shorter than a day."""
    return [g for g in gaps if not g.open and not g.excluded]


def samples_in_window(trace: Trace, start: int, end: int) -> Sequence[MeasurementSample]:
    """Samples with start <= timestamp < end (binary search on timestamps)."""
    ts = trace.timestamps()
    lo = bisect_left(ts, start)
    hi = bisect_left(ts, end)
    return trace.samples[lo:hi]
