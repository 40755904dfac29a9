"""On-device usage history and the statistics-driven predictors.

A :class:`HistoryDB` is the rolling per-phone store every prediction reads
from: per-app slot-of-day usage histograms, cut/resume event histograms,
per-slot observation counts, the preferred-network profile and a short window
of recent raw samples for feature extraction. Updates are strictly
chronological and single-owner; trained models and profiles are immutable.

Slot indices passed between the prediction functions are *absolute* slot
numbers (local time divided by the slot length), so ranges spanning midnight
stay linear; histogram lookups reduce them modulo the slots-per-day count.
"""

from __future__ import annotations

import json
from collections import deque
from dataclasses import dataclass
from enum import Enum
from typing import Iterable, Optional, Sequence

import numpy as np

from .errors import (
    ConfigError,
    FeatureError,
    OrderingError,
    ParameterError,
)
from .mining import slots_per_day
from .trace import (
    MeasurementSample,
    PreferredNetworkProfile,
    in_hour_window,
    is_cut_transition,
    is_resume_transition,
    is_weekday,
)

DEFAULT_SLOT_MINUTES = 15
DEFAULT_RECENT_WINDOW = 16
NIGHT_WINDOW = (20, 8)
DAY_WINDOW = (8, 20)


class EventKind(Enum):
    CUT = "cut"
    RESUME = "resume"


def app_ran(record) -> bool:
    """An app counts as used when it appeared running or moved bytes."""
    return record.running or record.total_bytes > 0


class HistoryDB:
    """Rolling slot-indexed usage and event histograms for one phone.

    ``app_hist`` counts, per tracked app and slot of day, the number of
    distinct (day, slot) pairs in which the app ran; ``cut_hist`` and
    ``resume_hist`` count (day, slot) pairs containing at least one event, so
    they never exceed ``slot_observations``.
    """

    def __init__(
        self,
        slot_minutes: int = DEFAULT_SLOT_MINUTES,
        tracked_apps: Sequence[str] = (),
        profile: Optional[PreferredNetworkProfile] = None,
        utc_offset_s: int = 0,
        recent_window: int = DEFAULT_RECENT_WINDOW,
    ):
        self.slot_minutes = slot_minutes
        self.n_slots = slots_per_day(slot_minutes)
        self.tracked_apps = tuple(tracked_apps)
        self.profile = profile
        self.utc_offset_s = utc_offset_s
        self.app_hist: dict[str, np.ndarray] = {
            a: np.zeros(self.n_slots, dtype=np.int64) for a in self.tracked_apps
        }
        self.cut_hist = np.zeros(self.n_slots, dtype=np.int64)
        self.resume_hist = np.zeros(self.n_slots, dtype=np.int64)
        self.slot_observations = np.zeros(self.n_slots, dtype=np.int64)
        self.recent_samples: deque[MeasurementSample] = deque(maxlen=recent_window)
        self._last_timestamp: Optional[int] = None
        self._prev_sample: Optional[MeasurementSample] = None
        # dedup state for the (day, slot) currently being filled
        self._open_key: Optional[tuple[int, int]] = None
        self._open_apps: set[str] = set()
        self._open_cut = False
        self._open_resume = False

    # -- slot arithmetic ---------------------------------------------------

    def abs_slot(self, timestamp: int) -> int:
        return (timestamp + self.utc_offset_s) // (self.slot_minutes * 60)

    def slot_of_day(self, timestamp: int) -> int:
        return self.abs_slot(timestamp) % self.n_slots

    def event_probability(self, slot: int, kind: EventKind) -> float:
        """Empirical per-slot event probability; 0 for unobserved slots."""
        s = slot % self.n_slots
        obs = int(self.slot_observations[s])
        if obs == 0:
            return 0.0
        hist = self.cut_hist if kind is EventKind.CUT else self.resume_hist
        return float(hist[s]) / obs

    @property
    def last_timestamp(self) -> Optional[int]:
        return self._last_timestamp

    # -- serialization -----------------------------------------------------

    def to_json(self) -> str:
        from .trace import _sample_to_obj

        return json.dumps({
            "slot_minutes": self.slot_minutes,
            "tracked_apps": list(self.tracked_apps),
            "utc_offset_s": self.utc_offset_s,
            "app_hist": {a: h.tolist() for a, h in self.app_hist.items()},
            "cut_hist": self.cut_hist.tolist(),
            "resume_hist": self.resume_hist.tolist(),
            "slot_observations": self.slot_observations.tolist(),
            "profile": self.profile.to_dict() if self.profile else None,
            "recent_samples": [_sample_to_obj(s) for s in self.recent_samples],
            "last_timestamp": self._last_timestamp,
            "open_key": list(self._open_key) if self._open_key else None,
            "open_apps": sorted(self._open_apps),
            "open_cut": self._open_cut,
            "open_resume": self._open_resume,
        }, sort_keys=True)

    @classmethod
    def from_json(cls, text: str) -> "HistoryDB":
        from .trace import ingest_trace

        d = json.loads(text)
        db = cls(
            slot_minutes=d["slot_minutes"],
            tracked_apps=d["tracked_apps"],
            profile=PreferredNetworkProfile.from_dict(d["profile"]) if d["profile"] else None,
            utc_offset_s=d["utc_offset_s"],
        )
        for a, h in d["app_hist"].items():
            db.app_hist[a] = np.asarray(h, dtype=np.int64)
        db.cut_hist = np.asarray(d["cut_hist"], dtype=np.int64)
        db.resume_hist = np.asarray(d["resume_hist"], dtype=np.int64)
        db.slot_observations = np.asarray(d["slot_observations"], dtype=np.int64)
        if d["recent_samples"]:
            payload = "\n".join(json.dumps(o) for o in d["recent_samples"])
            trace = ingest_trace(payload.encode(), fmt="jsonl", phone_id="snapshot")
            db.recent_samples.extend(trace.samples)
            db._prev_sample = trace.samples[-1]
        db._last_timestamp = d["last_timestamp"]
        db._open_key = tuple(d["open_key"]) if d["open_key"] else None
        db._open_apps = set(d["open_apps"])
        db._open_cut = d["open_cut"]
        db._open_resume = d["open_resume"]
        return db


def update_history(db: HistoryDB, new_samples: Iterable[MeasurementSample]) -> HistoryDB:
    """Fold new samples into the histograms (in place; returns db).

    Tracked apps that ran in a (day, slot) increment that slot's usage count
    once; cut/resume transitions increment the event histograms at the
    event sample's slot of day, at most once per (day, slot); every (day,
    slot) containing a sample counts as observed.
    """
    minutes = db.slot_minutes * 60
    for sample in new_samples:
        if db._last_timestamp is not None and sample.timestamp <= db._last_timestamp:
            raise OrderingError(
                f"sample at t={sample.timestamp} not after t={db._last_timestamp}"
            )
        abs_slot = (sample.timestamp + db.utc_offset_s) // minutes
        key = (abs_slot // db.n_slots, abs_slot % db.n_slots)
        if key != db._open_key:
            db._open_key = key
            db._open_apps = set()
            db._open_cut = False
            db._open_resume = False
            db.slot_observations[key[1]] += 1
        slot = key[1]

        for rec in sample.apps:
            if rec.app_id in db.app_hist and rec.app_id not in db._open_apps and app_ran(rec):
                db.app_hist[rec.app_id][slot] += 1
                db._open_apps.add(rec.app_id)

        prev = db._prev_sample
        if prev is not None:
            if not db._open_cut and is_cut_transition(prev, sample):
                db.cut_hist[slot] += 1
                db._open_cut = True
            if not db._open_resume and is_resume_transition(prev, sample):
                db.resume_hist[slot] += 1
                db._open_resume = True

        db._prev_sample = sample
        db._last_timestamp = sample.timestamp
        db.recent_samples.append(sample)
    return db


def predict_top_k_apps(
    db: HistoryDB,
    s_apps: Sequence[str],
    k: int,
    first_slot: int,
    last_slot: int,
) -> list[str]:
    """Union of the per-slot top-K pre-cachable apps over a slot range.

    Within each slot of day, apps rank by historical usage count descending,
    ties resolved by their order in ``s_apps``; the result preserves the
    order of first selection across the scan.
    """
    if not s_apps:
        raise ConfigError("s_apps must not be empty")
    if k < 1 or k > len(s_apps):
        raise ParameterError(f"k={k} outside [1, {len(s_apps)}]")
    if first_slot > last_slot:
        raise ParameterError("first_slot must not exceed last_slot")

    chosen: list[str] = []
    seen: set[str] = set()
    for slot in range(first_slot, last_slot + 1):
        s = slot % db.n_slots
        ranked = sorted(
            range(len(s_apps)),
            key=lambda i: (-int(db.app_hist[s_apps[i]][s]) if s_apps[i] in db.app_hist else 0, i),
        )
        for i in ranked[:k]:
            app = s_apps[i]
            if app not in seen:
                seen.add(app)
                chosen.append(app)
    return chosen


def history_predict_event(
    p: float,
    n_draws: int,
    delta: float,
    rng: np.random.Generator,
) -> bool:
    """Monte-Carlo acceptance rule on an empirical event probability.

    Throw ``n_draws`` uniform values in [0, 1); with X of them below ``p``,
    predict the event iff the rate X/N falls inside [(1-delta)p, (1+delta)p].
    A probability of exactly zero never fires: an event never observed in a
    slot is never predicted.
    """
    if not 0.0 <= p <= 1.0:
        raise ParameterError(f"p={p} outside [0, 1]")
    if n_draws <= 0:
        raise ParameterError("n_draws must be positive")
    if not 0.0 < delta < 1.0:
        raise ParameterError(f"delta={delta} outside (0, 1)")
    if p == 0.0:
        return False
    x = int(np.count_nonzero(rng.random(n_draws) < p))
    rate = x / n_draws
    return (1.0 - delta) * p <= rate <= (1.0 + delta) * p


def predict_resume_slot(
    db: HistoryDB,
    current_slot: int,
    max_lookahead: int = 96,
    n_draws: int = 10000,
    delta: float = 0.1,
    rng: Optional[np.random.Generator] = None,
    default_gap_slots: int = 2,
) -> int:
    """First future slot where the resume rule fires, else a fixed fallback.

    Scans current_slot+1 .. current_slot+max_lookahead; when no slot fires,
    assumes a median-length gap of ``default_gap_slots`` slots.
    """
    if rng is None:
        rng = np.random.default_rng()
    for s in range(current_slot + 1, current_slot + 1 + max_lookahead):
        p = db.event_probability(s, EventKind.RESUME)
        if history_predict_event(p, n_draws, delta, rng):
            return s
    return current_slot + 1 + default_gap_slots


@dataclass(frozen=True)
class FeatureVector:
    """The nine per-slot context features feeding the boosted classifier."""

    home_wifi_night: bool     # night time and home network in sight
    work_wifi_day: bool       # day time and work network in sight
    weekday: bool
    n_visible: int
    top1_seen: bool
    top2_seen: bool
    top3_seen: bool
    slot_index: int
    slot_event_prob: float

    def __post_init__(self):
        if self.n_visible < 0:
            raise FeatureError("n_visible must be non-negative")
        if not 0.0 <= self.slot_event_prob <= 1.0:
            raise FeatureError("slot_event_prob must lie in [0, 1]")

    def as_array(self) -> np.ndarray:
        return np.array([
            float(self.home_wifi_night),
            float(self.work_wifi_day),
            float(self.weekday),
            float(self.n_visible),
            float(self.top1_seen),
            float(self.top2_seen),
            float(self.top3_seen),
            float(self.slot_index),
            float(self.slot_event_prob),
        ])


N_FEATURES = 9


def extract_features(
    db: HistoryDB,
    slot: int,
    now: int,
    target: EventKind,
) -> FeatureVector:
    """Context features for predicting an event in a given slot of day.

    Visibility features come from the newest sample in the recent window;
    the slot probability is the target event's empirical rate for ``slot``.
    """
    if not db.recent_samples:
        raise FeatureError("no recent samples to extract features from")
    if db.profile is None:
        raise FeatureError("history database has no preferred-network profile")
    latest = db.recent_samples[-1]
    visible = latest.visible_ssids
    prof = db.profile
    top = list(prof.top3) + [None, None, None]
    at_night = in_hour_window(now, NIGHT_WINDOW, db.utc_offset_s)
    return FeatureVector(
        home_wifi_night=at_night and prof.home_ssid is not None
        and prof.home_ssid in visible,
        work_wifi_day=(not at_night) and prof.work_ssid is not None
        and prof.work_ssid in visible,
        weekday=is_weekday(now, db.utc_offset_s),
        n_visible=len(visible),
        top1_seen=top[0] is not None and top[0] in visible,
        top2_seen=top[1] is not None and top[1] in visible,
        top3_seen=top[2] is not None and top[2] in visible,
        slot_index=slot % db.n_slots,
        slot_event_prob=db.event_probability(slot, target),
    )
