import io
import json

import pytest

from pcach.errors import (
    EmptyTraceError,
    TraceParseError,
    TraceValidationError,
)
from pcach.trace import (
    ActiveNetwork,
    AppTrafficRecord,
    MeasurementSample,
    Trace,
    WiFiGap,
    closed_gaps,
    derive_preferred_profile,
    detect_gaps,
    ingest_trace,
    normalize_timeline,
    trace_to_csv,
    trace_to_jsonl,
)

from helpers import C, N, W, app, brute_force_gaps, random_trace, sample, seeded_rng, trace_from_states


# ---------------------------------------------------------------------------
# domain type invariants
# ---------------------------------------------------------------------------

def test_app_record_rejects_negative_bytes():
    with pytest.raises(TraceValidationError):
        AppTrafficRecord("a", up_bytes=-1, down_bytes=0, running=True)
    with pytest.raises(TraceValidationError):
        AppTrafficRecord("", up_bytes=0, down_bytes=0, running=True)


def test_sample_requires_ssid_iff_wifi():
    with pytest.raises(TraceValidationError):
        MeasurementSample(0, ActiveNetwork.WIFI, None, frozenset(), ())
    with pytest.raises(TraceValidationError):
        MeasurementSample(0, ActiveNetwork.CELLULAR, "home", frozenset({"home"}), ())


def test_sample_connected_must_be_visible():
    with pytest.raises(TraceValidationError):
        MeasurementSample(0, ActiveNetwork.WIFI, "home", frozenset({"other"}), ())


def test_sample_rejects_duplicate_app_ids():
    with pytest.raises(TraceValidationError):
        MeasurementSample(0, ActiveNetwork.NONE, None, frozenset(),
                          (app("a"), app("a")))


def test_trace_requires_increasing_timestamps():
    s0, s1 = sample(100, W), sample(100, C)
    with pytest.raises(TraceValidationError):
        Trace("p", (s0, s1))
    with pytest.raises(TraceValidationError):
        Trace("p", (sample(0, W),), nominal_period_s=0)


def test_gap_invariants():
    with pytest.raises(TraceValidationError):
        WiFiGap(cut_time=100, resume_time=100)
    g = WiFiGap(cut_time=0, resume_time=90000)
    assert g.excluded and not g.open
    assert WiFiGap(cut_time=0).open


# ---------------------------------------------------------------------------
# ingestion
# ---------------------------------------------------------------------------

def test_ingest_single_jsonl_line():
    line = ('{"t": 1000, "active": "WIFI", "ssid": "home", "visible": ["home"], '
            '"apps": [{"id": "mail", "up": 10, "down": 40, "running": true}]}\n')
    trace = ingest_trace(io.BytesIO(line.encode()), fmt="jsonl", phone_id="p1")
    assert len(trace) == 1
    s = trace.samples[0]
    assert s.active_network is ActiveNetwork.WIFI
    assert s.connected_ssid == "home"
    assert s.apps[0].down_bytes == 40
    assert trace.phone_id == "p1"


def test_ingest_rejects_negative_bytes_with_line_number():
    lines = (
        '{"t": 1, "active": "NONE", "ssid": null, "visible": [], "apps": []}\n'
        '{"t": 2, "active": "NONE", "ssid": null, "visible": [], '
        '"apps": [{"id": "x", "up": 0, "down": -5, "running": false}]}\n'
    )
    with pytest.raises(TraceParseError) as exc:
        ingest_trace(lines.encode(), fmt="jsonl")
    assert exc.value.line_no == 2


def test_ingest_rejects_malformed_json_with_line_number():
    with pytest.raises(TraceParseError) as exc:
        ingest_trace(b'{"t": 1, "active": "NONE", "ssid": null, "visible": [], "apps": []}\nnot json\n')
    assert exc.value.line_no == 2


def test_ingest_empty_source_raises():
    with pytest.raises(EmptyTraceError):
        ingest_trace(b"", fmt="jsonl")
    with pytest.raises(EmptyTraceError):
        ingest_trace(b"\n\n", fmt="csv")


def test_ingest_sorts_and_collapses_duplicates():
    lines = "\n".join([
        json.dumps({"t": 600, "active": "CELL", "ssid": None, "visible": [], "apps": []}),
        json.dumps({"t": 300, "active": "NONE", "ssid": None, "visible": [], "apps": []}),
        json.dumps({"t": 600, "active": "NONE", "ssid": None, "visible": ["x"], "apps": []}),
    ])
    trace = ingest_trace(lines.encode(), fmt="jsonl")
    assert [s.timestamp for s in trace.samples] == [300, 600]
    # the later record in input order wins
    assert trace.samples[1].active_network is ActiveNetwork.NONE
    assert trace.samples[1].visible_ssids == frozenset({"x"})


def test_csv_round_trip_with_and_without_apps():
    t = Trace("p7", (
        sample(0, W, ssid="home", visible={"home", "cafe"},
               apps=(app("mail", up=3, down=12), app("news", running=False, down=7))),
        sample(300, C, visible={"cafe"}),
        sample(900, N),
    ))
    data = trace_to_csv(t)
    back = ingest_trace(data, fmt="csv")
    assert back.phone_id == "p7"
    assert back.samples == t.samples


def test_jsonl_round_trip_field_by_field():
    rng = seeded_rng(7)
    for _ in range(20):
        t = random_trace(rng, with_apps=True)
        back = ingest_trace(trace_to_jsonl(t), fmt="jsonl", phone_id=t.phone_id)
        assert back.samples == t.samples
        assert back.phone_id == t.phone_id


def test_csv_round_trip_random_traces():
    rng = seeded_rng(8)
    for _ in range(20):
        t = random_trace(rng, with_apps=True)
        back = ingest_trace(trace_to_csv(t), fmt="csv")
        assert back.samples == t.samples


# ---------------------------------------------------------------------------
# preferred-network profile
# ---------------------------------------------------------------------------

def test_profile_always_home():
    t = trace_from_states([W] * 10)
    prof = derive_preferred_profile(t)
    assert prof.preferred == frozenset({"home"})
    assert prof.top3 == ("home",)
    assert prof.home_ssid == "home"
    assert prof.work_ssid == "home"


def test_profile_home_night_office_day():
    # office visible (and connected) 09:00-17:00, home visible 21:00-07:00
    samples = []
    t0 = 0
    for hour in range(0, 24):
        ts = t0 + hour * 3600
        if 9 <= hour < 17:
            samples.append(sample(ts, W, ssid="office", visible={"office"}))
        elif hour >= 21 or hour < 7:
            samples.append(sample(ts, W, ssid="home", visible={"home"}))
        else:
            samples.append(sample(ts, C))
    prof = derive_preferred_profile(Trace("p", tuple(samples)))
    assert prof.home_ssid == "home"
    assert prof.work_ssid == "office"


def test_profile_no_wifi_is_empty_not_error():
    t = trace_from_states([C, C, N])
    prof = derive_preferred_profile(t)
    assert prof.preferred == frozenset()
    assert prof.top3 == ()
    assert prof.home_ssid is None and prof.work_ssid is None


def test_profile_matches_exhaustive_counting_oracle():
    rng = seeded_rng(11)
    for _ in range(30):
        t = random_trace(rng)
        prof = derive_preferred_profile(t)
        preferred = {s.connected_ssid for s in t.samples if s.connected_ssid}
        assert prof.preferred == frozenset(preferred)
        if not preferred:
            continue
        total, night, day = {}, {}, {}
        for s in t.samples:
            hour = (s.timestamp % 86400) / 3600
            for ssid in s.visible_ssids:
                if ssid not in preferred:
                    continue
                total[ssid] = total.get(ssid, 0) + 1
                if hour >= 20 or hour < 8:
                    night[ssid] = night.get(ssid, 0) + 1
                else:
                    day[ssid] = day.get(ssid, 0) + 1
        ranked = sorted(preferred, key=lambda ss: (-total.get(ss, 0), ss))
        assert prof.top3 == tuple(ranked[:3])
        assert prof.home_ssid == min(preferred, key=lambda ss: (-night.get(ss, 0), ss))
        assert prof.work_ssid == min(preferred, key=lambda ss: (-day.get(ss, 0), ss))


# ---------------------------------------------------------------------------
# normalization
# ---------------------------------------------------------------------------

def _profile(*ssids):
    from pcach.trace import PreferredNetworkProfile
    return PreferredNetworkProfile(frozenset(ssids), tuple(sorted(ssids))[:3], None, None)


def test_normalize_relabels_cellular_with_preferred_visible():
    t = Trace("p", (sample(0, C, visible={"home", "zz"}),))
    out = normalize_timeline(t, _profile("home"))
    s = out.samples[0]
    assert s.active_network is ActiveNetwork.WIFI
    assert s.connected_ssid == "home"


def test_normalize_picks_lexicographic_first_preferred():
    t = Trace("p", (sample(0, C, visible={"beta", "alpha", "other"}),))
    out = normalize_timeline(t, _profile("beta", "alpha"))
    assert out.samples[0].connected_ssid == "alpha"


def test_normalize_leaves_disjoint_and_wifi_untouched():
    t = Trace("p", (
        sample(0, C, visible={"stranger"}),
        sample(300, W, ssid="home"),
        sample(600, N),
    ))
    out = normalize_timeline(t, _profile("home"))
    assert out.samples[0] == t.samples[0]
    assert out.samples[1] == t.samples[1]
    assert out.samples[2] == t.samples[2]


def test_normalize_identity_on_all_wifi_trace():
    t = trace_from_states([W] * 5)
    assert normalize_timeline(t, _profile("home")) is t


def test_normalize_idempotent_and_monotone_in_wifi_count():
    rng = seeded_rng(13)
    for _ in range(30):
        t = random_trace(rng)
        try:
            prof = derive_preferred_profile(t)
        except EmptyTraceError:
            continue
        once = normalize_timeline(t, prof)
        twice = normalize_timeline(once, prof)
        assert once.samples == twice.samples
        n_wifi = sum(1 for s in t.samples if s.active_network is W)
        n_wifi_after = sum(1 for s in once.samples if s.active_network is W)
        assert n_wifi_after >= n_wifi


# ---------------------------------------------------------------------------
# gap detection
# ---------------------------------------------------------------------------

def test_basic_gap_wifi_cell_cell_wifi():
    t = trace_from_states([W, C, C, W], spacing=300)
    gaps = detect_gaps(t)
    assert len(gaps) == 1
    g = gaps[0]
    assert g.cut_time == 300
    assert g.resume_time == 900
    assert g.duration_s == 600


def test_ten_minute_rule_suppresses_cut():
    t = Trace("p", (sample(0, W), sample(3600, C)))
    assert detect_gaps(t) == []
    # at exactly 600 s the cut still counts
    t2 = Trace("p", (sample(0, W), sample(600, C), sample(900, W)))
    assert len(detect_gaps(t2)) == 1


def test_none_breaks_pairing():
    # WIFI -> NONE -> CELLULAR yields no cut event
    assert detect_gaps(trace_from_states([W, N, C, C])) == []
    # a pending gap hitting NONE stays open; the later resume is unmatched
    gaps = detect_gaps(trace_from_states([W, C, N, C, W]))
    assert len(gaps) == 1
    assert gaps[0].open


def test_cut_at_trace_end_is_open_gap():
    gaps = detect_gaps(trace_from_states([W, C, C]))
    assert len(gaps) == 1
    assert gaps[0].open
    assert gaps[0].cut_time == 300


def test_all_wifi_and_all_cellular_have_no_gaps():
    assert detect_gaps(trace_from_states([W] * 8)) == []
    assert detect_gaps(trace_from_states([C] * 8)) == []


def test_long_gap_flagged_excluded():
    samples = [sample(0, W), sample(300, C), sample(300 + 86400 + 300, W)]
    # spacing beyond 10 minutes between last two samples is irrelevant to resume
    gaps = detect_gaps(Trace("p", tuple(samples)))
    assert len(gaps) == 1
    assert gaps[0].excluded
    assert closed_gaps(gaps) == []


def test_gaps_match_brute_force_oracle_on_random_traces():
    rng = seeded_rng(17)
    for _ in range(300):
        t = random_trace(rng)
        assert detect_gaps(t) == brute_force_gaps(t)


def test_gaps_disjoint_and_ordered():
    rng = seeded_rng(19)
    for _ in range(100):
        t = random_trace(rng)
        gaps = detect_gaps(t)
        for g1, g2 in zip(gaps, gaps[1:]):
            assert g1.cut_time < g2.cut_time
            if g1.resume_time is not None:
                assert g1.resume_time <= g2.cut_time


def test_every_reported_cut_satisfies_definition_by_replay():
    rng = seeded_rng(23)
    for _ in range(50):
        t = random_trace(rng)
        by_time = {s.timestamp: i for i, s in enumerate(t.samples)}
        for g in detect_gaps(t):
            x = by_time[g.cut_time]
            prev, cur = t.samples[x - 1], t.samples[x]
            assert prev.active_network is W
            assert cur.active_network is C
            assert cur.timestamp - prev.timestamp <= 600
