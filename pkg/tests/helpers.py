"""Shared test fixtures: hand-rolled trace builders and independent oracles.

The oracles here deliberately re-derive results with naive algorithms
(quadratic scans, exhaustive counting) so the tests stay independent of the
library's implementation paths.
"""

import numpy as np

from pcach.trace import (
    ActiveNetwork,
    AppTrafficRecord,
    MeasurementSample,
    Trace,
    WiFiGap,
    is_cut_transition,
    is_resume_transition,
)

W, C, N = ActiveNetwork.WIFI, ActiveNetwork.CELLULAR, ActiveNetwork.NONE


def sample(t, state, ssid=None, visible=(), apps=()):
    if state is W and ssid is None:
        ssid = "home"
    vis = set(visible)
    if ssid is not None:
        vis.add(ssid)
    return MeasurementSample(
        timestamp=t,
        active_network=state,
        connected_ssid=ssid if state is W else None,
        visible_ssids=frozenset(vis),
        apps=tuple(apps),
    )


def app(app_id, up=0, down=0, running=True):
    return AppTrafficRecord(app_id=app_id, up_bytes=up, down_bytes=down, running=running)


def trace_from_states(states, spacing=300, start=0, phone_id="phone", bytes_per_sample=0):
    """Build a trace from a list of ActiveNetwork states at fixed spacing."""
    samples = []
    for i, st in enumerate(states):
        apps = ()
        if bytes_per_sample:
            apps = (app("a", up=0, down=bytes_per_sample),)
        samples.append(sample(start + i * spacing, st, apps=apps))
    return Trace(phone_id=phone_id, samples=tuple(samples))


def random_trace(rng, n_min=5, n_max=120, phone_id="rand", with_apps=False,
                 regular=False):
    """Random mixed-state trace with irregular spacing and occasional scans."""
    n = int(rng.integers(n_min, n_max + 1))
    t = int(rng.integers(0, 10_000))
    samples = []
    ssids = ["home", "office", "cafe"]
    for _ in range(n):
        state = [W, C, N][int(rng.integers(0, 3))]
        visible = {s for s in ssids if rng.random() < 0.4}
        ssid = None
        if state is W:
            ssid = ssids[int(rng.integers(0, len(ssids)))]
            visible.add(ssid)
        apps = ()
        if with_apps and rng.random() < 0.7:
            apps = (AppTrafficRecord(
                "app%d" % rng.integers(0, 4),
                up_bytes=int(rng.integers(0, 5000)),
                down_bytes=int(rng.integers(0, 20000)),
                running=bool(rng.random() < 0.8),
            ),)
        samples.append(MeasurementSample(
            timestamp=t,
            active_network=state,
            connected_ssid=ssid,
            visible_ssids=frozenset(visible),
            apps=apps,
        ))
        if regular:
            t += 300
        else:
            # mostly nominal spacing, sometimes far beyond the 10-minute rule
            t += int(rng.choice([120, 300, 300, 300, 540, 660, 3600]))
    return Trace(phone_id=phone_id, samples=tuple(samples))


def brute_force_gaps(trace):
    """Quadratic reference scanner for gap detection.

    Finds every cut event by checking the three-clause definition at each
    sample, then walks forward sample by sample until the first resume event
    or an off-network (NONE) sample, which leaves the gap open.
    """
    samples = trace.samples
    gaps = []
    for x in range(1, len(samples)):
        if not is_cut_transition(samples[x - 1], samples[x]):
            continue
        resume_time = None
        for y in range(x + 1, len(samples)):
            if samples[y].active_network is N:
                break
            if is_resume_transition(samples[y - 1], samples[y]):
                resume_time = samples[y].timestamp
                break
        gaps.append(WiFiGap(cut_time=samples[x].timestamp, resume_time=resume_time))
    return gaps


def seeded_rng(seed):
    return np.random.default_rng(seed)
