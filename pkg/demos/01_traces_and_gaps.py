"""Trace basics: build samples, serialize, normalize the timeline, find gaps.

Run from the repository root:  python3 demos/01_traces_and_gaps.py
"""

from pcach import (
    ActiveNetwork,
    AppTrafficRecord,
    MeasurementSample,
    Trace,
    derive_preferred_profile,
    detect_gaps,
    ingest_trace,
    normalize_timeline,
)
from pcach.trace import trace_to_jsonl


def s(t, state, ssid=None, visible=(), apps=()):
    vis = set(visible) | ({ssid} if ssid else set())
    return MeasurementSample(t, state, ssid, frozenset(vis), tuple(apps))


W, C, NONE = ActiveNetwork.WIFI, ActiveNetwork.CELLULAR, ActiveNetwork.NONE
mail = AppTrafficRecord("mail", up_bytes=2_000, down_bytes=9_000, running=True)

# A morning commute in nine samples: home WiFi, a cut while the home network
# fades, cellular on the move (one sample still *sees* home WiFi, which the
# normalization step will reclaim), then office WiFi.
trace = Trace("demo-phone", (
    s(0,    W, "home-net"),
    s(300,  W, "home-net", apps=(mail,)),
    s(600,  C, visible={"home-net"}, apps=(mail,)),   # offloading opportunity
    s(900,  C, apps=(mail,)),
    s(1200, C, visible={"bus-stop-wifi"}),
    s(1500, C, apps=(mail,)),
    s(1800, W, "office-net"),
    s(2100, W, "office-net", apps=(mail,)),
    s(2400, W, "office-net"),
))

print("== raw trace ==")
print(f"{len(trace)} samples, {trace.end_time - trace.start_time} s span")

profile = derive_preferred_profile(trace)
print(f"preferred networks: {sorted(profile.preferred)}")
print(f"home={profile.home_ssid!r} work={profile.work_ssid!r}")

print("\n== normalization ==")
norm = normalize_timeline(trace, profile)
for before, after in zip(trace.samples, norm.samples):
    if before.active_network is not after.active_network:
        print(f"t={before.timestamp}: {before.active_network.name} -> "
              f"{after.active_network.name} (saw preferred {after.connected_ssid!r})")

print("\n== gaps on the modified timeline ==")
for g in detect_gaps(norm):
    print(f"cut at t={g.cut_time}, resume at t={g.resume_time}, "
          f"duration {g.duration_s} s")

print("\n== wire format round trip ==")
payload = trace_to_jsonl(norm)
print(payload.decode().splitlines()[2])
again = ingest_trace(payload, fmt="jsonl", phone_id=norm.phone_id)
print("round-trip equal:", again.samples == norm.samples)
