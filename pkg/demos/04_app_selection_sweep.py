"""How many apps to pre-cache: sweep K and watch the quality gap bottom out.

Each WiFi gap is scored against the pre-cachable apps that actually moved
bytes over cellular during it; picking more apps raises recall but floods
the cache with false positives, so the normalized distance to perfect
prediction has an interior minimum.

Run from the repository root:  python3 demos/04_app_selection_sweep.py
"""

import dataclasses

from pcach import generate_trace, k_sweep, reference_config

PHONES = 6
cfg = dataclasses.replace(reference_config(seed=99), days=45)
traces = (generate_trace(cfg, f"demo-{i:02d}") for i in range(PHONES))
print(f"sweeping K over {PHONES} phones x {cfg.days} days, "
      f"{len(cfg.pcachable_apps)} pre-cachable apps\n")

points = k_sweep(traces, cfg.pcachable_apps,
                 ks=(1, 2, 3, 4, 5, 6, 7, 10, 15, 20, 25, 30))
best = min(points, key=lambda p: p.quality_gap)

print(" K   TPR    FPR    quality gap")
for p in points:
    marker = "  <- best" if p.k == best.k else ""
    bar = "#" * int(round(p.quality_gap * 40))
    print(f"{p.k:3d}  {p.point.tpr:.3f}  {p.point.fpr:.3f}  "
          f"{p.quality_gap:.3f} {bar}{marker}")

print(f"\npre-caching the top {best.k} apps per slot gives the best "
      "recall/false-positive compromise on this corpus")
