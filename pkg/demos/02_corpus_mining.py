"""Mining a synthetic corpus: traffic split, gap CDF, commute surges and the
pre-caching potential as the validity horizon grows.

Run from the repository root:  python3 demos/02_corpus_mining.py
"""

import dataclasses

import numpy as np

from pcach import (
    closed_gaps,
    derive_preferred_profile,
    detect_gaps,
    event_time_histogram,
    generate_trace,
    horizon_sweep,
    normalize_timeline,
    reference_config,
    traffic_split,
)

PHONES = 8
cfg = dataclasses.replace(reference_config(seed=42), days=45)
print(f"generating {PHONES} phones x {cfg.days} days "
      f"(seed {cfg.seed}, {cfg.period_s} s sampling) ...")

durations, shares = [], []
cut_counts = np.zeros(96, dtype=int)
bounds = {}
cell_bytes = 0
for i in range(PHONES):
    trace = generate_trace(cfg, f"demo-{i:02d}")
    norm = normalize_timeline(trace, derive_preferred_profile(trace))
    gaps = detect_gaps(norm)
    split = traffic_split(norm)
    shares.append(split.cellular_fraction)
    durations += [g.duration_s for g in closed_gaps(gaps)]
    cuts, _ = event_time_histogram(gaps, slot_minutes=15)
    cut_counts += np.array(cuts.counts)
    for h, frac in horizon_sweep(norm, gaps, (15, 30, 60, 120, 240)):
        bounds.setdefault(h, []).append((frac, split.cellular_bytes))
    cell_bytes += split.cellular_bytes

print("\n== cellular vs WiFi traffic ==")
print(f"median phone sends {np.median(shares):.1%} of its bytes over cellular")

durations = np.array(durations)
print("\n== gap-length distribution ==")
for minutes in (30, 90, 240):
    frac = (durations <= minutes * 60).mean()
    print(f"  {frac:.0%} of gaps last at most {minutes} minutes")

print("\n== cut events by time of day (15-minute slots) ==")
blocks = " .:-=+*#%@"
per_hour = cut_counts.reshape(24, 4).sum(axis=1)
scale = per_hour.max() / (len(blocks) - 1)
bar = "".join(blocks[int(round(c / scale))] for c in per_hour)
print("  hour 0" + " " * 18 + "12" + " " * 10 + "23")
print(f"  cuts [{bar}]  (commute surges stand out)")

print("\n== pre-caching potential vs data-validity horizon ==")
for h in sorted(bounds):
    covered = sum(f * b for f, b in bounds[h])
    print(f"  horizon {h:3d} min -> {covered / cell_bytes:.0%} "
          "of cellular bytes coverable")
