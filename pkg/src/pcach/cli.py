"""Command-line front end: generation, mining, backtesting, report emission.

Every command writes its outputs plus a ``manifest.json`` recording the
command, the fully resolved parameter set and the file names produced, so a
run can be reproduced by re-invocation. Outputs are deterministic given
(inputs, flags, seed). Per-phone work fans out to a process pool capped by
the ``PCACH_THREADS`` environment variable.
"""

from __future__ import annotations

import argparse
import csv
import dataclasses
import json
import os
import sys
from concurrent.futures import ProcessPoolExecutor
from pathlib import Path

import numpy as np

from . import __version__
from .errors import PCachError
from .evaluation import (
    PAPER_K_SET,
    app_prediction_run,
    backtest,
    quality_gap,
)
from .mining import (
    DEFAULT_HORIZONS_MIN,
    event_time_histogram,
    gap_duration_cdf,
    horizon_sweep,
    traffic_split,
)
from .pipeline import PCachConfig, PredictorKind
from .synth import GeneratorConfig, generate_trace, reference_config
from .trace import (
    WiFiGap,
    closed_gaps,
    derive_preferred_profile,
    detect_gaps,
    normalize_timeline,
    read_trace,
    write_trace,
)


def _worker_count() -> int:
    env = os.environ.get("PCACH_THREADS", "").strip()
    if env:
        return max(1, int(env))
    return os.cpu_count() or 1


def _parallel_map(fn, items):
    """Order-preserving map over a process pool (sequential when capped)."""
    items = list(items)
    workers = min(_worker_count(), max(1, len(items)))
    if workers <= 1 or len(items) <= 1:
        return [fn(item) for item in items]
    with ProcessPoolExecutor(max_workers=workers) as pool:
        return list(pool.map(fn, items))


def _write_csv(path: Path, header, rows):
    with open(path, "w", newline="") as fh:
        writer = csv.writer(fh, lineterminator="\n")
        writer.writerow(header)
        writer.writerows(rows)


def _write_json(path: Path, payload):
    path.write_text(json.dumps(payload, indent=2, sort_keys=True) + "\n")


def _write_manifest(out_dir: Path, command: str, params: dict, outputs: list[str]):
    _write_json(out_dir / "manifest.json", {
        "command": command,
        "version": __version__,
        "parameters": params,
        "outputs": sorted(outputs),
    })


def _trace_paths(traces_dir: str) -> list[Path]:
    root = Path(traces_dir)
    if not root.is_dir():
        raise PCachError(f"trace directory not found: {traces_dir}")
    paths = sorted(p for p in root.iterdir()
                   if p.suffix.lower() in (".jsonl", ".csv"))
    if not paths:
        raise PCachError(f"no trace files (*.jsonl, *.csv) in {traces_dir}")
    return paths


def _load_normalized(path: Path, utc_offset_s: int):
    trace = read_trace(path)
    profile = derive_preferred_profile(trace, utc_offset_s=utc_offset_s)
    norm = normalize_timeline(trace, profile)
    return norm, detect_gaps(norm)


# ---------------------------------------------------------------------------
# generate
# ---------------------------------------------------------------------------

def _generate_one(job):
    config_json, phone_id, out_dir, fmt = job
    config = GeneratorConfig.from_json(config_json)
    trace = generate_trace(config, phone_id)
    name = f"{phone_id}.{fmt}"
    write_trace(trace, Path(out_dir) / name, fmt=fmt)
    return name


def cmd_generate(args) -> int:
    out_dir = Path(args.out)
    out_dir.mkdir(parents=True, exist_ok=True)
    if args.config:
        config = GeneratorConfig.from_json(Path(args.config).read_text())
        if args.seed is not None:
            config = dataclasses.replace(config, seed=args.seed)
        if args.days is not None:
            config = dataclasses.replace(config, days=args.days)
    else:
        config = reference_config(seed=args.seed if args.seed is not None else 0,
                                  days=args.days if args.days is not None else 60)
    jobs = [(config.to_json(), f"phone-{i:03d}", str(out_dir), args.format)
            for i in range(args.phones)]
    names = _parallel_map(_generate_one, jobs)
    (out_dir / "generator_config.json").write_text(config.to_json() + "\n")
    _write_manifest(out_dir, "generate", {
        "phones": args.phones,
        "days": config.days,
        "seed": config.seed,
        "format": args.format,
        "config_file": args.config,
        "out": args.out,
    }, names + ["generator_config.json"])
    print(f"wrote {len(names)} traces to {out_dir}")
    return 0


# ---------------------------------------------------------------------------
# mine / gaps / bound
# ---------------------------------------------------------------------------

def _mine_one(job):
    path, slot_minutes, horizons, utc_offset_s = job
    norm, gaps = _load_normalized(Path(path), utc_offset_s)
    split = traffic_split(norm)
    closed = closed_gaps(gaps)
    cuts, resumes = event_time_histogram(gaps, slot_minutes, utc_offset_s)
    return {
        "phone_id": norm.phone_id,
        "cellular_bytes": split.cellular_bytes,
        "wifi_bytes": split.wifi_bytes,
        "cellular_fraction": split.cellular_fraction,
        "durations": [g.duration_s for g in closed],
        "n_gaps": len(gaps),
        "n_open": sum(1 for g in gaps if g.open),
        "n_excluded": sum(1 for g in gaps if g.excluded),
        "cut_hist": list(cuts.counts),
        "resume_hist": list(resumes.counts),
        "bound": horizon_sweep(norm, gaps, horizons),
    }


def _run_mining(args, emit: set[str], command: str) -> int:
    out_dir = Path(args.out)
    out_dir.mkdir(parents=True, exist_ok=True)
    horizons = _parse_int_list(args.horizons)
    jobs = [(str(p), args.slot_minutes, horizons, args.local_utc_offset)
            for p in _trace_paths(args.traces)]
    results = sorted(_parallel_map(_mine_one, jobs), key=lambda r: r["phone_id"])

    outputs = []
    summary: dict = {"phones": len(results)}

    if "traffic" in emit:
        _write_csv(out_dir / "traffic_split.csv",
                   ["phone_id", "cellular_bytes", "wifi_bytes", "cellular_fraction"],
                   [[r["phone_id"], r["cellular_bytes"], r["wifi_bytes"],
                     f"{r['cellular_fraction']:.6f}"] for r in results])
        outputs.append("traffic_split.csv")
        total_cell = sum(r["cellular_bytes"] for r in results)
        total = total_cell + sum(r["wifi_bytes"] for r in results)
        fractions = sorted(r["cellular_fraction"] for r in results)
        summary["cellular_share"] = total_cell / total if total else 0.0
        summary["cellular_share_median_phone"] = float(np.median(fractions)) if fractions else None

    if "gap_cdf" in emit:
        durations = [d for r in results for d in r["durations"]]
        points = gap_duration_cdf(
            [WiFiGap(cut_time=0, resume_time=d) for d in durations])
        _write_csv(out_dir / "gap_cdf.csv", ["duration_s", "fraction"],
                   [[d, f"{f:.6f}"] for d, f in points])
        outputs.append("gap_cdf.csv")
        summary["gaps_in_cdf"] = len(durations)

    if "histogram" in emit:
        n = len(results[0]["cut_hist"])
        cut_total = [sum(r["cut_hist"][i] for r in results) for i in range(n)]
        res_total = [sum(r["resume_hist"][i] for r in results) for i in range(n)]
        _write_csv(out_dir / "event_histogram.csv",
                   ["slot_index", "slot_start_min", "cut_count", "resume_count"],
                   [[i, i * args.slot_minutes, cut_total[i], res_total[i]]
                    for i in range(n)])
        outputs.append("event_histogram.csv")
        summary["total_cut_events"] = sum(cut_total)
        summary["total_resume_events"] = sum(res_total)

    if "bound" in emit:
        _write_csv(out_dir / "bound_vs_horizon.csv",
                   ["phone_id", "horizon_min", "fraction"],
                   [[r["phone_id"], h, f"{frac:.6f}"]
                    for r in results for h, frac in r["bound"]])
        outputs.append("bound_vs_horizon.csv")
        summary["mean_bound_by_horizon"] = {
            str(h): float(np.mean([dict(r["bound"])[h] for r in results]))
            for h in horizons
        }

    if "gaps" in emit:
        summary["total_gaps"] = sum(r["n_gaps"] for r in results)
        summary["open_gaps"] = sum(r["n_open"] for r in results)
        summary["excluded_gaps"] = sum(r["n_excluded"] for r in results)

    _write_json(out_dir / "summary.json", summary)
    outputs.append("summary.json")
    _write_manifest(out_dir, command, {
        "traces": args.traces,
        "out": args.out,
        "slot_minutes": args.slot_minutes,
        "horizons": horizons,
        "local_utc_offset": args.local_utc_offset,
    }, outputs)
    print(f"{command}: {len(results)} phones -> {out_dir}")
    return 0


def cmd_mine(args) -> int:
    return _run_mining(args, {"traffic", "gap_cdf", "histogram", "bound", "gaps"}, "mine")


def cmd_bound(args) -> int:
    return _run_mining(args, {"bound"}, "bound")


def _gaps_one(job):
    path, utc_offset_s = job
    norm, gaps = _load_normalized(Path(path), utc_offset_s)
    return {
        "phone_id": norm.phone_id,
        "rows": [[norm.phone_id, g.cut_time,
                  g.resume_time if g.resume_time is not None else "",
                  g.duration_s if g.duration_s is not None else "",
                  int(g.open), int(g.excluded)] for g in gaps],
    }


def cmd_gaps(args) -> int:
    out_dir = Path(args.out)
    out_dir.mkdir(parents=True, exist_ok=True)
    jobs = [(str(p), args.local_utc_offset) for p in _trace_paths(args.traces)]
    results = sorted(_parallel_map(_gaps_one, jobs), key=lambda r: r["phone_id"])
    rows = [row for r in results for row in r["rows"]]
    _write_csv(out_dir / "gaps.csv",
               ["phone_id", "cut_time", "resume_time", "duration_s", "open", "excluded"],
               rows)
    _write_json(out_dir / "summary.json",
                {"phones": len(results), "total_gaps": len(rows)})
    _write_manifest(out_dir, "gaps", {
        "traces": args.traces, "out": args.out,
        "local_utc_offset": args.local_utc_offset,
    }, ["gaps.csv", "summary.json"])
    print(f"gaps: {len(rows)} gaps from {len(results)} phones -> {out_dir}")
    return 0


# ---------------------------------------------------------------------------
# backtest / sweep-k
# ---------------------------------------------------------------------------

def _default_s_apps(args) -> tuple[str, ...]:
    if args.s_apps:
        apps = tuple(json.loads(Path(args.s_apps).read_text()))
        if not apps:
            raise PCachError(f"empty pre-cachable app list in {args.s_apps}")
        return apps
    return reference_config().pcachable_apps


def _backtest_one(job):
    path, kind, k, slot_minutes, rounds, split, seed, utc_offset_s, s_apps = job
    trace = read_trace(Path(path))
    config = PCachConfig(
        k=k, s_apps=tuple(s_apps), slot_minutes=slot_minutes,
        predictor_kind=PredictorKind(kind), adaboost_rounds=rounds,
    )
    report = backtest(trace, config, split=split, seed=seed,
                      utc_offset_s=utc_offset_s)
    out = report.to_dict()
    out["_models"] = {
        "cut": report.cut_model_json,
        "resume": report.resume_model_json,
    }
    return out


def cmd_backtest(args) -> int:
    out_dir = Path(args.out)
    out_dir.mkdir(parents=True, exist_ok=True)
    s_apps = _default_s_apps(args)
    jobs = [(str(p), args.predictor, args.k, args.slot_minutes, args.rounds,
             args.split, args.seed if args.seed is not None else 0,
             args.local_utc_offset, s_apps)
            for p in _trace_paths(args.traces)]
    reports = sorted(_parallel_map(_backtest_one, jobs), key=lambda r: r["phone_id"])

    outputs = []
    if args.predictor == "adaboost":
        model_dir = out_dir / "models"
        model_dir.mkdir(exist_ok=True)
        for r in reports:
            for kind in ("cut", "resume"):
                blob = r["_models"][kind]
                if blob:
                    name = f"models/{r['phone_id']}.{kind}.json"
                    (out_dir / name).write_text(blob + "\n")
                    outputs.append(name)
    for r in reports:
        r.pop("_models")

    def macro(which):
        rates = []
        for r in reports:
            c = r[which]
            if c["tpr"] is not None:
                rates.append((c["tpr"], c["fpr"]))
        if not rates:
            return None
        tpr = float(np.mean([t for t, _ in rates]))
        fpr = float(np.mean([f for _, f in rates]))
        return {"tpr": tpr, "fpr": fpr, "quality_gap": quality_gap(tpr, fpr)}

    summary = {
        "predictor": args.predictor,
        "k": args.k,
        "phones": len(reports),
        "macro_cut": macro("cut"),
        "macro_resume": macro("resume"),
        "macro_apps": macro("apps"),
    }
    _write_json(out_dir / "reports.json", reports)
    _write_json(out_dir / "summary.json", summary)
    outputs += ["reports.json", "summary.json"]
    _write_manifest(out_dir, "backtest", {
        "traces": args.traces,
        "out": args.out,
        "predictor": args.predictor,
        "k": args.k,
        "rounds": args.rounds,
        "split": args.split,
        "seed": args.seed if args.seed is not None else 0,
        "slot_minutes": args.slot_minutes,
        "local_utc_offset": args.local_utc_offset,
        "s_apps_file": args.s_apps,
    }, outputs)
    print(f"backtest[{args.predictor}]: {len(reports)} phones -> {out_dir}")
    return 0


def _sweep_one(job):
    path, s_apps, ks, slot_minutes, train_days, utc_offset_s = job
    trace = read_trace(Path(path))
    run = app_prediction_run(trace, tuple(s_apps), ks, slot_minutes=slot_minutes,
                             train_days=train_days, utc_offset_s=utc_offset_s)
    out = {"phone_id": trace.phone_id, "scored": run.scored_gaps,
           "skipped": run.skipped_gaps, "counts": {}}
    for k, c in run.counts_by_k.items():
        out["counts"][str(k)] = c.to_dict()
    return out


def cmd_sweep_k(args) -> int:
    out_dir = Path(args.out)
    out_dir.mkdir(parents=True, exist_ok=True)
    s_apps = _default_s_apps(args)
    ks = _parse_int_list(args.ks)
    feasible = [k for k in ks if 1 <= k <= len(s_apps)]
    skipped_ks = [k for k in ks if k not in feasible]
    if not feasible:
        raise PCachError(f"no feasible K values in {ks} for {len(s_apps)} apps")
    jobs = [(str(p), s_apps, feasible, args.slot_minutes, args.train_days,
             args.local_utc_offset) for p in _trace_paths(args.traces)]
    results = sorted(_parallel_map(_sweep_one, jobs), key=lambda r: r["phone_id"])

    rows = []
    for k in feasible:
        rates = []
        for r in results:
            c = r["counts"][str(k)]
            if c["tp"] + c["fn"] > 0 and c["fp"] + c["tn"] > 0:
                rates.append((c["tp"] / (c["tp"] + c["fn"]),
                              c["fp"] / (c["fp"] + c["tn"])))
        if not rates:
            continue
        tpr = float(np.mean([t for t, _ in rates]))
        fpr = float(np.mean([f for _, f in rates]))
        rows.append([k, f"{tpr:.6f}", f"{fpr:.6f}",
                     f"{quality_gap(tpr, fpr):.6f}", len(rates)])
    _write_csv(out_dir / "sweep_k.csv",
               ["k", "mean_tpr", "mean_fpr", "quality_gap", "phones"], rows)
    best = min(rows, key=lambda row: float(row[3])) if rows else None
    _write_json(out_dir / "summary.json", {
        "phones": len(results),
        "ks": feasible,
        "infeasible_ks": skipped_ks,
        "best_k": int(best[0]) if best else None,
        "best_quality_gap": float(best[3]) if best else None,
        "scored_gaps": sum(r["scored"] for r in results),
        "skipped_gaps": sum(r["skipped"] for r in results),
    })
    _write_manifest(out_dir, "sweep-k", {
        "traces": args.traces,
        "out": args.out,
        "ks": ks,
        "slot_minutes": args.slot_minutes,
        "train_days": args.train_days,
        "local_utc_offset": args.local_utc_offset,
        "s_apps_file": args.s_apps,
    }, ["sweep_k.csv", "summary.json"])
    print(f"sweep-k: {len(rows)} K values over {len(results)} phones -> {out_dir}")
    return 0


# ---------------------------------------------------------------------------
# parser
# ---------------------------------------------------------------------------

def _parse_int_list(text) -> list[int]:
    if isinstance(text, list):
        return text
    return [int(x) for x in str(text).split(",") if x.strip()]


def _add_common(p):
    p.add_argument("--slot-minutes", type=int, default=15,
                   help="slot-of-day length (default 15)")
    p.add_argument("--local-utc-offset", type=int, default=0, metavar="SECONDS",
                   help="fixed local-time offset applied to all traces")


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="pcach",
        description="WiFi-gap mining and pre-caching prediction toolkit",
    )
    parser.add_argument("--version", action="version", version=__version__)
    sub = parser.add_subparsers(dest="command", required=True)

    g = sub.add_parser("generate", help="write a synthetic trace corpus")
    g.add_argument("--phones", type=int, default=10)
    g.add_argument("--days", type=int, default=None)
    g.add_argument("--seed", type=int, default=None)
    g.add_argument("--config", default=None, help="generator config JSON file")
    g.add_argument("--format", choices=("jsonl", "csv"), default="jsonl")
    g.add_argument("--out", required=True)
    g.set_defaults(fn=cmd_generate)

    for name, fn, help_text in (
        ("mine", cmd_mine, "traffic split, gap CDF, event histograms, bound"),
        ("bound", cmd_bound, "pre-cache bound vs horizon only"),
    ):
        m = sub.add_parser(name, help=help_text)
        m.add_argument("--traces", required=True)
        m.add_argument("--out", required=True)
        m.add_argument("--horizons", default=",".join(str(h) for h in DEFAULT_HORIZONS_MIN),
                       help="comma-separated horizon minutes")
        _add_common(m)
        m.set_defaults(fn=fn)

    gp = sub.add_parser("gaps", help="per-phone WiFi gap listings")
    gp.add_argument("--traces", required=True)
    gp.add_argument("--out", required=True)
    _add_common(gp)
    gp.set_defaults(fn=cmd_gaps)

    b = sub.add_parser("backtest", help="chronological train/test evaluation")
    b.add_argument("--traces", required=True)
    b.add_argument("--out", required=True)
    b.add_argument("--predictor", choices=("history", "adaboost"), required=True)
    b.add_argument("--k", type=int, default=10)
    b.add_argument("--rounds", type=int, default=50, help="boosting rounds")
    b.add_argument("--split", type=float, default=None,
                   help="train fraction (defaults: history 7 days, adaboost 0.5)")
    b.add_argument("--seed", type=int, default=None)
    b.add_argument("--s-apps", default=None,
                   help="JSON file with the pre-cachable app list")
    _add_common(b)
    b.set_defaults(fn=cmd_backtest)

    s = sub.add_parser("sweep-k", help="quality-gap vs K sweep on true gaps")
    s.add_argument("--traces", required=True)
    s.add_argument("--out", required=True)
    s.add_argument("--ks", default=",".join(str(k) for k in PAPER_K_SET))
    s.add_argument("--train-days", type=float, default=7.0)
    s.add_argument("--s-apps", default=None,
                   help="JSON file with the pre-cachable app list")
    _add_common(s)
    s.set_defaults(fn=cmd_sweep_k)

    return parser


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        return args.fn(args)
    except PCachError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2
    except OSError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2


if __name__ == "__main__":
    sys.exit(main())
