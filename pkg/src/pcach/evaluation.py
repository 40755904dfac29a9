"""Ground-truth scoring, K sweeps and chronological backtests.

All scoring runs on the normalized timeline. Cut and resume prediction are
scored at slot level: a slot is positive when it contains at least one true
event. App prediction is scored per WiFi gap against the set of pre-cachable
apps that actually moved bytes over cellular during the gap; gaps whose
ground-truth set is empty are skipped and counted. Rates are macro-averaged
across phones.
"""

from __future__ import annotations

import dataclasses
import hashlib
import math
from bisect import bisect_left
from dataclasses import dataclass
from typing import Iterable, Optional, Sequence

import numpy as np

from .boosting import train_adaboost_xy
from .errors import (
    DataError,
    ParameterError,
    UndefinedRateError,
)
from .history import (
    EventKind,
    HistoryDB,
    extract_features,
    history_predict_event,
    predict_top_k_apps,
    update_history,
)
from .pipeline import PCachConfig, Predictor, PredictorKind, make_predictor
from .synth import stream_rng
from .trace import (
    ActiveNetwork,
    Trace,
    WiFiGap,
    derive_preferred_profile,
    detect_gaps,
    normalize_timeline,
)

DEFAULT_TRAIN_DAYS = 7.0
PAPER_K_SET = (1, 2, 3, 4, 5, 6, 7, 10, 15, 20, 25, 30)


@dataclass(frozen=True)
class ConfusionCounts:
    tp: int = 0
    fp: int = 0
    fn: int = 0
    tn: int = 0

    def __post_init__(self):
        if min(self.tp, self.fp, self.fn, self.tn) < 0:
            raise ParameterError("confusion counts must be non-negative")

    def __add__(self, other: "ConfusionCounts") -> "ConfusionCounts":
        return ConfusionCounts(self.tp + other.tp, self.fp + other.fp,
                               self.fn + other.fn, self.tn + other.tn)

    @property
    def total(self) -> int:
        return self.tp + self.fp + self.fn + self.tn

    def to_dict(self) -> dict:
        return {"tp": self.tp, "fp": self.fp, "fn": self.fn, "tn": self.tn}


@dataclass(frozen=True)
class RocPoint:
    tpr: float
    fpr: float
    parameter: float = 0.0

    def __post_init__(self):
        if not (0.0 <= self.tpr <= 1.0 and 0.0 <= self.fpr <= 1.0):
            raise ParameterError("rates must lie in [0, 1]")


def tpr_fpr(counts: ConfusionCounts) -> tuple[float, float]:
    """(TP/(TP+FN), FP/(FP+TN)); raises when either denominator is zero."""
    if counts.tp + counts.fn == 0 or counts.fp + counts.tn == 0:
        raise UndefinedRateError(
            f"rates undefined for counts {counts.to_dict()}"
        )
    return counts.tp / (counts.tp + counts.fn), counts.fp / (counts.fp + counts.tn)


def quality_gap(tpr: float, fpr: float) -> float:
    """Normalized Euclidean distance to the perfect-prediction corner.

    0 at (tpr=1, fpr=0), 1 at the antipodal corner; strictly better
    predictions score strictly lower.
    """
    if not (0.0 <= tpr <= 1.0 and 0.0 <= fpr <= 1.0):
        raise ParameterError("rates must lie in [0, 1]")
    return math.sqrt(fpr * fpr + (1.0 - tpr) * (1.0 - tpr)) / math.sqrt(2.0)


def score_app_prediction(
    predicted: Iterable[str],
    actually_used: Iterable[str],
    s_apps: Sequence[str],
) -> ConfusionCounts:
    """Set-level confusion of a pre-cache selection against actual gap usage.

    Ground truth is restricted to the pre-cachable universe ``s_apps``;
    predictions outside it are rejected.
    """
    universe = set(s_apps)
    p = set(predicted)
    if not p <= universe:
        raise ParameterError(
            f"predicted apps outside the pre-cachable set: {sorted(p - universe)}"
        )
    u = set(actually_used) & universe
    return ConfusionCounts(
        tp=len(p & u),
        fp=len(p - u),
        fn=len(u - p),
        tn=len(universe - (p | u)),
    )


# ---------------------------------------------------------------------------
# shared replay machinery
# ---------------------------------------------------------------------------

def _group_by_slot(samples, slot_s: int, utc_offset_s: int):
    """Consecutive (absolute_slot, [samples]) groups, chronological."""
    groups: list[tuple[int, list]] = []
    for s in samples:
        slot = (s.timestamp + utc_offset_s) // slot_s
        if groups and groups[-1][0] == slot:
            groups[-1][1].append(s)
        else:
            groups.append((slot, [s]))
    return groups


def _gap_used_apps(norm: Trace, gap: WiFiGap, universe: set[str]) -> frozenset[str]:
    """Pre-cachable apps that moved bytes on cellular during the gap."""
    ts = norm.timestamps()
    used = set()
    i = bisect_left(ts, gap.cut_time)
    while i < len(norm.samples):
        s = norm.samples[i]
        if s.active_network is not ActiveNetwork.CELLULAR:
            break
        if gap.resume_time is not None and s.timestamp >= gap.resume_time:
            break
        for rec in s.apps:
            if rec.total_bytes > 0 and rec.app_id in universe:
                used.add(rec.app_id)
        i += 1
    return frozenset(used)


@dataclass
class _Truth:
    """Ground-truth event structures of one normalized trace."""

    gaps: list[WiFiGap]
    cut_slots: set[int]
    resume_slots: set[int]
    gap_by_cut_slot: dict[int, WiFiGap]

    @classmethod
    def build(cls, norm: Trace, slot_s: int, utc_offset_s: int) -> "_Truth":
        gaps = detect_gaps(norm)
        cut_slots = set()
        resume_slots = set()
        by_slot: dict[int, WiFiGap] = {}
        for g in gaps:
            cs = (g.cut_time + utc_offset_s) // slot_s
            cut_slots.add(cs)
            by_slot.setdefault(cs, g)
            if g.resume_time is not None:
                resume_slots.add((g.resume_time + utc_offset_s) // slot_s)
        return cls(gaps, cut_slots, resume_slots, by_slot)


# ---------------------------------------------------------------------------
# oracle-gap app-prediction run (K sweeps)
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class AppPredictionRun:
    counts_by_k: dict[int, ConfusionCounts]
    scored_gaps: int
    skipped_gaps: int


def app_prediction_run(
    trace: Trace,
    s_apps: Sequence[str],
    ks: Sequence[int],
    slot_minutes: int = 15,
    train_days: float = DEFAULT_TRAIN_DAYS,
    utc_offset_s: int = 0,
) -> AppPredictionRun:
    """Score top-K app selection on ground-truth gaps (perfect gap oracle).

    The usage histogram warms up on the training prefix and keeps updating
    online; each test-period gap is scored for every K against the apps
    actually used during the gap. Gaps with empty ground truth or no resume
    are skipped and counted.
    """
    ks = sorted(set(ks))
    if not ks:
        raise ParameterError("ks must not be empty")
    if ks[0] < 1 or ks[-1] > len(s_apps):
        raise ParameterError(f"K values must lie in [1, {len(s_apps)}]")

    slot_s = slot_minutes * 60
    boundary = trace.start_time + int(train_days * 86400)
    train_samples = [s for s in trace.samples if s.timestamp < boundary]
    if not train_samples or boundary >= trace.end_time:
        raise DataError("trace too short for the training prefix")

    profile = derive_preferred_profile(
        Trace(trace.phone_id, tuple(train_samples), trace.nominal_period_s))
    norm = normalize_timeline(trace, profile)
    truth = _Truth.build(norm, slot_s, utc_offset_s)
    universe = set(s_apps)

    db = HistoryDB(slot_minutes, tracked_apps=s_apps, profile=profile,
                   utc_offset_s=utc_offset_s)
    counts = {k: ConfusionCounts() for k in ks}
    scored = skipped = 0

    groups = _group_by_slot(norm.samples, slot_s, utc_offset_s)
    for slot, slot_samples in groups:
        gap = truth.gap_by_cut_slot.get(slot)
        if gap is not None and gap.cut_time >= boundary:
            if gap.resume_time is None:
                skipped += 1
            else:
                used = _gap_used_apps(norm, gap, universe)
                if not used:
                    skipped += 1
                else:
                    last_slot = (gap.resume_time + utc_offset_s) // slot_s
                    for k in ks:
                        predicted = predict_top_k_apps(db, s_apps, k, slot, last_slot)
                        counts[k] = counts[k] + score_app_prediction(predicted, used, s_apps)
                    scored += 1
        update_history(db, slot_samples)
    return AppPredictionRun(counts_by_k=counts, scored_gaps=scored,
                            skipped_gaps=skipped)


@dataclass(frozen=True)
class KSweepPoint:
    k: int
    point: RocPoint
    quality_gap: float
    phones: int


def k_sweep(
    traces: Iterable[Trace],
    s_apps: Sequence[str],
    ks: Sequence[int] = PAPER_K_SET,
    slot_minutes: int = 15,
    train_days: float = DEFAULT_TRAIN_DAYS,
    utc_offset_s: int = 0,
) -> list[KSweepPoint]:
    """Macro-averaged (TPR, FPR) and quality gap per K over a corpus.

    Rates are computed per phone and averaged across phones; the quality gap
    is measured at the averaged point. Phones whose rates are undefined for
    a K are skipped for that K.
    """
    per_k: dict[int, list[tuple[float, float]]] = {k: [] for k in ks}
    n_traces = 0
    for trace in traces:
        n_traces += 1
        run = app_prediction_run(trace, s_apps, ks, slot_minutes=slot_minutes,
                                 train_days=train_days, utc_offset_s=utc_offset_s)
        for k, counts in run.counts_by_k.items():
            try:
                per_k[k].append(tpr_fpr(counts))
            except UndefinedRateError:
                continue
    if n_traces == 0:
        raise DataError("empty corpus")

    points = []
    for k in sorted(per_k):
        rates = per_k[k]
        if not rates:
            continue
        tpr = float(np.mean([r[0] for r in rates]))
        fpr = float(np.mean([r[1] for r in rates]))
        points.append(KSweepPoint(
            k=k,
            point=RocPoint(tpr=tpr, fpr=fpr, parameter=float(k)),
            quality_gap=quality_gap(tpr, fpr),
            phones=len(rates),
        ))
    return points


# ---------------------------------------------------------------------------
# full chronological backtest
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class ThresholdPoint:
    threshold: float
    train: ConfusionCounts
    test: ConfusionCounts

    def to_dict(self) -> dict:
        return {"threshold": self.threshold,
                "train": self.train.to_dict(), "test": self.test.to_dict()}


@dataclass(frozen=True)
class BacktestReport:
    phone_id: str
    predictor: str
    k: int
    slot_minutes: int
    split_index: int
    train_slots: int
    test_slots: int
    cut: ConfusionCounts
    resume: ConfusionCounts
    apps: ConfusionCounts
    scored_gaps: int
    skipped_gaps: int
    true_test_gaps: int
    predicted_cut_slots: int
    resume_evaluated: int
    resume_within_one: int
    trained_digest: str
    cut_model_json: Optional[str] = None
    resume_model_json: Optional[str] = None
    selected_cut_threshold: Optional[float] = None
    selected_resume_threshold: Optional[float] = None
    cut_panel: tuple[ThresholdPoint, ...] = ()

    def rates(self, which: str) -> tuple[float, float]:
        return tpr_fpr(getattr(self, which))

    def to_dict(self) -> dict:
        def safe_rates(counts):
            try:
                t, f = tpr_fpr(counts)
                return {"tpr": t, "fpr": f, "quality_gap": quality_gap(t, f)}
            except UndefinedRateError:
                return {"tpr": None, "fpr": None, "quality_gap": None}

        return {
            "phone_id": self.phone_id,
            "predictor": self.predictor,
            "k": self.k,
            "slot_minutes": self.slot_minutes,
            "split_index": self.split_index,
            "train_slots": self.train_slots,
            "test_slots": self.test_slots,
            "cut": {**self.cut.to_dict(), **safe_rates(self.cut)},
            "resume": {**self.resume.to_dict(), **safe_rates(self.resume)},
            "apps": {**self.apps.to_dict(), **safe_rates(self.apps)},
            "scored_gaps": self.scored_gaps,
            "skipped_gaps": self.skipped_gaps,
            "true_test_gaps": self.true_test_gaps,
            "predicted_cut_slots": self.predicted_cut_slots,
            "resume_evaluated": self.resume_evaluated,
            "resume_within_one": self.resume_within_one,
            "trained_digest": self.trained_digest,
            "selected_cut_threshold": self.selected_cut_threshold,
            "selected_resume_threshold": self.selected_resume_threshold,
            "cut_panel": [p.to_dict() for p in self.cut_panel],
        }


def _split_index(trace: Trace, config: PCachConfig, split: Optional[float]) -> int:
    n = len(trace.samples)
    if split is not None:
        if not 0.0 < split < 1.0:
            raise ParameterError("split ratio must lie in (0, 1)")
        idx = int(n * split)
    elif config.predictor_kind is PredictorKind.HISTORY:
        boundary = trace.start_time + int(DEFAULT_TRAIN_DAYS * 86400)
        idx = bisect_left(trace.timestamps(), boundary)
    else:
        idx = n // 2
    if idx <= 0 or idx >= n:
        raise DataError("split leaves an empty train or test period")
    return idx


def _train_feature_pass(norm_train, db: HistoryDB, slot_s, utc_offset_s,
                        truth: _Truth, last_train_slot: int):
    """Per-slot features/labels over the training period.

    Features use the training period's final histograms (frozen), so the
    classifier trains on the probability estimates it will actually see;
    nothing from the test period is touched.
    """
    view = HistoryDB(db.slot_minutes, tracked_apps=(), profile=db.profile,
                     utc_offset_s=utc_offset_s)
    view.cut_hist = db.cut_hist
    view.resume_hist = db.resume_hist
    view.slot_observations = db.slot_observations

    rows_cut, y_cut, rows_res, y_res, target_slots = [], [], [], [], []
    for slot, slot_samples in _group_by_slot(norm_train, slot_s, utc_offset_s):
        view.recent_samples.extend(slot_samples)
        target = slot + 1
        if target > last_train_slot:
            break
        now = slot_samples[-1].timestamp
        fv_cut = extract_features(view, target, now, EventKind.CUT)
        fv_res = extract_features(view, target, now, EventKind.RESUME)
        rows_cut.append(fv_cut.as_array())
        rows_res.append(fv_res.as_array())
        y_cut.append(1 if target in truth.cut_slots else -1)
        y_res.append(1 if target in truth.resume_slots else -1)
        target_slots.append(target)
    return (np.array(rows_cut), np.array(y_cut),
            np.array(rows_res), np.array(y_res), target_slots)


def _history_reference(db: HistoryDB, target_slots, kind: EventKind,
                       truth_slots: set[int], n_draws, delta, rng) -> ConfusionCounts:
    """Train-period confusion of the history rule on the frozen histograms."""
    tp = fp = fn = tn = 0
    for target in target_slots:
        p = db.event_probability(target, kind)
        fired = history_predict_event(p, n_draws, delta, rng)
        positive = target in truth_slots
        if fired and positive:
            tp += 1
        elif fired:
            fp += 1
        elif positive:
            fn += 1
        else:
            tn += 1
    return ConfusionCounts(tp, fp, fn, tn)


def _threshold_candidates(margins: np.ndarray, max_points: int = 48) -> list[float]:
    uniq = np.unique(margins)
    mids = (uniq[1:] + uniq[:-1]) / 2.0
    if mids.size > max_points:
        idx = np.linspace(0, mids.size - 1, max_points).round().astype(int)
        mids = mids[np.unique(idx)]
    lo = float(uniq[0]) - 1.0
    hi = float(uniq[-1]) + 1.0
    return [lo] + [float(m) for m in mids] + [0.0, hi]


def _margin_counts(margins: np.ndarray, labels: np.ndarray, threshold: float) -> ConfusionCounts:
    pred = margins > threshold
    pos = labels > 0
    return ConfusionCounts(
        tp=int(np.sum(pred & pos)),
        fp=int(np.sum(pred & ~pos)),
        fn=int(np.sum(~pred & pos)),
        tn=int(np.sum(~pred & ~pos)),
    )


RECALL_MARGIN = 0.05


def _select_threshold(margins, labels, reference: ConfusionCounts) -> float:
    """Lowest-FPR train threshold that beats the reference recall.

    The target recall carries a small safety margin so the operating point
    still clears the reference out of sample; when no candidate reaches it,
    the highest-recall threshold wins. Selection uses training data only.
    """
    try:
        ref_tpr, _ = tpr_fpr(reference)
    except UndefinedRateError:
        ref_tpr = 0.0
    target = min(1.0, ref_tpr + RECALL_MARGIN)
    best = None      # (fpr, -tpr, threshold)
    fallback = None  # (-tpr, fpr, threshold)
    for theta in _threshold_candidates(margins):
        counts = _margin_counts(margins, labels, theta)
        try:
            tpr, fpr = tpr_fpr(counts)
        except UndefinedRateError:
            continue
        if tpr >= target and (best is None or (fpr, -tpr, theta) < best):
            best = (fpr, -tpr, theta)
        if fallback is None or (-tpr, fpr, theta) < fallback:
            fallback = (-tpr, fpr, theta)
    if best is not None:
        return best[2]
    if fallback is not None:
        return fallback[2]
    return 0.0


def backtest(
    trace: Trace,
    config: PCachConfig,
    split: Optional[float] = None,
    seed: int = 0,
    utc_offset_s: int = 0,
    predictor_override: Optional[Predictor] = None,
) -> BacktestReport:
    """Chronological train/test replay of the full pre-caching pipeline.

    The preferred-network profile, histograms, boosted models and operating
    thresholds all come from the training period alone; the test period is
    replayed slot by slot with online history updates and no lookahead.
    """
    slot_s = config.slot_minutes * 60
    if trace.end_time - trace.start_time < 2 * 86400:
        raise DataError("trace shorter than two days")
    idx = _split_index(trace, config, split)

    train_slice = Trace(trace.phone_id, trace.samples[:idx], trace.nominal_period_s)
    profile = derive_preferred_profile(train_slice, utc_offset_s=utc_offset_s)
    norm = normalize_timeline(trace, profile)
    norm_train = norm.samples[:idx]
    norm_test = norm.samples[idx:]
    truth = _Truth.build(norm, slot_s, utc_offset_s)
    universe = set(config.s_apps)

    db = HistoryDB(config.slot_minutes, tracked_apps=config.s_apps,
                   profile=profile, utc_offset_s=utc_offset_s)
    update_history(db, norm_train)

    last_train_slot = (norm_train[-1].timestamp + utc_offset_s) // slot_s
    last_test_slot = (norm_test[-1].timestamp + utc_offset_s) // slot_s

    cut_model = resume_model = None
    sel_cut_thr = sel_res_thr = None
    cut_margins_train = cut_labels_train = None
    predictor = predictor_override
    if predictor is None and config.predictor_kind is PredictorKind.ADABOOST:
        X_cut, y_cut, X_res, y_res, target_slots = _train_feature_pass(
            norm_train, db, slot_s, utc_offset_s, truth, last_train_slot)
        cut_model = train_adaboost_xy(X_cut, y_cut, rounds=config.adaboost_rounds)
        resume_model = train_adaboost_xy(X_res, y_res, rounds=config.adaboost_rounds)

        rng_ref = stream_rng(seed, trace.phone_id, 0, "train-reference")
        ref_cut = _history_reference(db, target_slots, EventKind.CUT,
                                     truth.cut_slots, config.n_draws,
                                     config.delta, rng_ref)
        ref_res = _history_reference(db, target_slots, EventKind.RESUME,
                                     truth.resume_slots, config.n_draws,
                                     config.delta, rng_ref)
        cut_margins_train = cut_model.decision_margins(X_cut)
        cut_labels_train = y_cut
        sel_cut_thr = _select_threshold(cut_margins_train, y_cut, ref_cut)
        sel_res_thr = _select_threshold(resume_model.decision_margins(X_res),
                                        y_res, ref_res)
        cut_model = dataclasses.replace(cut_model, decision_threshold=sel_cut_thr,
                                        training_log=())
        resume_model = dataclasses.replace(resume_model, decision_threshold=sel_res_thr,
                                           training_log=())
        config = dataclasses.replace(config, cut_model=cut_model,
                                     resume_model=resume_model)
        predictor = make_predictor(config)
    elif predictor is None:
        predictor = make_predictor(config)

    digest_parts = [db.to_json()]
    if cut_model is not None:
        digest_parts += [cut_model.to_json(), resume_model.to_json()]
    trained_digest = hashlib.sha256("\n".join(digest_parts).encode()).hexdigest()

    rng_test = stream_rng(seed, trace.phone_id, 0, "test-replay")

    cut_counts = ConfusionCounts()
    resume_counts = ConfusionCounts()
    app_counts = ConfusionCounts()
    scored = skipped = 0
    predicted_cut_slots = 0
    resume_eval = resume_hits = 0
    test_margins_cut = []
    test_labels_cut = []
    n_pred_slots = 0

    groups = _group_by_slot(norm_test, slot_s, utc_offset_s)
    for slot, slot_samples in groups:
        update_history(db, slot_samples)
        target = slot + 1
        if target > last_test_slot:
            continue
        now = db.last_timestamp
        n_pred_slots += 1

        cut_truth = target in truth.cut_slots
        resume_truth = target in truth.resume_slots
        cut_pred = predictor.predict_cut(db, target, now, rng_test)
        resume_pred = _slot_resume_pred(predictor, db, target, now, rng_test)
        if cut_model is not None:
            fv = extract_features(db, target, now, EventKind.CUT)
            test_margins_cut.append(float(cut_model.decision_margins(
                fv.as_array()[None, :])[0]))
            test_labels_cut.append(1 if cut_truth else -1)

        cut_counts = cut_counts + ConfusionCounts(
            tp=int(cut_pred and cut_truth), fp=int(cut_pred and not cut_truth),
            fn=int(cut_truth and not cut_pred), tn=int(not cut_pred and not cut_truth))
        resume_counts = resume_counts + ConfusionCounts(
            tp=int(resume_pred and resume_truth), fp=int(resume_pred and not resume_truth),
            fn=int(resume_truth and not resume_pred), tn=int(not resume_pred and not resume_truth))

        if not cut_pred:
            continue
        predicted_cut_slots += 1
        rslt = predictor.predict_resume(db, slot, now, rng_test)
        rslt = max(rslt, target)
        predicted_apps = predict_top_k_apps(db, config.s_apps, config.k, target, rslt)

        gap = truth.gap_by_cut_slot.get(target) if cut_truth else None
        if gap is None:
            continue
        if gap.resume_time is None:
            skipped += 1  # open gap: the ground-truth window never closed
            continue
        used = _gap_used_apps(norm, gap, universe)
        if not used:
            skipped += 1
        else:
            app_counts = app_counts + score_app_prediction(predicted_apps, used,
                                                           config.s_apps)
            scored += 1
        resume_eval += 1
        true_resume_slot = (gap.resume_time + utc_offset_s) // slot_s
        if abs(rslt - true_resume_slot) <= 1:
            resume_hits += 1

    panel = ()
    if cut_model is not None and cut_margins_train is not None:
        tm = np.array(test_margins_cut)
        tl = np.array(test_labels_cut)
        panel = tuple(
            ThresholdPoint(
                threshold=theta,
                train=_margin_counts(cut_margins_train, cut_labels_train, theta),
                test=_margin_counts(tm, tl, theta) if tm.size else ConfusionCounts(),
            )
            for theta in _threshold_candidates(cut_margins_train)
        )

    true_test_gaps = sum(
        1 for g in truth.gaps
        if g.cut_time >= norm_test[0].timestamp
    )
    return BacktestReport(
        phone_id=trace.phone_id,
        predictor=config.predictor_kind.value if predictor_override is None else "override",
        k=config.k,
        slot_minutes=config.slot_minutes,
        split_index=idx,
        train_slots=len(_group_by_slot(norm_train, slot_s, utc_offset_s)),
        test_slots=n_pred_slots,
        cut=cut_counts,
        resume=resume_counts,
        apps=app_counts,
        scored_gaps=scored,
        skipped_gaps=skipped,
        true_test_gaps=true_test_gaps,
        predicted_cut_slots=predicted_cut_slots,
        resume_evaluated=resume_eval,
        resume_within_one=resume_hits,
        trained_digest=trained_digest,
        cut_model_json=cut_model.to_json() if cut_model else None,
        resume_model_json=resume_model.to_json() if resume_model else None,
        selected_cut_threshold=sel_cut_thr,
        selected_resume_threshold=sel_res_thr,
        cut_panel=panel,
    )


def _slot_resume_pred(predictor, db, target, now, rng) -> bool:
    """Standalone next-slot resume prediction for slot-level scoring."""
    if hasattr(predictor, "resume_model") and predictor.resume_model is not None:
        from .boosting import adaboost_predict

        fv = extract_features(db, target, now, EventKind.RESUME)
        label, _ = adaboost_predict(predictor.resume_model, fv)
        return label > 0
    if hasattr(predictor, "n_draws"):
        p = db.event_probability(target, EventKind.RESUME)
        return history_predict_event(p, predictor.n_draws, predictor.delta, rng)
    # stub predictors: reuse the cut interface on resume semantics is
    # meaningless, so report no prediction
    return False


def macro_average(reports: Sequence[BacktestReport], which: str = "cut") -> RocPoint:
    """Across-phone mean of per-phone rates; phones with undefined rates drop."""
    rates = []
    for r in reports:
        try:
            rates.append(r.rates(which))
        except UndefinedRateError:
            continue
    if not rates:
        raise UndefinedRateError("no phone produced defined rates")
    return RocPoint(
        tpr=float(np.mean([t for t, _ in rates])),
        fpr=float(np.mean([f for _, f in rates])),
    )
