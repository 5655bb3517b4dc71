"""Model evaluation, match-rate estimation, and the cross-country grid.

Class naming follows the results-table convention: class1 is the unmatched
pairs (stored label 0) and class2 the matched pairs (stored label 1). The
0/1 storage codes never change; only reporting uses the class1/class2 names.
"""

import csv
from dataclasses import dataclass, field
from typing import Optional

import numpy as np

from .blocking import FEATURE_NAMES, CandidatePair
from .errors import ConfigError
from .records import COUNTRY_ORDER, Country, PlaceTable
from .trees import LabeledPair, ModelKind, SplitSpec, TreeModel, pairs_to_xy, split_train_test, train_model

METRICS_CSV_COLUMNS = (
    "dataset",
    "model_kind",
    "regime",
    "n",
    "tn",
    "fp",
    "fn",
    "tp",
    "accuracy",
    "precision_class1",
    "recall_class1",
    "f1_class1",
    "precision_class2",
    "recall_class2",
    "f1_class2",
    "zero_division",
)


@dataclass
class MetricsReport:
    dataset: str
    model_kind: str
    n: int
    tn: int
    fp: int
    fn: int
    tp: int
    accuracy: float
    precision_class1: float
    recall_class1: float
    f1_class1: float
    precision_class2: float
    recall_class2: float
    f1_class2: float
    zero_division: list[str] = field(default_factory=list)
    regime: str = ""

    def row(self) -> list:
        return [
            self.dataset, self.model_kind, self.regime, self.n,
            self.tn, self.fp, self.fn, self.tp,
            f"{self.accuracy:.9g}",
            f"{self.precision_class1:.9g}", f"{self.recall_class1:.9g}", f"{self.f1_class1:.9g}",
            f"{self.precision_class2:.9g}", f"{self.recall_class2:.9g}", f"{self.f1_class2:.9g}",
            "|".join(self.zero_division),
        ]

    def summary(self) -> str:
        return (
            f"{self.dataset} {self.model_kind}{' ' + self.regime if self.regime else ''}: "
            f"acc={self.accuracy:.3f} "
            f"P1={self.precision_class1:.3f} R1={self.recall_class1:.3f} F1(1)={self.f1_class1:.3f} "
            f"P2={self.precision_class2:.3f} R2={self.recall_class2:.3f} F1(2)={self.f1_class2:.3f} "
            f"(n={self.n}, tn={self.tn} fp={self.fp} fn={self.fn} tp={self.tp})"
        )


def _safe_div(num: float, den: float, flag: str, flags: list[str]) -> float:
    if den == 0:
        flags.append(flag)
        return 0.0
    return num / den


def evaluate(model: TreeModel, test: list[LabeledPair], dataset: str = "", regime: str = "") -> MetricsReport:
    """Exact confusion counts and per-class precision/recall/F1."""
    if not test:
        raise ConfigError("test set is empty")
    x, y = pairs_to_xy(test)
    pred = model.predict_labels(x)
    y = y.astype(np.int64)
    tp = int(np.sum((pred == 1) & (y == 1)))
    tn = int(np.sum((pred == 0) & (y == 0)))
    fp = int(np.sum((pred == 1) & (y == 0)))
    fn = int(np.sum((pred == 0) & (y == 1)))
    flags: list[str] = []
    p1 = _safe_div(tn, tn + fn, "precision_class1", flags)
    r1 = _safe_div(tn, tn + fp, "recall_class1", flags)
    f1_1 = _safe_div(2 * p1 * r1, p1 + r1, "f1_class1", flags)
    p2 = _safe_div(tp, tp + fp, "precision_class2", flags)
    r2 = _safe_div(tp, tp + fn, "recall_class2", flags)
    f1_2 = _safe_div(2 * p2 * r2, p2 + r2, "f1_class2", flags)
    return MetricsReport(
        dataset=dataset,
        model_kind=model.kind.value,
        n=len(test),
        tn=tn, fp=fp, fn=fn, tp=tp,
        accuracy=(tp + tn) / len(test),
        precision_class1=p1, recall_class1=r1, f1_class1=f1_1,
        precision_class2=p2, recall_class2=r2, f1_class2=f1_2,
        zero_division=flags,
        regime=regime,
    )


@dataclass
class BestMatch:
    restaurant_id: str
    poi_id: str
    score: float


@dataclass
class MatchRateResult:
    rate: float
    n_restaurants: int
    n_matched: int
    best: list[BestMatch]


def match_rate(model: TreeModel, pairs: list[CandidatePair], restaurants: PlaceTable) -> MatchRateResult:
    """Fraction of restaurants with at least one predicted-matched POI.

    The denominator is every restaurant in the table, including those that
    lost all candidates during blocking/downsampling. For each matched
    restaurant the highest-scoring POI is reported (score ties break by
    ascending poi_id).
    """
    n_restaurants = len(restaurants)
    if not pairs:
        return MatchRateResult(0.0, n_restaurants, 0, [])
    x = np.stack([p.features.as_array() for p in pairs])
    scores = model.predict_scores(x)
    labels = scores >= 0.5
    best: dict[str, BestMatch] = {}
    for i, p in enumerate(pairs):
        if not labels[i]:
            continue
        cur = best.get(p.restaurant_id)
        cand = BestMatch(p.restaurant_id, p.poi_id, float(scores[i]))
        if cur is None or cand.score > cur.score or (cand.score == cur.score and cand.poi_id < cur.poi_id):
            best[p.restaurant_id] = cand
    matched = sorted(best.values(), key=lambda b: b.restaurant_id)
    rate = len(matched) / n_restaurants if n_restaurants else 0.0
    return MatchRateResult(rate, n_restaurants, len(matched), matched)


MERGED_REGIME = "MERGED"


def cross_country_experiment(
    per_country: dict[Country, list[LabeledPair]],
    model_kinds: list[ModelKind],
    seed: int = 0,
    split: Optional[SplitSpec] = None,
    params: Optional[dict] = None,
) -> list[MetricsReport]:
    """Train per-country and merged regimes; evaluate every regime on every
    country's held-out split.

    Each country is split once (same spec), the merged regime trains on the
    concatenated per-country training splits in fixed country order, and
    the report holds one row per (model, regime, eval-country) cell.
    """
    if len(per_country) < 2:
        raise ConfigError("cross-country experiment needs at least 2 countries")
    split = split or SplitSpec(seed=seed)
    params = params or {}
    countries = [c for c in COUNTRY_ORDER if c in per_country]
    splits = {c: split_train_test(per_country[c], split) for c in countries}
    regimes: dict[str, list[LabeledPair]] = {c.value: splits[c][0] for c in countries}
    merged_train: list[LabeledPair] = []
    for c in countries:
        merged_train.extend(splits[c][0])
    regimes[MERGED_REGIME] = merged_train
    reports = []
    for kind in model_kinds:
        for regime_name in [c.value for c in countries] + [MERGED_REGIME]:
            model = train_model(kind, regimes[regime_name], seed=seed, **params.get(kind.value, {}))
            for c in countries:
                reports.append(
                    evaluate(model, splits[c][1], dataset=c.value, regime=regime_name)
                )
    return reports


def feature_histograms(pairs: list[CandidatePair], n_bins: int = 40) -> dict[str, tuple[np.ndarray, np.ndarray]]:
    """Per-feature histogram (edges, counts) over a featurized pair set."""
    if not pairs:
        raise ConfigError("no pairs to histogram")
    x = np.stack([p.features.as_array() for p in pairs])
    out = {}
    for j, name in enumerate(FEATURE_NAMES):
        counts, edges = np.histogram(x[:, j], bins=n_bins)
        out[name] = (edges, counts)
    return out


def write_metrics_csv(path, reports: list[MetricsReport]) -> None:
    with open(path, "w", newline="", encoding="utf-8") as fh:
        writer = csv.writer(fh)
        writer.writerow(METRICS_CSV_COLUMNS)
        for r in reports:
            writer.writerow(r.row())


def write_metrics_summary(path, reports: list[MetricsReport]) -> None:
    with open(path, "w", encoding="utf-8") as fh:
        for r in reports:
            fh.write(r.summary() + "\n")


def write_histograms_csv(path, histograms: dict) -> None:
    with open(path, "w", newline="", encoding="utf-8") as fh:
        writer = csv.writer(fh)
        writer.writerow(["feature", "bin_lo", "bin_hi", "count"])
        for name, (edges, counts) in histograms.items():
            for i in range(counts.size):
                writer.writerow([name, f"{edges[i]:.9g}", f"{edges[i + 1]:.9g}", int(counts[i])])


def write_match_report_csv(path, result: MatchRateResult, restaurants: PlaceTable, pois: PlaceTable) -> None:
    """Predicted-match report: side-by-side names/streets plus distance."""
    r_by_id = restaurants.by_id()
    p_by_id = pois.by_id()
    with open(path, "w", newline="", encoding="utf-8") as fh:
        writer = csv.writer(fh)
        writer.writerow(
            ["restaurant_id", "poi_id", "name", "poi_name", "street", "poi_street", "score"]
        )
        for m in result.best:
            r = r_by_id[m.restaurant_id]
            p = p_by_id[m.poi_id]
            writer.writerow(
                [m.restaurant_id, m.poi_id, r.name_raw, p.name_raw,
                 r.street_raw or "", p.street_raw or "", f"{m.score:.9g}"]
            )
