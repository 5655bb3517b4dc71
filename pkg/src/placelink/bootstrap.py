"""Three-step bootstrap labeling workflow and its persistent label store.

Step 1 samples an initial batch for blind manual labeling. Step 2 trains a
decision tree on everything labeled so far and runs it over a fresh sample:
predicted matches queue up for human rectification, predicted non-matches
are auto-accepted as negatives. Step 3 is the human pass over the queue.

All mutations append one JSONL event to an audit log; replaying the log
against the same candidate pool reconstructs the exact state, which is also
the crash-recovery story. Sampling events carry their seed so the pending
queue (a deterministic function of seed + labeled set) can be rebuilt
without persisting it.
"""

import csv
import json
import os
import time
import warnings
from dataclasses import dataclass
from pathlib import Path
from typing import Optional

import numpy as np

from .blocking import CandidatePair, FeatureVector
from .errors import AlreadyLabeledError, PlacelinkError, StateError, UnknownPairError
from .trees import LabeledPair, LabelSource, Provenance, train_decision_tree

_EXPORT_COLUMNS = (
    "restaurant_id",
    "poi_id",
    "geo_distance_m",
    "name_lev",
    "name_jaro",
    "street_lev",
    "label",
    "provenance",
)


@dataclass
class PendingItem:
    pair: CandidatePair
    predicted_label: Optional[int]
    score: Optional[float]
    round_added: int


def _provenance_for(source: LabelSource, label: int, predicted: Optional[int]) -> Provenance:
    if source == LabelSource.HUMAN_INITIAL:
        return Provenance.INITIAL_MANUAL
    if source == LabelSource.MODEL_CONFIRMED:
        return Provenance.BOOTSTRAP_CONFIRMED
    # human rectification: confirmed when it agrees with the model
    if predicted is not None and label != predicted:
        return Provenance.BOOTSTRAP_RECTIFIED
    return Provenance.BOOTSTRAP_CONFIRMED


class AnnotationState:
    """Single-writer annotation state over a fixed candidate pool."""

    def __init__(self, pool: list[CandidatePair], audit_path=None):
        self.pool: dict[str, CandidatePair] = {}
        for p in pool:
            if p.features is None:
                raise StateError(f"pool pair {p.pair_id} has no features")
            if p.pair_id in self.pool:
                raise StateError(f"duplicate pair id in pool: {p.pair_id}")
            self.pool[p.pair_id] = p
        self.labeled: dict[str, LabeledPair] = {}
        self.pending: dict[str, PendingItem] = {}
        self.round = 0
        self._audit_path = Path(audit_path) if audit_path is not None else None
        self._audit_fh = None

    # -- audit log ---------------------------------------------------------

    def _log(self, op: str, pair_id=None, label=None, source=None, **extra):
        if self._audit_path is None:
            return
        if self._audit_fh is None:
            self._audit_fh = open(self._audit_path, "a", encoding="utf-8")
        event = {"ts": time.time(), "op": op, "pair_id": pair_id, "label": label,
                 "source": source, "round": self.round}
        event.update(extra)
        self._audit_fh.write(json.dumps(event) + "\n")
        self._audit_fh.flush()
        os.fsync(self._audit_fh.fileno())

    def close(self):
        if self._audit_fh is not None:
            self._audit_fh.close()
            self._audit_fh = None

    # -- queries -----------------------------------------------------------

    def available_ids(self) -> list[str]:
        return [pid for pid in self.pool if pid not in self.labeled and pid not in self.pending]

    def stats(self) -> dict:
        n1 = sum(1 for lp in self.labeled.values() if lp.label == 1)
        return {
            "round": self.round,
            "labeled": len(self.labeled),
            "pending": len(self.pending),
            "pool": len(self.pool),
            "matched_fraction": (n1 / len(self.labeled)) if self.labeled else 0.0,
        }

    def rectify_queue(self, limit: Optional[int] = None) -> list[PendingItem]:
        items = [it for it in self.pending.values() if it.predicted_label == 1]
        return items if limit is None else items[:limit]

    # -- operations --------------------------------------------------------

    def sample_initial(self, n: int = 500, seed: int = 0) -> list[PendingItem]:
        if self.round != 0 or self.labeled or self.pending:
            raise StateError("sample_initial requires a fresh state (round 0, nothing labeled)")
        batch = self._sample(n, seed)
        self._log("sample_initial", n=n, seed=seed, actual=len(batch))
        return self._enqueue(batch, None, None)

    def _sample(self, n: int, seed: int) -> list[str]:
        ids = self.available_ids()
        if len(ids) < n:
            warnings.warn(
                f"requested {n} samples but only {len(ids)} pairs are available; taking all",
                stacklevel=3,
            )
            n = len(ids)
        perm = np.random.default_rng(seed).permutation(len(ids))
        return [ids[int(i)] for i in perm[:n]]

    def _enqueue(self, pair_ids, predictions, scores) -> list[PendingItem]:
        items = []
        for k, pid in enumerate(pair_ids):
            item = PendingItem(
                pair=self.pool[pid],
                predicted_label=None if predictions is None else int(predictions[k]),
                score=None if scores is None else float(scores[k]),
                round_added=self.round,
            )
            self.pending[pid] = item
            items.append(item)
        return items

    def record_label(self, pair_id: str, label: int, source: LabelSource) -> LabeledPair:
        lp = self._apply_label(pair_id, label, source)
        self._log("label", pair_id=pair_id, label=label, source=source.value)
        return lp

    def _apply_label(self, pair_id: str, label: int, source: LabelSource) -> LabeledPair:
        if label not in (0, 1):
            raise StateError(f"label must be 0 or 1, got {label!r}")
        if pair_id not in self.pool:
            raise UnknownPairError(f"unknown pair id {pair_id!r}")
        if pair_id in self.labeled:
            raise AlreadyLabeledError(f"pair {pair_id!r} is already labeled")
        pending = self.pending.get(pair_id)
        if source == LabelSource.MODEL_CONFIRMED:
            if pending is not None:
                raise StateError(f"pair {pair_id!r} awaits human action; cannot auto-label")
        elif pending is None:
            raise StateError(f"pair {pair_id!r} is not pending")
        elif source == LabelSource.HUMAN_INITIAL and pending.predicted_label is not None:
            raise StateError(f"pair {pair_id!r} has a model prediction; rectify it instead")
        elif source == LabelSource.HUMAN_RECTIFY and pending.predicted_label is None:
            raise StateError(f"pair {pair_id!r} has no model prediction to rectify")
        predicted = pending.predicted_label if pending is not None else None
        lp = LabeledPair(
            pair=self.pool[pair_id],
            label=label,
            provenance=_provenance_for(source, label, predicted),
            source=source,
        )
        self.labeled[pair_id] = lp
        self.pending.pop(pair_id, None)
        return lp

    def rectify(self, pair_id: str, corrected_label: int) -> LabeledPair:
        return self.record_label(pair_id, corrected_label, LabelSource.HUMAN_RECTIFY)

    def bootstrap_round(self, n: int = 2000, seed: int = 0, tree_params: Optional[dict] = None) -> dict:
        """Train on current labels, then triage a fresh sample.

        Returns {"auto_negatives": ..., "queued_for_rectify": ...}.
        """
        tree_params = tree_params or {}
        summary = self._round_core(n, seed, tree_params, auto_label=True, log=True)
        return summary

    def _round_core(self, n, seed, tree_params, auto_label: bool, log: bool) -> dict:
        labels = {lp.label for lp in self.labeled.values()}
        if labels != {0, 1}:
            raise StateError(
                "bootstrap round needs both classes in the labeled set; "
                f"have labels {sorted(labels)} over {len(self.labeled)} pairs"
            )
        train = [self.labeled[pid] for pid in sorted(self.labeled)]
        model = train_decision_tree(train, **tree_params)
        batch = self._sample(n, seed)
        self.round += 1
        if log:
            self._log("bootstrap_round", n=n, seed=seed, actual=len(batch),
                      tree_params=tree_params)
        if not batch:
            return {"auto_negatives": 0, "queued_for_rectify": 0}
        x = np.stack([self.pool[pid].features.as_array() for pid in batch])
        scores = model.predict_scores(x)
        predicted = (scores >= 0.5).astype(np.int64)
        matched_ids = [pid for k, pid in enumerate(batch) if predicted[k] == 1]
        matched_scores = [float(scores[k]) for k in range(len(batch)) if predicted[k] == 1]
        self._enqueue(matched_ids, [1] * len(matched_ids), matched_scores)
        auto = 0
        if auto_label:
            for k, pid in enumerate(batch):
                if predicted[k] == 0:
                    self.record_label(pid, 0, LabelSource.MODEL_CONFIRMED)
                    auto += 1
        return {"auto_negatives": auto, "queued_for_rectify": len(matched_ids)}

    def export_labeled(self, path) -> None:
        """Write the labeled set as CSV, sorted by pair id."""
        try:
            with open(path, "w", newline="", encoding="utf-8") as fh:
                writer = csv.writer(fh)
                writer.writerow(_EXPORT_COLUMNS)
                for pid in sorted(self.labeled):
                    lp = self.labeled[pid]
                    f = lp.pair.features
                    writer.writerow(
                        [
                            lp.pair.restaurant_id,
                            lp.pair.poi_id,
                            f"{f.geo_distance_m:.9g}",
                            f"{f.name_lev:.9g}",
                            f"{f.name_jaro:.9g}",
                            f"{f.street_lev:.9g}",
                            lp.label,
                            lp.provenance.value,
                        ]
                    )
        except OSError as e:
            raise PlacelinkError(f"cannot write labeled export {path}: {e}") from e


def replay_audit_log(pool: list[CandidatePair], audit_path) -> AnnotationState:
    """Rebuild annotation state by replaying the audit log from empty.

    Label events apply mechanically; sampling events recompute their batch
    (and, for bootstrap rounds, retrain and re-predict) from the logged
    seeds, which is deterministic given the labeled set at that point.
    """
    audit_path = Path(audit_path)
    state = AnnotationState(pool, audit_path=None)
    with open(audit_path, encoding="utf-8") as fh:
        for line_no, raw in enumerate(fh, start=1):
            raw = raw.strip()
            if not raw:
                continue
            try:
                event = json.loads(raw)
                op = event["op"]
            except (json.JSONDecodeError, KeyError) as e:
                raise StateError(f"corrupt audit log {audit_path}:{line_no}: {e}") from None
            try:
                if op == "sample_initial":
                    batch = state._sample(event["n"], event["seed"])
                    state._enqueue(batch, None, None)
                elif op == "bootstrap_round":
                    state._round_core(
                        event["n"], event["seed"], event.get("tree_params") or {},
                        auto_label=False, log=False,
                    )
                elif op == "label":
                    state._apply_label(event["pair_id"], event["label"], LabelSource(event["source"]))
                else:
                    raise StateError(f"unknown op {op!r}")
            except (PlacelinkError, KeyError, ValueError, TypeError) as e:
                raise StateError(f"audit replay failed at {audit_path}:{line_no}: {e!r}") from e
    # subsequent mutations append after the replayed prefix
    state._audit_path = audit_path
    return state


def export_columns() -> tuple:
    return _EXPORT_COLUMNS


def load_labeled(path) -> list[LabeledPair]:
    """Read a labeled export back for training/evaluation.

    The street_missing flag is not part of the export schema; re-loaded
    pairs carry street_missing=False, which no model consults.
    """
    from .errors import LoadError

    path = Path(path)
    if not path.exists():
        raise LoadError(path, 0, "file does not exist")
    out = []
    with open(path, newline="", encoding="utf-8") as fh:
        reader = csv.DictReader(fh)
        if reader.fieldnames is None or tuple(reader.fieldnames) != _EXPORT_COLUMNS:
            raise LoadError(path, 1, f"expected columns {_EXPORT_COLUMNS}, got {reader.fieldnames}")
        for line, row in enumerate(reader, start=2):
            try:
                features = FeatureVector(
                    float(row["geo_distance_m"]),
                    float(row["name_lev"]),
                    float(row["name_jaro"]),
                    float(row["street_lev"]),
                    False,
                )
                label = int(row["label"])
                provenance = Provenance(row["provenance"])
            except (ValueError, KeyError):
                raise LoadError(path, line, "bad labeled row") from None
            pair = CandidatePair(row["restaurant_id"], row["poi_id"], "", features)
            out.append(LabeledPair(pair=pair, label=label, provenance=provenance))
    return out
