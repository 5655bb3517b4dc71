"""Acceptance suite: one test per release criterion.

Each test prints a single `[ACCEPTANCE] PASS/FAIL <criterion> (<elapsed>)`
line (visible with `pytest tests/test_acceptance.py -v -s`). Budgets are
asserted, not just documented.
"""

import itertools
import json
import time
from contextlib import contextmanager
from fractions import Fraction
from functools import lru_cache

import numpy as np
import pytest
from conftest import make_downsampled, run_bootstrap_protocol, truth_label

from placelink import blocking, synthgen
from placelink.bootstrap import replay_audit_log
from placelink.evaluate import cross_country_experiment, evaluate
from placelink.geo import GeoPoint, geohash_decode_bounds, geohash_encode, haversine_m
from placelink.records import Country
from placelink.text import jaro_distance, levenshtein_norm, levenshtein_raw
from placelink.trees import (
    LabeledPair,
    ModelKind,
    Provenance,
    SplitSpec,
    split_train_test,
    train_model,
    train_random_forest,
)


@contextmanager
def criterion(name: str, budget_s: float):
    start = time.time()
    try:
        yield
    except BaseException:
        print(f"\n[ACCEPTANCE] FAIL {name} ({time.time() - start:.1f}s)")
        raise
    elapsed = time.time() - start
    print(f"\n[ACCEPTANCE] PASS {name} ({elapsed:.1f}s)")
    assert elapsed < budget_s, f"{name} exceeded its {budget_s}s budget: {elapsed:.1f}s"


def test_string_metric_paper_exemplars():
    with criterion("string-metric paper exemplars exact", 1.0):
        assert levenshtein_raw("a", "b") == 1
        assert levenshtein_raw("abczzzzzzzzzzzzzzzz", "fghzzzzzzzzzzzzzzzz") == 3
        assert levenshtein_norm("ab", "ba") == 0.5
        assert Fraction(levenshtein_raw("ab", "abcd"), len("ab") + len("abcd")) == Fraction(1, 3)
        assert levenshtein_norm("ab", "abcd") == 1 / 3
        assert levenshtein_norm("abc", "def") == 0.5
        assert jaro_distance("ab", "ba") == 1.0
        assert jaro_distance("ab", "abcd") == 1 / 6


def test_levenshtein_recursive_oracle_equivalence():
    with criterion("Levenshtein exhaustive oracle equivalence (len<=6 over {a,b,c})", 60.0):

        @lru_cache(maxsize=None)
        def rec(a, b):
            if not a:
                return len(b)
            if not b:
                return len(a)
            return min(
                rec(a[1:], b) + 1,
                rec(a, b[1:]) + 1,
                rec(a[1:], b[1:]) + (a[0] != b[0]),
            )

        strings = [""]
        for length in range(1, 7):
            strings.extend("".join(t) for t in itertools.product("abc", repeat=length))
        assert len(strings) == 1093
        for a in strings:
            for b in strings:
                assert levenshtein_raw(a, b) == rec(a, b)


def test_geohash_round_trip_and_cell_size():
    with criterion("geohash round-trip 10k points, precisions 1-12 + cell size", 10.0):
        rng = np.random.default_rng(2024)
        lats = rng.uniform(-90, 90, 10_000)
        lons = rng.uniform(-180, 180, 10_000)
        precisions = rng.integers(1, 13, 10_000)
        for lat, lon, precision in zip(lats, lons, precisions):
            code = geohash_encode(GeoPoint(float(lat), float(lon)), int(precision))
            assert len(code) == precision
            assert geohash_decode_bounds(code).contains(float(lat), float(lon))
        cell = geohash_decode_bounds(geohash_encode(GeoPoint(1e-4, 1e-4), 6))
        width = haversine_m(GeoPoint(cell.lat_min, cell.lon_min), GeoPoint(cell.lat_min, cell.lon_max))
        height = haversine_m(GeoPoint(cell.lat_min, cell.lon_min), GeoPoint(cell.lat_max, cell.lon_min))
        assert abs(width - 1220) / 1220 < 0.05
        assert abs(height - 610) / 610 < 0.05


def test_blocking_equivalence_against_brute_force():
    with criterion("blocking + downsample equal brute-force oracles (~500 records)", 30.0):
        cfg = synthgen.GenConfig(seed=77, n_restaurants=110, distractors_per_restaurant=3.5)
        restaurants, pois, _ = synthgen.generate(cfg)
        assert 450 <= len(restaurants) + len(pois) <= 700
        bcfg = blocking.BlockingConfig()
        blocked = blocking.block_pairs(restaurants, pois, bcfg)
        expected = set()
        for r in restaurants.records:
            r_cell = geohash_encode(GeoPoint(r.lat, r.lon), 6)
            for p in pois.records:
                if geohash_encode(GeoPoint(p.lat, p.lon), 6) == r_cell:
                    expected.add((r.id, p.id))
        assert {(p.restaurant_id, p.poi_id) for p in blocked} == expected

        featurized = blocking.featurize_pairs(blocked, restaurants, pois, bcfg)
        got = {(p.restaurant_id, p.poi_id) for p in blocking.downsample(featurized, bcfg)}
        by_rest = {}
        for p in featurized:
            by_rest.setdefault(p.restaurant_id, []).append(p)
        oracle = set()
        for rid, group in by_rest.items():
            ranked = sorted(group, key=lambda p: (p.features.geo_distance_m, p.poi_id))
            for p in ranked[: bcfg.top_k]:
                if p.features.name_lev <= bcfg.name_lev_threshold:
                    oracle.add((p.restaurant_id, p.poi_id))
        assert got == oracle


def test_end_to_end_synthetic_reproduction():
    with criterion("end-to-end: 4 model kinds, acc>=0.90 & F1(2)>=0.85 on >=8/10 seeds", 300.0):
        passes = {kind: 0 for kind in ModelKind}
        for seed in range(10):
            pairs, truth, _, _ = make_downsampled(seed=seed)
            state = run_bootstrap_protocol(pairs, truth, seed=seed, initial_n=500, round_n=2000)
            labeled = [state.labeled[pid] for pid in sorted(state.labeled)]
            assert 1000 <= len(labeled) <= 1450  # the protocol's ~1,200-pair yield
            train, test = split_train_test(labeled, SplitSpec(train_fraction=0.8, seed=seed))
            for kind in ModelKind:
                model = train_model(kind, train, seed=seed)
                report = evaluate(model, test)
                if report.accuracy >= 0.90 and report.f1_class2 >= 0.85:
                    passes[kind] += 1
        for kind, n_ok in passes.items():
            assert n_ok >= 8, f"{kind.value}: only {n_ok}/10 seeds passed"


def test_feature_importance_sanity():
    with criterion("feature importances: sum to 1, name share > 0.5 on name-only data", 60.0):
        pairs, truth, _, _ = make_downsampled(seed=31)
        labeled = [
            LabeledPair(pair=p, label=truth_label(p, truth), provenance=Provenance.INITIAL_MANUAL)
            for p in pairs
        ]
        for kind in ModelKind:
            model = train_model(kind, labeled, seed=1)
            imp = model.feature_importances
            assert (imp >= 0).all()
            assert abs(imp.sum() - 1.0) <= 1e-9
        # geo jitter equal for matches and distractors, streets all missing:
        # only the name features carry signal
        cfg = synthgen.GenConfig(
            seed=32, gps_jitter_sigma_m=30.0, distractor_placement_sigma_m=30.0,
            p_street_missing=1.0,
        )
        restaurants, pois, truth2 = synthgen.generate(cfg)
        bcfg = blocking.BlockingConfig()
        pool = blocking.downsample(
            blocking.featurize_pairs(blocking.block_pairs(restaurants, pois, bcfg), restaurants, pois, bcfg),
            bcfg,
        )
        data = [
            LabeledPair(pair=p, label=truth_label(p, truth2), provenance=Provenance.INITIAL_MANUAL)
            for p in pool
        ]
        forest = train_random_forest(data, seed=2)
        name_share = forest.feature_importances[1] + forest.feature_importances[2]
        assert name_share > 0.5


def test_pipeline_determinism(tmp_path):
    with criterion("pipeline determinism: identical artifacts across reruns", 300.0):
        from test_cli import artifact_snapshot, run_pipeline

        a = run_pipeline(tmp_path / "run1", seed=9, n=150)
        b = run_pipeline(tmp_path / "run2", seed=9, n=150)
        snap_a, snap_b = artifact_snapshot(a), artifact_snapshot(b)
        assert snap_a.keys() == snap_b.keys()
        for key in snap_a:
            assert snap_a[key] == snap_b[key], f"artifact differs between reruns: {key}"


def test_audit_log_replay(tmp_path):
    with criterion("audit-log replay reproduces the labeled set exactly", 30.0):
        pairs, truth, _, _ = make_downsampled(seed=41)
        audit = tmp_path / "audit.jsonl"
        from placelink.bootstrap import AnnotationState
        from placelink.trees import LabelSource

        live = AnnotationState(pairs, audit_path=audit)
        live.sample_initial(500, seed=41)
        for item in list(live.pending.values()):
            live.record_label(item.pair.pair_id, truth_label(item.pair, truth), LabelSource.HUMAN_INITIAL)
        live.bootstrap_round(2000, seed=42)
        queue = live.rectify_queue()
        assert len(queue) >= 20
        for item in queue[:20]:
            live.rectify(item.pair.pair_id, truth_label(item.pair, truth))
        live.close()

        replayed = replay_audit_log(pairs, audit)
        assert set(replayed.labeled) == set(live.labeled)
        for pid in live.labeled:
            a, b = live.labeled[pid], replayed.labeled[pid]
            assert (a.label, a.provenance, a.source) == (b.label, b.provenance, b.source)
        assert list(replayed.pending) == list(live.pending)


def test_merged_country_experiment():
    with criterion("merged-country grid complete; merged degrades class2 precision somewhere", 300.0):
        def country_data(country, seed):
            cfg = synthgen.GenConfig.for_country(country, n_restaurants=300, seed=seed)
            restaurants, pois, truth = synthgen.generate(cfg)
            bcfg = blocking.BlockingConfig()
            pool = blocking.downsample(
                blocking.featurize_pairs(
                    blocking.block_pairs(restaurants, pois, bcfg), restaurants, pois, bcfg
                ),
                bcfg,
            )
            return [
                LabeledPair(pair=p, label=truth_label(p, truth), provenance=Provenance.INITIAL_MANUAL)
                for p in pool
            ]

        per_country = {
            Country.ID: country_data(Country.ID, 11),
            Country.SG: country_data(Country.SG, 22),
        }
        kinds = list(ModelKind)
        reports = cross_country_experiment(per_country, kinds, seed=5)
        assert len(reports) == len(kinds) * 3 * 2
        cells = {(r.model_kind, r.regime, r.dataset) for r in reports}
        assert len(cells) == len(reports), "duplicate cells"
        for kind in kinds:
            for regime in ("ID", "SG", "MERGED"):
                for ds in ("ID", "SG"):
                    assert (kind.value, regime, ds) in cells

        def cell(kind, regime, ds):
            return next(
                r for r in reports
                if (r.model_kind, r.regime, r.dataset) == (kind.value, regime, ds)
            )

        degraded = [
            (kind.value, ds)
            for kind in kinds
            for ds in ("ID", "SG")
            if cell(kind, "MERGED", ds).precision_class2
            < cell(kind, ds, ds).precision_class2 - 1e-9
        ]
        assert degraded, "merged training never degraded class2 precision"
