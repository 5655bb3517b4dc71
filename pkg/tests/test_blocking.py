import itertools

import numpy as np
import pytest

from placelink import blocking, synthgen
from placelink.blocking import BlockingConfig, CandidatePair, block_pairs, downsample, featurize, featurize_pairs
from placelink.errors import ConfigError
from placelink.geo import GeoPoint, geohash_encode
from placelink.records import Country, Kind, PlaceRecord, PlaceTable
from placelink.text import normalize_text


def place(pid, kind, name, lat, lon, street=None, country=Country.ID):
    return PlaceRecord(
        id=pid, kind=kind, name_raw=name, street_raw=street,
        name_norm=normalize_text(name),
        street_norm=normalize_text(street) if street else None,
        lat=lat, lon=lon, country=country,
    )


def table(kind, records):
    return PlaceTable(kind=kind, country=Country.ID, records=tuple(records))


class TestBlockPairs:
    def test_single_cell_product(self):
        r = table(Kind.RESTAURANT, [place("r1", Kind.RESTAURANT, "warung hana", 0.001, 0.001)])
        p = table(Kind.POI, [
            place(f"p{i}", Kind.POI, f"poi {i}", 0.0012 + i * 1e-4, 0.001) for i in range(3)
        ])
        pairs = block_pairs(r, p, BlockingConfig())
        assert len(pairs) == 3
        assert all(pr.restaurant_id == "r1" for pr in pairs)

    def test_neighbor_expansion_flag(self):
        # restaurant sits in one cell, the POI in the adjacent cell east
        r_rec = place("r1", Kind.RESTAURANT, "warung hana", 0.0001, 0.0001)
        cell = geohash_encode(GeoPoint(r_rec.lat, r_rec.lon), 6)
        p_rec = place("p1", Kind.POI, "warung hana", 0.0001, 0.0001 + 360.0 / 2 ** 15)
        assert geohash_encode(GeoPoint(p_rec.lat, p_rec.lon), 6) != cell
        r = table(Kind.RESTAURANT, [r_rec])
        p = table(Kind.POI, [p_rec])
        assert block_pairs(r, p, BlockingConfig()) == []
        expanded = block_pairs(r, p, BlockingConfig(neighbor_expansion=True))
        assert len(expanded) == 1

    def test_empty_intersection(self):
        r = table(Kind.RESTAURANT, [place("r1", Kind.RESTAURANT, "a b", 10.0, 10.0)])
        p = table(Kind.POI, [place("p1", Kind.POI, "c d", -10.0, -10.0)])
        assert block_pairs(r, p, BlockingConfig()) == []

    def test_matches_brute_force_join(self):
        cfg = synthgen.GenConfig(seed=13, n_restaurants=60, distractors_per_restaurant=3.0)
        restaurants, pois, _ = synthgen.generate(cfg)
        bcfg = BlockingConfig()
        got = {(p.restaurant_id, p.poi_id) for p in block_pairs(restaurants, pois, bcfg)}
        expected = set()
        for r in restaurants.records:
            r_cell = geohash_encode(GeoPoint(r.lat, r.lon), 6)
            for p in pois.records:
                if geohash_encode(GeoPoint(p.lat, p.lon), 6) == r_cell:
                    expected.add((r.id, p.id))
        assert got == expected

    def test_sorted_output(self, default_dataset):
        pairs = block_pairs(default_dataset["restaurants"], default_dataset["pois"], BlockingConfig())
        keys = [(p.restaurant_id, p.poi_id) for p in pairs]
        assert keys == sorted(keys)

    def test_blocking_soundness_reencode(self, default_dataset):
        restaurants, pois = default_dataset["restaurants"], default_dataset["pois"]
        r_by, p_by = restaurants.by_id(), pois.by_id()
        pairs = block_pairs(restaurants, pois, BlockingConfig())
        for pr in pairs[::17]:
            r, p = r_by[pr.restaurant_id], p_by[pr.poi_id]
            assert geohash_encode(GeoPoint(r.lat, r.lon), 6) == pr.geohash6
            assert geohash_encode(GeoPoint(p.lat, p.lon), 6) == pr.geohash6


class TestFeaturize:
    def test_identical_records_give_zero_vector(self):
        r = place("r1", Kind.RESTAURANT, "warung hana", -6.2, 106.8, "jl. goa gajah")
        p = place("p1", Kind.POI, "warung hana", -6.2, 106.8, "jl. goa gajah")
        f = featurize(CandidatePair("r1", "p1", "x"), r, p, BlockingConfig())
        assert (f.geo_distance_m, f.name_lev, f.name_jaro, f.street_lev) == (0, 0, 0, 0)
        assert not f.street_missing

    def test_suffix_variant_pair_low_distances(self):
        r = place("r1", Kind.RESTAURANT, "fore coffee - bintarof", -6.27, 106.71, "jl. boulevard bintaro jaya")
        p = place("p1", Kind.POI, "fore coffee - 20fit bintaro", -6.27, 106.71, "jl. boulevard bintaro jaya")
        f = featurize(CandidatePair("r1", "p1", "x"), r, p, BlockingConfig())
        assert f.geo_distance_m == 0.0
        assert f.name_lev < 0.2
        assert f.name_jaro < 0.2

    def test_missing_street_imputed(self):
        cfg = BlockingConfig(street_impute=1.0)
        r = place("r1", Kind.RESTAURANT, "warung hana", -6.2, 106.8, "jl. goa gajah")
        p = place("p1", Kind.POI, "warung hana", -6.2, 106.8, None)
        f = featurize(CandidatePair("r1", "p1", "x"), r, p, cfg)
        assert f.street_lev == cfg.street_impute
        assert f.street_missing

    def test_batch_matches_scalar(self, default_dataset):
        restaurants, pois = default_dataset["restaurants"], default_dataset["pois"]
        r_by, p_by = restaurants.by_id(), pois.by_id()
        cfg = BlockingConfig()
        pairs = block_pairs(restaurants, pois, cfg)[:300]
        batch = featurize_pairs(pairs, restaurants, pois, cfg)
        for pr in batch[::13]:
            f = pr.features
            s = featurize(pr, r_by[pr.restaurant_id], p_by[pr.poi_id], cfg)
            assert f.geo_distance_m == pytest.approx(s.geo_distance_m, abs=1e-6)
            assert f.name_lev == pytest.approx(s.name_lev, abs=1e-12)
            assert f.name_jaro == pytest.approx(s.name_jaro, abs=1e-12)
            assert f.street_lev == pytest.approx(s.street_lev, abs=1e-12)
            assert f.street_missing == s.street_missing


class TestDownsample:
    def _featurized(self, dataset):
        cfg = BlockingConfig()
        pairs = block_pairs(dataset["restaurants"], dataset["pois"], cfg)
        return featurize_pairs(pairs, dataset["restaurants"], dataset["pois"], cfg), cfg

    def test_matches_sort_everything_oracle(self, default_dataset):
        featurized, cfg = self._featurized(default_dataset)
        got = {(p.restaurant_id, p.poi_id) for p in downsample(featurized, cfg)}
        by_rest = {}
        for p in featurized:
            by_rest.setdefault(p.restaurant_id, []).append(p)
        expected = set()
        for rid, group in by_rest.items():
            ranked = sorted(group, key=lambda p: (p.features.geo_distance_m, p.poi_id))
            for p in ranked[: cfg.top_k]:
                if p.features.name_lev <= cfg.name_lev_threshold:
                    expected.add((p.restaurant_id, p.poi_id))
        assert got == expected

    def test_top_k_cut(self):
        # 15 POIs at increasing distance, identical names: k nearest survive
        r_rec = place("r1", Kind.RESTAURANT, "warung hana", 0.0027, 0.0055)
        pois = [
            place(f"p{i:02d}", Kind.POI, "warung hana", 0.0027 + i * 1e-5, 0.0055)
            for i in range(15)
        ]
        r = table(Kind.RESTAURANT, [r_rec])
        p = table(Kind.POI, pois)
        cfg = BlockingConfig(top_k=10)
        feats = featurize_pairs(block_pairs(r, p, cfg), r, p, cfg)
        assert len(feats) == 15
        kept = downsample(feats, cfg)
        assert len(kept) == 10
        assert {x.poi_id for x in kept} == {f"p{i:02d}" for i in range(10)}

    def test_threshold_excludes_above(self):
        cfg = BlockingConfig()
        r_rec = place("r1", Kind.RESTAURANT, "abc", 0.001, 0.001)
        p_rec = place("p1", Kind.POI, "def", 0.001, 0.001)
        r, p = table(Kind.RESTAURANT, [r_rec]), table(Kind.POI, [p_rec])
        feats = featurize_pairs(block_pairs(r, p, cfg), r, p, cfg)
        assert feats[0].features.name_lev == 0.5
        assert downsample(feats, cfg) == []

    def test_threshold_inclusive_at_boundary(self):
        cfg = BlockingConfig()
        # lev 4 over lengths 4+6 = 0.4 exactly
        r_rec = place("r1", Kind.RESTAURANT, "aaaa", 0.001, 0.001)
        p_rec = place("p1", Kind.POI, "aabbbb", 0.001, 0.001)
        r, p = table(Kind.RESTAURANT, [r_rec]), table(Kind.POI, [p_rec])
        feats = featurize_pairs(block_pairs(r, p, cfg), r, p, cfg)
        assert feats[0].features.name_lev == 0.4
        assert len(downsample(feats, cfg)) == 1

    def test_threshold_monotonic(self, default_dataset):
        featurized, cfg = self._featurized(default_dataset)
        sizes = []
        for thr in (0.5, 0.4, 0.3, 0.2, 0.1):
            c = BlockingConfig(name_lev_threshold=thr)
            sizes.append(len(downsample(featurized, c)))
        assert sizes == sorted(sizes, reverse=True)

    def test_downsample_subset_and_per_restaurant_cap(self, default_dataset):
        featurized, cfg = self._featurized(default_dataset)
        down = downsample(featurized, cfg)
        all_keys = {(p.restaurant_id, p.poi_id) for p in featurized}
        assert {(p.restaurant_id, p.poi_id) for p in down} <= all_keys
        counts = {}
        for p in down:
            counts[p.restaurant_id] = counts.get(p.restaurant_id, 0) + 1
        assert max(counts.values()) <= cfg.top_k

    def test_requires_features(self):
        with pytest.raises(ConfigError):
            downsample([CandidatePair("r", "p", "x")], BlockingConfig())


class TestPairCsv:
    def test_round_trip(self, tmp_path, default_dataset):
        out = tmp_path / "pairs.csv"
        blocking.write_pairs_csv(out, default_dataset["pairs"])
        loaded = blocking.read_pairs_csv(out)
        assert len(loaded) == len(default_dataset["pairs"])
        for a, b in zip(default_dataset["pairs"], loaded):
            assert (a.restaurant_id, a.poi_id, a.geohash6) == (b.restaurant_id, b.poi_id, b.geohash6)
            assert b.features.name_lev == pytest.approx(a.features.name_lev, rel=1e-8)
            assert b.features.street_missing == a.features.street_missing

    def test_byte_identical_on_repeat(self, tmp_path):
        pairs1, _, r1, p1 = _regen(31)
        pairs2, _, r2, p2 = _regen(31)
        f1, f2 = tmp_path / "a.csv", tmp_path / "b.csv"
        blocking.write_pairs_csv(f1, pairs1)
        blocking.write_pairs_csv(f2, pairs2)
        assert f1.read_bytes() == f2.read_bytes()


def _regen(seed):
    from conftest import make_downsampled

    return make_downsampled(seed=seed, n_restaurants=80)


def test_config_validation():
    with pytest.raises(ConfigError):
        BlockingConfig(geohash_precision=13)
    with pytest.raises(ConfigError):
        BlockingConfig(top_k=0)
    with pytest.raises(ConfigError):
        BlockingConfig(name_lev_threshold=0.0)
    with pytest.raises(ConfigError):
        BlockingConfig(name_lev_threshold=1.5)
