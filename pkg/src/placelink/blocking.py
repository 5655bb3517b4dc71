"""Candidate-pair generation and featurization.

Restaurants and POIs are paired by a same-geohash join (optionally widened
to the 8 adjacent cells), features are computed in bulk through the numeric
kernels, and two downsampling rules cut the pool to plausible candidates:
keep only each restaurant's top-K nearest POIs, then drop pairs whose
normalized name edit distance exceeds the threshold.
"""

import csv
from dataclasses import dataclass, replace
from pathlib import Path
from typing import Optional

import numpy as np

from . import geo, kernels, text
from .errors import ConfigError, LoadError
from .records import PlaceRecord, PlaceTable

FEATURE_NAMES = ("geo_distance_m", "name_lev", "name_jaro", "street_lev")

PAIR_CSV_COLUMNS = (
    "restaurant_id",
    "poi_id",
    "geohash6",
    "geo_distance_m",
    "name_lev",
    "name_jaro",
    "street_lev",
    "street_missing",
)


@dataclass(frozen=True)
class FeatureVector:
    geo_distance_m: float
    name_lev: float
    name_jaro: float
    street_lev: float
    street_missing: bool

    def as_array(self) -> np.ndarray:
        return np.array(
            [self.geo_distance_m, self.name_lev, self.name_jaro, self.street_lev],
            dtype=np.float64,
        )


@dataclass(frozen=True)
class CandidatePair:
    restaurant_id: str
    poi_id: str
    geohash6: str
    features: Optional[FeatureVector] = None

    @property
    def pair_id(self) -> str:
        return f"{self.restaurant_id}::{self.poi_id}"


@dataclass(frozen=True)
class BlockingConfig:
    geohash_precision: int = 6
    top_k: int = 10
    name_lev_threshold: float = 0.4
    neighbor_expansion: bool = False
    street_impute: float = 1.0

    def __post_init__(self):
        if not (1 <= self.geohash_precision <= 12):
            raise ConfigError(f"geohash_precision must be in [1, 12], got {self.geohash_precision}")
        if self.top_k < 1:
            raise ConfigError(f"top_k must be >= 1, got {self.top_k}")
        if not (0.0 < self.name_lev_threshold <= 1.0):
            raise ConfigError(
                f"name_lev_threshold must be in (0, 1], got {self.name_lev_threshold}"
            )
        if self.street_impute < 0.0:
            raise ConfigError(f"street_impute must be >= 0, got {self.street_impute}")


def block_pairs(
    restaurants: PlaceTable, pois: PlaceTable, cfg: BlockingConfig
) -> list[CandidatePair]:
    """Same-cell (restaurant, POI) cross product, sorted by id pair.

    With neighbor expansion on, each restaurant also meets POIs in the 8
    adjacent cells. The stored geohash is the restaurant's cell.
    """
    r_index = restaurants.index_at(cfg.geohash_precision)
    p_index = pois.index_at(cfg.geohash_precision)
    out = []
    for cell, r_positions in r_index.items():
        cells = [cell]
        if cfg.neighbor_expansion:
            cells.extend(geo.geohash_neighbors(cell))
        p_positions: list[int] = []
        for c in cells:
            hit = p_index.get(c)
            if hit is not None:
                p_positions.extend(int(i) for i in hit)
        if not p_positions:
            continue
        for rp in r_positions:
            rid = restaurants.records[int(rp)].id
            for pp in p_positions:
                out.append(CandidatePair(rid, pois.records[pp].id, cell))
    out.sort(key=lambda p: (p.restaurant_id, p.poi_id))
    return out


def featurize(
    pair: CandidatePair,
    restaurant: PlaceRecord,
    poi: PlaceRecord,
    cfg: BlockingConfig,
) -> FeatureVector:
    """Scalar feature computation for a single pair (reference path)."""
    dist = geo.haversine_m(
        geo.GeoPoint(restaurant.lat, restaurant.lon), geo.GeoPoint(poi.lat, poi.lon)
    )
    name_lev = text.levenshtein_norm(restaurant.name_norm, poi.name_norm)
    name_jaro = text.jaro_distance(restaurant.name_norm, poi.name_norm)
    missing = restaurant.street_norm is None or poi.street_norm is None
    if missing:
        street_lev = cfg.street_impute
    else:
        street_lev = text.levenshtein_norm(restaurant.street_norm, poi.street_norm)
    return FeatureVector(dist, name_lev, name_jaro, street_lev, missing)


def _gather_csr(flat: np.ndarray, off: np.ndarray, idx: np.ndarray):
    lengths = off[idx + 1] - off[idx]
    new_off = np.zeros(idx.size + 1, dtype=np.int64)
    np.cumsum(lengths, out=new_off[1:])
    if idx.size == 0:
        return np.empty(0, dtype=np.int32), new_off
    parts = [flat[off[i]:off[i + 1]] for i in idx]
    return np.concatenate(parts) if parts else np.empty(0, dtype=np.int32), new_off


def featurize_pairs(
    pairs: list[CandidatePair],
    restaurants: PlaceTable,
    pois: PlaceTable,
    cfg: BlockingConfig,
) -> list[CandidatePair]:
    """Batch featurization through the kernel backend."""
    if not pairs:
        return []
    r_pos = {r.id: i for i, r in enumerate(restaurants.records)}
    p_pos = {r.id: i for i, r in enumerate(pois.records)}
    ri = np.array([r_pos[p.restaurant_id] for p in pairs], dtype=np.int64)
    pi = np.array([p_pos[p.poi_id] for p in pairs], dtype=np.int64)
    ra = restaurants.coordinate_arrays()
    pa = pois.coordinate_arrays()

    dist = kernels.haversine_m_batch(ra["lat"][ri], ra["lon"][ri], pa["lat"][pi], pa["lon"][pi])

    a_flat, a_off = _gather_csr(ra["name_flat"], ra["name_off"], ri)
    b_flat, b_off = _gather_csr(pa["name_flat"], pa["name_off"], pi)
    name_raw = kernels.levenshtein_batch(a_flat, a_off, b_flat, b_off)
    name_len = (a_off[1:] - a_off[:-1]) + (b_off[1:] - b_off[:-1])
    name_lev = name_raw / name_len  # name_norm is never empty, so len > 0
    name_jaro = kernels.jaro_distance_batch(a_flat, a_off, b_flat, b_off)

    missing = ra["street_missing"][ri] | pa["street_missing"][pi]
    street_lev = np.full(len(pairs), cfg.street_impute, dtype=np.float64)
    present = np.nonzero(~missing)[0]
    if present.size:
        sa_flat, sa_off = _gather_csr(ra["street_flat"], ra["street_off"], ri[present])
        sb_flat, sb_off = _gather_csr(pa["street_flat"], pa["street_off"], pi[present])
        s_raw = kernels.levenshtein_batch(sa_flat, sa_off, sb_flat, sb_off)
        s_len = (sa_off[1:] - sa_off[:-1]) + (sb_off[1:] - sb_off[:-1])
        street_lev[present] = s_raw / s_len

    return [
        replace(
            pair,
            features=FeatureVector(
                float(dist[i]),
                float(name_lev[i]),
                float(name_jaro[i]),
                float(street_lev[i]),
                bool(missing[i]),
            ),
        )
        for i, pair in enumerate(pairs)
    ]


def downsample(pairs: list[CandidatePair], cfg: BlockingConfig) -> list[CandidatePair]:
    """Apply the two candidate-reduction rules, preserving sorted id order.

    Rule 1 keeps each restaurant's top_k nearest POIs (distance ties break
    by ascending poi_id); rule 2 then drops pairs with name_lev above the
    threshold (inclusive comparison, so a pair at exactly the threshold
    survives).
    """
    by_restaurant: dict[str, list[CandidatePair]] = {}
    for p in pairs:
        if p.features is None:
            raise ConfigError("downsample requires featurized pairs")
        by_restaurant.setdefault(p.restaurant_id, []).append(p)
    kept = []
    for rid in sorted(by_restaurant):
        group = sorted(
            by_restaurant[rid], key=lambda p: (p.features.geo_distance_m, p.poi_id)
        )
        for p in group[: cfg.top_k]:
            if p.features.name_lev <= cfg.name_lev_threshold:
                kept.append(p)
    kept.sort(key=lambda p: (p.restaurant_id, p.poi_id))
    return kept


def _fmt(x: float) -> str:
    return f"{x:.9g}"


def write_pairs_csv(path, pairs: list[CandidatePair]) -> None:
    with open(path, "w", newline="", encoding="utf-8") as fh:
        writer = csv.writer(fh)
        writer.writerow(PAIR_CSV_COLUMNS)
        for p in pairs:
            f = p.features
            if f is None:
                raise ConfigError(f"pair {p.pair_id} has no features; featurize first")
            writer.writerow(
                [
                    p.restaurant_id,
                    p.poi_id,
                    p.geohash6,
                    _fmt(f.geo_distance_m),
                    _fmt(f.name_lev),
                    _fmt(f.name_jaro),
                    _fmt(f.street_lev),
                    "true" if f.street_missing else "false",
                ]
            )


def read_pairs_csv(path) -> list[CandidatePair]:
    path = Path(path)
    if not path.exists():
        raise LoadError(path, 0, "file does not exist")
    out = []
    with open(path, newline="", encoding="utf-8") as fh:
        reader = csv.DictReader(fh)
        if reader.fieldnames is None or tuple(reader.fieldnames) != PAIR_CSV_COLUMNS:
            raise LoadError(path, 1, f"expected pair columns {PAIR_CSV_COLUMNS}, got {reader.fieldnames}")
        for line, row in enumerate(reader, start=2):
            try:
                features = FeatureVector(
                    float(row["geo_distance_m"]),
                    float(row["name_lev"]),
                    float(row["name_jaro"]),
                    float(row["street_lev"]),
                    row["street_missing"] == "true",
                )
            except ValueError:
                raise LoadError(path, line, "bad feature value") from None
            out.append(
                CandidatePair(row["restaurant_id"], row["poi_id"], row["geohash6"], features)
            )
    return out


def write_blocked_csv(path, pairs: list[CandidatePair]) -> None:
    """Pre-feature pair listing (restaurant_id, poi_id, geohash6)."""
    with open(path, "w", newline="", encoding="utf-8") as fh:
        writer = csv.writer(fh)
        writer.writerow(["restaurant_id", "poi_id", "geohash6"])
        for p in pairs:
            writer.writerow([p.restaurant_id, p.poi_id, p.geohash6])


def read_blocked_csv(path) -> list[CandidatePair]:
    path = Path(path)
    if not path.exists():
        raise LoadError(path, 0, "file does not exist")
    out = []
    with open(path, newline="", encoding="utf-8") as fh:
        reader = csv.DictReader(fh)
        expected = ("restaurant_id", "poi_id", "geohash6")
        if reader.fieldnames is None or tuple(reader.fieldnames) != expected:
            raise LoadError(path, 1, f"expected columns {expected}, got {reader.fieldnames}")
        for row in reader:
            out.append(CandidatePair(row["restaurant_id"], row["poi_id"], row["geohash6"]))
    return out
