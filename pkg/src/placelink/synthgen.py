"""Deterministic synthetic restaurant/POI generator with ground truth.

The generator reproduces the name-variation phenomenology the matcher has
to cope with: POI names that are exact substrings of restaurant names
(restaurants append a branch or street suffix), optional spaces inside
place names, 'jalan' street abbreviations (jl. / jln), GPS jitter between
the two tables, and near-miss distractor POIs that share name tokens with
a nearby restaurant without being the same place. Everything is drawn from
a single seeded generator, so equal configs produce byte-identical tables.
"""

import dataclasses
from dataclasses import dataclass
from typing import Optional

import numpy as np

from .errors import ConfigError
from .records import Country, Kind, PlaceRecord, PlaceTable
from .text import normalize_text

# meters per degree of latitude on the reference sphere
_M_PER_DEG_LAT = 111_194.92664455873

_BRANDS = (
    "warung", "kopi", "kedai", "mie", "bakso", "ayam", "nasi", "sate",
    "bakmi", "soto", "roti", "martabak", "es", "teh", "kebab", "seblak",
    "dapur", "bubur", "pecel", "gado", "waroeng", "toko", "cafe", "fore",
)
_GIVENS = (
    "hana", "putri", "sari", "jaya", "barokah", "sederhana", "minang",
    "bunda", "dewi", "agus", "budi", "rina", "sinar", "mulia", "berkah",
    "lestari", "makmur", "utama", "karya", "mandiri", "setan", "enak",
    "sedap", "goreng", "bakar", "manis", "pedas", "istimewa",
)
_AREAS = (
    "bintaro", "tlogomas", "sukawati", "dukuh", "kemang", "menteng",
    "senopati", "cilandak", "tebet", "kuningan", "sudirman", "thamrin",
    "gandaria", "serpong", "kramat", "pancoran", "cempaka", "melati",
    "kenanga", "flamboyan", "anggrek", "mawar", "kamboja", "cendana",
)
_EXTRAS = ("2", "77", "88", "ok", "baru", "pusat", "asli", "20fit")


@dataclass(frozen=True)
class GenConfig:
    """Knobs for one synthetic country slice.

    distractors_per_restaurant is the expected count of unrelated POIs
    seeded around each restaurant (the per-cell POI density knob);
    distractor_similarity raises how much of the restaurant's name a hard
    distractor reuses, which controls how many negatives survive the
    name-distance downsampling rule. distractor_placement_sigma_m, when
    set, scatters distractors with the same Gaussian law as matched POIs
    instead of uniformly over the cell, which makes geolocation distance
    carry no signal (useful for feature-importance studies).
    """

    n_restaurants: int = 420
    distractors_per_restaurant: float = 5.5
    match_fraction: float = 0.75
    p_space_variant: float = 0.25
    p_abbreviation: float = 0.5
    p_suffix_append: float = 0.6
    p_name_extra: float = 0.2
    p_street_missing: float = 0.15
    distractor_similarity: float = 0.7
    gps_jitter_sigma_m: float = 25.0
    distractor_placement_sigma_m: Optional[float] = None
    bbox: tuple = (-6.40, -6.15, 106.70, 106.95)
    country: Country = Country.ID
    seed: int = 0

    def __post_init__(self):
        for name in (
            "match_fraction", "p_space_variant", "p_abbreviation",
            "p_suffix_append", "p_name_extra", "p_street_missing",
            "distractor_similarity",
        ):
            v = getattr(self, name)
            if not (0.0 <= v <= 1.0):
                raise ConfigError(f"{name} must be in [0, 1], got {v}")
        if self.gps_jitter_sigma_m < 0:
            raise ConfigError("gps_jitter_sigma_m must be >= 0")
        if self.n_restaurants < 1:
            raise ConfigError("n_restaurants must be >= 1")
        lat_min, lat_max, lon_min, lon_max = self.bbox
        if not (lat_min < lat_max and lon_min < lon_max):
            raise ConfigError(f"empty bbox: {self.bbox}")

    @classmethod
    def for_country(cls, country: Country, n_restaurants: int = 400, seed: int = 0) -> "GenConfig":
        """Per-country presets with deliberately shifted feature mixes."""
        presets = {
            # suffix-heavy names, tight GPS, moderately similar distractors
            Country.ID: dict(
                p_suffix_append=0.6, gps_jitter_sigma_m=25.0,
                distractor_similarity=0.6, p_abbreviation=0.5,
                bbox=(-6.40, -6.15, 106.70, 106.95),
            ),
            Country.MY: dict(
                p_suffix_append=0.45, gps_jitter_sigma_m=35.0,
                distractor_similarity=0.55, p_abbreviation=0.6,
                bbox=(3.00, 3.25, 101.55, 101.80),
            ),
            # near-exact matched names but loose GPS and look-alike negatives
            Country.SG: dict(
                p_suffix_append=0.1, gps_jitter_sigma_m=70.0,
                distractor_similarity=0.85, p_abbreviation=0.2,
                distractors_per_restaurant=5.0,
                bbox=(1.25, 1.45, 103.70, 103.95),
            ),
            Country.PH: dict(
                p_suffix_append=0.5, gps_jitter_sigma_m=30.0,
                distractor_similarity=0.5, p_abbreviation=0.4,
                bbox=(14.50, 14.75, 120.90, 121.15),
            ),
        }
        if country not in presets:
            raise ConfigError(f"no generator preset for country {country}")
        return cls(n_restaurants=n_restaurants, seed=seed, country=country, **presets[country])

    def to_dict(self) -> dict:
        d = dataclasses.asdict(self)
        d["country"] = self.country.value
        d["bbox"] = list(self.bbox)
        return d


def _draw_base_name(rng, used: set) -> list[str]:
    for _ in range(1000):
        tokens = [_BRANDS[rng.integers(len(_BRANDS))], _GIVENS[rng.integers(len(_GIVENS))]]
        if rng.random() < 0.35:
            tokens.append(_GIVENS[rng.integers(len(_GIVENS))])
        key = "".join(tokens)
        if key not in used:
            used.add(key)
            return tokens
    raise ConfigError("name space exhausted; lower n_restaurants")


def _maybe_merge_spaces(rng, name: str, p: float) -> str:
    # Table-1 style 'space is optional' variation; raw strings only
    parts = name.split(" ")
    if len(parts) >= 2 and rng.random() < p:
        k = int(rng.integers(len(parts) - 1))
        parts[k] = parts[k] + parts[k + 1]
        del parts[k + 1]
    return " ".join(parts)


def _street_strings(rng, area: str, number: int, p_abbrev: float) -> str:
    kind = "jalan"
    if rng.random() < p_abbrev:
        kind = "jl." if rng.random() < 0.7 else "jln"
    return f"{kind} {area} raya no. {number}"


def generate(cfg: GenConfig) -> tuple[PlaceTable, PlaceTable, set[tuple[str, str]]]:
    """Build (restaurants, pois, truth) tables for one country slice.

    Truth is a partial matching: a generated POI matches at most one
    restaurant, and restaurants without a matched POI simply have none.
    """
    rng = np.random.default_rng(cfg.seed)
    lat_min, lat_max, lon_min, lon_max = cfg.bbox
    used_names: set = set()
    restaurants: list[PlaceRecord] = []
    poi_protos: list[dict] = []
    truth_by_index: list[tuple[str, int]] = []

    deg_lat = 1.0 / _M_PER_DEG_LAT

    for i in range(cfg.n_restaurants):
        rid = f"R{i + 1:05d}"
        base_tokens = _draw_base_name(rng, used_names)
        base = " ".join(base_tokens)
        area = _AREAS[rng.integers(len(_AREAS))]
        street_area = _AREAS[rng.integers(len(_AREAS))]
        street_no = int(rng.integers(1, 99))
        lat = float(rng.uniform(lat_min, lat_max))
        lon = float(rng.uniform(lon_min, lon_max))
        m_per_deg_lon = _M_PER_DEG_LAT * max(np.cos(np.radians(lat)), 0.01)

        has_suffix = rng.random() < cfg.p_suffix_append
        r_name = f"{base} - {area}" if has_suffix else base
        r_name = _maybe_merge_spaces(rng, r_name, cfg.p_space_variant)
        r_street = _street_strings(rng, street_area, street_no, cfg.p_abbreviation)
        restaurants.append(
            PlaceRecord(
                id=rid, kind=Kind.RESTAURANT, name_raw=r_name,
                street_raw=r_street, name_norm=normalize_text(r_name),
                street_norm=normalize_text(r_street), lat=lat, lon=lon,
                country=cfg.country,
            )
        )

        if rng.random() < cfg.match_fraction:
            p_name = base
            roll = rng.random()
            if roll < cfg.p_name_extra:
                extra = _EXTRAS[rng.integers(len(_EXTRAS))]
                p_name = f"{base} {extra}" if rng.random() < 0.5 else f"{base} - {extra} {area}"
            p_name = _maybe_merge_spaces(rng, p_name, cfg.p_space_variant)
            if cfg.p_street_missing > 0 and rng.random() < cfg.p_street_missing:
                p_street = None
            else:
                p_street = _street_strings(rng, street_area, street_no, cfg.p_abbreviation)
                # house number dropped on the POI side, gated by the same
                # knob as the other street variations
                if rng.random() < 0.4 * cfg.p_abbreviation:
                    p_street = p_street.split(" no. ")[0]
            jitter = rng.normal(0.0, cfg.gps_jitter_sigma_m, size=2)
            p_lat = lat + float(jitter[0]) * deg_lat
            p_lon = lon + float(jitter[1]) / m_per_deg_lon
            poi_protos.append(
                dict(name=p_name, street=p_street, lat=p_lat, lon=p_lon)
            )
            truth_by_index.append((rid, len(poi_protos) - 1))

        n_distractors = int(rng.poisson(cfg.distractors_per_restaurant))
        for _ in range(n_distractors):
            hard = rng.random() < 0.55
            if hard:
                for _ in range(1000):
                    tokens = [_BRANDS[rng.integers(len(_BRANDS))]]
                    if rng.random() < cfg.distractor_similarity:
                        tokens.extend(base_tokens[1:])
                    else:
                        tokens.append(_GIVENS[rng.integers(len(_GIVENS))])
                    name = " ".join(tokens)
                    if has_suffix and rng.random() < cfg.distractor_similarity:
                        name = f"{name} - {area}"
                    elif rng.random() < 0.3:
                        name = f"{name} {_AREAS[rng.integers(len(_AREAS))]}"
                    if normalize_text(name) not in used_names:
                        used_names.add(normalize_text(name))
                        break
                else:
                    continue
            else:
                tokens = _draw_base_name(rng, used_names)
                name = " ".join(tokens)
                if rng.random() < 0.3:
                    name = f"{name} - {_AREAS[rng.integers(len(_AREAS))]}"
            name = _maybe_merge_spaces(rng, name, cfg.p_space_variant)
            if cfg.p_street_missing > 0 and rng.random() < cfg.p_street_missing:
                d_street = None
            else:
                same_street = hard and rng.random() < 0.5
                d_area = street_area if same_street else _AREAS[rng.integers(len(_AREAS))]
                d_street = _street_strings(rng, d_area, int(rng.integers(1, 99)), cfg.p_abbreviation)
            if cfg.distractor_placement_sigma_m is not None:
                d_off = rng.normal(0.0, cfg.distractor_placement_sigma_m, size=2)
                d_lat = lat + float(d_off[0]) * deg_lat
                d_lon = lon + float(d_off[1]) / m_per_deg_lon
            elif hard and rng.random() < 0.3:
                # look-alike in the same building block: close in space too
                d_off = rng.normal(0.0, 50.0, size=2)
                d_lat = lat + float(d_off[0]) * deg_lat
                d_lon = lon + float(d_off[1]) / m_per_deg_lon
            else:
                d_lat = lat + float(rng.uniform(-0.004, 0.004))
                d_lon = lon + float(rng.uniform(-0.006, 0.006))
            poi_protos.append(dict(name=name, street=d_street, lat=d_lat, lon=d_lon))

    # shuffle POI rows so table order carries no signal about truth
    order = rng.permutation(len(poi_protos))
    position = np.empty(len(poi_protos), dtype=np.int64)
    position[order] = np.arange(len(poi_protos))
    pois = []
    for out_pos, proto_idx in enumerate(order):
        proto = poi_protos[int(proto_idx)]
        street = proto["street"]
        pois.append(
            PlaceRecord(
                id=f"P{out_pos + 1:05d}", kind=Kind.POI, name_raw=proto["name"],
                street_raw=street, name_norm=normalize_text(proto["name"]),
                street_norm=normalize_text(street) if street is not None else None,
                lat=_clamp(proto["lat"], lat_min - 0.05, lat_max + 0.05),
                lon=_clamp(proto["lon"], lon_min - 0.05, lon_max + 0.05),
                country=cfg.country,
            )
        )
    truth = {(rid, f"P{int(position[idx]) + 1:05d}") for rid, idx in truth_by_index}

    r_table = PlaceTable(kind=Kind.RESTAURANT, country=cfg.country, records=tuple(restaurants))
    p_table = PlaceTable(kind=Kind.POI, country=cfg.country, records=tuple(pois))
    return r_table, p_table, truth


def _clamp(v: float, lo: float, hi: float) -> float:
    return min(max(v, lo), hi)


def write_truth_csv(path, truth: set[tuple[str, str]]) -> None:
    import csv

    with open(path, "w", newline="", encoding="utf-8") as fh:
        writer = csv.writer(fh)
        writer.writerow(["restaurant_id", "poi_id"])
        for rid, pid in sorted(truth):
            writer.writerow([rid, pid])


def read_truth_csv(path) -> set[tuple[str, str]]:
    import csv

    from .errors import LoadError

    out = set()
    with open(path, newline="", encoding="utf-8") as fh:
        reader = csv.DictReader(fh)
        if reader.fieldnames is None or tuple(reader.fieldnames) != ("restaurant_id", "poi_id"):
            raise LoadError(path, 1, f"expected truth columns restaurant_id,poi_id, got {reader.fieldnames}")
        for row in reader:
            out.add((row["restaurant_id"], row["poi_id"]))
    return out
