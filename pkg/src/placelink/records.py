"""Place record tables: loading, validation, and the geohash index."""

import csv
import json
from dataclasses import dataclass, field
from enum import Enum
from pathlib import Path
from typing import Optional

import numpy as np

from . import geo
from .errors import ConfigError, LoadError
from .text import normalize_text

CSV_COLUMNS = ("id", "name", "street", "lat", "lon")


class Kind(str, Enum):
    POI = "POI"
    RESTAURANT = "RESTAURANT"


class Country(str, Enum):
    ID = "ID"
    MY = "MY"
    SG = "SG"
    PH = "PH"
    MERGED = "MERGED"


# training-regime concatenation and report ordering follow this sequence
COUNTRY_ORDER = (Country.ID, Country.MY, Country.SG, Country.PH)


@dataclass(frozen=True)
class PlaceRecord:
    id: str
    kind: Kind
    name_raw: str
    street_raw: Optional[str]
    name_norm: str
    street_norm: Optional[str]
    lat: float
    lon: float
    country: Country


@dataclass
class PlaceTable:
    """Immutable-after-construction collection of places of one kind.

    Index maps geohash code -> array of record positions; it is built lazily
    per precision and cached, so sharing a table across workers is safe.
    """

    kind: Kind
    country: Country
    records: tuple[PlaceRecord, ...]
    _indexes: dict[int, dict[str, np.ndarray]] = field(default_factory=dict, repr=False)
    _arrays: Optional[dict] = field(default=None, repr=False)

    def __len__(self) -> int:
        return len(self.records)

    def index_at(self, precision: int = 6) -> dict[str, np.ndarray]:
        cached = self._indexes.get(precision)
        if cached is not None:
            return cached
        arrays = self.coordinate_arrays()
        codes = geo.geohash_encode_many(arrays["lat"], arrays["lon"], precision)
        index: dict[str, list[int]] = {}
        for pos, code in enumerate(codes):
            index.setdefault(code, []).append(pos)
        frozen = {c: np.asarray(p, dtype=np.int64) for c, p in index.items()}
        self._indexes[precision] = frozen
        return frozen

    def coordinate_arrays(self) -> dict:
        """Cached numpy views used by the batch kernels.

        Names and streets are packed CSR-style (int32 code points + int64
        offsets); missing streets contribute an empty span and a True entry
        in the street_missing mask.
        """
        if self._arrays is None:
            lats = np.array([r.lat for r in self.records], dtype=np.float64)
            lons = np.array([r.lon for r in self.records], dtype=np.float64)
            name_flat, name_off = _pack_strings(r.name_norm for r in self.records)
            street_flat, street_off = _pack_strings(
                (r.street_norm or "") for r in self.records
            )
            street_missing = np.array(
                [r.street_norm is None for r in self.records], dtype=np.bool_
            )
            self._arrays = {
                "lat": lats,
                "lon": lons,
                "name_flat": name_flat,
                "name_off": name_off,
                "street_flat": street_flat,
                "street_off": street_off,
                "street_missing": street_missing,
            }
        return self._arrays

    def by_id(self) -> dict[str, PlaceRecord]:
        return {r.id: r for r in self.records}


def _pack_strings(strings) -> tuple[np.ndarray, np.ndarray]:
    flats: list[int] = []
    offsets = [0]
    for s in strings:
        flats.extend(ord(ch) for ch in s)
        offsets.append(len(flats))
    return np.asarray(flats, dtype=np.int32), np.asarray(offsets, dtype=np.int64)


def _build_record(row: dict, kind: Kind, country: Country, path, line: int) -> PlaceRecord:
    rid = row["id"]
    if not rid:
        raise LoadError(path, line, "empty id")
    try:
        lat = float(row["lat"])
        lon = float(row["lon"])
    except (TypeError, ValueError):
        raise LoadError(path, line, f"bad coordinate: lat={row['lat']!r} lon={row['lon']!r}")
    if not (-90.0 <= lat <= 90.0):
        raise LoadError(path, line, f"latitude out of range: {lat}")
    if not (-180.0 <= lon <= 180.0):
        raise LoadError(path, line, f"longitude out of range: {lon}")
    name_raw = row["name"] or ""
    name_norm = normalize_text(name_raw)
    if not name_norm:
        raise LoadError(path, line, f"name normalizes to empty: {name_raw!r}")
    street_raw = row.get("street") or None
    street_norm = normalize_text(street_raw) if street_raw is not None else None
    if street_norm == "":
        street_raw, street_norm = None, None
    return PlaceRecord(
        id=rid,
        kind=kind,
        name_raw=name_raw,
        street_raw=street_raw,
        name_norm=name_norm,
        street_norm=street_norm,
        lat=lat,
        lon=lon,
        country=country,
    )


def _iter_csv(path):
    with open(path, newline="", encoding="utf-8") as fh:
        reader = csv.reader(fh)
        try:
            header = next(reader)
        except StopIteration:
            raise LoadError(path, 1, "missing header row") from None
        lowered = [h.strip().lower() for h in header]
        if sorted(lowered) != sorted(CSV_COLUMNS):
            raise LoadError(path, 1, f"header must name columns {','.join(CSV_COLUMNS)}, got {header}")
        for line, row in enumerate(reader, start=2):
            if not row:
                continue
            if len(row) != len(lowered):
                raise LoadError(path, line, f"expected {len(lowered)} fields, got {len(row)}")
            yield line, dict(zip(lowered, row))


def _iter_jsonl(path):
    with open(path, encoding="utf-8") as fh:
        for line, raw in enumerate(fh, start=1):
            raw = raw.strip()
            if not raw:
                continue
            try:
                obj = json.loads(raw)
            except json.JSONDecodeError as e:
                raise LoadError(path, line, f"invalid JSON: {e}") from None
            missing = {"id", "name", "lat", "lon"} - obj.keys()
            if missing:
                raise LoadError(path, line, f"missing keys: {sorted(missing)}")
            yield line, {k: obj.get(k) for k in CSV_COLUMNS}


def load_places(path, kind: Kind, country: Country, fmt: str = "auto") -> PlaceTable:
    """Load a CSV or JSONL place file into a validated PlaceTable.

    Row order is preserved. Malformed rows (bad float, out-of-range
    coordinate, duplicate id, empty normalized name) raise LoadError naming
    the line.
    """
    path = Path(path)
    if not path.exists():
        raise LoadError(path, 0, "file does not exist")
    if fmt == "auto":
        fmt = "jsonl" if path.suffix.lower() in (".jsonl", ".ndjson", ".json") else "csv"
    if fmt == "csv":
        rows = _iter_csv(path)
    elif fmt == "jsonl":
        rows = _iter_jsonl(path)
    else:
        raise ConfigError(f"unknown place file format: {fmt!r}")
    records = []
    seen: dict[str, int] = {}
    for line, row in rows:
        rec = _build_record(row, kind, country, path, line)
        if rec.id in seen:
            raise LoadError(path, line, f"duplicate id {rec.id!r} (first seen line {seen[rec.id]})")
        seen[rec.id] = line
        records.append(rec)
    return PlaceTable(kind=kind, country=country, records=tuple(records))


def write_places_csv(path, records) -> None:
    with open(path, "w", newline="", encoding="utf-8") as fh:
        writer = csv.writer(fh)
        writer.writerow(CSV_COLUMNS)
        for r in records:
            writer.writerow([r.id, r.name_raw, r.street_raw or "", f"{r.lat:.7f}", f"{r.lon:.7f}"])
