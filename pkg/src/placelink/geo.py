"""Great-circle distance and geohash encoding/decoding.

Geohashes here are the standard public encoding: successive bisection of the
(lon, lat) plane starting with longitude, 5 bits per character over the
base-32 alphabet ``0123456789bcdefghjkmnpqrstuvwxyz``. A precision-6 cell at
the equator is roughly 1.2 km wide by 0.6 km tall, which is the blocking
granularity the matching pipeline uses.
"""

import math
from dataclasses import dataclass

import numpy as np

from . import kernels
from .errors import ConfigError

EARTH_RADIUS_M = kernels.EARTH_RADIUS_M
GEOHASH_ALPHABET = "0123456789bcdefghjkmnpqrstuvwxyz"
_CHAR_INDEX = {c: i for i, c in enumerate(GEOHASH_ALPHABET)}

# (N, NE, E, SE, S, SW, W, NW) as (lat step, lon step) multiples of cell size
_NEIGHBOR_STEPS = ((1, 0), (1, 1), (0, 1), (-1, 1), (-1, 0), (-1, -1), (0, -1), (1, -1))


@dataclass(frozen=True)
class GeoPoint:
    lat: float
    lon: float

    def __post_init__(self):
        if not (-90.0 <= self.lat <= 90.0):
            raise ConfigError(f"latitude out of range: {self.lat}")
        if not (-180.0 <= self.lon <= 180.0):
            raise ConfigError(f"longitude out of range: {self.lon}")


@dataclass(frozen=True)
class GeohashCell:
    code: str
    lat_min: float
    lat_max: float
    lon_min: float
    lon_max: float

    @property
    def center(self) -> GeoPoint:
        return GeoPoint(
            (self.lat_min + self.lat_max) * 0.5, (self.lon_min + self.lon_max) * 0.5
        )

    def contains(self, lat: float, lon: float) -> bool:
        return self.lat_min <= lat <= self.lat_max and self.lon_min <= lon <= self.lon_max


def haversine_m(a: GeoPoint, b: GeoPoint) -> float:
    """Great-circle distance in meters on a sphere of radius 6,371,000 m."""
    p1 = math.radians(a.lat)
    p2 = math.radians(b.lat)
    sdlat = math.sin((p2 - p1) * 0.5)
    sdlon = math.sin(math.radians(b.lon - a.lon) * 0.5)
    h = sdlat * sdlat + math.cos(p1) * math.cos(p2) * sdlon * sdlon
    return 2.0 * EARTH_RADIUS_M * math.asin(math.sqrt(min(h, 1.0)))


def _check_precision(precision: int) -> None:
    if not isinstance(precision, int) or not (1 <= precision <= 12):
        raise ConfigError(f"geohash precision must be an integer in [1, 12], got {precision!r}")


def geohash_encode(p: GeoPoint, precision: int = 6) -> str:
    """Encode a point to a geohash of the given length (1-12 characters)."""
    _check_precision(precision)
    lon_lo, lon_hi = -180.0, 180.0
    lat_lo, lat_hi = -90.0, 90.0
    bits = 0
    even = True
    for _ in range(5 * precision):
        bits <<= 1
        if even:
            mid = (lon_lo + lon_hi) * 0.5
            if p.lon >= mid:
                bits |= 1
                lon_lo = mid
            else:
                lon_hi = mid
        else:
            mid = (lat_lo + lat_hi) * 0.5
            if p.lat >= mid:
                bits |= 1
                lat_lo = mid
            else:
                lat_hi = mid
        even = not even
    return _bits_to_code(bits, precision)


def _bits_to_code(bits: int, precision: int) -> str:
    chars = []
    for k in range(precision):
        shift = 5 * (precision - 1 - k)
        chars.append(GEOHASH_ALPHABET[(int(bits) >> shift) & 0x1F])
    return "".join(chars)


def geohash_encode_many(lats: np.ndarray, lons: np.ndarray, precision: int = 6) -> list[str]:
    """Vectorized encode for parallel arrays of coordinates."""
    _check_precision(precision)
    bits = kernels.geohash_encode_batch(
        np.ascontiguousarray(lats, dtype=np.float64),
        np.ascontiguousarray(lons, dtype=np.float64),
        precision,
    )
    return [_bits_to_code(int(b), precision) for b in bits]


def geohash_decode_bounds(code: str) -> GeohashCell:
    """Bounding box of a geohash cell; encode(center, len(code)) == code."""
    if not code:
        raise ConfigError("geohash code must be non-empty")
    lon_lo, lon_hi = -180.0, 180.0
    lat_lo, lat_hi = -90.0, 90.0
    even = True
    for ch in code:
        try:
            val = _CHAR_INDEX[ch]
        except KeyError:
            raise ConfigError(f"invalid geohash character {ch!r} in {code!r}") from None
        for shift in (4, 3, 2, 1, 0):
            bit = (val >> shift) & 1
            if even:
                mid = (lon_lo + lon_hi) * 0.5
                if bit:
                    lon_lo = mid
                else:
                    lon_hi = mid
            else:
                mid = (lat_lo + lat_hi) * 0.5
                if bit:
                    lat_lo = mid
                else:
                    lat_hi = mid
            even = not even
    return GeohashCell(code, lat_lo, lat_hi, lon_lo, lon_hi)


def geohash_neighbors(code: str) -> list[str]:
    """The up-to-8 adjacent same-precision cells, clockwise from north.

    Longitude wraps across the antimeridian; cells touching a pole simply
    have no neighbors on the poleward side, so fewer than 8 codes come back.
    """
    cell = geohash_decode_bounds(code)
    height = cell.lat_max - cell.lat_min
    width = cell.lon_max - cell.lon_min
    clat = (cell.lat_min + cell.lat_max) * 0.5
    clon = (cell.lon_min + cell.lon_max) * 0.5
    out = []
    for dlat, dlon in _NEIGHBOR_STEPS:
        nlat = clat + dlat * height
        if nlat > 90.0 or nlat < -90.0:
            continue
        nlon = clon + dlon * width
        if nlon >= 180.0:
            nlon -= 360.0
        elif nlon < -180.0:
            nlon += 360.0
        out.append(geohash_encode(GeoPoint(nlat, nlon), len(code)))
    return out
