"""HTTP API for the annotation workflow.

All mutations funnel through a single lock into the bootstrap module's
state (single-writer contract); reads are cheap snapshots. State durability
comes from the audit log: startup replays any existing log, and a fresh
state dir gets its initial sample drawn and logged immediately so the
service is resumable from the first request on.
"""

import threading
from pathlib import Path
from typing import Optional

from fastapi import FastAPI, Response
from fastapi.responses import JSONResponse
from fastapi.staticfiles import StaticFiles
from pydantic import BaseModel

from .blocking import read_pairs_csv
from .bootstrap import AnnotationState, PendingItem, replay_audit_log
from .errors import AlreadyLabeledError, StateError, UnknownPairError
from .records import Country, Kind, PlaceTable, load_places
from .trees import LabelSource


class LabelBody(BaseModel):
    label: int


class RoundBody(BaseModel):
    n: int = 2000
    seed: int = 0


def _place_payload(record) -> dict:
    return {
        "id": record.id,
        "name": record.name_raw,
        "street": record.street_raw,
        "lat": record.lat,
        "lon": record.lon,
    }


def _pair_payload(item: PendingItem, restaurants: dict, pois: dict) -> dict:
    pair = item.pair
    f = pair.features
    payload = {
        "pair_id": pair.pair_id,
        "restaurant": _place_payload(restaurants[pair.restaurant_id]),
        "poi": _place_payload(pois[pair.poi_id]),
        "features": {
            "geo_distance_m": f.geo_distance_m,
            "name_lev": f.name_lev,
            "name_jaro": f.name_jaro,
            "street_lev": f.street_lev,
            "street_missing": f.street_missing,
        },
        "geohash6": pair.geohash6,
    }
    if item.predicted_label is not None:
        payload["predicted_label"] = item.predicted_label
        payload["score"] = item.score
    return payload


def create_app(
    state: AnnotationState,
    restaurants: PlaceTable,
    pois: PlaceTable,
    tree_params: Optional[dict] = None,
    static_dir=None,
) -> FastAPI:
    app = FastAPI(title="placelink annotation API")
    lock = threading.Lock()
    r_by_id = restaurants.by_id()
    p_by_id = pois.by_id()
    tree_params = tree_params or {}

    def _error(exc: StateError):
        if isinstance(exc, UnknownPairError):
            return JSONResponse({"detail": str(exc)}, status_code=404)
        if isinstance(exc, AlreadyLabeledError):
            return JSONResponse({"detail": str(exc)}, status_code=409)
        return JSONResponse({"detail": str(exc)}, status_code=409)

    @app.get("/api/pairs/next")
    def next_pair():
        with lock:
            for item in state.pending.values():
                return _pair_payload(item, r_by_id, p_by_id)
        return Response(status_code=204)

    @app.post("/api/pairs/{pair_id}/label")
    def label_pair(pair_id: str, body: LabelBody):
        with lock:
            item = state.pending.get(pair_id)
            source = (
                LabelSource.HUMAN_RECTIFY
                if item is not None and item.predicted_label is not None
                else LabelSource.HUMAN_INITIAL
            )
            try:
                lp = state.record_label(pair_id, body.label, source)
            except StateError as e:
                return _error(e)
            return {"pair_id": pair_id, "label": lp.label, "provenance": lp.provenance.value}

    @app.get("/api/rectify/queue")
    def rectify_queue(limit: int = 50):
        with lock:
            items = state.rectify_queue(limit=limit)
            return [_pair_payload(it, r_by_id, p_by_id) for it in items]

    @app.post("/api/rectify/{pair_id}")
    def rectify_pair(pair_id: str, body: LabelBody):
        with lock:
            try:
                lp = state.rectify(pair_id, body.label)
            except UnknownPairError as e:
                return JSONResponse({"detail": str(e)}, status_code=404)
            except StateError as e:
                return _error(e)
            return {"pair_id": pair_id, "label": lp.label, "provenance": lp.provenance.value}

    @app.post("/api/bootstrap/round")
    def bootstrap_round(body: RoundBody):
        with lock:
            try:
                summary = state.bootstrap_round(body.n, seed=body.seed, tree_params=tree_params)
            except StateError as e:
                return _error(e)
            return summary

    @app.get("/api/stats")
    def stats():
        with lock:
            return state.stats()

    if static_dir is not None:
        app.mount("/", StaticFiles(directory=str(static_dir), html=True), name="ui")

    return app


def build_annotation_app(
    pairs_path,
    restaurants_path,
    pois_path,
    state_dir,
    country: Country = Country.ID,
    initial_n: int = 500,
    seed: int = 0,
    tree_params: Optional[dict] = None,
    static_dir=None,
) -> FastAPI:
    """Load inputs, replay or initialize the audit log, and build the app."""
    pairs = read_pairs_csv(pairs_path)
    restaurants = load_places(restaurants_path, Kind.RESTAURANT, country)
    pois = load_places(pois_path, Kind.POI, country)
    state_dir = Path(state_dir)
    state_dir.mkdir(parents=True, exist_ok=True)
    audit_path = state_dir / "audit.jsonl"
    if audit_path.exists() and audit_path.stat().st_size > 0:
        state = replay_audit_log(pairs, audit_path)
    else:
        state = AnnotationState(pairs, audit_path=audit_path)
        state.sample_initial(initial_n, seed=seed)
    return create_app(state, restaurants, pois, tree_params=tree_params, static_dir=static_dir)
