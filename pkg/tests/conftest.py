import warnings

import pytest

from placelink import blocking, synthgen
from placelink.bootstrap import AnnotationState
from placelink.trees import LabeledPair, LabelSource, Provenance


def truth_label(pair, truth):
    return 1 if (pair.restaurant_id, pair.poi_id) in truth else 0


def labeled_from_truth(pairs, truth):
    """Oracle-labeled pairs, bypassing the annotation workflow."""
    return [
        LabeledPair(pair=p, label=truth_label(p, truth), provenance=Provenance.INITIAL_MANUAL)
        for p in pairs
    ]


def run_bootstrap_protocol(pool, truth, seed, initial_n=500, round_n=2000, audit_path=None):
    """Scripted 3-step labeling session with the ground truth as annotator."""
    state = AnnotationState(pool, audit_path=audit_path)
    with warnings.catch_warnings():
        warnings.simplefilter("ignore")
        state.sample_initial(initial_n, seed=seed)
        for item in list(state.pending.values()):
            state.record_label(item.pair.pair_id, truth_label(item.pair, truth), LabelSource.HUMAN_INITIAL)
        state.bootstrap_round(round_n, seed=seed + 1)
        for item in list(state.rectify_queue()):
            state.rectify(item.pair.pair_id, truth_label(item.pair, truth))
    return state


def make_downsampled(seed=0, **gen_overrides):
    cfg = synthgen.GenConfig(seed=seed, **gen_overrides)
    restaurants, pois, truth = synthgen.generate(cfg)
    bcfg = blocking.BlockingConfig()
    blocked = blocking.block_pairs(restaurants, pois, bcfg)
    featurized = blocking.featurize_pairs(blocked, restaurants, pois, bcfg)
    return blocking.downsample(featurized, bcfg), truth, restaurants, pois


@pytest.fixture(scope="session")
def default_dataset():
    """One generated country slice shared by read-only tests."""
    pairs, truth, restaurants, pois = make_downsampled(seed=7)
    return {"pairs": pairs, "truth": truth, "restaurants": restaurants, "pois": pois}
