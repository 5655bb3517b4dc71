"""Command-line pipeline orchestration.

Subcommands wrap one pipeline stage each; every command writes a
run-metadata JSON beside its output. Exit codes: 0 success, 2 invalid
config/usage, 3 missing input file, 4 malformed input data, 1 anything
else. Errors print one machine-parsable line to stderr.
"""

import argparse
import json
import sys
import warnings
from pathlib import Path

from . import blocking, bootstrap, evaluate, runmeta, synthgen, trees
from .errors import ConfigError, LoadError, PlacelinkError
from .records import Country, Kind, load_places, write_places_csv
from .trees import ModelKind, SplitSpec

EXIT_OK = 0
EXIT_OTHER = 1
EXIT_CONFIG = 2
EXIT_MISSING_INPUT = 3
EXIT_BAD_DATA = 4

_KIND_ALIASES = {
    "tree": ModelKind.TREE,
    "forest": ModelKind.FOREST,
    "adaboost": ModelKind.ADABOOST,
    "gbm": ModelKind.GBM,
}

DEFAULT_CONFIG = {
    "blocking": {
        "geohash_precision": 6,
        "top_k": 10,
        "name_lev_threshold": 0.4,
        "neighbor_expansion": False,
        "street_impute": 1.0,
    },
    "split": {"train_fraction": 0.8, "seed": 0},
    "bootstrap": {"initial_n": 500, "round_n": 2000},
    "generator": {},
    "models": {"TREE": {}, "FOREST": {}, "ADABOOST": {}, "GBM": {}},
}


def _load_config(args) -> dict:
    cfg = json.loads(json.dumps(DEFAULT_CONFIG))
    if getattr(args, "config", None):
        path = Path(args.config)
        if not path.exists():
            raise LoadError(path, 0, "file does not exist")
        try:
            user = json.loads(path.read_text(encoding="utf-8"))
        except json.JSONDecodeError as e:
            raise ConfigError(f"config {path} is not valid JSON: {e}") from None
        for section, values in user.items():
            if section not in cfg:
                raise ConfigError(f"unknown config section {section!r}")
            if not isinstance(values, dict):
                raise ConfigError(f"config section {section!r} must be an object")
            cfg[section].update(values)
    return cfg


def _blocking_config(args, cfg) -> blocking.BlockingConfig:
    section = dict(cfg["blocking"])
    for flag, key in (
        ("precision", "geohash_precision"),
        ("top_k", "top_k"),
        ("name_lev_threshold", "name_lev_threshold"),
        ("street_impute", "street_impute"),
    ):
        v = getattr(args, flag, None)
        if v is not None:
            section[key] = v
    if getattr(args, "neighbor_expansion", False):
        section["neighbor_expansion"] = True
    try:
        return blocking.BlockingConfig(**section)
    except TypeError as e:
        raise ConfigError(f"bad blocking config: {e}") from None


def _workpath(args, p) -> Path:
    p = Path(p)
    if p.is_absolute() or args.workdir is None:
        return p
    return Path(args.workdir) / p


def _require(path: Path) -> Path:
    if not path.exists():
        raise LoadError(path, 0, "file does not exist")
    return path


def _resolved_seed(args, cfg_seed=None) -> int:
    if getattr(args, "seed", None) is not None:
        return args.seed
    if cfg_seed is not None:
        return cfg_seed
    return 0


# --- subcommands -----------------------------------------------------------


def cmd_generate(args) -> int:
    cfg = _load_config(args)
    seed = _resolved_seed(args)
    out_dir = _workpath(args, args.out)
    out_dir.mkdir(parents=True, exist_ok=True)
    country = Country(args.country)
    gen_section = dict(cfg["generator"])
    if args.preset:
        gcfg = synthgen.GenConfig.for_country(
            country, n_restaurants=args.n_restaurants, seed=seed
        )
        gcfg = synthgen.GenConfig(**{**gcfg.to_dict(), **gen_section, "country": country,
                                     "bbox": tuple(gen_section.get("bbox", gcfg.bbox)),
                                     "seed": seed, "n_restaurants": args.n_restaurants})
    else:
        gen_section.setdefault("n_restaurants", args.n_restaurants)
        if "bbox" in gen_section:
            gen_section["bbox"] = tuple(gen_section["bbox"])
        try:
            gcfg = synthgen.GenConfig(country=country, seed=seed, **gen_section)
        except TypeError as e:
            raise ConfigError(f"bad generator config: {e}") from None
    restaurants, pois, truth = synthgen.generate(gcfg)
    r_path = out_dir / "restaurants.csv"
    p_path = out_dir / "pois.csv"
    t_path = out_dir / "truth.csv"
    write_places_csv(r_path, restaurants.records)
    write_places_csv(p_path, pois.records)
    synthgen.write_truth_csv(t_path, truth)
    runmeta.write_meta(out_dir / "generate.meta.json", "generate", gcfg.to_dict(), seed,
                       inputs=[], outputs=[r_path, p_path, t_path])
    print(f"generated {len(restaurants)} restaurants, {len(pois)} pois, {len(truth)} truth pairs -> {out_dir}")
    return EXIT_OK


def cmd_block(args) -> int:
    cfg = _load_config(args)
    bcfg = _blocking_config(args, cfg)
    r_path = _require(_workpath(args, args.restaurants))
    p_path = _require(_workpath(args, args.pois))
    restaurants = load_places(r_path, Kind.RESTAURANT, Country(args.country))
    pois = load_places(p_path, Kind.POI, Country(args.country))
    pairs = blocking.block_pairs(restaurants, pois, bcfg)
    out = _workpath(args, args.out)
    out.parent.mkdir(parents=True, exist_ok=True)
    blocking.write_blocked_csv(out, pairs)
    runmeta.write_meta(Path(str(out) + ".meta.json"), "block",
                       {"blocking": bcfg.__dict__, "country": args.country},
                       _resolved_seed(args), inputs=[r_path, p_path], outputs=[out])
    print(f"blocked {len(pairs)} candidate pairs -> {out}")
    return EXIT_OK


def cmd_featurize(args) -> int:
    cfg = _load_config(args)
    bcfg = _blocking_config(args, cfg)
    r_path = _require(_workpath(args, args.restaurants))
    p_path = _require(_workpath(args, args.pois))
    b_path = _require(_workpath(args, args.blocked))
    restaurants = load_places(r_path, Kind.RESTAURANT, Country(args.country))
    pois = load_places(p_path, Kind.POI, Country(args.country))
    blocked = blocking.read_blocked_csv(b_path)
    featurized = blocking.featurize_pairs(blocked, restaurants, pois, bcfg)
    outputs = []
    if args.keep_all:
        all_path = _workpath(args, args.keep_all)
        blocking.write_pairs_csv(all_path, featurized)
        outputs.append(all_path)
    downsampled = blocking.downsample(featurized, bcfg)
    out = _workpath(args, args.out)
    out.parent.mkdir(parents=True, exist_ok=True)
    blocking.write_pairs_csv(out, downsampled)
    outputs.append(out)
    runmeta.write_meta(Path(str(out) + ".meta.json"), "featurize",
                       {"blocking": bcfg.__dict__, "country": args.country,
                        "features_on": "normalized_strings",
                        "downsample_rule_order": ["top_k_nearest", "name_lev_threshold"]},
                       _resolved_seed(args), inputs=[r_path, p_path, b_path], outputs=outputs)
    print(f"featurized {len(featurized)} pairs, {len(downsampled)} after downsampling -> {out}")
    return EXIT_OK


def cmd_bootstrap(args) -> int:
    cfg = _load_config(args)
    seed = _resolved_seed(args)
    pairs_path = _require(_workpath(args, args.pairs))
    truth_path = _require(_workpath(args, args.truth))
    pairs = blocking.read_pairs_csv(pairs_path)
    truth = synthgen.read_truth_csv(truth_path)
    initial_n = args.initial_n if args.initial_n is not None else cfg["bootstrap"]["initial_n"]
    round_n = args.round_n if args.round_n is not None else cfg["bootstrap"]["round_n"]
    audit_path = None
    if args.state_dir:
        state_dir = _workpath(args, args.state_dir)
        state_dir.mkdir(parents=True, exist_ok=True)
        audit_path = state_dir / "audit.jsonl"
        if audit_path.exists():
            raise ConfigError(f"audit log already exists: {audit_path}")
    state = bootstrap.AnnotationState(pairs, audit_path=audit_path)

    def oracle(pair):
        return 1 if (pair.restaurant_id, pair.poi_id) in truth else 0

    with warnings.catch_warnings():
        warnings.simplefilter("ignore")
        state.sample_initial(initial_n, seed=seed)
        for item in list(state.pending.values()):
            state.record_label(item.pair.pair_id, oracle(item.pair), trees.LabelSource.HUMAN_INITIAL)
        summary = state.bootstrap_round(round_n, seed=seed + 1, tree_params=cfg["models"]["TREE"])
        for item in list(state.rectify_queue()):
            state.rectify(item.pair.pair_id, oracle(item.pair))
    out = _workpath(args, args.out)
    out.parent.mkdir(parents=True, exist_ok=True)
    state.export_labeled(out)
    state.close()
    stats = state.stats()
    runmeta.write_meta(Path(str(out) + ".meta.json"), "bootstrap",
                       {"initial_n": initial_n, "round_n": round_n, "tree": cfg["models"]["TREE"]},
                       seed, inputs=[pairs_path, truth_path], outputs=[out])
    print(
        f"bootstrap labeled {stats['labeled']} pairs "
        f"(matched fraction {stats['matched_fraction']:.3f}, "
        f"auto negatives {summary['auto_negatives']}, rectified queue {summary['queued_for_rectify']}) -> {out}"
    )
    return EXIT_OK


def _split_for(args, cfg) -> SplitSpec:
    section = cfg["split"]
    fraction = args.split_fraction if args.split_fraction is not None else section["train_fraction"]
    split_seed = args.split_seed if args.split_seed is not None else section["seed"]
    return SplitSpec(train_fraction=fraction, seed=split_seed)


def cmd_train(args) -> int:
    cfg = _load_config(args)
    seed = _resolved_seed(args)
    labeled_path = _require(_workpath(args, args.labeled))
    data = bootstrap.load_labeled(labeled_path)
    kind = _KIND_ALIASES[args.kind]
    params = dict(cfg["models"].get(kind.value, {}))
    if args.no_split:
        train = data
        split = None
    else:
        split = _split_for(args, cfg)
        train, _ = trees.split_train_test(data, split)
    model = trees.train_model(kind, train, seed=seed, **params)
    out = _workpath(args, args.out)
    out.parent.mkdir(parents=True, exist_ok=True)
    model.save(out)
    runmeta.write_meta(Path(str(out) + ".meta.json"), "train",
                       {"kind": kind.value, "params": params,
                        "split": None if split is None else split.__dict__},
                       seed, inputs=[labeled_path], outputs=[out])
    print(f"trained {kind.value} on {len(train)} rows -> {out}")
    return EXIT_OK


def cmd_evaluate(args) -> int:
    cfg = _load_config(args)
    labeled_path = _require(_workpath(args, args.labeled))
    model_path = _require(_workpath(args, args.model))
    data = bootstrap.load_labeled(labeled_path)
    model = trees.TreeModel.load(model_path)
    if args.on_all:
        test = data
        split = None
    else:
        split = _split_for(args, cfg)
        _, test = trees.split_train_test(data, split)
    report = evaluate.evaluate(model, test, dataset=args.dataset)
    out = _workpath(args, args.out)
    out.parent.mkdir(parents=True, exist_ok=True)
    evaluate.write_metrics_csv(out, [report])
    outputs = [out]
    if args.summary_out:
        s_path = _workpath(args, args.summary_out)
        evaluate.write_metrics_summary(s_path, [report])
        outputs.append(s_path)
    runmeta.write_meta(Path(str(out) + ".meta.json"), "evaluate",
                       {"split": None if split is None else split.__dict__, "dataset": args.dataset},
                       _resolved_seed(args), inputs=[labeled_path, model_path], outputs=outputs)
    print(report.summary())
    return EXIT_OK


def cmd_matchrate(args) -> int:
    _load_config(args)  # validate even though unused here
    pairs_path = _require(_workpath(args, args.pairs))
    model_path = _require(_workpath(args, args.model))
    r_path = _require(_workpath(args, args.restaurants))
    p_path = _require(_workpath(args, args.pois))
    pairs = blocking.read_pairs_csv(pairs_path)
    model = trees.TreeModel.load(model_path)
    restaurants = load_places(r_path, Kind.RESTAURANT, Country(args.country))
    pois = load_places(p_path, Kind.POI, Country(args.country))
    result = evaluate.match_rate(model, pairs, restaurants)
    out = _workpath(args, args.out)
    out.parent.mkdir(parents=True, exist_ok=True)
    evaluate.write_match_report_csv(out, result, restaurants, pois)
    runmeta.write_meta(Path(str(out) + ".meta.json"), "matchrate",
                       {"country": args.country, "rate": result.rate,
                        "n_matched": result.n_matched, "n_restaurants": result.n_restaurants},
                       _resolved_seed(args),
                       inputs=[pairs_path, model_path, r_path, p_path], outputs=[out])
    print(f"match rate {result.rate:.3f} ({result.n_matched}/{result.n_restaurants} restaurants) -> {out}")
    return EXIT_OK


def cmd_importance(args) -> int:
    _load_config(args)  # validate even though unused here
    model_path = _require(_workpath(args, args.model))
    model = trees.TreeModel.load(model_path)
    imp = trees.feature_importances(model)
    out = _workpath(args, args.out)
    out.parent.mkdir(parents=True, exist_ok=True)
    with open(out, "w", encoding="utf-8") as fh:
        fh.write("feature,importance\n")
        for name, v in zip(blocking.FEATURE_NAMES, imp):
            fh.write(f"{name},{v:.9g}\n")
    runmeta.write_meta(Path(str(out) + ".meta.json"), "importance", {"kind": model.kind.value},
                       model.seed, inputs=[model_path], outputs=[out])
    print("feature importances: " + ", ".join(f"{n}={v:.3f}" for n, v in zip(blocking.FEATURE_NAMES, imp)))
    return EXIT_OK


def cmd_experiment(args) -> int:
    cfg = _load_config(args)
    seed = _resolved_seed(args)
    per_country = {}
    input_paths = []
    for spec in args.dataset:
        if "=" not in spec:
            raise ConfigError(f"--dataset expects COUNTRY=path, got {spec!r}")
        code, path = spec.split("=", 1)
        try:
            country = Country(code)
        except ValueError:
            raise ConfigError(f"unknown country code {code!r}") from None
        path = _require(_workpath(args, path))
        input_paths.append(path)
        per_country[country] = bootstrap.load_labeled(path)
    kinds = [_KIND_ALIASES[k] for k in args.kinds.split(",")] if args.kinds != "all" else list(ModelKind)
    split = _split_for(args, cfg)
    reports = evaluate.cross_country_experiment(
        per_country, kinds, seed=seed, split=split, params=cfg["models"]
    )
    out = _workpath(args, args.out)
    out.parent.mkdir(parents=True, exist_ok=True)
    evaluate.write_metrics_csv(out, reports)
    outputs = [out]
    if args.summary_out:
        s_path = _workpath(args, args.summary_out)
        evaluate.write_metrics_summary(s_path, reports)
        outputs.append(s_path)
    runmeta.write_meta(Path(str(out) + ".meta.json"), "experiment",
                       {"kinds": [k.value for k in kinds], "split": split.__dict__},
                       seed, inputs=input_paths, outputs=outputs)
    print(f"experiment wrote {len(reports)} cells -> {out}")
    return EXIT_OK


def cmd_histogram(args) -> int:
    _load_config(args)  # validate even though unused here
    pairs_path = _require(_workpath(args, args.pairs))
    pairs = blocking.read_pairs_csv(pairs_path)
    hist = evaluate.feature_histograms(pairs, n_bins=args.bins)
    out = _workpath(args, args.out)
    out.parent.mkdir(parents=True, exist_ok=True)
    evaluate.write_histograms_csv(out, hist)
    runmeta.write_meta(Path(str(out) + ".meta.json"), "histogram", {"bins": args.bins},
                       _resolved_seed(args), inputs=[pairs_path], outputs=[out])
    print(f"histograms for {len(pairs)} pairs -> {out}")
    return EXIT_OK


def cmd_export_labels(args) -> int:
    _load_config(args)  # validate even though unused here
    pairs_path = _require(_workpath(args, args.pairs))
    audit_path = _require(_workpath(args, args.state_dir) / "audit.jsonl")
    pairs = blocking.read_pairs_csv(pairs_path)
    state = bootstrap.replay_audit_log(pairs, audit_path)
    out = _workpath(args, args.out)
    out.parent.mkdir(parents=True, exist_ok=True)
    state.export_labeled(out)
    runmeta.write_meta(Path(str(out) + ".meta.json"), "export-labels", {},
                       _resolved_seed(args), inputs=[pairs_path, audit_path], outputs=[out])
    print(f"exported {len(state.labeled)} labeled pairs -> {out}")
    return EXIT_OK


def cmd_annotate_serve(args) -> int:
    import uvicorn

    from .server import build_annotation_app

    cfg = _load_config(args)
    app = build_annotation_app(
        pairs_path=_require(_workpath(args, args.pairs)),
        restaurants_path=_require(_workpath(args, args.restaurants)),
        pois_path=_require(_workpath(args, args.pois)),
        state_dir=_workpath(args, args.state_dir),
        country=Country(args.country),
        initial_n=args.initial_n if args.initial_n is not None else cfg["bootstrap"]["initial_n"],
        seed=_resolved_seed(args),
        tree_params=cfg["models"]["TREE"],
        static_dir=_workpath(args, args.static_dir) if args.static_dir else None,
    )
    uvicorn.run(app, host=args.host, port=args.port, log_level="warning")
    return EXIT_OK


# --- parser ----------------------------------------------------------------


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="placelink",
        description="Restaurant-to-POI matching pipeline: blocking, features, annotation, tree models.",
    )
    parser.add_argument("--config", default=None, help="JSON config file (see README for the schema)")
    parser.add_argument("--seed", type=int, default=None, help="global seed")
    parser.add_argument("--workdir", default=None, help="base directory for relative paths")
    # the same flags are accepted after the subcommand; SUPPRESS keeps a
    # pre-subcommand value from being clobbered by a subparser default
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--config", default=argparse.SUPPRESS)
    common.add_argument("--seed", type=int, default=argparse.SUPPRESS)
    common.add_argument("--workdir", default=argparse.SUPPRESS)
    sub = parser.add_subparsers(dest="command", required=True, parser_class=argparse.ArgumentParser)

    def add_parser(name, **kw):
        return sub.add_parser(name, parents=[common], **kw)

    def common_blocking(p):
        p.add_argument("--precision", type=int, default=None, help="geohash precision (default 6)")
        p.add_argument("--top-k", type=int, default=None, dest="top_k")
        p.add_argument("--name-lev-threshold", type=float, default=None, dest="name_lev_threshold")
        p.add_argument("--neighbor-expansion", action="store_true", dest="neighbor_expansion")
        p.add_argument("--street-impute", type=float, default=None, dest="street_impute")

    p = add_parser("generate", help="emit a synthetic country dataset with ground truth")
    p.add_argument("--out", required=True, help="output directory")
    p.add_argument("--n-restaurants", type=int, default=420)
    p.add_argument("--country", default="ID", choices=[c.value for c in Country if c != Country.MERGED])
    p.add_argument("--preset", action="store_true", help="use the per-country knob preset")
    p.set_defaults(func=cmd_generate)

    p = add_parser("block", help="geohash-join candidate pairs")
    p.add_argument("--restaurants", required=True)
    p.add_argument("--pois", required=True)
    p.add_argument("--out", required=True)
    p.add_argument("--country", default="ID")
    common_blocking(p)
    p.set_defaults(func=cmd_block)

    p = add_parser("featurize", help="compute features and downsample candidates")
    p.add_argument("--restaurants", required=True)
    p.add_argument("--pois", required=True)
    p.add_argument("--blocked", required=True)
    p.add_argument("--out", required=True)
    p.add_argument("--keep-all", default=None, help="also write the pre-downsampling pair file here")
    p.add_argument("--country", default="ID")
    common_blocking(p)
    p.set_defaults(func=cmd_featurize)

    p = add_parser("bootstrap", help="run the 3-step labeling protocol with a truth oracle")
    p.add_argument("--pairs", required=True)
    p.add_argument("--truth", required=True)
    p.add_argument("--out", required=True)
    p.add_argument("--state-dir", default=None, help="write the audit log here")
    p.add_argument("--initial-n", type=int, default=None)
    p.add_argument("--round-n", type=int, default=None)
    p.set_defaults(func=cmd_bootstrap)

    p = add_parser("train", help="train a tree model on labeled pairs")
    p.add_argument("--labeled", required=True)
    p.add_argument("--kind", required=True, choices=sorted(_KIND_ALIASES))
    p.add_argument("--out", required=True)
    p.add_argument("--split-fraction", type=float, default=None)
    p.add_argument("--split-seed", type=int, default=None)
    p.add_argument("--no-split", action="store_true", help="train on all rows")
    p.set_defaults(func=cmd_train)

    p = add_parser("evaluate", help="evaluate a model on the held-out split")
    p.add_argument("--labeled", required=True)
    p.add_argument("--model", required=True)
    p.add_argument("--out", required=True)
    p.add_argument("--summary-out", default=None)
    p.add_argument("--dataset", default="", help="dataset tag recorded in the report")
    p.add_argument("--split-fraction", type=float, default=None)
    p.add_argument("--split-seed", type=int, default=None)
    p.add_argument("--on-all", action="store_true", help="evaluate on all rows, not the held-out split")
    p.set_defaults(func=cmd_evaluate)

    p = add_parser("matchrate", help="estimate the matchable-restaurant fraction")
    p.add_argument("--pairs", required=True)
    p.add_argument("--model", required=True)
    p.add_argument("--restaurants", required=True)
    p.add_argument("--pois", required=True)
    p.add_argument("--out", required=True)
    p.add_argument("--country", default="ID")
    p.set_defaults(func=cmd_matchrate)

    p = add_parser("importance", help="dump feature importances of a trained model")
    p.add_argument("--model", required=True)
    p.add_argument("--out", required=True)
    p.set_defaults(func=cmd_importance)

    p = add_parser("experiment", help="per-country vs merged training comparison")
    p.add_argument("--dataset", action="append", required=True, metavar="COUNTRY=labeled.csv")
    p.add_argument("--kinds", default="all", help="'all' or comma list of tree,forest,adaboost,gbm")
    p.add_argument("--out", required=True)
    p.add_argument("--summary-out", default=None)
    p.add_argument("--split-fraction", type=float, default=None)
    p.add_argument("--split-seed", type=int, default=None)
    p.set_defaults(func=cmd_experiment)

    p = add_parser("histogram", help="export per-feature histograms of a pair file")
    p.add_argument("--pairs", required=True)
    p.add_argument("--out", required=True)
    p.add_argument("--bins", type=int, default=40)
    p.set_defaults(func=cmd_histogram)

    p = add_parser("export-labels", help="replay an annotation audit log and export labels")
    p.add_argument("--pairs", required=True)
    p.add_argument("--state-dir", required=True)
    p.add_argument("--out", required=True)
    p.set_defaults(func=cmd_export_labels)

    p = add_parser("annotate-serve", help="serve the annotation HTTP API (and UI if built)")
    p.add_argument("--pairs", required=True)
    p.add_argument("--restaurants", required=True)
    p.add_argument("--pois", required=True)
    p.add_argument("--state-dir", required=True)
    p.add_argument("--country", default="ID")
    p.add_argument("--host", default="127.0.0.1")
    p.add_argument("--port", type=int, default=8000)
    p.add_argument("--initial-n", type=int, default=None)
    p.add_argument("--static-dir", default=None, help="directory of UI assets to serve at /")
    p.set_defaults(func=cmd_annotate_serve)

    return parser


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        return args.func(args)
    except LoadError as e:
        print(f"error: {type(e).__name__}: {e}", file=sys.stderr)
        return EXIT_MISSING_INPUT if e.line == 0 else EXIT_BAD_DATA
    except ConfigError as e:
        print(f"error: {type(e).__name__}: {e}", file=sys.stderr)
        return EXIT_CONFIG
    except PlacelinkError as e:
        print(f"error: {type(e).__name__}: {e}", file=sys.stderr)
        return EXIT_OTHER


if __name__ == "__main__":
    sys.exit(main())
