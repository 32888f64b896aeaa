"""Command-line front end.

Results go to stdout or files, progress to stderr. Exit codes: 0 ok,
2 usage, 3 data error, 4 numeric failure. Errors print a single line
``error: <CODE>: <message>`` on stderr.
"""

from __future__ import annotations

import argparse
import json
import logging
import os
import sys
from dataclasses import fields

import numpy as np

from . import __version__
from .config import PipelineConfig
from .estimator import SignatureExtractor
from .evaluation import (
    ProtocolConfig,
    format_cmc_table,
    format_curve_columns,
    run_protocol,
)
from .exceptions import McamError
from .metric import rank_indices, similarity_matrix
from .persistence import (
    ingest_dataset,
    load_config,
    load_signatures,
    load_track,
    resolve_dataset_root,
    save_results,
    save_signatures,
    write_dataset,
)
from .selftest import run_selftest
from .synthetic import SyntheticSpec, generate_synthetic_tracks

log = logging.getLogger("mcam")

EXIT_OK, EXIT_USAGE, EXIT_DATA, EXIT_NUMERIC = 0, 2, 3, 4


def _pipeline_config(args):
    cfg = PipelineConfig()
    if getattr(args, "config", None):
        cfg = cfg.with_overrides(load_config(args.config))
    overrides = {}
    if getattr(args, "features", None):
        overrides["features"] = args.features
    if getattr(args, "seed", None) is not None:
        overrides["seed"] = args.seed
    return cfg.with_overrides(overrides) if overrides else cfg


def _threads(args):
    return args.threads if args.threads else (os.cpu_count() or 1)


def _extractor(cfg, threads):
    return SignatureExtractor(
        features=cfg.features,
        width=cfg.width,
        height=cfg.height,
        region_width=cfg.region_width,
        region_height=cfg.region_height,
        stride=cfg.stride,
        seed=cfg.seed,
        eps_var=cfg.eps_var,
        k_max_floor=cfg.k_max_floor,
        k_max_fraction=cfg.k_max_fraction,
        max_iter=cfg.max_iter,
        n_jobs=threads,
    ).fit()


def _dataset_root(root):
    resolved = resolve_dataset_root(root)
    if resolved is None:
        raise McamError("no dataset root given")
    return resolved


def _signatures_for_root(root, cfg, threads):
    index = ingest_dataset(_dataset_root(root))
    log.info("building signatures for %d tracks", len(index.entries))
    tracks = [load_track(e) for e in index.entries]
    return _extractor(cfg, threads).transform(tracks)


def cmd_ingest(args):
    index = ingest_dataset(_dataset_root(args.root))
    for w in index.warnings:
        print(f"warning: {w}", file=sys.stderr)
    print(json.dumps(index.summary(), indent=1))
    for e in index.entries:
        print(f"{e.key}\t{e.n_frames}")
    return EXIT_OK


def cmd_signatures(args):
    cfg = _pipeline_config(args)
    sigs = _signatures_for_root(args.root, cfg, _threads(args))
    save_signatures(args.out, sigs, cfg.signature_hash())
    print(f"wrote {len(sigs)} signatures to {args.out}")
    return EXIT_OK


def cmd_match(args):
    cfg = _pipeline_config(args)
    Q, qh = load_signatures(args.query)
    G, gh = load_signatures(args.gallery)
    if qh.get("config_hash") != gh.get("config_hash"):
        raise McamError("query and gallery signatures were built with different configurations")
    sim = similarity_matrix(Q, G, None, cfg.metric)
    order = rank_indices(sim.values)
    rankings = {q: [sim.gallery_ids[j] for j in row] for q, row in zip(sim.query_ids, order)}
    payload = {
        "query_ids": sim.query_ids,
        "gallery_ids": sim.gallery_ids,
        "similarity": sim.values,
        "similarity_lr": sim.lr,
        "similarity_crcs": sim.crcs,
        "rankings": rankings,
    }
    save_results(args.out, payload)
    for q, ranked in rankings.items():
        print(q + "\t" + "\t".join(ranked[: args.top]))
    return EXIT_OK


def _read_list(path):
    with open(path, encoding="utf-8") as fh:
        return [ln.strip() for ln in fh if ln.strip() and not ln.startswith("#")]


def _synthetic_spec(path, overrides=None):
    kw = dict(load_config(path)) if path else {}
    kw.update(overrides or {})
    types = {f.name: f.type for f in fields(SyntheticSpec)}
    out = {}
    for key, value in kw.items():
        if key not in types:
            raise McamError(f"unknown synthetic spec key {key!r}")
        t = types[key]
        if not isinstance(value, str):
            out[key] = value
        elif "tuple" in t:
            out[key] = tuple(float(v) for v in value.split(","))
        elif t.startswith("int"):
            out[key] = int(value)
        else:
            out[key] = float(value)
    return SyntheticSpec(**out)


def cmd_eval(args):
    cfg = _pipeline_config(args)
    if args.signatures:
        sigs, _ = load_signatures(args.signatures)
    elif args.synthetic:
        spec = _synthetic_spec(args.synthetic)
        tracks = generate_synthetic_tracks(spec, seed=cfg.seed)
        sigs = _extractor(cfg, _threads(args)).transform(tracks)
    else:
        sigs = _signatures_for_root(args.root, cfg, _threads(args))
    protocol = ProtocolConfig(
        mode=args.mode,
        trials=args.trials,
        seed=cfg.seed if args.seed is None else args.seed,
        min_track_length=args.min_length,
        query_camera=args.query_camera,
        gallery_camera=args.gallery_camera,
        query_ids=_read_list(args.query_list) if args.query_list else None,
        gallery_ids=_read_list(args.gallery_list) if args.gallery_list else None,
    )
    result = run_protocol(sigs, protocol, cfg.metric)
    print(format_cmc_table({args.mode: result}))
    if args.curves:
        with open(args.curves, "w", encoding="utf-8") as fh:
            fh.write(format_curve_columns(result) + "\n")
    if args.out:
        save_results(
            args.out,
            {
                "mode": protocol.mode,
                "trials": protocol.trials,
                "seed": protocol.seed,
                "mean_cmc": result.mean.rates,
                "std_cmc": result.std,
                "curves": {lab: c.rates for lab, c in zip(result.labels, result.curves)},
            },
        )
    return EXIT_OK


def cmd_synth(args):
    spec = _synthetic_spec(args.spec)
    tracks = generate_synthetic_tracks(spec, seed=args.seed)
    write_dataset(tracks, args.out)
    print(f"wrote {len(tracks)} tracks to {args.out}")
    return EXIT_OK


def cmd_selftest(args):
    results = run_selftest()
    failed = 0
    for name, ok, err in results:
        print(f"{'PASS' if ok else 'FAIL'}  {name}" + (f"  ({err})" if err else ""))
        failed += not ok
    print(f"{len(results) - failed}/{len(results)} checks passed")
    return EXIT_OK if failed == 0 else EXIT_NUMERIC


def build_parser():
    p = argparse.ArgumentParser(prog="mcam", description="Multi-shot person re-identification with MCAM signatures.")
    p.add_argument("--version", action="version", version=f"%(prog)s {__version__}")
    p.add_argument("-v", "--verbose", action="store_true", help="progress messages on stderr")
    sub = p.add_subparsers(dest="command", required=True)

    def common(sp, features=True):
        sp.add_argument("--config", help="key=value file overriding pipeline defaults")
        sp.add_argument("--threads", type=int, default=None, help="worker processes (default: all cores)")
        if features:
            sp.add_argument("--features", help="comma-separated subset of csh,hog,bcov")
            sp.add_argument("--seed", type=int, default=None)

    sp = sub.add_parser("ingest", help="index a dataset directory")
    sp.add_argument("root", nargs="?")
    sp.set_defaults(func=cmd_ingest)

    sp = sub.add_parser("signatures", help="build and save signatures for every track")
    sp.add_argument("root", nargs="?")
    sp.add_argument("--out", required=True)
    common(sp)
    sp.set_defaults(func=cmd_signatures)

    sp = sub.add_parser("match", help="score query signatures against a gallery")
    sp.add_argument("--query", required=True)
    sp.add_argument("--gallery", required=True)
    sp.add_argument("--out", required=True)
    sp.add_argument("--top", type=int, default=10, help="ranked gallery ids printed per query")
    common(sp, features=False)
    sp.set_defaults(func=cmd_match)

    sp = sub.add_parser("eval", help="run an evaluation protocol and print the CMC table")
    sp.add_argument("--mode", choices=("pairwise", "split", "fixed"), required=True)
    sp.add_argument("--trials", type=int, default=10)
    src = sp.add_mutually_exclusive_group()
    src.add_argument("--root", help="dataset directory")
    src.add_argument("--signatures", help="precomputed signature file")
    src.add_argument("--synthetic", help="synthetic spec file (key=value)")
    sp.add_argument("--min-length", type=int, default=None)
    sp.add_argument("--query-camera")
    sp.add_argument("--gallery-camera")
    sp.add_argument("--query-list", help="track ids, one per line (fixed mode)")
    sp.add_argument("--gallery-list", help="track ids, one per line (fixed mode)")
    sp.add_argument("--out", help="results file")
    sp.add_argument("--curves", help="write rank/mean/std columns here")
    common(sp)
    sp.set_defaults(func=cmd_eval)

    sp = sub.add_parser("synth", help="write a synthetic dataset")
    sp.add_argument("--spec", help="key=value synthetic spec file")
    sp.add_argument("--out", required=True)
    sp.add_argument("--seed", type=int, default=0)
    sp.set_defaults(func=cmd_synth)

    sp = sub.add_parser("selftest", help="run the analytic checks")
    sp.set_defaults(func=cmd_selftest)
    return p


def main(argv=None):
    parser = build_parser()
    args = parser.parse_args(argv)
    logging.basicConfig(
        level=logging.INFO if args.verbose else logging.WARNING,
        format="%(levelname)s %(name)s: %(message)s",
        stream=sys.stderr,
    )
    try:
        return args.func(args)
    except McamError as e:
        print(f"error: {e.code}: {e}", file=sys.stderr)
        return e.exit_status
    except FileNotFoundError as e:
        print(f"error: FILE_NOT_FOUND: {e}", file=sys.stderr)
        return EXIT_DATA
    except (np.linalg.LinAlgError, FloatingPointError) as e:
        print(f"error: NUMERICAL_FAILURE: {e}", file=sys.stderr)
        return EXIT_NUMERIC
    except (OSError, ValueError) as e:
        print(f"error: {type(e).__name__.upper()}: {e}", file=sys.stderr)
        return EXIT_DATA


if __name__ == "__main__":
    sys.exit(main())
