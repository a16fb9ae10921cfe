"""Command-line entry points: serve, chat, simulate, train, eval, features."""

from __future__ import annotations

import argparse
import dataclasses
import json
import sys
from typing import Optional, Sequence

from .config import ServiceConfig, load_config


def _config_from(args) -> ServiceConfig:
    cfg = load_config(args.config)
    overrides = {}
    if getattr(args, "port", None) is not None:
        overrides["port"] = args.port
    if overrides:
        cfg = dataclasses.replace(cfg, **overrides)
    return cfg


def _load_models(cfg: ServiceConfig, models_dir: Optional[str]):
    from .training import act_tagger_from_bundle, load_bundle

    directory = models_dir or cfg.models_dir
    if directory is None:
        return None, None
    bundle = load_bundle(directory)
    return bundle, act_tagger_from_bundle(bundle)


def _cmd_serve(args) -> int:
    from .service import load_listener_resources, serve

    cfg = _config_from(args)
    bundle, act_model = _load_models(cfg, args.models)
    resources = load_listener_resources(cfg)
    if act_model is not None:
        resources.act_model = act_model
    if bundle is None:
        print("no trained models configured; verdicts will be uninformative")
    print(f"listening on {cfg.host}:{cfg.port} (log: {cfg.medical_log_path})")
    serve(cfg, models=bundle, resources=resources)
    return 0


def _cmd_chat(args) -> int:
    from .service import chat, load_listener_resources

    cfg = _config_from(args)
    bundle, act_model = _load_models(cfg, args.models)
    resources = load_listener_resources(cfg)
    if act_model is not None:
        resources.act_model = act_model
    chat(cfg, models=bundle, resources=resources)
    return 0


def _cmd_simulate(args) -> int:
    from .simulate import generate_corpus, load_profiles

    profiles = load_profiles(args.profiles)
    rows = generate_corpus(
        profiles,
        n_per_profile=args.sessions,
        master_seed=args.seed,
        out_dir=args.out,
        n_pairs=args.pairs,
    )
    print(f"wrote {len(rows)} sessions to {args.out}")
    return 0


def _cmd_train(args) -> int:
    from .training import ALL_CLASSIFIERS, train_models

    cfg = _config_from(args)
    names = ALL_CLASSIFIERS if args.classifier == "all" else (args.classifier,)
    epochs = {name: args.epochs for name in names} if args.epochs else None
    _, metrics = train_models(
        args.corpus,
        config=cfg,
        seed=args.seed,
        out_dir=args.out,
        classifiers=names,
        epochs=epochs,
        embeddings_path=cfg.embeddings_path,
    )
    print(json.dumps(metrics, indent=2, sort_keys=True))
    return 0


def _cmd_eval(args) -> int:
    from .simulate import run_experiment
    from .training import load_bundle

    cfg = _config_from(args)
    bundle = load_bundle(args.models)
    report = run_experiment(args.corpus, bundle, cfg, report_path=args.report)
    print(json.dumps(report, indent=2, sort_keys=True))
    return 0


def _cmd_features(args) -> int:
    from .audio import analyze_audio, load_wav

    analysis = analyze_audio(load_wav(args.wav))
    payload = {
        "n_frames": len(analysis.frames),
        "stats": analysis.stats.values.tolist(),
        "frames": [
            {
                "voiced": f.voiced,
                "f0_hz": f.f0_hz,
                "intensity_db": f.intensity_db,
                "spectral_stability": f.stability,
            }
            for f in analysis.frames
        ],
    }
    if args.out:
        with open(args.out, "w", encoding="utf-8") as fh:
            json.dump(payload, fh, indent=2)
        print(f"wrote {len(analysis.frames)} frames to {args.out}")
    else:
        json.dump(payload, sys.stdout, indent=2)
        print()
    return 0


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="adlisten",
        description="Proactive listener with conversational screening.",
    )
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("serve", help="run the session service")
    p.add_argument("--config", default=None)
    p.add_argument("--port", type=int, default=None)
    p.add_argument("--models", default=None, help="trained bundle directory")
    p.set_defaults(func=_cmd_serve)

    p = sub.add_parser("chat", help="terminal REPL with a real clock")
    p.add_argument("--config", default=None)
    p.add_argument("--models", default=None)
    p.set_defaults(func=_cmd_chat)

    p = sub.add_parser("simulate", help="generate a labeled synthetic corpus")
    p.add_argument("--profiles", required=True)
    p.add_argument("--sessions", type=int, default=50, help="sessions per profile")
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--out", required=True)
    p.add_argument("--pairs", type=int, default=6)
    p.set_defaults(func=_cmd_simulate)

    p = sub.add_parser("train", help="train classifiers from a corpus")
    p.add_argument("--corpus", required=True)
    p.add_argument(
        "--classifier",
        default="all",
        choices=[
            "all",
            "audio",
            "language",
            "disfluency",
            "interactivity",
            "dialogue_act",
        ],
    )
    p.add_argument("--epochs", type=int, default=None)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--out", required=True)
    p.add_argument("--config", default=None)
    p.set_defaults(func=_cmd_train)

    p = sub.add_parser("eval", help="score a trained bundle on a corpus")
    p.add_argument("--corpus", required=True)
    p.add_argument("--models", required=True)
    p.add_argument("--report", default=None)
    p.add_argument("--config", default=None)
    p.set_defaults(func=_cmd_eval)

    p = sub.add_parser("features", help="acoustic features for one WAV file")
    p.add_argument("--wav", required=True)
    p.add_argument("--out", default=None)
    p.set_defaults(func=_cmd_features)

    return parser


def main(argv: Optional[Sequence[str]] = None) -> int:
    args = build_parser().parse_args(argv)
    return args.func(args)


if __name__ == "__main__":
    raise SystemExit(main())
