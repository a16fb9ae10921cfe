#!/usr/bin/env python3
"""End-to-end experiment: simulate, train, evaluate on held-out sessions.

Generates a train corpus and a disjoint eval corpus from the same
profiles (different master seeds), trains the full classifier bundle,
and scores block verdicts against the generating labels. Everything is
seeded; rerunning with the same arguments reproduces the report
bit-for-bit.

    python3 scripts/run_experiment.py --out /tmp/exp --sessions 50
"""

import argparse
import json
import os
import sys
import time
from importlib import resources as importlib_resources

sys.path.insert(0, os.path.join(os.path.dirname(__file__), "..", "src"))

from adlisten.config import ServiceConfig
from adlisten.simulate import generate_corpus, load_profiles, run_experiment
from adlisten.training import train_models


def main() -> int:
    parser = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    parser.add_argument("--out", required=True, help="experiment directory")
    parser.add_argument("--profiles", default=None, help="profiles JSON (default: packaged)")
    parser.add_argument("--sessions", type=int, default=50, help="sessions per profile per split")
    parser.add_argument("--pairs", type=int, default=6)
    parser.add_argument("--train-seed", type=int, default=101)
    parser.add_argument("--eval-seed", type=int, default=202)
    parser.add_argument("--model-seed", type=int, default=0)
    parser.add_argument("--epochs", type=int, default=None, help="override every classifier's epochs")
    args = parser.parse_args()

    profiles_path = args.profiles or str(
        importlib_resources.files("adlisten").joinpath("data", "profiles.json")
    )
    profiles = load_profiles(profiles_path)
    print(f"profiles: {[p.name for p in profiles]}")

    train_dir = os.path.join(args.out, "train")
    eval_dir = os.path.join(args.out, "eval")
    models_dir = os.path.join(args.out, "models")
    os.makedirs(args.out, exist_ok=True)

    t0 = time.perf_counter()
    generate_corpus(
        profiles, args.sessions, master_seed=args.train_seed,
        out_dir=train_dir, n_pairs=args.pairs,
    )
    generate_corpus(
        profiles, args.sessions, master_seed=args.eval_seed,
        out_dir=eval_dir, n_pairs=args.pairs,
    )
    print(f"generated 2x{args.sessions * len(profiles)} sessions "
          f"in {time.perf_counter() - t0:.1f}s")

    config = ServiceConfig(
        port=0, medical_log_path=os.path.join(args.out, "medical_log.jsonl")
    )
    epochs = (
        {n: args.epochs for n in ("audio", "language", "disfluency")}
        if args.epochs
        else None
    )
    t1 = time.perf_counter()
    bundle, metrics = train_models(
        train_dir, config=config, seed=args.model_seed,
        out_dir=models_dir, epochs=epochs,
    )
    print(f"trained in {time.perf_counter() - t1:.1f}s")
    for key in sorted(metrics):
        if key.endswith("_train_accuracy"):
            print(f"  {key}: {metrics[key]:.3f}")
    if bundle is None:
        print("bundle incomplete; aborting evaluation")
        return 1

    t2 = time.perf_counter()
    report = run_experiment(
        eval_dir, bundle, config,
        report_path=os.path.join(args.out, "report.json"),
    )
    print(f"evaluated in {time.perf_counter() - t2:.1f}s")
    print(json.dumps(report, indent=2, sort_keys=True))
    print(f"held-out accuracy: {report['accuracy']:.3f} "
          f"over {report['n_blocks']} blocks")
    return 0


if __name__ == "__main__":
    raise SystemExit(main())
