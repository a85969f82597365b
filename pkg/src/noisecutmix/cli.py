"""Command-line interface.

Subcommands: generate, augment, train, evaluate, experiment, report.
Exit codes: 0 success, 2 invalid config/arguments, 3 I/O failure,
4 numerical failure.
"""

from __future__ import annotations

import argparse
import sys
from pathlib import Path

import numpy as np

from .augment import AugmentPolicy, apply_policy
from .classifier import TrainConfig, evaluate, train
from .config import ExperimentConfig, load_config
from .errors import ConfigError, NumericalDivergence
from .harness import (
    ResultTable,
    build_models,
    export_grid,
    format_result_table,
    generate_records,
    parse_result_table,
    run_experiment,
)
from .recordio import (
    load_classifier,
    read_provenance,
    read_records,
    save_classifier,
    write_history,
    write_provenance,
    write_records,
)
from .samplers import GenRecord, child_rng
from .schedule import make_cosine_schedule


def _load_cfg(path: str | None) -> ExperimentConfig:
    return load_config(path) if path else ExperimentConfig()


def _records_from_arrays(images: np.ndarray, labels: np.ndarray) -> list[GenRecord]:
    from .samplers import Provenance

    out = []
    for img, label in zip(images, labels):
        prov = Provenance(
            method="offline", class_a=int(np.argmax(label)), class_b=None,
            lambda_sampled=None, lambda_real=1.0, rect=None, seed=0,
            sampler="-", steps=0, guidance=0.0, alpha=None,
        )
        out.append(GenRecord(image=img, label=label, provenance=prov))
    return out


def _cmd_generate(args) -> int:
    cfg = _load_cfg(args.config)
    if args.method not in ("gen_random", "noisecutmix"):
        raise ConfigError("generate supports methods: gen_random, noisecutmix")
    models = build_models(cfg)
    sched = make_cosine_schedule(cfg.schedule_steps)
    seed = cfg.master_seed if args.seed is None else args.seed
    records = generate_records(args.method, cfg, models, sched, args.count, seed)
    write_records(f"{args.out}.records", records)
    write_provenance(f"{args.out}.prov", records)
    if args.pgm:
        export_grid(records, f"{args.out}.pgm")
    print(f"wrote {len(records)} records to {args.out}.records")
    return 0


def _cmd_augment(args) -> int:
    images, labels = read_records(args.input)
    policy = AugmentPolicy(kind=args.policy, alpha=args.alpha, probability=args.probability)
    rng = child_rng(args.seed, 0)
    batch = [(images[i], labels[i]) for i in range(len(images))]
    batch = apply_policy(batch, policy, rng)
    write_records(args.out, _records_from_arrays(
        np.stack([b[0] for b in batch]), np.stack([b[1] for b in batch])
    ))
    print(f"wrote {len(batch)} augmented records to {args.out}")
    return 0


def _cmd_train(args) -> int:
    cfg = _load_cfg(args.config)
    images, labels = read_records(args.input)
    dataset = [(images[i], labels[i]) for i in range(len(images))]
    policy = AugmentPolicy(kind=args.policy, alpha=args.alpha, probability=args.probability)
    train_cfg = TrainConfig(
        batch_size=cfg.batch_size,
        learning_rate=cfg.learning_rate,
        epochs=cfg.epochs,
        val_fraction=cfg.val_fraction,
        hidden=cfg.hidden_units,
        seed=cfg.master_seed if args.seed is None else args.seed,
    )
    model, history = train(dataset, train_cfg, policy)
    save_classifier(args.model_out, model)
    if args.history_out:
        write_history(args.history_out, history)
    best = max((h.val_accuracy for h in history), default=float("nan"))
    print(f"trained {len(history)} epochs; best validation accuracy {best:.6f}")
    return 0


def _cmd_evaluate(args) -> int:
    model = load_classifier(args.model)
    images, labels = read_records(args.input)
    testset = [(images[i], int(np.argmax(labels[i]))) for i in range(len(images))]
    acc = evaluate(model, testset)
    print(f"accuracy {acc:.6f}")
    return 0


def _cmd_experiment(args) -> int:
    cfg = _load_cfg(args.config)
    out = cfg.resolved_output_dir(args.out)
    table = run_experiment(cfg, out)
    sys.stdout.write(format_result_table(table))
    print(f"artifacts written to {out}")
    return 0


def _cmd_report(args) -> int:
    out = Path(args.dir)
    table_path = out / "results.tsv"
    if not table_path.exists():
        raise FileNotFoundError(f"no results.tsv under {out}")
    table = parse_result_table(table_path.read_text(encoding="ascii"))
    # verify the stored aggregate columns against an independent recount
    stored = [line for line in table_path.read_text(encoding="ascii").splitlines()
              if line and not line.startswith("#")]
    for line, row in zip(stored, table.rows):
        cells = line.split("\t")
        # tolerance covers the 6-decimal rounding of both sides
        if abs(float(cells[-2]) - row.mean) > 2e-6 or abs(float(cells[-1]) - row.std) > 2e-6:
            raise ConfigError(f"stored aggregates for {row.method} do not match the trials")
    sys.stdout.write(format_result_table(ResultTable(rows=table.rows, trials=table.trials)))
    for records_path in sorted(out.glob("*_t0.records")):
        stem = records_path.name[: -len(".records")]
        images, labels = read_records(records_path)
        provs = read_provenance(out / f"{stem}.prov")
        records = [
            GenRecord(image=images[i], label=labels[i], provenance=provs[i])
            for i in range(min(8, len(images)))
        ]
        method = stem[: -len("_t0")]
        export_grid(records, out / f"{method}_montage.pgm")
        print(f"re-rendered {method}_montage.pgm")
    return 0


def build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(prog="noisecutmix", description=__doc__)
    sub = p.add_subparsers(dest="command", required=True)

    g = sub.add_parser("generate", help="emit generated records for a method")
    g.add_argument("--config", help="experiment config JSON")
    g.add_argument("--method", required=True, choices=["gen_random", "noisecutmix"])
    g.add_argument("--count", type=int, required=True)
    g.add_argument("--seed", type=int, default=None)
    g.add_argument("--out", required=True, help="output prefix")
    g.add_argument("--pgm", action="store_true", help="also write a montage PGM")
    g.set_defaults(func=_cmd_generate)

    a = sub.add_parser("augment", help="apply a pixel policy to stored records")
    a.add_argument("--policy", required=True, choices=["cutmix", "mixup"])
    a.add_argument("--alpha", type=float, default=1.0)
    a.add_argument("--probability", type=float, default=1.0)
    a.add_argument("--seed", type=int, default=0)
    a.add_argument("--input", required=True)
    a.add_argument("--out", required=True)
    a.set_defaults(func=_cmd_augment)

    t = sub.add_parser("train", help="train the classifier on stored records")
    t.add_argument("--config", help="experiment config JSON")
    t.add_argument("--input", required=True)
    t.add_argument("--seed", type=int, default=None)
    t.add_argument("--policy", default="none", choices=["none", "cutmix", "mixup"])
    t.add_argument("--alpha", type=float, default=1.0)
    t.add_argument("--probability", type=float, default=0.5)
    t.add_argument("--model-out", required=True)
    t.add_argument("--history-out")
    t.set_defaults(func=_cmd_train)

    e = sub.add_parser("evaluate", help="accuracy of a stored model on stored records")
    e.add_argument("--model", required=True)
    e.add_argument("--input", required=True)
    e.set_defaults(func=_cmd_evaluate)

    x = sub.add_parser("experiment", help="full multi-method, multi-trial run")
    x.add_argument("--config", help="experiment config JSON")
    x.add_argument("--out", help="output directory (default: config, then env)")
    x.set_defaults(func=_cmd_experiment)

    r = sub.add_parser("report", help="re-render tables and montages from artifacts")
    r.add_argument("--dir", required=True)
    r.set_defaults(func=_cmd_report)
    return p


def main(argv: list[str] | None = None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        return args.func(args)
    except ConfigError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return 2
    except ValueError as exc:
        print(f"invalid arguments: {exc}", file=sys.stderr)
        return 2
    except OSError as exc:
        print(f"i/o failure: {exc}", file=sys.stderr)
        return 3
    except NumericalDivergence as exc:
        print(f"numerical failure: {exc}", file=sys.stderr)
        return 4


if __name__ == "__main__":
    sys.exit(main())
