"""Command-line pipeline: gen, iodp, train, eval, inspect.

Exit codes: 0 success, 1 usage error, 2 data/validation error, 3 numeric
failure.  Commands only write the outputs they declare, atomically, and
print a key=value summary block on stdout.
"""

from __future__ import annotations

import argparse
import sys
from pathlib import Path

import numpy as np

from . import fileio
from .corpus import (
    FEATURE_MAGIC,
    LABEL_MAGIC,
    SyntheticSpec,
    generate_synthetic_corpus,
    load_corpus,
    load_feature_map,
    load_label_map,
    save_corpus,
)
from .errors import FormatError, ValidationError
from .graph import extract_local_knowledge, row_normalize
from .model import (
    MODEL_MAGIC,
    AblationMode,
    TrainConfig,
    evaluate,
    load_model,
    save_model,
    train,
)
from .prototype import (
    PROTOTYPE_MAGIC,
    CooccurrenceMode,
    DispersionMetric,
    build_prototype,
    load_prototype,
    save_prototype,
)

GEN_DISC_PER_CLASS = 2
TEST_SPLIT_DIVISOR = 5  # gen writes per_class // 5 test instances per class

_MODE_FLAGS = {m.value: m for m in CooccurrenceMode}
_METRIC_FLAGS = {m.value: m for m in DispersionMetric}
_ABLATION_FLAGS = {m.value: m for m in AblationMode}


class _Parser(argparse.ArgumentParser):
    """argparse that exits 1 (not 2) on usage errors."""

    def error(self, message):
        self.print_usage(sys.stderr)
        print(f"{self.prog}: error: {message}", file=sys.stderr)
        raise SystemExit(1)


def _build_parser() -> _Parser:
    parser = _Parser(prog="dgn", description=__doc__)
    sub = parser.add_subparsers(dest="command", required=True, parser_class=_Parser)

    gen = sub.add_parser("gen", help="generate a synthetic train/test corpus")
    gen.add_argument("--classes", type=int, default=7)
    gen.add_argument("--objects", type=int, default=20)
    gen.add_argument("--per-class", type=int, default=100)
    gen.add_argument("--noise", type=float, default=SyntheticSpec.noise)
    gen.add_argument("--cells", type=int, default=7)
    gen.add_argument("--channels", type=int, default=32)
    gen.add_argument("--seed", type=int, default=304)
    gen.add_argument("--out", required=True)
    gen.set_defaults(func=cmd_gen)

    iodp = sub.add_parser("iodp", help="build the discriminative prototype from a corpus")
    iodp.add_argument("--manifest", required=True)
    iodp.add_argument("--mode", choices=sorted(_MODE_FLAGS), default="independent")
    iodp.add_argument("--metric", choices=sorted(_METRIC_FLAGS), default="cv")
    iodp.add_argument("--passivate", action=argparse.BooleanOptionalAction, default=True)
    iodp.add_argument("--out", required=True)
    iodp.set_defaults(func=cmd_iodp)

    tr = sub.add_parser("train", help="train a classifier")
    tr.add_argument("--manifest", required=True)
    tr.add_argument("--prototype")
    tr.add_argument(
        "--mode",
        choices=["baseline", "train-eval-iodp", "full"],
        default="full",
    )
    tr.add_argument("--lambda", dest="lam", type=float, default=0.25)
    tr.add_argument("--hidden-dim", type=int, default=None)
    tr.add_argument("--epochs", type=int, default=30)
    tr.add_argument("--batch", type=int, default=32)
    tr.add_argument("--lr", type=float, default=0.001)
    tr.add_argument("--weight-decay", type=float, default=1e-5)
    tr.add_argument("--seed", type=int, default=304)
    tr.add_argument("--checkpoint", required=True)
    tr.add_argument("--out", help="trace CSV path (default: <checkpoint>.trace.csv)")
    tr.set_defaults(func=cmd_train)

    ev = sub.add_parser("eval", help="evaluate a checkpoint")
    ev.add_argument("--manifest", required=True)
    ev.add_argument("--checkpoint", required=True)
    ev.add_argument("--prototype")
    ev.add_argument("--mode", choices=sorted(_ABLATION_FLAGS), default=None)
    ev.add_argument("--out", help="report CSV path")
    ev.set_defaults(func=cmd_eval)

    ins = sub.add_parser("inspect", help="export heatmaps / listings for an artifact")
    ins.add_argument("artifact")
    ins.add_argument("--prototype", help="needed to inspect a label map's graph")
    ins.add_argument("--out", help="output directory (default: alongside the artifact)")
    ins.set_defaults(func=cmd_inspect)

    return parser


def main(argv=None) -> int:
    parser = _build_parser()
    args = parser.parse_args(argv)
    try:
        return args.func(args)
    except (ValidationError, FormatError, EOFError, OSError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2
    except FloatingPointError as exc:
        print(f"numeric failure: {exc}", file=sys.stderr)
        return 3


# ---------------------------------------------------------------------------
# commands


def cmd_gen(args) -> int:
    spec = SyntheticSpec(
        num_classes=args.classes,
        vocab_size=args.objects,
        disc_per_class=GEN_DISC_PER_CLASS,
        grid_cells=args.cells,
        train_per_class=args.per_class,
        test_per_class=max(1, args.per_class // TEST_SPLIT_DIVISOR),
        channels=args.channels,
        noise=args.noise,
        seed=args.seed,
    )
    train_corpus, test_corpus = generate_synthetic_corpus(spec)
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    train_manifest = save_corpus(train_corpus, out, "train")
    test_manifest = save_corpus(test_corpus, out, "test")
    print(f"train_manifest={train_manifest}")
    print(f"test_manifest={test_manifest}")
    print(f"train_instances={len(train_corpus.instances)}")
    print(f"test_instances={len(test_corpus.instances)}")
    print(f"classes={spec.num_classes}")
    print(f"objects={spec.vocab_size}")
    return 0


def cmd_iodp(args) -> int:
    corpus = load_corpus(args.manifest)
    proto = build_prototype(
        corpus, _MODE_FLAGS[args.mode], _METRIC_FLAGS[args.metric], args.passivate
    )
    save_prototype(proto, args.out)
    print(f"prototype={args.out}")
    print(f"L={proto.vocab_size}")
    print(f"C={proto.num_classes}")
    print(f"omega_min={float(proto.omega.min())!r}")
    print(f"omega_max={float(proto.omega.max())!r}")
    print(f"omega_mean={float(proto.omega.mean())!r}")
    return 0


def cmd_train(args) -> int:
    mode = _ABLATION_FLAGS[args.mode]
    if mode is not AblationMode.BASELINE and not args.prototype:
        print(f"dgn train: error: --mode {args.mode} requires --prototype", file=sys.stderr)
        return 1
    corpus = load_corpus(args.manifest)
    proto = load_prototype(args.prototype) if args.prototype else None
    config = TrainConfig(
        epochs=args.epochs,
        batch_size=args.batch,
        lr=args.lr,
        weight_decay=args.weight_decay,
        lam=args.lam,
        hidden_dim=args.hidden_dim,
        seed=args.seed,
    )
    model, trace = train(corpus, proto, config, mode)
    save_model(model, args.checkpoint)
    trace_path = args.out or f"{args.checkpoint}.trace.csv"
    lines = ["epoch,lr,loss,loss_main,loss_aux,train_accuracy"]
    for s in trace:
        lines.append(
            f"{s.epoch},{s.lr!r},{s.loss!r},{s.loss_main!r},{s.loss_aux!r},{s.train_accuracy!r}"
        )
    fileio.atomic_write_text(trace_path, "\n".join(lines) + "\n")
    print(f"checkpoint={args.checkpoint}")
    print(f"trace={trace_path}")
    print(f"epochs={config.epochs}")
    print(f"final_loss={trace[-1].loss!r}")
    print(f"final_train_accuracy={trace[-1].train_accuracy!r}")
    return 0


def cmd_eval(args) -> int:
    corpus = load_corpus(args.manifest)
    model = load_model(args.checkpoint)
    proto = load_prototype(args.prototype) if args.prototype else None
    mode = _ABLATION_FLAGS[args.mode] if args.mode else model.mode
    report = evaluate(model, corpus, proto, mode)
    print(f"accuracy={report.accuracy:.6f}")
    print(f"instances={report.count}")
    for k, acc in enumerate(report.per_class):
        print(f"class_{k}_accuracy={acc:.6f}")
    if args.out:
        lines = ["class,accuracy"]
        lines += [f"{k},{acc:.6f}" for k, acc in enumerate(report.per_class)]
        lines.append(f"overall,{report.accuracy:.6f}")
        fileio.atomic_write_text(args.out, "\n".join(lines) + "\n")
        print(f"report={args.out}")
    return 0


def cmd_inspect(args) -> int:
    path = Path(args.artifact)
    with open(path, "rb") as fh:
        magic = fh.read(4)
    out_dir = Path(args.out) if args.out else path.parent
    out_dir.mkdir(parents=True, exist_ok=True)
    if magic == PROTOTYPE_MAGIC:
        return _inspect_prototype(path, out_dir)
    if magic == LABEL_MAGIC:
        if not args.prototype:
            print("error: inspecting a label map's graph requires --prototype", file=sys.stderr)
            return 1
        return _inspect_label_map(path, load_prototype(args.prototype), out_dir)
    if magic == FEATURE_MAGIC:
        fm = load_feature_map(path)
        print(f"feature_map={path}")
        print(f"width={fm.width}")
        print(f"height={fm.height}")
        print(f"channels={fm.channels}")
        print(f"min={float(fm.values.min())!r}")
        print(f"max={float(fm.values.max())!r}")
        print(f"mean={float(fm.values.mean())!r}")
        return 0
    if magic == MODEL_MAGIC:
        return _inspect_model(path)
    raise FormatError(f"{path}: unrecognized magic {magic!r}")


def _inspect_prototype(path: Path, out_dir: Path) -> int:
    proto = load_prototype(path)
    pgm = out_dir / f"{path.stem}.omega.pgm"
    csv = out_dir / f"{path.stem}.omega.csv"
    write_pgm16(proto.omega, pgm)
    write_matrix_csv(proto.omega, csv)
    print(f"prototype={path}")
    print(f"L={proto.vocab_size}")
    print(f"C={proto.num_classes}")
    print(f"mode={proto.mode.value}")
    print(f"metric={proto.metric.value}")
    print(f"passivated={int(proto.passivated)}")
    print(f"heatmap={pgm}")
    print(f"csv={csv}")
    return 0


def _inspect_label_map(path: Path, proto, out_dir: Path) -> int:
    label_map = load_label_map(path)
    semantics = label_map.labels.reshape(-1)
    affinity = extract_local_knowledge(semantics, proto)
    adjacency = row_normalize(affinity)
    written = {}
    for name, matrix in (("affinity", affinity), ("adjacency", adjacency)):
        pgm = out_dir / f"{path.stem}.{name}.pgm"
        csv = out_dir / f"{path.stem}.{name}.csv"
        write_pgm16(matrix, pgm)
        write_matrix_csv(matrix, csv)
        written[name] = (pgm, csv)
    print(f"label_map={path}")
    print(f"nodes={semantics.size}")
    for name, (pgm, csv) in written.items():
        print(f"{name}_heatmap={pgm}")
        print(f"{name}_csv={csv}")
    return 0


def _inspect_model(path: Path) -> int:
    model = load_model(path)
    print(f"checkpoint={path}")
    print(f"mode={model.mode.value}")
    print(f"in_channels={model.in_channels}")
    print(f"hidden_dim={model.hidden_dim}")
    print(f"num_classes={model.num_classes}")
    print(f"lambda={model.lam!r}")
    if model.gc_weight is not None:
        print(f"gc_weight={model.gc_weight.shape[0]}x{model.gc_weight.shape[1]}")
    print(f"main_weight={model.main_head.weight.shape[0]}x{model.main_head.weight.shape[1]}")
    print(f"main_bias={model.main_head.bias.size}")
    if model.aux_head is not None:
        print(f"aux_weight={model.aux_head.weight.shape[0]}x{model.aux_head.weight.shape[1]}")
        print(f"aux_bias={model.aux_head.bias.size}")
    print(f"parameters={model.parameter_count()}")
    return 0


# ---------------------------------------------------------------------------
# exports


def write_pgm16(matrix: np.ndarray, path) -> None:
    """16-bit PGM heatmap: 0 maps to black, the matrix max to 65535."""
    arr = np.asarray(matrix, dtype=np.float64)
    peak = float(arr.max()) if arr.size else 0.0
    if peak <= 0.0:
        scaled = np.zeros(arr.shape, dtype=">u2")
    else:
        scaled = np.round(arr / peak * 65535.0).astype(">u2")
    header = f"P5\n{arr.shape[1]} {arr.shape[0]}\n65535\n".encode("ascii")
    fileio.atomic_write_bytes(path, header + scaled.tobytes())


def write_matrix_csv(matrix: np.ndarray, path) -> None:
    rows = np.asarray(matrix, dtype=np.float64)
    lines = [",".join(format(v, ".17g") for v in row) for row in rows]
    fileio.atomic_write_text(path, "\n".join(lines) + "\n")
