"""Command-line entry point: generate, train, eval, export."""

from __future__ import annotations

import argparse
import logging
import sys
from pathlib import Path

from ._seeding import derive_seed
from .classifiers import LRConfig
from .contexts import ContextConfig
from .edges import EdgeOp, edge_matrix, write_features
from .evaluation import EvalConfig, evaluate
from .graph import GraphFormatError, aggregate_parallel_edges, read_edge_list, write_edge_list
from .sgns import CombineMode, EmbeddingStore, TrainerConfig, train
from .synthetic import SyntheticConfig, generate, write_ground_truth
from .walks import WalkConfig, generate_corpus, write_corpus

log = logging.getLogger("stance_embed")

EXIT_OK, EXIT_FAILURE, EXIT_USAGE = 0, 1, 2
PHI_CHOICES = ("hadamard", "l1", "l2", "average", "concat", "concatenation", "all")
SIGMA_CHOICES = tuple(m.value for m in CombineMode)


class UsageError(Exception):
    pass


def _positive_int(text: str) -> int:
    value = int(text)
    if value < 1:
        raise argparse.ArgumentTypeError(f"expected a positive integer, got {text}")
    return value


def _positive_float(text: str) -> float:
    value = float(text)
    if not value > 0:
        raise argparse.ArgumentTypeError(f"expected a positive number, got {text}")
    return value


def _int_list(text: str) -> tuple[int, ...]:
    try:
        values = tuple(int(x) for x in text.split(",") if x.strip())
    except ValueError:
        raise argparse.ArgumentTypeError(f"expected comma-separated integers, got {text!r}") from None
    if not values or min(values) < 1:
        raise argparse.ArgumentTypeError(f"expected positive integers, got {text!r}")
    return values


def _choice_list(choices):
    def parse(text: str) -> tuple[str, ...]:
        values = tuple(x.strip() for x in text.split(",") if x.strip())
        bad = [v for v in values if v not in choices]
        if not values or bad:
            raise argparse.ArgumentTypeError(f"invalid choice {bad or text!r} (choose from {', '.join(choices)})")
        return values

    return parse


def _phis(names: tuple[str, ...]) -> tuple[EdgeOp, ...]:
    if "all" in names:
        return tuple(EdgeOp)
    return tuple(dict.fromkeys(EdgeOp.parse(n) for n in names))


# ----------------------------------------------------------------- parser


def _add_common(p: argparse.ArgumentParser) -> None:
    p.add_argument("--config", type=Path, help="key=value file; explicit flags win")
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--threads", type=_positive_int, default=1)
    p.add_argument("-v", "--verbose", action="store_true")


def _add_embedding_flags(p: argparse.ArgumentParser) -> None:
    p.add_argument("--input", type=Path, required=True, help="edge list: src dst sign topic")
    p.add_argument("--dim", type=_positive_int, default=64)
    p.add_argument("--walks-per-node", type=_positive_int, default=10)
    p.add_argument("--walk-length", type=_positive_int, default=40)
    p.add_argument("--window", type=_positive_int, default=5)
    p.add_argument("--p", type=_positive_float, default=1.5)
    p.add_argument("--q", type=_positive_float, default=0.5)
    p.add_argument("--negatives", type=int, default=20)
    p.add_argument("--subsample", type=_positive_float, default=1e-5)
    p.add_argument("--epochs", type=_positive_int, default=5)
    p.add_argument("--lr", type=_positive_float, default=0.025)
    p.add_argument("--directed", action="store_true", help="walk only along edge direction")


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="stance-embed", description=__doc__)
    sub = parser.add_subparsers(dest="command", required=True)

    gen = sub.add_parser("generate", help="write a synthetic polarized signed topic graph")
    _add_common(gen)
    gen.add_argument("--out", type=Path, required=True)
    gen.add_argument("--truth", type=Path, help="ground-truth sidecar (default: <out>.truth.tsv)")
    gen.add_argument("--nodes", type=int, default=1000)
    gen.add_argument("--topics", type=int, default=20)
    gen.add_argument("--groups", type=int, default=4)
    gen.add_argument("--edges-per-topic", type=int, default=2000)
    gen.add_argument("--noise", type=float, default=0.05)
    gen.add_argument("--intergroup-flip", action="store_true")

    tr = sub.add_parser("train", help="walk, train and write embedding files")
    _add_common(tr)
    _add_embedding_flags(tr)
    tr.add_argument("--out", type=Path, required=True, help="output directory")
    tr.add_argument("--sigma", choices=SIGMA_CHOICES, default="mask")
    tr.add_argument("--walks-out", type=Path, help="also dump the walk corpus here")

    ev = sub.add_parser("eval", help="cross-validated link-sign prediction")
    _add_common(ev)
    _add_embedding_flags(ev)
    ev.add_argument("--out", type=Path, required=True, help="CSV report")
    ev.add_argument(
        "--sigma", type=_choice_list(SIGMA_CHOICES), default=SIGMA_CHOICES, help="comma-separated σ modes to train"
    )
    ev.add_argument("--phi", type=_choice_list(PHI_CHOICES), default=("all",))
    ev.add_argument("--knn-k", type=_int_list, default=(5, 10))
    ev.add_argument("--folds", type=int, default=5)
    ev.add_argument("--coldstart-only", action="store_true")
    ev.add_argument("--no-logistic", action="store_true")
    ev.add_argument("--learned-topics", action="store_true", help="LR that learns its own topic table (mask runs)")
    ev.add_argument("--eval-sigma", choices=("trained", "none"), default="trained")
    ev.add_argument("--lr-epochs", type=_positive_int, default=200)
    ev.add_argument("--lr-rate", type=_positive_float, default=0.05)

    ex = sub.add_parser("export", help="write edge feature vectors from saved embeddings")
    _add_common(ex)
    ex.add_argument("--input", type=Path, required=True)
    ex.add_argument("--embeddings", type=Path, required=True, help="directory written by train")
    ex.add_argument("--out", type=Path, required=True)
    ex.add_argument("--sigma", choices=SIGMA_CHOICES + ("none",), default="none")
    ex.add_argument("--phi", choices=PHI_CHOICES[:-1], default="hadamard")
    return parser


def read_config(path: Path) -> dict[str, str]:
    """``key=value`` lines; ``#`` comments and blank lines ignored."""
    values = {}
    for lineno, raw in enumerate(path.read_text().splitlines(), 1):
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        if "=" not in line:
            raise UsageError(f"{path}:{lineno}: expected key=value")
        key, value = (s.strip() for s in line.split("=", 1))
        values[key.lstrip("-").replace("_", "-")] = value
    return values


def _config_argv(sub: argparse.ArgumentParser, values: dict[str, str]) -> list[str]:
    """Turn config entries into flags placed before the real ones, so later flags win."""
    known = {max(a.option_strings, key=len).lstrip("-"): a for a in sub._actions if a.option_strings}
    argv = []
    for key, value in values.items():
        action = known.get(key)
        if action is None or key in ("config", "help"):
            raise UsageError(f"unknown config key {key!r}")
        if isinstance(action, argparse._StoreTrueAction):
            if value.lower() in ("1", "true", "yes", "on"):
                argv.append(f"--{key}")
            elif value.lower() not in ("0", "false", "no", "off"):
                raise UsageError(f"config key {key!r} expects a boolean")
        else:
            argv += [f"--{key}", value]
    return argv


def parse_args(argv: list[str]) -> argparse.Namespace:
    parser = build_parser()
    pre = argparse.ArgumentParser(add_help=False)
    pre.add_argument("--config", type=Path)
    known, _ = pre.parse_known_args(argv)
    if known.config is None or not argv or argv[0] not in COMMANDS:
        return parser.parse_args(argv)
    try:
        values = read_config(known.config)
    except OSError as exc:
        raise UsageError(f"cannot read config: {exc}") from exc
    sub = parser._subparsers._group_actions[0].choices[argv[0]]
    return parser.parse_args([argv[0], *_config_argv(sub, values), *argv[1:]])


# ----------------------------------------------------------------- commands


def _load_graph(path: Path):
    return aggregate_parallel_edges(read_edge_list(path))


def _checked(factory, *args, **kwargs):
    """Build a config object, reporting invalid values as usage errors."""
    try:
        return factory(*args, **kwargs)
    except ValueError as exc:
        raise UsageError(str(exc)) from None


def _walk_cfg(args, seed: int) -> WalkConfig:
    return _checked(WalkConfig, args.walks_per_node, args.walk_length, args.p, args.q, seed)


def _trainer_cfg(args, sigma: str, seed: int) -> TrainerConfig:
    return _checked(
        TrainerConfig,
        dim=args.dim,
        sigma_mode=sigma,
        negatives=args.negatives,
        subsample=args.subsample,
        epochs=args.epochs,
        learning_rate=args.lr,
        seed=seed,
        threads=args.threads,
    )


def cmd_generate(args) -> int:
    cfg = _checked(
        SyntheticConfig,
        n_nodes=args.nodes,
        n_topics=args.topics,
        edges_per_topic=args.edges_per_topic,
        sign_noise=args.noise,
        intergroup_flip=args.intergroup_flip,
        n_groups=args.groups,
        seed=derive_seed(args.seed, "synthetic"),
    )
    g, communities = generate(cfg)
    truth = args.truth or args.out.with_name(args.out.name + ".truth.tsv")
    with open(args.out, "w", newline="\n") as fh:
        write_edge_list(g, fh)
    with open(truth, "w", newline="\n") as fh:
        write_ground_truth(fh, communities, g.node_names)
    print(f"wrote {len(g.edges)} edges to {args.out} and ground truth to {truth}")
    return EXIT_OK


def cmd_train(args) -> int:
    walk_cfg = _walk_cfg(args, derive_seed(args.seed, "walks"))
    tcfg = _trainer_cfg(args, args.sigma, derive_seed(args.seed, "trainer"))
    ctx = _checked(ContextConfig, args.window)
    g = _load_graph(args.input)
    corpus = generate_corpus(g, walk_cfg, symmetrize=not args.directed, threads=args.threads)
    if args.walks_out:
        with open(args.walks_out, "w", newline="\n") as fh:
            write_corpus(corpus, g, fh)
    store = train(corpus, g, ctx, tcfg)
    for epoch, loss in enumerate(store.epoch_losses, 1):
        print(f"epoch {epoch} mean loss {loss:.6f}")
    args.out.mkdir(parents=True, exist_ok=True)
    paths = store.save(args.out)
    print("wrote " + ", ".join(str(p) for p in paths.values()))
    return EXIT_OK


def cmd_eval(args) -> int:
    if args.folds < 2:
        raise UsageError("--folds must be at least 2")
    cfg = EvalConfig(
        n_folds=args.folds,
        phis=_phis(args.phi),
        knn_k=args.knn_k,
        logistic=not args.no_logistic,
        learned_topics=args.learned_topics,
        eval_sigma=args.eval_sigma,
        coldstart_only=args.coldstart_only,
        walk=_walk_cfg(args, 0),
        context=ContextConfig(args.window),
        lr=LRConfig(args.lr_rate, args.lr_epochs),
        symmetrize=not args.directed,
        seed=args.seed,
        threads=args.threads,
    )
    trainers = [_trainer_cfg(args, s, derive_seed(args.seed, "trainer")) for s in dict.fromkeys(args.sigma)]
    g = _load_graph(args.input)
    report = evaluate(g, trainers, cfg)
    with open(args.out, "w", newline="\n") as fh:
        report.write_csv(fh)
    print(report.table())
    print(f"wrote {len(report.records)} rows to {args.out}")
    return EXIT_OK


def cmd_export(args) -> int:
    sigma = None if args.sigma == "none" else args.sigma
    g = _load_graph(args.input)
    store = EmbeddingStore.load(args.embeddings, sigma or "mask")
    index = {name: i for i, name in enumerate(store.node_names)}
    tindex = {name: i for i, name in enumerate(store.topic_names)}
    try:
        src = [index[g.node_names[e.source]] for e in g.edges]
        dst = [index[g.node_names[e.target]] for e in g.edges]
        top = [tindex[g.topic_names[e.topic]] for e in g.edges] if sigma else [0] * len(g.edges)
    except KeyError as exc:
        raise GraphFormatError(f"{exc.args[0]!r} missing from the embeddings") from None
    feats = edge_matrix(store, src, dst, top, sigma, EdgeOp.parse(args.phi))
    with open(args.out, "w", newline="\n") as fh:
        write_features(fh, g.edges, feats, g.node_names, g.topic_names)
    print(f"wrote {len(g.edges)} feature rows to {args.out}")
    return EXIT_OK


COMMANDS = {"generate": cmd_generate, "train": cmd_train, "eval": cmd_eval, "export": cmd_export}


def main(argv: list[str] | None = None) -> int:
    argv = list(sys.argv[1:] if argv is None else argv)
    try:
        args = parse_args(argv)
    except SystemExit as exc:
        return EXIT_OK if exc.code in (0, None) else EXIT_USAGE
    except UsageError as exc:
        print(f"stance-embed: error: {exc}", file=sys.stderr)
        return EXIT_USAGE
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING, format="%(message)s")
    try:
        return COMMANDS[args.command](args)
    except UsageError as exc:
        print(f"stance-embed: error: {exc}", file=sys.stderr)
        return EXIT_USAGE
    except (ValueError, OSError, KeyError, RuntimeError) as exc:
        print(f"stance-embed: {exc}", file=sys.stderr)
        return EXIT_FAILURE


if __name__ == "__main__":
    sys.exit(main())
