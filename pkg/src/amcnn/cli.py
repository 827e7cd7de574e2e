"""Command-line interface: train, eval, predict, gradcheck, inspect-attention.

Configuration lives in a flat "key = value" text file ('#' comments allowed);
command-line flags override file values.  Every command prints a one-line
diagnostic to stderr and exits nonzero on failure:

    1  gradient check over tolerance
    2  bad configuration
    3  data format problem
    4  checkpoint/data shape mismatch
    5  I/O failure
"""

from __future__ import annotations

import argparse
import json
import os
import sys
from dataclasses import dataclass, field, replace

import numpy as np

from .checkpoint import load_checkpoint, save_checkpoint
from .errors import ConfigError, DimensionError, FormatError
from .model import ModelConfig, forward, init_params
from .text import (encode_dataset, load_dataset, load_word2vec_text,
                   max_sentence_length)
from .train import (TrainConfig, evaluate, model_grad_check, smooth_start,
                    train)


@dataclass
class RunConfig:
    model: ModelConfig = field(default_factory=ModelConfig)
    train: TrainConfig = field(default_factory=TrainConfig)
    train_file: str = ""
    dev_file: str = ""
    test_file: str = ""
    pretrained_file: str = ""
    checkpoint: str = "model.ckpt"
    out_dir: str = "."

    def checkpoint_path(self) -> str:
        if os.path.isabs(self.checkpoint):
            return self.checkpoint
        return os.path.join(self.out_dir, self.checkpoint)


def _int_tuple(text: str) -> tuple:
    return tuple(int(part) for part in text.split(","))


def _float_tuple(text: str) -> tuple:
    return tuple(float(part) for part in text.split(","))


# key -> (section, attribute, parser); sections: m=model, t=train, p=paths
CONFIG_KEYS = {
    "hidden_size": ("m", "hidden_size", int),
    "embedding_dim": ("m", "embedding_dim", int),
    "channels": ("m", "channels", int),
    "mode": ("m", "mode", str),
    "filter_widths": ("m", "filter_widths", _int_tuple),
    "maps_per_width": ("m", "maps_per_width", int),
    "classes": ("m", "classes", int),
    "dropout_embedding": ("m", "dropout_embedding", float),
    "dropout_cnn_input": ("m", "dropout_cnn_input", float),
    "dropout_penultimate": ("m", "dropout_penultimate", float),
    "l2_lambda": ("m", "l2_lambda", float),
    "keep_probs": ("m", "keep_probs", _float_tuple),
    "attention_hidden": ("m", "attention_hidden", int),
    "attention_sum_axis": ("m", "attention_sum_axis", int),
    "max_length": ("m", "max_length", int),
    "seed": ("m", "seed", int),
    "batch_size": ("t", "batch_size", int),
    "epochs": ("t", "epochs", int),
    "learning_rate": ("t", "learning_rate", float),
    "beta1": ("t", "beta1", float),
    "beta2": ("t", "beta2", float),
    "adam_eps": ("t", "eps", float),
    "min_freq": ("t", "min_freq", int),
    "target_dev_accuracy": ("t", "target_dev_accuracy", float),
    "train_file": ("p", "train_file", str),
    "dev_file": ("p", "dev_file", str),
    "test_file": ("p", "test_file", str),
    "pretrained_file": ("p", "pretrained_file", str),
    "checkpoint": ("p", "checkpoint", str),
    "out_dir": ("p", "out_dir", str),
}


def load_run_config(path: str | None) -> RunConfig:
    """Parse a flat key = value file; unknown keys and unparseable values
    are configuration errors."""
    rc = RunConfig()
    if path is None:
        return rc
    try:
        with open(path, encoding="utf-8") as fh:
            lines = fh.readlines()
    except OSError as exc:
        raise ConfigError(f"cannot read config {path}: {exc.strerror}") from None
    for lineno, line in enumerate(lines, start=1):
        stripped = line.strip()
        if not stripped or stripped.startswith("#"):
            continue
        if "=" not in stripped:
            raise ConfigError(f"{path}:{lineno}: expected 'key = value'")
        key, _, value = stripped.partition("=")
        key, value = key.strip(), value.strip()
        if key not in CONFIG_KEYS:
            raise ConfigError(f"{path}:{lineno}: unknown key {key!r}")
        section, attr, parse = CONFIG_KEYS[key]
        try:
            parsed = parse(value)
        except ValueError:
            raise ConfigError(
                f"{path}:{lineno}: bad value {value!r} for {key}") from None
        target = {"m": rc.model, "t": rc.train, "p": rc}[section]
        setattr(target, attr, parsed)
    return rc


def _fail(message: str, code: int) -> int:
    print(message, file=sys.stderr)
    return code


def _load_examples(path: str, what: str) -> list:
    if not path:
        return []
    if not os.path.exists(path):
        raise FormatError(f"{what} file not found: {path}")
    return load_dataset(path)


def cmd_train(args) -> int:
    if not args.config:
        raise ConfigError("train requires --config")
    rc = load_run_config(args.config)
    _apply_overrides(rc, args)
    if not rc.train_file:
        raise ConfigError("config must set train_file")
    train_examples = _load_examples(rc.train_file, "train")
    dev_examples = _load_examples(rc.dev_file, "dev")
    pretrained = None
    if rc.pretrained_file:
        if not os.path.exists(rc.pretrained_file):
            raise FormatError(f"pretrained file not found: {rc.pretrained_file}")
        pretrained = load_word2vec_text(rc.pretrained_file)
    rc.model.validate()

    params, metrics, vocab = train(rc.model, train_examples, dev_examples,
                                   rc.train, pretrained=pretrained)
    os.makedirs(rc.out_dir, exist_ok=True)
    # train() derives max_length from the data when unset; persist the
    # resolved value so eval/predict pad identically
    resolved = replace(rc.model, max_length=_resolved_length(train_examples,
                                                             rc.model))
    save_checkpoint(params, resolved, vocab, rc.checkpoint_path())
    metrics_path = os.path.join(rc.out_dir, "metrics.jsonl")
    with open(metrics_path, "w", encoding="utf-8") as fh:
        for entry in metrics:
            fh.write(json.dumps(entry) + "\n")
    best = max((m["dev_accuracy"] for m in metrics), default=0.0)
    print(f"trained {len(metrics)} epochs, best dev accuracy {best:.4f}")
    print(f"checkpoint: {rc.checkpoint_path()}")
    return 0


def _resolved_length(train_examples: list, config: ModelConfig) -> int:
    return config.max_length or max_sentence_length(train_examples)


def _apply_overrides(rc: RunConfig, args) -> None:
    if getattr(args, "seed", None) is not None:
        rc.model.seed = args.seed
    if getattr(args, "out", None):
        rc.out_dir = args.out


def cmd_eval(args) -> int:
    params, config, vocab = _load_checkpoint_or_format_error(args.checkpoint)
    examples = _load_examples(args.data, "test")
    for label, _ in examples:
        if not 0 <= label < config.classes:
            raise DimensionError(
                f"label {label} outside checkpoint's {config.classes} classes")
    batch = encode_dataset(examples, vocab, config.max_length)
    print(f"accuracy={evaluate(params, batch, config):.4f}")
    return 0


def cmd_predict(args) -> int:
    params, config, vocab = _load_checkpoint_or_format_error(args.checkpoint)
    for line in sys.stdin:
        batch = encode_dataset([(0, line.rstrip("\n"))], vocab, config.max_length)
        _, probs, _ = forward(batch, params, config, None, training=False)
        scores = " ".join(f"{p:.6f}" for p in probs[0])
        print(f"{int(np.argmax(probs[0]))}\t{scores}")
    return 0


def cmd_gradcheck(args) -> int:
    if args.config:
        rc = load_run_config(args.config)
        config = rc.model
    else:
        # tiny dimensions keep the finite-difference sweep under a minute
        config = ModelConfig(hidden_size=4, embedding_dim=5, channels=2,
                             mode="combined", filter_widths=(2, 3),
                             maps_per_width=3, classes=3,
                             dropout_embedding=0.0, dropout_cnn_input=0.0,
                             dropout_penultimate=0.0, max_length=7)
    if getattr(args, "seed", None) is not None:
        config = type(config)(**{**config.to_dict(), "seed": args.seed})
    config.validate()
    if not config.max_length:
        raise ConfigError("gradcheck needs an explicit max_length")

    rng = np.random.default_rng(config.seed)
    vocab_size = 11
    params = init_params(config, vocab_size, rng)
    smooth_start(params)
    from .text import EncodedBatch
    length = config.max_length
    ids = rng.integers(0, vocab_size, size=(2, length)).astype(np.int64)
    pad_mask = np.zeros((2, length), dtype=bool)
    pad_mask[0, :2] = True
    ids[0, :2] = 0
    labels = np.arange(2, dtype=np.int64) % config.classes
    batch = EncodedBatch(ids, pad_mask, labels)

    report = model_grad_check(params, batch, config, eps=args.eps,
                              tol=args.tolerance)
    for name, err in report["per_parameter"].items():
        print(f"{name:24s} {err:.3e}")
    print(f"max relative error {report['max_error']:.3e} "
          f"(tolerance {report['tolerance']:.1e})")
    return 0 if report["passed"] else 1


def cmd_inspect_attention(args) -> int:
    params, config, vocab = load_checkpoint(args.checkpoint)
    if config.mode == "vectorial":
        raise ConfigError(
            "attention export needs per-word scalar weights; "
            "mode=vectorial produces none")
    examples = _read_inspect_input(args.data)
    # file labels are export metadata only; the forward pass never uses them
    batch = encode_dataset([(0, text) for _, text in examples],
                           vocab, config.max_length, keep_tokens=True)
    _, _, records = forward(batch, params, config, None, training=False)
    payload = []
    for (label, _), rec in zip(examples, records):
        payload.append({"tokens": rec.tokens, "pads": rec.pads,
                        "channels": rec.channels, "predicted": rec.predicted,
                        "label": label})
    out_path = args.out or "attention.json"
    with open(out_path, "w", encoding="utf-8") as fh:
        json.dump(payload, fh)
    print(f"wrote {len(payload)} records to {out_path}")
    return 0


def _read_inspect_input(path: str) -> list:
    """Dataset lines, but labels are optional: a line without a tab is an
    unlabeled sentence."""
    examples = []
    with open(path, encoding="utf-8") as fh:
        for lineno, line in enumerate(fh, start=1):
            line = line.rstrip("\n")
            if not line:
                continue
            if "\t" in line:
                label_str, text = line.split("\t", 1)
                try:
                    label = int(label_str)
                except ValueError:
                    raise FormatError(
                        f"{path}:{lineno}: non-integer label {label_str!r}") from None
                examples.append((label, text))
            else:
                examples.append((None, line))
    return examples


def _load_checkpoint_or_format_error(path: str):
    if not os.path.exists(path):
        raise FormatError(f"checkpoint not found: {path}")
    return load_checkpoint(path)


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="amcnn",
        description="Attention-based multichannel CNN sentence classifier")
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--config", help="key = value configuration file")
    common.add_argument("--seed", type=int, help="override the config seed")
    common.add_argument("--out", help="override the output directory")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("train", parents=[common], help="train a model")
    p.set_defaults(func=cmd_train)

    p = sub.add_parser("eval", parents=[common], help="print test accuracy")
    p.add_argument("checkpoint")
    p.add_argument("data")
    p.set_defaults(func=cmd_eval)

    p = sub.add_parser("predict", parents=[common],
                       help="classify stdin lines")
    p.add_argument("checkpoint")
    p.set_defaults(func=cmd_predict)

    p = sub.add_parser("gradcheck", parents=[common],
                       help="compare tape gradients with finite differences")
    p.add_argument("--tolerance", type=float, default=1e-4)
    p.add_argument("--eps", type=float, default=1e-5)
    p.set_defaults(func=cmd_gradcheck)

    p = sub.add_parser("inspect-attention", parents=[common],
                       help="export per-channel attention weights as JSON")
    p.add_argument("checkpoint")
    p.add_argument("data")
    p.set_defaults(func=cmd_inspect_attention)
    return parser


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    try:
        return args.func(args)
    except ConfigError as exc:
        return _fail(f"config error: {exc}", 2)
    except FormatError as exc:
        return _fail(f"data error: {exc}", 3)
    except DimensionError as exc:
        return _fail(f"shape mismatch: {exc}", 4)
    except OSError as exc:
        return _fail(f"io error: {exc}", 5)
    except ValueError as exc:
        return _fail(f"error: {exc}", 2)


if __name__ == "__main__":
    sys.exit(main())
