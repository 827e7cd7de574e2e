"""Acceptance checks for the full classifier, one test per criterion.

Run with ``pytest -v tests/test_acceptance.py`` to get a pass/fail line per
criterion.  Tolerances are pinned in each test body; runtime-bounded checks
measure wall time with time.monotonic.

The desk-scale floor trains on a synthetic balanced stand-in corpus by
default; point AMCNN_MR_TSV at a real "label<TAB>text" movie-review file to
run the same check on actual data (needs at least 600 lines per class).
"""

import json
import os
import time
from dataclasses import replace

import numpy as np
import pytest

from amcnn.attention import (build_channels, init_scalar_attn,
                             init_vectorial_attn, vectorial_attention)
from amcnn.checkpoint import load_checkpoint, save_checkpoint
from amcnn.cli import main as cli_main
from amcnn.conv import ConvFilter, conv_forward
from amcnn.model import ModelConfig, init_params
from amcnn.tensor import Tensor
from amcnn.text import (EncodedBatch, Vocabulary, encode_dataset,
                        load_dataset, max_sentence_length, tokenize)
from amcnn.train import (TrainConfig, evaluate, model_grad_check,
                         predict_probs, smooth_start, train)

from support import synthetic_sentences

GRAD_TOL = 1e-4
NORM_TOL = 1e-12
CONV_TOL = 1e-12
ACCURACY_FLOOR = 0.65


def run_tiny_gradient_oracle(channels: int = 2, mode: str = "combined") -> dict:
    """Finite-difference check on a 7-token, 4-hidden, 5-dim-embedding model
    with 2 attention channels, widths {2, 3} x 3 maps, 3 classes, dropout off,
    expectation-valued (eval mode) channel masks."""
    config = ModelConfig(hidden_size=4, embedding_dim=5, channels=channels,
                         mode=mode, filter_widths=(2, 3), maps_per_width=3,
                         classes=3, dropout_embedding=0.0,
                         dropout_cnn_input=0.0, dropout_penultimate=0.0,
                         max_length=7, seed=321)
    rng = np.random.default_rng(config.seed)
    vocab_size = 11
    params = init_params(config, vocab_size, rng)
    smooth_start(params)
    ids = rng.integers(0, vocab_size, size=(2, 7)).astype(np.int64)
    pad_mask = np.zeros((2, 7), dtype=bool)
    pad_mask[0, :2] = True
    ids[0, :2] = 0
    labels = np.array([0, 1], dtype=np.int64)
    batch = EncodedBatch(ids, pad_mask, labels)
    return model_grad_check(params, batch, config, eps=1e-5, tol=GRAD_TOL)


@pytest.fixture(scope="module")
def overfit_smoke():
    """Train-to-100% runs, cached per (channels, mode) so the variant test
    reuses the default-config run."""
    cache = {}

    def run(channels: int, mode: str):
        key = (channels, mode)
        if key not in cache:
            rng = np.random.default_rng(4242)
            examples = synthetic_sentences(32, rng)  # 64 total, separable
            config = ModelConfig(channels=channels, mode=mode)
            schedule = TrainConfig(batch_size=8, learning_rate=5e-3,
                                   epochs=200, target_dev_accuracy=1.0)
            started = time.monotonic()
            params, metrics, vocab = train(config, examples, examples, schedule)
            elapsed = time.monotonic() - started
            batch = encode_dataset(examples, vocab, max_sentence_length(examples))
            cache[key] = (evaluate(params, batch, config), len(metrics), elapsed)
        return cache[key]

    return run


class TestAcceptance:
    def test_gradient_oracle_on_tiny_model(self):
        """All parameter gradients match central differences within 1e-4,
        in under 60 seconds."""
        started = time.monotonic()
        report = run_tiny_gradient_oracle()
        elapsed = time.monotonic() - started
        assert report["max_error"] <= GRAD_TOL, report["per_parameter"]
        assert report["passed"]
        assert elapsed < 60.0, f"gradient oracle took {elapsed:.1f}s"

    def test_scalar_attention_weights_normalized_on_100_sentences(self):
        """Per-channel scalar weights sum to 1 +- 1e-12 and put < 1e-12 mass
        on pad positions, across 100 random sentences."""
        rng = np.random.default_rng(555)
        hidden = 4
        for _ in range(100):
            n = int(rng.integers(3, 13))
            H = Tensor(rng.standard_normal((n, 2 * hidden)))
            pad_mask = np.zeros(n, dtype=bool)
            pad_mask[:int(rng.integers(0, n - 1))] = True
            scalar = [init_scalar_attn(2 * hidden, 0.8, rng) for _ in range(2)]
            vector = [init_vectorial_attn(2 * hidden, 3, rng) for _ in range(2)]
            cs = build_channels(H, pad_mask, scalar, vector, "combined",
                                rng=None, training=False)
            for w in cs.scalar_weights:
                assert abs(w.data.sum() - 1.0) <= NORM_TOL
                assert w.data[pad_mask].sum() < NORM_TOL

    def test_vectorial_attention_normalized_per_dimension(self):
        """Each hidden dimension's weights sum across positions to
        1 +- 1e-12."""
        rng = np.random.default_rng(556)
        for _ in range(100):
            n = int(rng.integers(2, 13))
            width = 2 * int(rng.integers(2, 6))
            H = Tensor(rng.standard_normal((n, width)))
            params = init_vectorial_attn(width, 3, rng)
            A = vectorial_attention(H, params)
            assert A.data.shape == (n, width)
            np.testing.assert_allclose(A.data.sum(axis=0), 1.0, rtol=0,
                                       atol=NORM_TOL)

    def test_convolution_matches_naive_oracle_on_50_instances(self):
        """conv_forward equals a quadruple-loop oracle within 1e-12 and the
        feature map has length n - width + 1."""
        rng = np.random.default_rng(808)
        for _ in range(50):
            n = int(rng.integers(3, 10))
            k = int(rng.integers(2, 6))
            n_channels = int(rng.integers(1, 4))
            width = int(rng.integers(2, min(n, 4) + 1))
            channels = [Tensor(rng.standard_normal((n, k)))
                        for _ in range(n_channels)]
            filt = ConvFilter(
                width=width,
                weights=Tensor(rng.standard_normal((width, k, n_channels))),
                bias=Tensor(rng.standard_normal(1)))
            got = conv_forward(channels, filt).data

            expected = np.empty(n - width + 1)
            for j in range(n - width + 1):
                acc = filt.bias.data[0]
                for a in range(width):
                    for b in range(k):
                        for c in range(n_channels):
                            acc += (filt.weights.data[a, b, c]
                                    * channels[c].data[j + a, b])
                expected[j] = max(acc, 0.0)
            assert got.shape == (n - width + 1,)
            assert np.max(np.abs(got - expected)) <= CONV_TOL

    def test_overfit_smoke_reaches_full_training_accuracy(self, overfit_smoke):
        """64 separable synthetic examples reach 100% training accuracy
        within 200 epochs at default model settings, in under 5 minutes."""
        accuracy, epochs, elapsed = overfit_smoke(3, "combined")
        assert accuracy == 1.0, f"plateaued at {accuracy:.4f}"
        assert epochs <= 200
        assert elapsed < 300.0, f"smoke run took {elapsed:.1f}s"

    def test_desk_scale_accuracy_floor(self):
        """Balanced 1000-train/200-test split with random embeddings reaches
        test accuracy >= 0.65 with the 3-channel default model."""
        train_examples, test_examples = _desk_scale_split()
        config = ModelConfig()
        schedule = TrainConfig(batch_size=10, learning_rate=5e-3, epochs=2)
        params, _, vocab = train(config, train_examples, [], schedule)
        length = max_sentence_length(train_examples)
        batch = encode_dataset(test_examples, vocab, length)
        accuracy = evaluate(params, batch, config)
        assert accuracy >= ACCURACY_FLOOR, f"test accuracy {accuracy:.4f}"

    def test_variants_pass_gradient_oracle_and_overfit_smoke(self, overfit_smoke):
        """The 1-channel, 3-channel, and scalar-only variants all pass the
        gradient oracle and reach 100% on the overfit smoke."""
        for channels, mode in [(1, "combined"), (3, "combined"), (3, "scalar")]:
            report = run_tiny_gradient_oracle(channels=channels, mode=mode)
            assert report["passed"], (channels, mode, report["max_error"])
            accuracy, epochs, _ = overfit_smoke(channels, mode)
            assert accuracy == 1.0, (channels, mode, accuracy)
            assert epochs <= 200

    def test_training_is_bit_deterministic(self, tmp_path, capsys):
        """Two runs with the same config and seed write byte-identical
        metrics logs and checkpoints."""
        rng = np.random.default_rng(17)
        data = tmp_path / "train.tsv"
        with open(data, "w", encoding="utf-8") as fh:
            for label, text in synthetic_sentences(8, rng):
                fh.write(f"{label}\t{text}\n")
        blobs = []
        for name in ("first", "second"):
            cfg = tmp_path / f"{name}.cfg"
            cfg.write_text(
                f"hidden_size = 6\nembedding_dim = 8\nchannels = 2\n"
                f"mode = combined\nfilter_widths = 2,3\nmaps_per_width = 4\n"
                f"classes = 2\ndropout_embedding = 0.5\n"
                f"dropout_cnn_input = 0.5\ndropout_penultimate = 0.5\n"
                f"epochs = 2\nbatch_size = 6\nseed = 31337\n"
                f"train_file = {data}\ndev_file = {data}\n"
                f"out_dir = {tmp_path / name}\n")
            assert cli_main(["train", "--config", str(cfg)]) == 0
            capsys.readouterr()
            blobs.append(((tmp_path / name / "metrics.jsonl").read_bytes(),
                          (tmp_path / name / "model.ckpt").read_bytes()))
        assert blobs[0][0] == blobs[1][0], "metrics logs differ"
        assert blobs[0][1] == blobs[1][1], "checkpoints differ"

    def test_checkpoint_round_trip_preserves_evaluation(self, tmp_path):
        """save -> load -> evaluate returns the original accuracy bit-exactly
        (and identical probability tables)."""
        config = ModelConfig(hidden_size=5, embedding_dim=6, channels=2,
                             filter_widths=(2, 3), maps_per_width=3,
                             classes=2, max_length=8, seed=99)
        corpus = [(0, "steady gray rain all afternoon"),
                  (1, "bright warm sun and high spirits"),
                  (1, "a crisp joyful morning walk"),
                  (0, "endless dull queue at the office")]
        vocab = Vocabulary.from_tokens(
            [tok for _, text in corpus for tok in tokenize(text)])
        rng = np.random.default_rng(config.seed)
        params = init_params(config, len(vocab), rng)
        batch = encode_dataset(corpus, vocab, config.max_length)

        before_acc = evaluate(params, batch, config)
        before_probs = predict_probs(params, batch, config)
        path = tmp_path / "round.ckpt"
        save_checkpoint(params, config, vocab, str(path))
        loaded_params, loaded_config, loaded_vocab = load_checkpoint(str(path))
        reloaded_batch = encode_dataset(corpus, loaded_vocab,
                                        loaded_config.max_length)
        after_acc = evaluate(loaded_params, reloaded_batch, loaded_config)
        after_probs = predict_probs(loaded_params, reloaded_batch, loaded_config)

        assert before_acc == after_acc
        np.testing.assert_array_equal(before_probs, after_probs)


def _desk_scale_split():
    """1000 balanced training and 200 balanced test examples: a real
    movie-review file when AMCNN_MR_TSV is set, a noisy synthetic stand-in
    otherwise."""
    path = os.environ.get("AMCNN_MR_TSV")
    if not path:
        rng = np.random.default_rng(20260814)
        return (synthetic_sentences(500, rng, noise=0.08, max_len=12),
                synthetic_sentences(100, rng, noise=0.08, max_len=12))
    examples = load_dataset(path)
    by_label = {0: [], 1: []}
    for label, text in examples:
        if label in by_label:
            by_label[label].append((label, text))
    if min(len(v) for v in by_label.values()) < 600:
        pytest.fail(f"{path} needs >= 600 examples per class")
    rng = np.random.default_rng(13)
    train_examples, test_examples = [], []
    for label in (0, 1):
        pool = by_label[label]
        order = rng.permutation(len(pool))
        train_examples += [pool[i] for i in order[:500]]
        test_examples += [pool[i] for i in order[500:600]]
    return train_examples, test_examples
