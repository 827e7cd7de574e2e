"""Train a small model on a synthetic sentiment corpus, then look at what
the attention channels point at.

Run from the repository root:

    python3 demos/train_and_inspect.py

The corpus is built right here: filler sentences seeded with a few
polarity-carrying words, so the task is learnable in seconds and the
attention weights have an obvious right answer to land on.
"""

import numpy as np

from amcnn.model import ModelConfig, forward
from amcnn.text import encode_dataset, max_sentence_length
from amcnn.train import TrainConfig, evaluate, train

POSITIVE = ["wonderful", "superb", "delightful", "gripping"]
NEGATIVE = ["dreadful", "tedious", "clumsy", "hollow"]
FILLER = ["the", "film", "was", "a", "story", "about", "people", "and",
          "places", "with", "music", "that", "kept", "going"]


def make_corpus(per_class: int, rng: np.random.Generator) -> list:
    examples = []
    for label, words in ((1, POSITIVE), (0, NEGATIVE)):
        for _ in range(per_class):
            length = int(rng.integers(5, 11))
            tokens = [FILLER[i] for i in rng.integers(0, len(FILLER), length)]
            slot = int(rng.integers(0, length))
            tokens[slot] = words[int(rng.integers(0, len(words)))]
            examples.append((label, " ".join(tokens)))
    order = rng.permutation(len(examples))
    return [examples[i] for i in order]


def main() -> None:
    rng = np.random.default_rng(7)
    corpus = make_corpus(24, rng)

    # small dimensions keep this under half a minute on a laptop
    config = ModelConfig(hidden_size=16, embedding_dim=16, channels=2,
                         mode="combined", filter_widths=(2, 3),
                         maps_per_width=8, classes=2,
                         dropout_embedding=0.0, dropout_cnn_input=0.0,
                         dropout_penultimate=0.0, seed=11)
    schedule = TrainConfig(batch_size=8, learning_rate=5e-3, epochs=40,
                           target_dev_accuracy=1.0)
    params, metrics, vocab = train(config, corpus, corpus, schedule)
    print(f"trained {len(metrics)} epochs, "
          f"final train accuracy {metrics[-1]['dev_accuracy']:.2f}")

    # re-encode a few sentences keeping the raw tokens so the attention
    # records can label their weights
    sample = corpus[:4]
    batch = encode_dataset(sample, vocab, max_sentence_length(corpus),
                           keep_tokens=True)
    _, _, records = forward(batch, params, config, None, training=False)

    for record in records:
        words = [t for t, pad in zip(record.tokens, record.pads) if not pad]
        print(f"\n  {' '.join(words)}")
        print(f"  predicted {record.predicted}, true {record.label}")
        for idx, weights in enumerate(record.channels):
            visible = [(w, t) for w, t, pad in
                       zip(weights, record.tokens, record.pads) if not pad]
            top = sorted(visible, reverse=True)[:3]
            shown = ", ".join(f"{t} ({w:.2f})" for w, t in top)
            print(f"  channel {idx} looks at: {shown}")


if __name__ == "__main__":
    main()
