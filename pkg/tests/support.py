import numpy as np

from amcnn.tensor import Tape, Tensor, backward


def max_rel_error(a: np.ndarray, b: np.ndarray, floor: float = 1e-6) -> float:
    """Largest elementwise relative error, floored so near-zero pairs compare absolutely."""
    a = np.asarray(a, dtype=np.float64)
    b = np.asarray(b, dtype=np.float64)
    denom = np.maximum(np.maximum(np.abs(a), np.abs(b)), floor)
    return float(np.max(np.abs(a - b) / denom)) if a.size else 0.0


def tape_gradients(build, arrays: dict) -> dict:
    """Run build() on tape-tracked tensors and return analytic grads per input name."""
    tensors = {k: Tensor(v, requires_grad=True) for k, v in arrays.items()}
    with Tape() as tape:
        loss = build(tensors)
    backward(loss, tape)
    return {k: t.grad if t.grad is not None else np.zeros_like(t.data) for k, t in tensors.items()}


def central_diff_gradients(build, arrays: dict, eps: float = 1e-5) -> dict:
    """Central finite differences of build()'s scalar output w.r.t. every array element."""

    def value() -> float:
        return build({k: Tensor(v) for k, v in arrays.items()}).item()

    grads = {}
    for name, arr in arrays.items():
        fd = np.zeros_like(arr)
        flat = arr.reshape(-1)
        fd_flat = fd.reshape(-1)
        for i in range(flat.size):
            orig = flat[i]
            flat[i] = orig + eps
            hi = value()
            flat[i] = orig - eps
            lo = value()
            flat[i] = orig
            fd_flat[i] = (hi - lo) / (2.0 * eps)
        grads[name] = fd
    return grads


def assert_gradients_match(build, arrays: dict, tol: float = 1e-4, eps: float = 1e-5):
    analytic = tape_gradients(build, arrays)
    numeric = central_diff_gradients(build, arrays, eps=eps)
    for name in arrays:
        err = max_rel_error(analytic[name], numeric[name])
        assert err <= tol, f"gradient mismatch on {name}: rel error {err:.3e}"


# --- shared model fixtures ---------------------------------------------------

POSITIVE_WORDS = ["good", "great", "wonderful", "delightful", "charming",
                  "brilliant", "moving", "funny", "sharp", "gorgeous",
                  "uplifting", "vivid"]
NEGATIVE_WORDS = ["bad", "dull", "tedious", "bland", "clumsy", "hollow",
                  "tired", "flat", "messy", "grim", "lifeless", "dreary"]
FILLER_WORDS = ["the", "a", "an", "film", "movie", "story", "plot", "acting",
                "director", "script", "scene", "cast", "it", "is", "was",
                "and", "with", "of", "that", "this", "but", "its", "one",
                "about", "in", "to", "on", "has", "feels", "looks"]


def synthetic_sentences(n_per_class: int, rng, noise: float = 0.0,
                        min_len: int = 4, max_len: int = 18) -> list:
    """Balanced 2-class corpus: filler sentences seeded with class-polarity
    words, optionally flipped-word noise.  Separable when noise=0."""
    examples = []
    polarity = {0: NEGATIVE_WORDS, 1: POSITIVE_WORDS}
    for label in (0, 1):
        for _ in range(n_per_class):
            length = int(rng.integers(min_len, max_len + 1))
            toks = [FILLER_WORDS[rng.integers(len(FILLER_WORDS))]
                    for _ in range(length)]
            for _ in range(int(rng.integers(1, 4))):
                words = polarity[label]
                toks[int(rng.integers(length))] = words[int(rng.integers(len(words)))]
            if noise > 0 and rng.random() < noise:
                words = polarity[1 - label]
                toks[int(rng.integers(length))] = words[int(rng.integers(len(words)))]
            examples.append((label, " ".join(toks)))
    order = rng.permutation(len(examples))
    return [examples[i] for i in order]


def tiny_config(**overrides):
    """Small dimensions for fast whole-model tests and gradient checks."""
    from amcnn.model import ModelConfig
    base = dict(hidden_size=4, embedding_dim=5, channels=2, mode="combined",
                filter_widths=(2, 3), maps_per_width=3, classes=3,
                dropout_embedding=0.0, dropout_cnn_input=0.0,
                dropout_penultimate=0.0, l2_lambda=0.0005, max_length=7,
                seed=777)
    base.update(overrides)
    return ModelConfig(**base)


def tiny_batch(rng, config, vocab_size: int = 11, n_examples: int = 3,
               keep_tokens: bool = False):
    """Random encoded batch with a leading pad span per row."""
    from amcnn.text import EncodedBatch
    length = config.max_length
    ids = rng.integers(0, vocab_size, size=(n_examples, length)).astype(np.int64)
    pad_mask = np.zeros((n_examples, length), dtype=bool)
    for e in range(n_examples):
        pads = int(rng.integers(0, length - max(config.filter_widths)))
        pad_mask[e, :pads] = True
        ids[e, :pads] = 0
    labels = rng.integers(0, config.classes, size=n_examples).astype(np.int64)
    tokens = ([[f"w{i}" for i in row[m:]] for row, m in
               zip(ids, pad_mask.sum(axis=1))] if keep_tokens else None)
    return EncodedBatch(ids, pad_mask, labels, tokens=tokens)
