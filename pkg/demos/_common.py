"""Shared plumbing for the demo scripts: one cached model + dataset."""

from pathlib import Path

from advmask.datasets import make_textured_dataset
from advmask.model import build_model, load_weights, save_weights, train

OUT = Path(__file__).parent / "output"

TRAIN_SEED = 101
TEST_SEED = 202


def output_dir(name: str) -> Path:
    d = OUT / name
    d.mkdir(parents=True, exist_ok=True)
    return d


def demo_dataset():
    return make_textured_dataset(240, seed=TRAIN_SEED)


def demo_test_set():
    return make_textured_dataset(25, seed=TEST_SEED)


def ensure_model():
    """Train the demo classifier once; later demos reuse the weights file."""
    OUT.mkdir(parents=True, exist_ok=True)
    weights = OUT / "model.nnw"
    if weights.exists():
        return load_weights(weights)
    print("training the demo classifier (about a minute) ...")
    model = train(
        build_model((28, 28, 1), 10, seed=7),
        demo_dataset(),
        epochs=7,
        learning_rate=0.08,
        seed=11,
        batch_size=64,
        test_dataset=demo_test_set(),
    )
    save_weights(model, weights)
    print(f"  train accuracy {model.metrics['train_accuracy']:.3f}, "
          f"test accuracy {model.metrics['test_accuracy']:.3f}")
    print(f"  weights cached at {weights}")
    return model
