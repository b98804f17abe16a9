#!/usr/bin/env python3
"""Train the desk-scale classifier every other demo attacks.

The network is a compact stack (two 3x3 conv/relu/pool blocks and a dense
read-out) trained with plain minibatch SGD on the synthetic glyph
dataset. Training is fully determined by its seeds, so rerunning this
script reproduces the same weights bit for bit.
"""

import numpy as np

from advmask.image import Image
from advmask.model import forward

from _common import demo_test_set, ensure_model

model = ensure_model()
print("\narchitecture:")
print(model.describe())

xs, ys = demo_test_set()
pred = forward(model, Image(xs[0]))
print(f"sample prediction: label {pred.label} (true {ys[0]}), "
      f"certainty {pred.certainty:.3f}")

probs = np.round(pred.probabilities, 3)
print(f"class probabilities: {probs}")
