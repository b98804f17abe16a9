#!/usr/bin/env python3
"""Single-step and iterative sign-gradient attacks.

The single-step attack moves every pixel by eps along the gradient sign
and usually flips the label but with visible noise everywhere. The
iterative attack takes many small steps toward a chosen target label and
stops once the classifier reports it with 99% certainty; its
perturbation is far smaller, and saving the contrast-maximized
difference image shows exactly what was touched.
"""

import numpy as np

from advmask.attacks import AttackConfig, bim, fgsm
from advmask.image import Image, save_image

from _common import demo_test_set, ensure_model, output_dir

out = output_dir("03_attacks")
model = ensure_model()
xs, ys = demo_test_set()

img = Image(xs[3])
save_image(img, out / "original.pgm")
from advmask.model import forward
before = forward(model, img)
print(f"original: label {before.label}, certainty {before.certainty:.3f}")

# one coarse step
r1 = fgsm(model, img, eps=0.05)
print(f"\nfgsm eps=0.05: success={r1.success}, "
      f"label {r1.final_prediction.label}, linf {r1.linf:.3f}, l0 {r1.l0}")
save_image(r1.adversarial, out / "fgsm.pgm")

# many fine steps toward a chosen label
target = (before.label + 4) % 10
cfg = AttackConfig(mode="targeted", target_label=target,
                   certainty_threshold=0.99, stepsize=0.004,
                   max_iterations=1000)
r2 = bim(model, img, cfg)
print(f"\niterative targeted -> {target}: success={r2.success} "
      f"in {r2.iterations_used} iterations")
print(f"  final certainty {r2.final_prediction.certainty:.4f}")
print(f"  norms: linf {r2.linf:.4f}, l2 {r2.l2:.4f}, l0 {r2.l0}")
save_image(r2.adversarial, out / "bim.pgm")

# contrast-maximized difference: affine rescale of the raw difference
diff = r2.adversarial.data - img.data
lo, hi = diff.min(), diff.max()
scaled = np.zeros_like(diff) if hi - lo < 1e-15 else (diff - lo) / (hi - lo)
save_image(Image(scaled), out / "bim_difference.pgm")
print(f"\ncontrast-maximized difference written to {out / 'bim_difference.pgm'}")
print("note how the iterative attack's noise covers the whole frame,")
print("including the smooth background where the eye catches it first.")
