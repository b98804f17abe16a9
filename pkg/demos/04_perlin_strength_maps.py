#!/usr/bin/env python3
"""Localizing an attack with noise-shaped strength maps.

A strength map assigns each pixel an update magnitude in [0, 1]; the
iterative attack multiplies its per-pixel step by that map, so black
regions are provably untouched. Here the maps come from smooth gradient
noise scaled to successively smaller relative total strengths (kappa,
the mean of the map). The attack still succeeds as the writable area
shrinks, it just needs more iterations.
"""

import numpy as np

from advmask.attacks import AttackConfig, localized_bim
from advmask.image import Image
from advmask.maps import adjust_to_kappa, kappa, map_to_pgm, perlin_map
from advmask.model import forward

from _common import demo_test_set, ensure_model, output_dir

out = output_dir("04_perlin")
model = ensure_model()
xs, _ = demo_test_set()

img = Image(xs[0])
before = forward(model, img)
target = (before.label + 3) % 10
cfg = AttackConfig(mode="targeted", target_label=target,
                   certainty_threshold=0.99, stepsize=0.004,
                   max_iterations=1000)

base = perlin_map(28, 28, cell_size=8, octaves=2, seed=12)
map_to_pgm(base, out / "noise_raw.pgm")

print(f"attacking label {before.label} -> {target} at 99% certainty")
print(f"{'kappa':>8} {'iterations':>11} {'linf':>8} {'l0':>6}")
for level in (0.43, 0.14, 0.04):
    E = adjust_to_kappa(base, level)
    map_to_pgm(E, out / f"noise_kappa_{level:.2f}.pgm")
    r = localized_bim(model, img, cfg, E)
    tag = "" if r.success else "  (gave up)"
    print(f"{kappa(E):8.3f} {r.iterations_used:11d} {r.linf:8.3f} {r.l0:6d}{tag}")
    from advmask.image import save_image
    save_image(r.adversarial, out / f"attacked_kappa_{level:.2f}.pgm")

print("\nthe map is continuous, so shrinking kappa dims per-pixel step sizes")
print("rather than shrinking the support: the attack needs more iterations")
print("to deliver the same total push. (For hard on/off masks, see demo 05.)")
print(f"outputs in {out}")
