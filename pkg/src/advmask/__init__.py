"""Localized adversarial attacks hidden in high-entropy image regions.

The package bundles four things: a small differentiable CNN with exact
input gradients, gradient-sign attacks (single-step, iterative, and
per-pixel localized variants), the strength-map toolbox that decides
where an attack may touch an image, and the apparatus for measuring
whether humans can see the result (pair-presentation service plus a
nonparametric/parametric hypothesis-test battery).
"""

from .image import (
    GrayMap,
    Image,
    l0_count,
    l2_distance,
    linf_distance,
    load_image,
    save_image,
    to_grayscale,
)
from .maps import (
    EntropyMap,
    StrengthMap,
    adjust_to_kappa,
    binarize_to_kappa,
    dilate,
    erode,
    kappa,
    local_entropy,
    perlin_map,
    phi,
    scale_brightness,
)
from .model import (
    Model,
    Prediction,
    build_model,
    forward,
    input_gradient,
    load_weights,
    loss,
    save_weights,
    train,
)
from .attacks import AttackConfig, AttackResult, bim, ebim, fgsm, localized_bim

__version__ = "0.1.0"
