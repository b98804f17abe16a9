"""Gradient-sign attacks: single-step, iterative, localized, entropy-masked.

All attacks move pixels along the sign of the input gradient of the
cross-entropy objective. Targeted runs descend on the target label's loss
until the classifier reports it with the configured certainty; untargeted
runs ascend on the original label's loss until the label flips. Every
iterate is clipped to the valid intensity range [0, 1] and to an
l-infinity ball around the original image.

The localized variant scales each pixel's step by a strength map in
[0, 1]; pixels where the map is zero are provably never touched, which is
what lets a well-chosen map hide the perturbation.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .errors import ZeroMaskError
from .image import Image, l0_count, l2_distance, linf_distance, to_grayscale
from .maps import StrengthMap, kappa, local_entropy, phi
from .model import Model, Prediction, forward, input_gradient

__all__ = [
    "AttackConfig",
    "AttackResult",
    "fgsm",
    "bim",
    "localized_bim",
    "ebim",
]

TARGETED = "targeted"
UNTARGETED = "untargeted"


@dataclass(frozen=True)
class AttackConfig:
    """Stopping rule and step schedule for the iterative attacks.

    ``linf_budget`` caps the total per-pixel change relative to the
    original image; ``stepsize`` is the per-iteration step.
    """

    mode: str = TARGETED
    target_label: int | None = None
    certainty_threshold: float = 0.99
    stepsize: float = 0.004
    max_iterations: int = 1000
    linf_budget: float = 1.0

    def __post_init__(self):
        if self.mode not in (TARGETED, UNTARGETED):
            raise ValueError(f"mode must be targeted or untargeted, got {self.mode!r}")
        if self.mode == TARGETED and self.target_label is None:
            raise ValueError("targeted mode requires target_label")
        if not 0.0 < self.certainty_threshold < 1.0:
            raise ValueError("certainty_threshold must be in (0, 1)")
        if self.stepsize <= 0.0:
            raise ValueError("stepsize must be positive")
        if self.max_iterations < 1:
            raise ValueError("max_iterations must be >= 1")
        if not 0.0 < self.linf_budget <= 1.0:
            raise ValueError("linf_budget must be in (0, 1]")


@dataclass(frozen=True)
class AttackResult:
    adversarial: Image
    iterations_used: int
    final_prediction: Prediction
    success: bool
    linf: float
    l2: float
    l0: int
    strength_map_used: StrengthMap | None = None

    def summary(self) -> dict:
        return {
            "success": self.success,
            "iterations": self.iterations_used,
            "label": self.final_prediction.label,
            "certainty": self.final_prediction.certainty,
            "linf": self.linf,
            "l2": self.l2,
            "l0": self.l0,
        }


def _result(original: Image, adv_data, iterations, pred, success, strength_map=None):
    adv = Image(adv_data)
    return AttackResult(
        adversarial=adv,
        iterations_used=iterations,
        final_prediction=pred,
        success=success,
        linf=linf_distance(adv, original),
        l2=l2_distance(adv, original),
        l0=l0_count(adv, original),
        strength_map_used=strength_map,
    )


def fgsm(m: Model, x: Image, eps: float) -> AttackResult:
    """Single untargeted step of size eps along sign(dJ/dx) at the original label.

    Success means the predicted label changed.
    """
    if not 0.0 <= eps <= 1.0:
        raise ValueError(f"eps must be in [0, 1], got {eps}")
    orig = forward(m, x)
    grad = input_gradient(m, x, orig.label)
    adv = np.clip(x.data + eps * np.sign(grad), 0.0, 1.0)
    pred = forward(m, Image(adv))
    return _result(x, adv, 1, pred, pred.label != orig.label)


def _setup(m: Model, x: Image, cfg: AttackConfig):
    """Resolve the loss label and stopping predicate for one attack run."""
    entry = forward(m, x)
    if cfg.mode == TARGETED:
        target = cfg.target_label
        if not 0 <= target < m.num_classes:
            raise ValueError(f"target label {target} out of range")

        def stop(pred):
            return (
                pred.label == target
                and float(pred.probabilities[target]) >= cfg.certainty_threshold
            )

        return entry, target, -1.0, stop

    original_label = entry.label

    def stop(pred):
        return pred.label != original_label

    return entry, original_label, +1.0, stop


def bim(m: Model, x: Image, cfg: AttackConfig) -> AttackResult:
    """Iterative sign-gradient attack with uniform per-pixel steps.

    Descends on the target label's loss (targeted) or ascends on the
    original label's loss (untargeted), clipping every iterate to [0, 1]
    and to the linf budget, and checking the stopping condition after
    each update. The condition is also checked at entry, so an input
    that already satisfies it reports success after zero iterations.
    """
    entry, label, direction, stop = _setup(m, x, cfg)
    if stop(entry):
        return _result(x, x.data.copy(), 0, entry, True)

    orig = x.data
    low = np.maximum(orig - cfg.linf_budget, 0.0)
    high = np.minimum(orig + cfg.linf_budget, 1.0)
    current = orig.copy()
    pred = entry
    for iteration in range(1, cfg.max_iterations + 1):
        grad = input_gradient(m, Image(current), label)
        current = current + direction * cfg.stepsize * np.sign(grad)
        current = np.clip(current, low, high)
        pred = forward(m, Image(current))
        if stop(pred):
            return _result(x, current, iteration, pred, True)
    return _result(x, current, cfg.max_iterations, pred, False)


def localized_bim(m: Model, x: Image, cfg: AttackConfig, E: StrengthMap) -> AttackResult:
    """Iterative attack with per-pixel step stepsize * E, broadcast over channels.

    Pixels with E = 0 stay bit-identical to the original. Rejects maps
    with zero relative total strength up front.
    """
    if (E.height, E.width) != (x.height, x.width):
        raise ValueError(
            f"strength map {E.height}x{E.width} does not match image "
            f"{x.height}x{x.width}"
        )
    if kappa(E) == 0.0:
        raise ZeroMaskError("strength map is identically zero")

    entry, label, direction, stop = _setup(m, x, cfg)
    if stop(entry):
        return _result(x, x.data.copy(), 0, entry, True, strength_map=E)

    scale = E.data[:, :, None]
    orig = x.data
    low = np.maximum(orig - cfg.linf_budget, 0.0)
    high = np.minimum(orig + cfg.linf_budget, 1.0)
    current = orig.copy()
    pred = entry
    for iteration in range(1, cfg.max_iterations + 1):
        grad = input_gradient(m, Image(current), label)
        current = current + direction * cfg.stepsize * scale * np.sign(grad)
        current = np.clip(current, low, high)
        pred = forward(m, Image(current))
        if stop(pred):
            return _result(x, current, iteration, pred, True, strength_map=E)
    return _result(x, current, cfg.max_iterations, pred, False, strength_map=E)


def ebim(m: Model, x: Image, cfg: AttackConfig, radius: int = 5, bins: int = 256,
         phi_mode: str = "binarize", threshold: float = 4.2,
         gamma: float = 1.0) -> AttackResult:
    """Entropy-masked iterative attack.

    Builds the strength map from the local entropy of the grayscale input
    (binarized at ``threshold`` by default) and runs the localized attack
    with it; the map is recorded in the result. Fails up front when the
    mask is identically zero, i.e. the image has no region complex enough
    to hide in at this threshold.
    """
    entropy = local_entropy(to_grayscale(x), radius=radius, bins=bins)
    mask = phi(entropy, mode=phi_mode, threshold=threshold, gamma=gamma)
    if float(mask.data.max()) == 0.0:
        raise ZeroMaskError(
            "entropy mask is identically zero: image is too homogeneous for "
            f"threshold {threshold}; lower the threshold or use normalize-gamma"
        )
    return localized_bim(m, x, cfg, mask)
