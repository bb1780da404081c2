"""Power-law parameterizations and conversions between them.

Two equivalent forms are used:

  raw         err(v) = err_inf + k * v**alpha
  normalized  err(v) = err_inf + (v / scale)**alpha

with k = scale**(-alpha). The normalized form is what summary tables print;
the raw form is what fitting and prediction work in.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

from .datasets import ScaleVariable
from .errors import DegenerateLawError, ValidationError


@dataclass(frozen=True)
class PowerLaw:
    """Raw-form power law: err_inf + k * v**alpha (error in percent)."""

    err_inf: float
    k: float
    alpha: float
    variable: ScaleVariable = ScaleVariable.DATASET_SIZE

    def __post_init__(self) -> None:
        if not math.isfinite(self.err_inf) or self.err_inf < 0:
            raise ValidationError(f"err_inf must be finite and >= 0, got {self.err_inf}")
        if not math.isfinite(self.k) or self.k <= 0:
            raise ValidationError(f"k must be finite and > 0, got {self.k}")
        if not math.isfinite(self.alpha) or self.alpha >= 0:
            raise ValidationError(f"alpha must be finite and < 0, got {self.alpha}")


@dataclass(frozen=True)
class NormalizedPowerLaw:
    """Normalized-form power law: err_inf + (v / scale)**alpha."""

    err_inf: float
    scale: float
    alpha: float
    variable: ScaleVariable = ScaleVariable.DATASET_SIZE

    def __post_init__(self) -> None:
        if not math.isfinite(self.err_inf) or self.err_inf < 0:
            raise ValidationError(f"err_inf must be finite and >= 0, got {self.err_inf}")
        if not math.isfinite(self.scale) or self.scale <= 0:
            raise ValidationError(f"scale must be finite and > 0, got {self.scale}")
        if not math.isfinite(self.alpha) or self.alpha >= 0:
            raise ValidationError(f"alpha must be finite and < 0, got {self.alpha}")


def normalize_law(law: PowerLaw) -> NormalizedPowerLaw:
    """Convert raw form to normalized form: scale = k**(-1/alpha)."""
    if law.alpha == 0:
        raise DegenerateLawError("alpha = 0 admits no normalized form")
    log_scale = -math.log(law.k) / law.alpha
    if abs(log_scale) > 700.0:  # exp() would overflow/underflow
        raise DegenerateLawError(
            f"scale = exp({log_scale:.3g}) is not representable; alpha too close to 0"
        )
    return NormalizedPowerLaw(
        err_inf=law.err_inf,
        scale=math.exp(log_scale),
        alpha=law.alpha,
        variable=law.variable,
    )


def denormalize_law(law: NormalizedPowerLaw) -> PowerLaw:
    """Convert normalized form to raw form: k = scale**(-alpha)."""
    if law.alpha == 0:
        raise DegenerateLawError("alpha = 0 admits no raw form")
    log_k = -law.alpha * math.log(law.scale)
    if abs(log_k) > 700.0:
        raise DegenerateLawError(f"k = exp({log_k:.3g}) is not representable")
    return PowerLaw(
        err_inf=law.err_inf,
        k=math.exp(log_k),
        alpha=law.alpha,
        variable=law.variable,
    )
