"""Radial interaction kernels rho(r) = c * r^(-d-alpha) on a ball of radius delta.

The admissible exponent range is -1 <= alpha < 2.  The constant c is set by a
calibration policy:

* ``PaperPrinted`` -- the tabulated constants 2(2-alpha) delta^(alpha-2) / pi
  in 2D and 3(2-alpha) delta^(alpha-2) / (2 pi) in 3D; both give the kernel
  second moment 2d, so the operator tends to the Laplacian as delta -> 0.
* ``SecondMomentD`` -- c chosen so the second moment equals d.
* ``SecondMoment2D`` -- c chosen so the second moment equals 2d (numerically
  identical to ``PaperPrinted`` for this power-law family; kept as a separate
  name so configurations state intent).
* ``Explicit`` -- caller-supplied c.
"""
from __future__ import annotations

import json
import math
from dataclasses import dataclass
from enum import Enum

import numpy as np

__all__ = [
    "Normalization",
    "KernelSpec",
    "MomentReport",
    "make_kernel",
    "second_moment",
    "kernel_to_json",
    "kernel_from_json",
]

_SPHERE_AREA = {2: 2.0 * math.pi, 3: 4.0 * math.pi}


class Normalization(str, Enum):
    PAPER_PRINTED = "PaperPrinted"
    SECOND_MOMENT_D = "SecondMomentD"
    SECOND_MOMENT_2D = "SecondMoment2D"
    EXPLICIT = "Explicit"


@dataclass(frozen=True)
class KernelSpec:
    d: int
    alpha: float
    delta: float
    c: float
    normalization: Normalization

    def rho(self, r):
        """Kernel value c * r^(-d-alpha)."""
        return self.c * np.asarray(r, dtype=float) ** (-self.d - self.alpha)


@dataclass(frozen=True)
class MomentReport:
    second_moment: float


def make_kernel(d, alpha, delta, normalization=Normalization.PAPER_PRINTED, c=None):
    """Build a :class:`KernelSpec`, validating the parameter ranges."""
    d = int(d)
    if d not in (2, 3):
        raise ValueError(f"d must be 2 or 3, got {d}")
    alpha = float(alpha)
    if not (-1.0 <= alpha < 2.0):
        raise ValueError(f"alpha must lie in [-1, 2), got {alpha}")
    delta = float(delta)
    if not delta > 0.0:
        raise ValueError("delta must be positive")
    norm = Normalization(normalization)
    if norm is Normalization.EXPLICIT:
        if c is None or not c > 0.0:
            raise ValueError("Explicit normalization requires c > 0")
        cval = float(c)
    else:
        if c is not None:
            raise ValueError("c is only accepted with Explicit normalization")
        scale = (2.0 - alpha) * delta ** (alpha - 2.0) / _SPHERE_AREA[d]
        if norm is Normalization.SECOND_MOMENT_D:
            cval = d * scale
        else:  # PaperPrinted and SecondMoment2D coincide for this family
            cval = 2.0 * d * scale
    return KernelSpec(d=d, alpha=alpha, delta=delta, c=cval, normalization=norm)


def second_moment(spec: KernelSpec) -> MomentReport:
    """Second moment int_{|s|<delta} |s|^2 rho(|s|) ds, in closed form."""
    m2 = spec.c * _SPHERE_AREA[spec.d] * spec.delta ** (2.0 - spec.alpha) / (2.0 - spec.alpha)
    return MomentReport(second_moment=m2)


def kernel_to_json(spec: KernelSpec) -> str:
    payload = {
        "d": spec.d,
        "alpha": spec.alpha,
        "delta": spec.delta,
        "normalization": spec.normalization.value,
    }
    if spec.normalization is Normalization.EXPLICIT:
        payload["c"] = spec.c
    return json.dumps(payload)


def kernel_from_json(text: str) -> KernelSpec:
    payload = json.loads(text)
    keys = set(payload)
    if not keys <= {"d", "alpha", "delta", "normalization", "c"}:
        raise ValueError(f"unknown kernel fields: {sorted(keys - {'d', 'alpha', 'delta', 'normalization', 'c'})}")
    return make_kernel(
        payload["d"],
        payload["alpha"],
        payload["delta"],
        normalization=payload["normalization"],
        c=payload.get("c"),
    )
