"""Reference measures m on S.

Each measure knows the mass of an axis-aligned box, its density, and how to
draw points from its normalized restriction to a box (inverse CDF per axis).
"""

import math

import numpy as np
from scipy import special

from .errors import DomainError

_SQRT2 = math.sqrt(2.0)


class ReferenceMeasure:
    kind = None
    dim = 1

    def density(self, x):
        raise NotImplementedError

    def axis_mass(self, a, b):
        """Mass of [a, b) along one axis (vectorized)."""
        raise NotImplementedError

    def mass(self, lo, hi):
        """Mass of the box prod [lo_k, hi_k).

        ``lo``/``hi`` have shape ``(..., dim)`` (or ``(...)`` when dim == 1).
        """
        lo = np.asarray(lo, dtype=float)
        hi = np.asarray(hi, dtype=float)
        if self.dim == 1:
            return self.axis_mass(lo, hi)
        out = self.axis_mass(lo[..., 0], hi[..., 0])
        for k in range(1, self.dim):
            out = out * self.axis_mass(lo[..., k], hi[..., k])
        return out

    def axis_sample(self, a, b, u):
        """Inverse-CDF draw from the normalized restriction to [a, b)."""
        raise NotImplementedError

    def sample_in(self, lo, hi, u):
        """Draw one point per box; ``u`` has the trailing shape of ``lo``."""
        lo = np.asarray(lo, dtype=float)
        hi = np.asarray(hi, dtype=float)
        if self.dim == 1:
            return self.axis_sample(lo, hi, u)
        return np.stack(
            [self.axis_sample(lo[..., k], hi[..., k], u[..., k]) for k in range(self.dim)],
            axis=-1,
        )

    def check_window(self, lo, hi):
        """Raise if the window [lo, hi) is not a valid region of S."""

    def describe(self):
        return {"kind": self.kind}


class Lebesgue1D(ReferenceMeasure):
    kind = "Lebesgue1D"

    def density(self, x):
        return np.ones_like(np.asarray(x, dtype=float))

    def axis_mass(self, a, b):
        return np.asarray(b, dtype=float) - np.asarray(a, dtype=float)

    def axis_sample(self, a, b, u):
        return a + (b - a) * u


class LebesgueHalfLine(Lebesgue1D):
    """Lebesgue measure on S = [0, inf)."""

    kind = "LebesgueHalfLine"

    def density(self, x):
        return (np.asarray(x, dtype=float) >= 0).astype(float)

    def axis_mass(self, a, b):
        a = np.maximum(np.asarray(a, dtype=float), 0.0)
        return np.maximum(np.asarray(b, dtype=float) - a, 0.0)

    def axis_sample(self, a, b, u):
        a = np.maximum(a, 0.0)
        return a + (b - a) * u

    def check_window(self, lo, hi):
        if lo < 0:
            raise DomainError(f"half-line measure needs window >= 0, got lo={lo}")


class GaussianPlane(ReferenceMeasure):
    """m(dx) = exp(-|x|^2) dx / pi on R^2 (total mass 1)."""

    kind = "GaussianPlane"
    dim = 2

    def density(self, x):
        x = np.asarray(x, dtype=float)
        return np.exp(-np.sum(x * x, axis=-1)) / math.pi

    def axis_mass(self, a, b):
        # 1/sqrt(pi) int_a^b exp(-t^2) dt; erfc on the tails keeps relative accuracy
        a = np.asarray(a, dtype=float)
        b = np.asarray(b, dtype=float)
        right = 0.5 * (special.erfc(a) - special.erfc(b))
        left = 0.5 * (special.erfc(-b) - special.erfc(-a))
        mid = 0.5 * (special.erf(b) - special.erf(a))
        return np.where(a >= 0, right, np.where(b <= 0, left, mid))

    def axis_sample(self, a, b, u):
        # density ~ exp(-t^2) is N(0, 1/2): sample z ~ N(0,1) on [a, b)*sqrt2
        a2 = np.asarray(a, dtype=float) * _SQRT2
        b2 = np.asarray(b, dtype=float) * _SQRT2
        u = np.asarray(u, dtype=float)
        sa, sb = special.ndtr(-a2), special.ndtr(-b2)
        z_right = -special.ndtri(sb + u * (sa - sb))
        ca, cb = special.ndtr(a2), special.ndtr(b2)
        z_left = special.ndtri(ca + u * (cb - ca))
        z = np.where(a2 >= 0, z_right, z_left)
        return np.clip(z, a2, np.nextafter(b2, -np.inf)) / _SQRT2


MEASURES = {
    "Lebesgue1D": Lebesgue1D,
    "LebesgueHalfLine": LebesgueHalfLine,
    "GaussianPlane": GaussianPlane,
}
