"""Scalar forward-mode automatic differentiation with multi-component tangents.

A :class:`Dual` carries a value together with its derivatives against a
fixed set of inputs (here the seven pose parameters).  The pose-to-ray
geometry is small enough that scalar duals cover it; the per-pixel tangent
fan-out happens later by broadcasting constant pixel-offset grids.
"""

from __future__ import annotations

import math

import numpy as np


class Dual:
    """Value plus an n-component tangent vector."""

    __slots__ = ("val", "tan")

    def __init__(self, val: float, tan: np.ndarray):
        self.val = float(val)
        self.tan = np.asarray(tan, dtype=np.float64)

    @classmethod
    def constant(cls, val: float, n: int) -> "Dual":
        return cls(val, np.zeros(n))

    @classmethod
    def variable(cls, val: float, index: int, n: int) -> "Dual":
        tan = np.zeros(n)
        tan[index] = 1.0
        return cls(val, tan)

    def _coerce(self, other) -> "Dual":
        if isinstance(other, Dual):
            return other
        return Dual(other, np.zeros_like(self.tan))

    def __add__(self, other):
        other = self._coerce(other)
        return Dual(self.val + other.val, self.tan + other.tan)

    __radd__ = __add__

    def __sub__(self, other):
        other = self._coerce(other)
        return Dual(self.val - other.val, self.tan - other.tan)

    def __rsub__(self, other):
        return self._coerce(other) - self

    def __mul__(self, other):
        other = self._coerce(other)
        return Dual(self.val * other.val, self.val * other.tan + self.tan * other.val)

    __rmul__ = __mul__

    def __truediv__(self, other):
        other = self._coerce(other)
        return Dual(self.val / other.val,
                    (self.tan * other.val - self.val * other.tan) / (other.val * other.val))

    def __rtruediv__(self, other):
        return self._coerce(other) / self

    def __neg__(self):
        return Dual(-self.val, -self.tan)

    def __repr__(self):
        return f"Dual({self.val!r}, {self.tan!r})"


def sin(x):
    if isinstance(x, Dual):
        return Dual(math.sin(x.val), math.cos(x.val) * x.tan)
    return math.sin(x)


def cos(x):
    if isinstance(x, Dual):
        return Dual(math.cos(x.val), -math.sin(x.val) * x.tan)
    return math.cos(x)


def values(duals) -> np.ndarray:
    """Value parts of a sequence of duals as an array."""
    return np.array([d.val for d in duals])


def tangents(duals) -> np.ndarray:
    """Tangent parts of a sequence of duals, stacked as rows."""
    return np.stack([d.tan for d in duals])
