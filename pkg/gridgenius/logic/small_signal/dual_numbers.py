"""
Forward-mode dual numbers.

This module provides a minimal dual-number type carrying a value and a
dense gradient. Device equations are written once against plain floats;
evaluating them on duals yields exact partial derivatives.
"""

import math
from typing import Iterable, List, Union

import numpy as np

Number = Union[float, 'Dual']


class Dual:
    """Value with a gradient w.r.t. a fixed set of seeded variables."""

    __slots__ = ('val', 'grad')
    __array_ufunc__ = None

    def __init__(self, val: float, grad: np.ndarray):
        self.val = float(val)
        self.grad = grad

    @classmethod
    def variables(cls, values: Iterable[float]) -> List['Dual']:
        """Seed one dual per value with a unit gradient."""
        values = list(values)
        eye = np.eye(len(values))
        return [cls(v, eye[i]) for i, v in enumerate(values)]

    def __repr__(self) -> str:
        return f"Dual({self.val!r}, |grad|={np.linalg.norm(self.grad):.3g})"

    def __add__(self, other: Number) -> 'Dual':
        if isinstance(other, Dual):
            return Dual(self.val + other.val, self.grad + other.grad)
        return Dual(self.val + other, self.grad)

    __radd__ = __add__

    def __sub__(self, other: Number) -> 'Dual':
        if isinstance(other, Dual):
            return Dual(self.val - other.val, self.grad - other.grad)
        return Dual(self.val - other, self.grad)

    def __rsub__(self, other: float) -> 'Dual':
        return Dual(other - self.val, -self.grad)

    def __mul__(self, other: Number) -> 'Dual':
        if isinstance(other, Dual):
            return Dual(self.val * other.val, self.grad * other.val + other.grad * self.val)
        return Dual(self.val * other, self.grad * other)

    __rmul__ = __mul__

    def __truediv__(self, other: Number) -> 'Dual':
        if isinstance(other, Dual):
            return Dual(
                self.val / other.val,
                (self.grad * other.val - other.grad * self.val) / other.val ** 2,
            )
        return Dual(self.val / other, self.grad / other)

    def __rtruediv__(self, other: float) -> 'Dual':
        return Dual(other / self.val, -other * self.grad / self.val ** 2)

    def __neg__(self) -> 'Dual':
        return Dual(-self.val, -self.grad)

    def __pow__(self, exponent: float) -> 'Dual':
        return Dual(self.val ** exponent, exponent * self.val ** (exponent - 1) * self.grad)


def sin(x: Number) -> Number:
    if isinstance(x, Dual):
        return Dual(math.sin(x.val), math.cos(x.val) * x.grad)
    return math.sin(x)


def cos(x: Number) -> Number:
    if isinstance(x, Dual):
        return Dual(math.cos(x.val), -math.sin(x.val) * x.grad)
    return math.cos(x)


def sqrt(x: Number) -> Number:
    if isinstance(x, Dual):
        root = math.sqrt(x.val)
        return Dual(root, x.grad / (2.0 * root))
    return math.sqrt(x)


def value_of(x: Number) -> float:
    return x.val if isinstance(x, Dual) else float(x)


def gradient_of(x: Number, size: int) -> np.ndarray:
    return x.grad if isinstance(x, Dual) else np.zeros(size)
