"""Vectorized forward-mode automatic differentiation with dual numbers.

A :class:`Dual` carries a value array of shape ``S``, a first-derivative
array of shape ``S + (K,)`` for ``K`` seed directions, and optionally a
second-derivative array of shape ``S + (K, K)``.  All arithmetic broadcasts
over ``S``, so a whole shooting grid can be differentiated in one sweep
(one Dual per state component, batched over nodes).

Only the operations needed by the dynamics and constraint blocks are
implemented; everything in those blocks is polynomial or rational, so no
transcendental functions are required.
"""

from __future__ import annotations

import numpy as np

__all__ = ["Dual", "seed", "constant"]


def _outer(a: np.ndarray, b: np.ndarray) -> np.ndarray:
    return a[..., :, None] * b[..., None, :]


class Dual:
    """Scalar-like dual number with array payloads.

    ``val`` has shape ``S``, ``dot`` has shape ``S + (K,)`` and ``ddot``
    (when second order is requested) ``S + (K, K)``.
    """

    __slots__ = ("val", "dot", "ddot")

    def __init__(self, val, dot, ddot=None):
        self.val = np.asarray(val, dtype=float)
        self.dot = np.asarray(dot, dtype=float)
        self.ddot = None if ddot is None else np.asarray(ddot, dtype=float)

    # -- helpers ----------------------------------------------------------

    @property
    def nseeds(self) -> int:
        return self.dot.shape[-1]

    def _zero_like_other(self, other):
        # promote a plain array/scalar to a Dual with zero derivatives
        val = np.asarray(other, dtype=float)
        dot = np.zeros(val.shape + (self.nseeds,))
        ddot = None
        if self.ddot is not None:
            ddot = np.zeros(val.shape + (self.nseeds, self.nseeds))
        return Dual(val, dot, ddot)

    # -- arithmetic -------------------------------------------------------

    def __add__(self, other):
        if isinstance(other, Dual):
            ddot = None
            if self.ddot is not None or other.ddot is not None:
                a = 0.0 if self.ddot is None else self.ddot
                b = 0.0 if other.ddot is None else other.ddot
                ddot = a + b
            return Dual(self.val + other.val, self.dot + other.dot, ddot)
        return Dual(np.asarray(other, dtype=float) + self.val, self.dot, self.ddot)

    __radd__ = __add__

    def __neg__(self):
        return Dual(-self.val, -self.dot, None if self.ddot is None else -self.ddot)

    def __sub__(self, other):
        return self + (-other if isinstance(other, Dual) else -np.asarray(other, dtype=float))

    def __rsub__(self, other):
        return (-self) + other

    def __mul__(self, other):
        if isinstance(other, Dual):
            val = self.val * other.val
            dot = self.dot * other.val[..., None] + other.dot * self.val[..., None]
            ddot = None
            if self.ddot is not None or other.ddot is not None:
                ddot = _outer(self.dot, other.dot) + _outer(other.dot, self.dot)
                if self.ddot is not None:
                    ddot = ddot + self.ddot * other.val[..., None, None]
                if other.ddot is not None:
                    ddot = ddot + other.ddot * self.val[..., None, None]
            return Dual(val, dot, ddot)
        c = np.asarray(other, dtype=float)
        return Dual(
            self.val * c,
            self.dot * c[..., None] if c.ndim else self.dot * c,
            None
            if self.ddot is None
            else (self.ddot * c[..., None, None] if c.ndim else self.ddot * c),
        )

    __rmul__ = __mul__

    def __truediv__(self, other):
        if isinstance(other, Dual):
            return self * other._reciprocal()
        c = np.asarray(other, dtype=float)
        return self * (1.0 / c)

    def __rtruediv__(self, other):
        return self._reciprocal() * other

    def _reciprocal(self):
        inv = 1.0 / self.val
        inv2 = inv * inv
        dot = -self.dot * inv2[..., None]
        ddot = None
        if self.ddot is not None:
            inv3 = inv2 * inv
            ddot = 2.0 * _outer(self.dot, self.dot) * inv3[..., None, None]
            ddot = ddot - self.ddot * inv2[..., None, None]
        return Dual(inv, dot, ddot)

    def __pow__(self, n):
        if not isinstance(n, int) or n < 2:
            raise ValueError("only small integer powers are supported")
        out = self
        for _ in range(n - 1):
            out = out * self
        return out

    def sqrt(self):
        r = np.sqrt(self.val)
        inv = 0.5 / r
        dot = self.dot * inv[..., None]
        ddot = None
        if self.ddot is not None:
            ddot = self.ddot * inv[..., None, None] - _outer(self.dot, self.dot) * (
                0.25 / (r * self.val)
            )[..., None, None]
        return Dual(r, dot, ddot)

    def __repr__(self):
        return f"Dual(val={self.val!r}, K={self.nseeds}, order={1 if self.ddot is None else 2})"


def seed(val, direction: int, nseeds: int, order: int = 1) -> Dual:
    """Make a Dual for ``val`` seeded with unit derivative along ``direction``.

    ``val`` may be any array; the seed is shared across the whole batch.
    """
    val = np.asarray(val, dtype=float)
    dot = np.zeros(val.shape + (nseeds,))
    dot[..., direction] = 1.0
    ddot = np.zeros(val.shape + (nseeds, nseeds)) if order == 2 else None
    return Dual(val, dot, ddot)


def constant(val, nseeds: int, order: int = 1) -> Dual:
    """Make a Dual with zero derivatives (a constant w.r.t. all seeds)."""
    val = np.asarray(val, dtype=float)
    dot = np.zeros(val.shape + (nseeds,))
    ddot = np.zeros(val.shape + (nseeds, nseeds)) if order == 2 else None
    return Dual(val, dot, ddot)
