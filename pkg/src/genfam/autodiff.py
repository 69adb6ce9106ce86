"""Second-order forward-mode differentiation.

A :class:`Jet2` carries the value, gradient and full Hessian of a scalar
quantity with respect to ``d`` seed variables.  The elementary functions in
this module accept plain floats as well as jets, so one code path evaluates
both.  Values are always computed with the same ``math`` calls the float path
uses, which makes ``jet.value`` bit-identical to the plain evaluation.
"""

from __future__ import annotations

import math

import numpy as np


class DomainError(ArithmeticError):
    """An elementary function was evaluated outside its smooth domain."""

    def __init__(self, message, subexpr=None):
        super().__init__(message if subexpr is None else f"{message} in '{subexpr}'")
        self.subexpr = subexpr


class Jet2:
    __slots__ = ("value", "grad", "hess")

    def __init__(self, value, grad, hess):
        self.value = value
        self.grad = grad
        self.hess = hess

    @classmethod
    def variables(cls, point):
        x = [float(v) for v in point]
        d = len(x)
        eye = np.eye(d)
        zero = np.zeros((d, d))
        return [cls(xi, eye[i].copy(), zero) for i, xi in enumerate(x)]

    @classmethod
    def constant(cls, value, d):
        return cls(float(value), np.zeros(d), np.zeros((d, d)))

    def __repr__(self):
        return f"Jet2(value={self.value!r}, grad={self.grad!r}, hess={self.hess!r})"

    def _unary(self, f0, f1, f2):
        g = self.grad
        return Jet2(f0, f1 * g, f1 * self.hess + f2 * np.outer(g, g))

    def __neg__(self):
        return Jet2(-self.value, -self.grad, -self.hess)

    def __pos__(self):
        return self

    def __add__(self, other):
        if isinstance(other, Jet2):
            return Jet2(self.value + other.value, self.grad + other.grad, self.hess + other.hess)
        return Jet2(self.value + other, self.grad, self.hess)

    def __radd__(self, other):
        return Jet2(other + self.value, self.grad, self.hess)

    def __sub__(self, other):
        if isinstance(other, Jet2):
            return Jet2(self.value - other.value, self.grad - other.grad, self.hess - other.hess)
        return Jet2(self.value - other, self.grad, self.hess)

    def __rsub__(self, other):
        return Jet2(other - self.value, -self.grad, -self.hess)

    def __mul__(self, other):
        if isinstance(other, Jet2):
            a, b = self, other
            cross = np.outer(a.grad, b.grad)
            return Jet2(
                a.value * b.value,
                a.value * b.grad + b.value * a.grad,
                a.value * b.hess + b.value * a.hess + (cross + cross.T),
            )
        return Jet2(self.value * other, self.grad * other, self.hess * other)

    __rmul__ = __mul__

    def __truediv__(self, other):
        if isinstance(other, Jet2):
            if other.value == 0.0:
                raise DomainError("division by zero")
            b = other.value
            v = self.value / b
            g = (self.grad - v * other.grad) / b
            cross = np.outer(g, other.grad)
            return Jet2(v, g, (self.hess - v * other.hess - (cross + cross.T)) / b)
        if other == 0:
            raise DomainError("division by zero")
        return Jet2(self.value / other, self.grad / other, self.hess / other)

    def __rtruediv__(self, other):
        b = self.value
        if b == 0.0:
            raise DomainError("division by zero")
        v = other / b
        g = -v * self.grad / b
        cross = np.outer(g, self.grad)
        return Jet2(v, g, (-v * self.hess - (cross + cross.T)) / b)

    def __pow__(self, n):
        if not isinstance(n, (int, np.integer)) or isinstance(n, bool):
            raise TypeError("jets support integer exponents only")
        n = int(n)
        x = self.value
        if n < 0 and x == 0.0:
            raise DomainError("negative power of zero")
        if n == 0:
            return Jet2(1.0, np.zeros_like(self.grad), np.zeros_like(self.hess))
        d1 = n * x ** (n - 1)
        d2 = 0.0 if n == 1 else n * (n - 1) * x ** (n - 2)
        return self._unary(x**n, d1, d2)


def value_of(x):
    return x.value if isinstance(x, Jet2) else x


def ipow(x, n):
    """Integer power for floats and jets."""
    if isinstance(x, Jet2):
        return x**n
    if n < 0 and x == 0.0:
        raise DomainError("negative power of zero")
    return float(x) ** n


def div(a, b):
    if isinstance(a, Jet2) or isinstance(b, Jet2):
        return a / b
    if b == 0.0:
        raise DomainError("division by zero")
    return a / b


def sqrt(x):
    if isinstance(x, Jet2):
        # sqrt is not differentiable at 0; norms vanishing there are kinks
        if x.value <= 0.0:
            raise DomainError(f"sqrt of non-positive value {x.value!r}")
        s = math.sqrt(x.value)
        return x._unary(s, 0.5 / s, -0.25 / (s * x.value))
    if x < 0.0:
        raise DomainError(f"sqrt of negative value {x!r}")
    return math.sqrt(x)


def log(x):
    v = value_of(x)
    if v <= 0.0:
        raise DomainError(f"log of non-positive value {v!r}")
    if isinstance(x, Jet2):
        return x._unary(math.log(v), 1.0 / v, -1.0 / (v * v))
    return math.log(v)


def exp(x):
    if isinstance(x, Jet2):
        e = math.exp(x.value)
        return x._unary(e, e, e)
    return math.exp(x)


def sin(x):
    if isinstance(x, Jet2):
        s = math.sin(x.value)
        return x._unary(s, math.cos(x.value), -s)
    return math.sin(x)


def cos(x):
    if isinstance(x, Jet2):
        c = math.cos(x.value)
        return x._unary(c, -math.sin(x.value), -c)
    return math.cos(x)


FUNCTIONS = {"sqrt": sqrt, "sin": sin, "cos": cos, "exp": exp, "log": log}


def _as_callable(f):
    # expressions and family specs expose a ``jet_function`` adapter
    return f.jet_function() if hasattr(f, "jet_function") else f


def jet2_eval(f, x):
    """Value, gradient and Hessian of ``f`` at ``x``.

    ``f`` maps a sequence of ``d`` scalars (floats or jets) to one scalar, or
    is an object with a ``jet_function()`` method returning such a map.
    """
    fn = _as_callable(f)
    xs = Jet2.variables(x)
    out = fn(xs)
    if not isinstance(out, Jet2):
        out = Jet2.constant(out, len(xs))
    return out


def mixed_second(f, x, u, v):
    """The bilinear second derivative ``u^T H(x) v``."""
    u = np.asarray(u, dtype=float)
    v = np.asarray(v, dtype=float)
    return float(u @ jet2_eval(f, x).hess @ v)


def compose_two_parameter(f, theta):
    """Jet of ``s -> f(theta(s))`` at ``s = (0, 0)``.

    ``theta`` maps two jet parameters to a list of point coordinates; its
    ``hess[0, 1]`` entry is the mixed derivative of the composition.
    """
    fn = _as_callable(f)
    s = Jet2.variables([0.0, 0.0])
    out = fn(theta(s[0], s[1]))
    if not isinstance(out, Jet2):
        out = Jet2.constant(out, 2)
    return out
