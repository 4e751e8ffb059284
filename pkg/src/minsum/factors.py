"""Node and edge factor families.

Every factor is vectorised: arguments may be scalars or numpy arrays and
broadcast in the usual way.  Builtin families carry closed-form curvature
extrema, which the certifier, the domain chooser and the bound evaluator use
in place of sampling.
"""

from __future__ import annotations

import math

import numpy as np


class ScalarFactor:
    """A twice continuously differentiable, coercive function of one variable."""

    family = "custom"

    def value(self, x):
        raise NotImplementedError

    def grad(self, x):
        raise NotImplementedError

    def hess(self, x):
        raise NotImplementedError

    def curvature_range(self):
        """Closed-form ``(inf, sup)`` of the second derivative over the real line.

        ``None`` when no closed form is known.
        """
        return None

    def params(self) -> dict:
        return {}

    def __repr__(self) -> str:
        args = ", ".join(f"{k}={v!r}" for k, v in self.params().items())
        return f"{type(self).__name__}({args})"

    def __eq__(self, other) -> bool:
        return type(self) is type(other) and self.params() == other.params() and bool(self.params())

    def __hash__(self) -> int:
        return hash((type(self).__name__, tuple(sorted(self.params().items()))))


class QuadraticFactor(ScalarFactor):
    """``a x^2 / 2 - b x`` with ``a > 0``."""

    family = "quadratic"

    def __init__(self, a: float, b: float = 0.0):
        if not a > 0:
            raise ValueError(f"quadratic factor needs a > 0, got a={a}")
        self.a = float(a)
        self.b = float(b)

    def value(self, x):
        x = np.asarray(x, dtype=float)
        return 0.5 * self.a * x * x - self.b * x

    def grad(self, x):
        return self.a * np.asarray(x, dtype=float) - self.b

    def hess(self, x):
        return np.full(np.shape(x), self.a)

    def curvature_range(self):
        return (self.a, self.a)

    def params(self):
        return {"a": self.a, "b": self.b}


class QuarticFactor(ScalarFactor):
    """``x^4 / 4 + c x^2 / 2 - b x`` with ``c > 0``."""

    family = "quartic"

    def __init__(self, c: float, b: float = 0.0):
        if not c > 0:
            raise ValueError(f"quartic factor needs c > 0, got c={c}")
        self.c = float(c)
        self.b = float(b)

    def value(self, x):
        x = np.asarray(x, dtype=float)
        x2 = x * x
        return 0.25 * x2 * x2 + 0.5 * self.c * x2 - self.b * x

    def grad(self, x):
        x = np.asarray(x, dtype=float)
        return x * x * x + self.c * x - self.b

    def hess(self, x):
        x = np.asarray(x, dtype=float)
        return 3.0 * x * x + self.c

    def curvature_range(self):
        return (self.c, math.inf)

    def params(self):
        return {"c": self.c, "b": self.b}


class LogCoshFactor(ScalarFactor):
    """``s log cosh(x) + c x^2 / 2 - b x`` with ``s >= 0`` and ``c > 0``."""

    family = "logcosh"

    def __init__(self, s: float, c: float, b: float = 0.0):
        if not s >= 0:
            raise ValueError(f"logcosh factor needs s >= 0, got s={s}")
        if not c > 0:
            raise ValueError(f"logcosh factor needs c > 0, got c={c}")
        self.s = float(s)
        self.c = float(c)
        self.b = float(b)

    def value(self, x):
        x = np.asarray(x, dtype=float)
        ax = np.abs(x)
        logcosh = ax + np.log1p(np.exp(-2.0 * ax)) - math.log(2.0)
        return self.s * logcosh + 0.5 * self.c * x * x - self.b * x

    def grad(self, x):
        x = np.asarray(x, dtype=float)
        return self.s * np.tanh(x) + self.c * x - self.b

    def hess(self, x):
        x = np.asarray(x, dtype=float)
        sech = 1.0 / np.cosh(np.clip(x, -350.0, 350.0))
        return self.s * sech * sech + self.c

    def curvature_range(self):
        return (self.c, self.c + self.s)

    def params(self):
        return {"s": self.s, "c": self.c, "b": self.b}


class CustomFactor(ScalarFactor):
    """Factor defined by user callables.  Used at the caller's risk."""

    def __init__(self, value, grad, hess, curvature_range=None):
        self._value = value
        self._grad = grad
        self._hess = hess
        self._range = curvature_range

    def value(self, x):
        return np.asarray(self._value(np.asarray(x, dtype=float)), dtype=float)

    def grad(self, x):
        return np.asarray(self._grad(np.asarray(x, dtype=float)), dtype=float)

    def hess(self, x):
        x = np.asarray(x, dtype=float)
        return np.broadcast_to(np.asarray(self._hess(x), dtype=float), np.shape(x)).copy()

    def curvature_range(self):
        return self._range

    def __eq__(self, other):
        return self is other

    __hash__ = object.__hash__


class LinearFactor(ScalarFactor):
    """``g x``: used for absorbed initial messages that are affine."""

    family = "linear"

    def __init__(self, g: float):
        self.g = float(g)

    def value(self, x):
        return self.g * np.asarray(x, dtype=float)

    def grad(self, x):
        return np.full(np.shape(x), self.g)

    def hess(self, x):
        return np.zeros(np.shape(x))

    def curvature_range(self):
        return (0.0, 0.0)

    def params(self):
        return {"g": self.g}


class SumFactor(ScalarFactor):
    """Pointwise sum of scalar factors."""

    family = "sum"

    def __init__(self, terms):
        self.terms = tuple(terms)

    def value(self, x):
        return sum(t.value(x) for t in self.terms)

    def grad(self, x):
        return sum(t.grad(x) for t in self.terms)

    def hess(self, x):
        return sum(t.hess(x) for t in self.terms)

    def curvature_range(self):
        lo, hi = 0.0, 0.0
        for t in self.terms:
            r = t.curvature_range()
            if r is None:
                return None
            lo += r[0]
            hi += r[1]
        return (lo, hi)

    def __eq__(self, other):
        return isinstance(other, SumFactor) and self.terms == other.terms

    def __hash__(self):
        return hash(self.terms)


class EdgeSlice(ScalarFactor):
    """``y -> f(y, other)`` for an oriented edge factor with its second argument frozen."""

    family = "edge_slice"

    def __init__(self, edge: "EdgeFactor", other: float):
        self.edge = edge
        self.other = float(other)

    def value(self, x):
        return self.edge.value(x, self.other)

    def grad(self, x):
        return self.edge.d1(x, self.other)

    def hess(self, x):
        return self.edge.d11(x, self.other)

    def curvature_range(self):
        r = self.edge.d11_range()
        return r


class EdgeFactor:
    """A twice continuously differentiable function ``f(x_i, x_j)``; need not be convex."""

    family = "custom"

    def value(self, xi, xj):
        raise NotImplementedError

    def d1(self, xi, xj):
        raise NotImplementedError

    def d2(self, xi, xj):
        raise NotImplementedError

    def d11(self, xi, xj):
        raise NotImplementedError

    def d22(self, xi, xj):
        raise NotImplementedError

    def d12(self, xi, xj):
        raise NotImplementedError

    def d11_range(self):
        """Closed-form ``(inf, sup)`` of the first-argument curvature, or ``None``."""
        return None

    def d22_range(self):
        return None

    def coupling_sup(self):
        """Closed-form ``sup |d12|``, or ``None``."""
        return None

    def swapped(self) -> "EdgeFactor":
        return SwappedEdge(self)

    def params(self) -> dict:
        return {}

    def __repr__(self) -> str:
        args = ", ".join(f"{k}={v!r}" for k, v in self.params().items())
        return f"{type(self).__name__}({args})"


class BilinearEdge(EdgeFactor):
    """``a x_i x_j``."""

    family = "bilinear"

    def __init__(self, a: float):
        self.a = float(a)

    def value(self, xi, xj):
        return self.a * np.asarray(xi, dtype=float) * np.asarray(xj, dtype=float)

    def d1(self, xi, xj):
        return self.a * np.broadcast_to(np.asarray(xj, dtype=float), np.broadcast_shapes(np.shape(xi), np.shape(xj)))

    def d2(self, xi, xj):
        return self.a * np.broadcast_to(np.asarray(xi, dtype=float), np.broadcast_shapes(np.shape(xi), np.shape(xj)))

    def d11(self, xi, xj):
        return np.zeros(np.broadcast_shapes(np.shape(xi), np.shape(xj)))

    d22 = d11

    def d12(self, xi, xj):
        return np.full(np.broadcast_shapes(np.shape(xi), np.shape(xj)), self.a)

    def d11_range(self):
        return (0.0, 0.0)

    def d22_range(self):
        return (0.0, 0.0)

    def coupling_sup(self):
        return abs(self.a)

    def swapped(self):
        return self

    def params(self):
        return {"a": self.a}

    def __eq__(self, other):
        return isinstance(other, BilinearEdge) and other.a == self.a

    def __hash__(self):
        return hash(("bilinear", self.a))


class CustomEdge(EdgeFactor):
    """Edge factor from user callables ``(value, d1, d2, d11, d22, d12)``."""

    def __init__(self, value, d1, d2, d11, d22, d12, d11_range=None, d22_range=None, coupling_sup=None):
        self._f = (value, d1, d2, d11, d22, d12)
        self._d11_range = d11_range
        self._d22_range = d22_range
        self._coupling_sup = coupling_sup

    def _call(self, k, xi, xj):
        xi = np.asarray(xi, dtype=float)
        xj = np.asarray(xj, dtype=float)
        out = np.asarray(self._f[k](xi, xj), dtype=float)
        return np.broadcast_to(out, np.broadcast_shapes(xi.shape, xj.shape)).copy()

    def value(self, xi, xj):
        return self._call(0, xi, xj)

    def d1(self, xi, xj):
        return self._call(1, xi, xj)

    def d2(self, xi, xj):
        return self._call(2, xi, xj)

    def d11(self, xi, xj):
        return self._call(3, xi, xj)

    def d22(self, xi, xj):
        return self._call(4, xi, xj)

    def d12(self, xi, xj):
        return self._call(5, xi, xj)

    def d11_range(self):
        return self._d11_range

    def d22_range(self):
        return self._d22_range

    def coupling_sup(self):
        return self._coupling_sup


class SwappedEdge(EdgeFactor):
    """``(x, y) -> f(y, x)``: serves ``f_ji`` from a stored ``f_ij``."""

    def __init__(self, inner: EdgeFactor):
        self.inner = inner
        self.family = inner.family

    def value(self, xi, xj):
        return self.inner.value(xj, xi)

    def d1(self, xi, xj):
        return self.inner.d2(xj, xi)

    def d2(self, xi, xj):
        return self.inner.d1(xj, xi)

    def d11(self, xi, xj):
        return self.inner.d22(xj, xi)

    def d22(self, xi, xj):
        return self.inner.d11(xj, xi)

    def d12(self, xi, xj):
        return self.inner.d12(xj, xi)

    def d11_range(self):
        return self.inner.d22_range()

    def d22_range(self):
        return self.inner.d11_range()

    def coupling_sup(self):
        return self.inner.coupling_sup()

    def swapped(self):
        return self.inner

    def params(self):
        return self.inner.params()


NODE_FAMILIES = {
    "quadratic": (QuadraticFactor, ("a", "b")),
    "quartic": (QuarticFactor, ("c", "b")),
    "logcosh": (LogCoshFactor, ("s", "c", "b")),
}

EDGE_FAMILIES = {
    "bilinear": (BilinearEdge, ("a",)),
}


def make_node_factor(family: str, **params) -> ScalarFactor:
    if family not in NODE_FAMILIES:
        raise ValueError(f"unknown node factor family {family!r}")
    cls, names = NODE_FAMILIES[family]
    unknown = set(params) - set(names)
    if unknown:
        raise ValueError(f"unknown parameter(s) {sorted(unknown)} for {family}")
    return cls(**params)


def make_edge_factor(family: str, **params) -> EdgeFactor:
    if family not in EDGE_FAMILIES:
        raise ValueError(f"unknown edge factor family {family!r}")
    cls, names = EDGE_FAMILIES[family]
    unknown = set(params) - set(names)
    if unknown:
        raise ValueError(f"unknown parameter(s) {sorted(unknown)} for {family}")
    return cls(**params)
