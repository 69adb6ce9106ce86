"""Independent oracles shared by the tests.

Expressions are re-evaluated from their syntax tree in mpmath at 40 digits,
so finite differences carry no rounding error worth mentioning and do not
share code with the jet arithmetic under test.
"""

import mpmath as mp
import numpy as np

from genfam.expr import Binary, Call, Num, Param, Pow, Unary, Var

mp.mp.dps = 40

_MP_FUN = {"sqrt": mp.sqrt, "sin": mp.sin, "cos": mp.cos, "exp": mp.exp, "log": mp.log}


def mp_eval(node, q, l, params=None):
    params = params or {}
    if isinstance(node, Num):
        return mp.mpf(node.value)
    if isinstance(node, Var):
        return (q if node.kind == "q" else l)[node.index - 1]
    if isinstance(node, Param):
        return mp.mpf(params[node.name])
    if isinstance(node, Unary):
        v = mp_eval(node.operand, q, l, params)
        return -v if node.op == "-" else v
    if isinstance(node, Pow):
        return mp_eval(node.base, q, l, params) ** node.exponent
    if isinstance(node, Binary):
        a = mp_eval(node.left, q, l, params)
        b = mp_eval(node.right, q, l, params)
        return {"+": lambda: a + b, "-": lambda: a - b, "*": lambda: a * b, "/": lambda: a / b}[node.op]()
    if isinstance(node, Call):
        return _MP_FUN[node.func](mp_eval(node.arg, q, l, params))
    raise TypeError(node)


def mp_function(expression):
    """x (length n + k) -> mp value of the parsed expression."""
    n = expression.n

    def f(x):
        x = [mp.mpf(v) if not isinstance(v, mp.mpf) else v for v in x]
        return mp_eval(expression.root, x[:n], x[n:], expression.params)

    return f


def fd_hessian(f, x, h=1e-5):
    """Central second differences of ``f`` (an mp function) with step ``h``."""
    x = [mp.mpf(float(v)) for v in x]
    d = len(x)
    h = mp.mpf(h)
    out = np.zeros((d, d))

    def at(i, si, j, sj):
        y = list(x)
        y[i] += si * h
        y[j] += sj * h
        return f(y)

    for i in range(d):
        for j in range(i, d):
            v = (at(i, 1, j, 1) - at(i, 1, j, -1) - at(i, -1, j, 1) + at(i, -1, j, -1)) / (4 * h * h)
            out[i, j] = out[j, i] = float(v)
    return out


def fd_gradient(f, x, h=1e-5):
    x = [mp.mpf(float(v)) for v in x]
    h = mp.mpf(h)
    g = []
    for i in range(len(x)):
        p = list(x)
        m = list(x)
        p[i] += h
        m[i] -= h
        g.append(float((f(p) - f(m)) / (2 * h)))
    return np.array(g)


def fd_float_hessian(f, x, h=1e-5):
    """Central second differences of a float function of a numpy vector."""
    x = np.asarray(x, dtype=float)
    d = x.size
    out = np.zeros((d, d))
    e = np.eye(d) * h
    for i in range(d):
        for j in range(d):
            out[i, j] = (f(x + e[i] + e[j]) - f(x + e[i] - e[j]) - f(x - e[i] + e[j]) + f(x - e[i] - e[j])) / (4 * h * h)
    return 0.5 * (out + out.T)


def random_expression(rng, n, k=0, depth=3):
    """Source text of a random smooth expression, safe on [-2, 2]^(n+k)."""
    names = [f"q{i + 1}" for i in range(n)] + [f"l{i + 1}" for i in range(k)]

    def leaf():
        if rng.random() < 0.75:
            return names[rng.integers(len(names))]
        return repr(round(float(rng.uniform(-2, 2)), 3))

    def build(level):
        if level == 0:
            return leaf()
        a = build(level - 1)
        b = build(level - 1)
        choice = rng.integers(10)
        if choice == 0:
            return f"({a} + {b})"
        if choice == 1:
            return f"({a} - {b})"
        if choice in (2, 3):
            return f"({a} * {b})"
        if choice == 4:
            return f"({a} / (2 + sin({b})))"
        if choice == 5:
            return f"sqrt(1 + ({a})^2)"
        if choice == 6:
            return f"log(3 + cos({a}))"
        if choice == 7:
            return f"exp(sin({a}) / 2)"
        if choice == 8:
            return f"({a})^{int(rng.integers(2, 4))}"
        return f"-{a}"

    return build(depth)
