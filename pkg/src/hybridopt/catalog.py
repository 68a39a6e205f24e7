"""Closed set of benchmark problems.

Each entry bundles the background geometry, the ProblemSpec and the initial
level-set expression.  Source gradients are supplied analytically.
"""
from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .fem import CostIntegrand, ProblemSpec
from .geometry import SDF, Box, Disk, Rectangle, SquareWithHole


class UnknownProblem(KeyError):
    pass


@dataclass(frozen=True)
class Problem:
    name: str
    geometry: object
    spec: ProblemSpec
    omega0: SDF
    description: str = ""


def _radius(x):
    return np.hypot(x[:, 0], x[:, 1])


def _zero(x):
    return np.zeros(len(x))


def _all(x):
    return np.ones(len(x), dtype=bool)


def _none(x):
    return np.zeros(len(x), dtype=bool)


# annulus sources ---------------------------------------------------------

def annulus_f1(x):
    r = _radius(x)
    return np.where(r < 2.0, 1.0, 1.0 - r)


def annulus_grad_f1(x):
    r = np.maximum(_radius(x), 1e-300)
    s = np.where(r < 2.0, 0.0, -1.0 / r)
    return s[:, None] * x


def annulus_f2(x):
    r = np.maximum(_radius(x), 1e-300)
    return np.where(r < 2.0, 8.0 * (2.0 - r) ** 2 / r, 0.0)


def annulus_grad_f2(x):
    r = np.maximum(_radius(x), 1e-300)
    # d/dr [8 (2 - r)^2 / r] = -8 (4 - r^2) / r^2
    s = np.where(r < 2.0, -8.0 * (4.0 - r * r) / (r * r), 0.0) / r
    return s[:, None] * x


def compliance_cost(fs, grads) -> CostIntegrand:
    """g(x, u) = -sum_i f_i(x) u_i."""

    def value(x, u):
        return -sum(f(x) * u[:, i] for i, f in enumerate(fs))

    def du(x, u):
        return -np.column_stack([f(x) for f in fs])

    def dx(x, u):
        return -sum(g(x) * u[:, i, None] for i, g in enumerate(grads))

    return CostIntegrand(value, du, dx)


def _annulus_Q1(x):
    # everything outside a thin tube around the unit circle
    return _radius(x) > 1.0 + 1e-6


def annulus_spec() -> ProblemSpec:
    fs = (annulus_f1, annulus_f2)
    grads = (annulus_grad_f1, annulus_grad_f2)
    cost = compliance_cost(fs, grads)
    return ProblemSpec(alpha=1.0, beta=2.0, V=3.0 * math.pi, q_alpha=1.5 * math.pi,
                       f=fs, grad_f=grads, h=(_zero, _zero),
                       g_alpha=cost, g_beta=cost, Q1=_annulus_Q1, Q2=_none)


def annulus_twostate() -> Problem:
    # D already excludes the hole, so the box alone describes the initial set
    omega0 = Box(-1.752, 1.792, -1.752, 1.792)
    return Problem("annulus_twostate", SquareWithHole(), annulus_spec(), omega0,
                   "two-state annulus benchmark with free outer boundary")


def annulus_fixed() -> Problem:
    return Problem("annulus_fixed", SquareWithHole(), annulus_spec(), Disk((0.0, 0.0), 2.0),
                   "OC on the exact annulus 1 < r < 2")


# Fourier square ------------------------------------------------------------

def _top_gamma0(mid):
    return np.where(np.abs(mid[:, 1] - 1.0) < 1e-9, "Gamma0", "OuterD")


def _sin_top(x):
    return np.sin(math.pi * x[:, 0])


def _upper(x):
    return x[:, 1] > 1e-9


def _lower(x):
    return x[:, 1] <= 1e-9


def _null_cost() -> CostIntegrand:
    return CostIntegrand(lambda x, u: np.zeros(len(x)),
                         lambda x, u: np.zeros_like(u),
                         lambda x, u: np.zeros((len(x), 2)))


def fourier_spec() -> ProblemSpec:
    """Laplace problem with sin(pi x) on y = 1; Q1 = {y > 0}, Q2 = {y <= 0}."""
    return ProblemSpec(alpha=1.0, beta=2.0, V=1.0, q_alpha=0.5,
                       f=(_zero,), grad_f=(lambda x: np.zeros((len(x), 2)),), h=(_sin_top,),
                       g_alpha=_null_cost(), g_beta=_null_cost(), Q1=_upper, Q2=_lower)


def square_fourier(n: int | None = None) -> Problem:
    """Unit square (``n`` None) or the strip (0,1) x (1/n, 1)."""
    y0 = 0.0 if n is None else 1.0 / n
    geom = Rectangle(0.0, 1.0, y0, 1.0, tagger=_top_gamma0)
    return Problem("square_fourier", geom, fourier_spec(), Disk((0.5, 0.5), 10.0),
                   "Laplace problem with separable closed-form solution")


def fourier_exact(x, n: int | None = None):
    """Closed-form solutions: cosh profile on the square, sinh on the strip."""
    X, Y = x[:, 0], x[:, 1]
    if n is None:
        return np.cosh(math.pi * Y) / math.cosh(math.pi) * np.sin(math.pi * X)
    a = 1.0 / n
    return np.sinh(math.pi * (Y - a)) / math.sinh(math.pi * (1.0 - a)) * np.sin(math.pi * X)


CATALOG = {
    "annulus_twostate": annulus_twostate,
    "annulus_fixed": annulus_fixed,
    "square_fourier": square_fourier,
}


def get_problem(name: str) -> Problem:
    try:
        return CATALOG[name]()
    except KeyError:
        raise UnknownProblem(name) from None
