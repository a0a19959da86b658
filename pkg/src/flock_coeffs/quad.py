"""Gauss-Legendre quadrature on [-1, 1] and orientational-equilibrium averages.

Every sphere integral in the pipeline reduces to a 1D integral in
mu = cos(theta) after averaging over the azimuth, so a single Gauss rule plus
the exponential equilibrium weight exp(sigma(mu)/d) covers all of them.  The
equilibrium weight is always handled with its maximum subtracted, which makes
the averages invariant under additive shifts of sigma and safe for small d.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
from scipy.special import roots_legendre

from .errors import DegenerateWeightError, DomainError, NumericError
from .kernel import CollisionKernel

__all__ = [
    "QuadratureRule",
    "build_rule",
    "integrate",
    "VonMisesEquilibrium",
    "build_equilibrium",
    "quadrature_size",
    "average_M",
    "average_weighted",
]


@dataclass(frozen=True)
class QuadratureRule:
    """Gauss-Legendre nodes/weights on (-1, 1); exact to degree 2n-1."""

    nodes: np.ndarray
    weights: np.ndarray

    @property
    def n(self) -> int:
        return len(self.nodes)

    @property
    def exactness_degree(self) -> int:
        return 2 * self.n - 1


def build_rule(n: int) -> QuadratureRule:
    """n-point Gauss-Legendre rule on [-1, 1]."""
    if n < 1:
        raise DomainError(f"rule size must be >= 1, got {n}")
    nodes, weights = roots_legendre(n)
    return QuadratureRule(nodes=nodes, weights=weights)


def _values_on(rule: QuadratureRule, g):
    """Evaluate g (callable, profile-like, array, or scalar) at the rule nodes."""
    if callable(g):
        values = np.asarray(g(rule.nodes), dtype=float)
        if values.ndim == 0:
            values = np.full(rule.n, float(values))
    else:
        values = np.asarray(g, dtype=float)
        if values.ndim == 0:
            values = np.full(rule.n, float(values))
        elif values.shape != rule.nodes.shape:
            raise DomainError(
                f"integrand array has shape {values.shape}, rule has {rule.n} nodes"
            )
    bad = ~np.isfinite(values)
    if bad.any():
        where = rule.nodes[bad][0]
        raise NumericError(f"integrand is not finite at node mu={where:.6f}")
    return values


def integrate(rule: QuadratureRule, g) -> float:
    """int_{-1}^{1} g(mu) dmu by the rule."""
    return float(rule.weights @ _values_on(rule, g))


@dataclass(frozen=True)
class VonMisesEquilibrium:
    """Normalized equilibrium on the sphere, exp(sigma(mu)/d) up to a constant.

    `weight` holds exp(sigma/d - shift) at the rule nodes with
    shift = max sigma/d, so averages are overflow-safe and independent of the
    free additive constant in sigma.  `mass` is int exp(sigma/d - shift) dmu;
    the sphere normalization constant is exp(-shift) / (2 pi mass).
    """

    kernel: CollisionKernel
    rule: QuadratureRule
    weight: np.ndarray
    shift: float
    mass: float

    @property
    def normalization_constant(self) -> float:
        """C with C exp(sigma/d) a probability density on the sphere.

        May underflow for strongly peaked weights; averages never form it.
        """
        return float(np.exp(-self.shift) / (2.0 * np.pi * self.mass))

    def average(self, g) -> float:
        """Probability average of g(cos theta) against the equilibrium."""
        values = _values_on(self.rule, g)
        return float((self.rule.weights * self.weight) @ values / self.mass)


def quadrature_size(kernel: CollisionKernel, degree: int) -> int:
    """Node count resolving polynomials of `degree` against the kernel weight.

    The exponential weight behaves like a polynomial of degree comparable to
    the spread of sigma/d over [-1, 1]; a fixed margin covers the tail.  A
    spread beyond ~4000 (noise constants below ~1e-3 for order-one rates) is
    not resolvable in double precision and is rejected.
    """
    lw = kernel.log_weight(np.linspace(-1.0, 1.0, 257))
    spread = float(lw.max() - lw.min())
    if not np.isfinite(spread) or spread > 4000.0:
        raise NumericError(
            f"equilibrium weight spread {spread:.3g} is too large to resolve; "
            f"noise constant d = {kernel.d} is below the supported range"
        )
    return degree + 48 + int(np.ceil(spread))


def build_equilibrium(kernel: CollisionKernel, n_quad: int | None = None) -> VonMisesEquilibrium:
    if n_quad is None:
        n_quad = quadrature_size(kernel, 0)
    rule = build_rule(n_quad)
    lw = kernel.log_weight(rule.nodes)
    shift = float(lw.max())
    weight = np.exp(lw - shift)
    mass = float(rule.weights @ weight)
    return VonMisesEquilibrium(kernel=kernel, rule=rule, weight=weight, shift=shift, mass=mass)


def average_M(eq: VonMisesEquilibrium, g) -> float:
    """<g(cos theta)> over the equilibrium probability distribution."""
    return eq.average(g)


def average_weighted(rule: QuadratureRule, g, h_weight, rtol: float = 1e-13) -> float:
    """<g>_h = int g h dmu / int h dmu for a one-signed weight h.

    The sign of h cancels in the ratio.  Raises DegenerateWeightError when the
    weight integrates to (numerical) zero relative to its absolute mass.
    """
    gv = _values_on(rule, g)
    hv = _values_on(rule, h_weight)
    denom = float(rule.weights @ hv)
    scale = float(rule.weights @ np.abs(hv))
    if scale == 0.0 or abs(denom) <= rtol * scale:
        raise DegenerateWeightError(
            f"weight integrates to {denom:.3e} against absolute mass {scale:.3e}"
        )
    return float((rule.weights * hv) @ gv / denom)
