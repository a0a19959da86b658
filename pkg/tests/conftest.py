import numpy as np
import pytest

from flock_coeffs.coeffs import compute_c123, compute_coefficients, solve_profiles
from flock_coeffs.elliptic import solve_gci
from flock_coeffs.kernel import CollisionKernel, constant_kernel, even_poly_kernel
from flock_coeffs.quad import build_equilibrium, build_rule, quadrature_size


def _zeros(mu):
    return np.zeros_like(np.asarray(mu, dtype=float))


@pytest.fixture(scope="session")
def const_kernel():
    return constant_kernel(1.0, d=1.0)


@pytest.fixture(scope="session")
def even_kernel():
    return even_poly_kernel([1.0, 0.5], d=1.0)


@pytest.fixture(scope="session")
def legendre_kernel():
    """Weightless kernel (sigma = 0) for operator-level solver tests."""
    return CollisionKernel(nu=_zeros, nu_prime=_zeros, sigma=_zeros,
                           d=1.0, nu_min=0.0, model="legendre-test")


def _pipeline(kernel, n=64, kappa=0.1):
    rule = build_rule(quadrature_size(kernel, n + 10))
    eq = build_equilibrium(kernel, rule.n)
    gci = solve_gci(kernel, n, rule=eq.rule)
    c = compute_c123(kernel, gci, eq)
    profiles = solve_profiles(kernel, c, n, rule=eq.rule, eq=eq)
    hydro = compute_coefficients(kernel, n=n, kappa=kappa)
    return dict(kernel=kernel, n=n, eq=eq, gci=gci, c=c, profiles=profiles,
                hydro=hydro)


@pytest.fixture(scope="session")
def pipeline_const(const_kernel):
    return _pipeline(const_kernel)


@pytest.fixture(scope="session")
def pipeline_even(even_kernel):
    return _pipeline(even_kernel)
