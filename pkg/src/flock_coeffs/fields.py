"""Discrete density/orientation fields and the first-order correction terms.

A field state is a nonnegative density rho and a unit orientation vector on a
uniform periodic lattice.  Gradients are centered finite differences (order 2
or 4); all tensor splitting (parallel/transverse projections, the shear/swirl
decomposition of the transverse orientation gradient) is exact pointwise
algebra applied to those differences, so the split identities hold by
construction and the only discretization error is in the raw derivatives.

The corrections:

  mass:     R1 = beta * div((Omega . grad rho) Omega)
                 + gamma * div(rho (div Omega) Omega)
  velocity: R2 = sum_j zeta_j * T_j, 8 quadratic structures and 5
                 second-derivative structures, every one orthogonal to Omega.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .errors import DomainError, FieldStateError, GridShapeError

__all__ = [
    "Grid",
    "FieldState",
    "GradientBundle",
    "CorrectionFields",
    "deriv",
    "decompose_gradients",
    "evaluate_r1",
    "r2_terms",
    "R2_TERM_TAGS",
    "evaluate_r2",
    "evaluate_corrections",
    "make_field",
    "save_field_csv",
    "load_field_csv",
    "save_field_npz",
    "load_field_npz",
]

UNIT_NORM_TOL = 1e-10


@dataclass(frozen=True)
class Grid:
    """Uniform periodic lattice; extents of 1 give degenerate (constant) axes."""

    shape: tuple
    spacing: tuple

    def __post_init__(self):
        if len(self.shape) != 3 or len(self.spacing) != 3:
            raise GridShapeError("grid is three-dimensional: shape and spacing of length 3")
        if any(s < 1 for s in self.shape):
            raise GridShapeError(f"bad grid shape {self.shape}")
        if any(h <= 0 for h in self.spacing):
            raise GridShapeError(f"grid spacing must be positive, got {self.spacing}")

    @property
    def lengths(self):
        return tuple(n * h for n, h in zip(self.shape, self.spacing))

    def coordinates(self):
        axes = [np.arange(n) * h for n, h in zip(self.shape, self.spacing)]
        return np.meshgrid(*axes, indexing="ij")


@dataclass
class FieldState:
    """Density rho >= 0 and unit orientation omega per cell (shape + (3,))."""

    grid: Grid
    rho: np.ndarray
    omega: np.ndarray

    def validate(self):
        if self.rho.shape != self.grid.shape:
            raise GridShapeError(
                f"rho shape {self.rho.shape} != grid shape {self.grid.shape}")
        if self.omega.shape != self.grid.shape + (3,):
            raise GridShapeError(
                f"omega shape {self.omega.shape} != grid shape {self.grid.shape} + (3,)")
        norms = np.linalg.norm(self.omega, axis=-1)
        dev = np.abs(norms - 1.0)
        if dev.max() > UNIT_NORM_TOL:
            idx = tuple(int(i) for i in np.unravel_index(int(dev.argmax()), dev.shape))
            raise FieldStateError(
                f"orientation not unit at cell {idx}: |omega| = {norms[idx]:.12f}")
        if self.rho.min() < 0:
            idx = tuple(int(i) for i in np.unravel_index(int(self.rho.argmin()),
                                                         self.rho.shape))
            raise FieldStateError(f"negative density at cell {idx}: {self.rho[idx]:.6e}")
        return self


@dataclass
class GradientBundle:
    """First derivatives of (rho, omega) split along/normal to omega.

    grad_perp_rho : transverse density gradient (3-vector per cell)
    par_grad_rho  : omega . grad rho (scalar)
    omega_tilt    : (omega . grad) omega, projected transverse (3-vector)
    div_omega     : trace of the transverse-transverse orientation gradient
    sigma_omega   : symmetric traceless shear block (3x3, transverse plane)
    gamma_omega   : antisymmetric swirl block (3x3, transverse plane)
    """

    scheme_order: int
    grad_perp_rho: np.ndarray
    par_grad_rho: np.ndarray
    omega_tilt: np.ndarray
    div_omega: np.ndarray
    sigma_omega: np.ndarray
    gamma_omega: np.ndarray


@dataclass
class CorrectionFields:
    """Pointwise corrections: scalar r1 and vector r2 with omega . r2 = 0."""

    r1: np.ndarray
    r2: np.ndarray


def deriv(values: np.ndarray, axis: int, h: float, order: int = 2) -> np.ndarray:
    """Centered periodic finite difference along `axis` (order 2 or 4)."""
    if order == 2:
        return (np.roll(values, -1, axis=axis) - np.roll(values, 1, axis=axis)) / (2.0 * h)
    if order == 4:
        return (
            -np.roll(values, -2, axis=axis)
            + 8.0 * np.roll(values, -1, axis=axis)
            - 8.0 * np.roll(values, 1, axis=axis)
            + np.roll(values, 2, axis=axis)
        ) / (12.0 * h)
    raise DomainError(f"scheme order must be 2 or 4, got {order}")


def _grad_scalar(state_grid, values, order):
    return np.stack(
        [deriv(values, ax, state_grid.spacing[ax], order) for ax in range(3)], axis=-1
    )


def _grad_vector_jk(state_grid, vec, order):
    """(grad v)[..., j, k] = d_j v_k."""
    out = np.empty(vec.shape[:-1] + (3, 3))
    for j in range(3):
        for k in range(3):
            out[..., j, k] = deriv(vec[..., k], j, state_grid.spacing[j], order)
    return out


def _project_perp(omega, vec):
    """(Id - omega otimes omega) vec, exact pointwise algebra."""
    return vec - np.sum(vec * omega, axis=-1, keepdims=True) * omega


def decompose_gradients(state: FieldState, scheme_order: int = 2) -> GradientBundle:
    """Finite-difference gradients followed by exact tensor projections.

    The transverse-transverse orientation block is projected on both sides,
    its trace defines div_omega, and the shear/swirl split is taken as the
    definition (so the reassembly identities hold exactly).
    """
    state.validate()
    if scheme_order == 4 and any(1 < n < 5 for n in state.grid.shape):
        raise DomainError("order-4 stencil needs periodic extents of >= 5 cells (or 1)")
    omega = state.omega
    grad_rho = _grad_scalar(state.grid, state.rho, scheme_order)
    grad_omega = _grad_vector_jk(state.grid, omega, scheme_order)

    par_grad_rho = np.sum(grad_rho * omega, axis=-1)
    grad_perp_rho = grad_rho - par_grad_rho[..., None] * omega

    # (omega . grad) omega = (grad omega)^T omega, then projected transverse
    tilt_raw = np.einsum("...jk,...j->...k", grad_omega, omega)
    omega_tilt = _project_perp(omega, tilt_raw)

    # transverse-transverse block: O_perp (grad omega) O_perp
    proj = np.eye(3) - omega[..., :, None] * omega[..., None, :]
    bb = np.einsum("...ij,...jk,...kl->...il", proj, grad_omega, proj)
    div_omega = np.einsum("...ii->...", bb)
    bb_t = bb.swapaxes(-1, -2)
    sigma_omega = bb + bb_t - div_omega[..., None, None] * proj
    gamma_omega = bb - bb_t

    return GradientBundle(
        scheme_order=scheme_order,
        grad_perp_rho=grad_perp_rho,
        par_grad_rho=par_grad_rho,
        omega_tilt=omega_tilt,
        div_omega=div_omega,
        sigma_omega=sigma_omega,
        gamma_omega=gamma_omega,
    )


def _divergence(grid, vec, order):
    return sum(deriv(vec[..., ax], ax, grid.spacing[ax], order) for ax in range(3))


def evaluate_r1(state: FieldState, bundle: GradientBundle, beta: float, gamma: float,
                scheme_order: int = 2) -> np.ndarray:
    """Mass-equation correction field."""
    _check_bundle(state, bundle)
    v1 = bundle.par_grad_rho[..., None] * state.omega
    v2 = (state.rho * bundle.div_omega)[..., None] * state.omega
    return beta * _divergence(state.grid, v1, scheme_order) + gamma * _divergence(
        state.grid, v2, scheme_order)


# slot tags: which of the 13 structures are quadratic in first derivatives
# and which carry a second derivative
R2_TERM_TAGS = {
    1: "quadratic", 2: "derivative", 3: "quadratic", 4: "quadratic",
    5: "derivative", 6: "quadratic", 7: "quadratic", 8: "quadratic",
    9: "quadratic", 10: "quadratic", 11: "derivative", 12: "derivative",
    13: "derivative",
}


def _check_bundle(state, bundle):
    if bundle.par_grad_rho.shape != state.grid.shape:
        raise GridShapeError(
            f"bundle shape {bundle.par_grad_rho.shape} does not match grid {state.grid.shape}")


def r2_terms(state: FieldState, bundle: GradientBundle, scheme_order: int = 2) -> dict:
    """The 13 tensor structures of the velocity correction, slot -> field.

    Second-derivative structures differentiate stored bundle entries with the
    same scheme and project transverse; quadratic structures are pointwise
    products of bundle entries.  Every returned field is orthogonal to omega.
    """
    _check_bundle(state, bundle)
    grid, omega, rho = state.grid, state.omega, state.rho
    order = scheme_order
    gperp = bundle.grad_perp_rho
    dpar = bundle.par_grad_rho
    tilt = bundle.omega_tilt
    divo = bundle.div_omega
    sig = bundle.sigma_omega
    gam = bundle.gamma_omega

    def par_deriv_vec(vec):
        """(omega . grad) vec, projected transverse."""
        d = _grad_vector_jk(grid, vec, order)
        out = np.einsum("...j,...jk->...k", omega, d)
        return _project_perp(omega, out)

    def div_tensor(tens):
        """(div T)_k = d_j T_jk, projected transverse."""
        out = np.zeros(tens.shape[:-2] + (3,))
        for k in range(3):
            out[..., k] = sum(
                deriv(tens[..., j, k], j, grid.spacing[j], order) for j in range(3))
        return _project_perp(omega, out)

    if rho.min() <= 0:
        raise FieldStateError("velocity correction needs strictly positive density")

    terms = {
        1: divo[..., None] * gperp,
        2: rho[..., None] * _project_perp(
            omega, _grad_scalar(grid, divo, order)),
        3: np.einsum("...jk,...k->...j", sig, gperp),
        4: np.einsum("...jk,...k->...j", gam, gperp),
        5: par_deriv_vec(gperp),
        6: dpar[..., None] * tilt,
        7: (dpar / rho)[..., None] * gperp,
        8: (rho * divo)[..., None] * tilt,
        9: rho[..., None] * np.einsum("...jk,...k->...j", sig, tilt),
        10: rho[..., None] * np.einsum("...jk,...k->...j", gam, tilt),
        11: rho[..., None] * par_deriv_vec(tilt),
        12: rho[..., None] * div_tensor(sig),
        13: rho[..., None] * div_tensor(gam),
    }
    return terms


def evaluate_r2(state: FieldState, bundle: GradientBundle, coeffs,
                scheme_order: int = 2) -> np.ndarray:
    """Velocity-equation correction field: sum of zeta_j times structure j.

    `coeffs` is either a coefficient-set object exposing `.zeta` or a plain
    13-vector.  Linear in the zeta vector by construction.
    """
    zeta = np.asarray(getattr(coeffs, "zeta", coeffs), dtype=float)
    if zeta.shape != (13,):
        raise DomainError(f"expected 13 coefficients, got shape {zeta.shape}")
    terms = r2_terms(state, bundle, scheme_order)
    out = np.zeros(state.grid.shape + (3,))
    for slot, term in terms.items():
        out += zeta[slot - 1] * term
    return out


def evaluate_corrections(state: FieldState, coeffs, scheme_order: int = 2,
                         eps: float = 1.0) -> CorrectionFields:
    """Both corrections, scaled by the scale-ratio eps used for reporting."""
    bundle = decompose_gradients(state, scheme_order)
    r1 = evaluate_r1(state, bundle, coeffs.beta, coeffs.gamma, scheme_order)
    r2 = evaluate_r2(state, bundle, coeffs, scheme_order)
    return CorrectionFields(r1=eps * r1, r2=eps * r2)


# --- analytic test fields ------------------------------------------------------

def _unit(vec):
    return vec / np.linalg.norm(vec, axis=-1, keepdims=True)


def make_field(name: str, shape=(16, 16, 16), lengths=None, params=None,
               seed: int = 0) -> FieldState:
    """Named analytic field states on a periodic box.

    uniform       constant rho and omega
    axial-sine    omega = z-hat, rho = 2 + sin z         (params: amplitude)
    tilt-sine     omega tilts in the x-z plane with z, rho = 1
                  (params: alpha0, default 0.7)
    random-smooth seeded band-limited unit field, rho bounded away from 0
    """
    if lengths is None:
        lengths = (2 * np.pi,) * 3
    shape = tuple(int(n) for n in shape)
    grid = Grid(shape=shape, spacing=tuple(L / n for L, n in zip(lengths, shape)))
    x, y, z = grid.coordinates()
    params = params or {}

    if name == "uniform":
        rho = np.full(shape, float(params.get("rho", 1.0)))
        omega = np.zeros(shape + (3,))
        omega[..., 2] = 1.0
    elif name == "axial-sine":
        amp = float(params.get("amplitude", 1.0))
        rho = 2.0 + amp * np.sin(2 * np.pi * z / lengths[2])
        omega = np.zeros(shape + (3,))
        omega[..., 2] = 1.0
    elif name == "tilt-sine":
        alpha0 = float(params.get("alpha0", 0.7))
        alpha = alpha0 * np.sin(2 * np.pi * z / lengths[2])
        rho = np.ones(shape)
        omega = np.stack([np.sin(alpha), np.zeros_like(alpha), np.cos(alpha)], axis=-1)
    elif name == "random-smooth":
        rng = np.random.default_rng(seed)
        kx, ky, kz = (2 * np.pi / L for L in lengths)
        base = np.zeros(shape + (3,))
        base[..., 2] = 2.0
        for _ in range(4):
            amp = 0.25 * rng.standard_normal(3)
            kv = rng.integers(1, 3, size=3)
            ph = rng.uniform(0, 2 * np.pi, size=3)
            mode = np.cos(kv[0] * kx * x + ph[0]) * np.cos(kv[1] * ky * y + ph[1]) \
                * np.sin(kv[2] * kz * z + ph[2])
            base += amp * mode[..., None]
        omega = _unit(base)
        rho = 1.5 + 0.4 * np.cos(kx * x) * np.sin(kz * z) + 0.2 * np.cos(ky * y)
    else:
        raise DomainError(
            f"unknown field {name!r}; known: uniform, axial-sine, tilt-sine, random-smooth")
    return FieldState(grid=grid, rho=rho, omega=omega).validate()


# --- field I/O -----------------------------------------------------------------

FIELD_CSV_HEADER = "x,y,z,rho,ox,oy,oz"


def save_field_csv(state: FieldState, path):
    x, y, z = state.grid.coordinates()
    cols = np.column_stack([
        x.ravel(), y.ravel(), z.ravel(), state.rho.ravel(),
        state.omega[..., 0].ravel(), state.omega[..., 1].ravel(),
        state.omega[..., 2].ravel(),
    ])
    np.savetxt(path, cols, delimiter=",", header=FIELD_CSV_HEADER, comments="",
               fmt="%.17g")


def load_field_csv(path) -> FieldState:
    """Read a field state back; the lattice is reconstructed from coordinates."""
    data = np.loadtxt(path, delimiter=",", skiprows=1, ndmin=2)
    if data.shape[1] != 7:
        raise FieldStateError(f"expected 7 columns ({FIELD_CSV_HEADER}), got {data.shape[1]}")
    axes = []
    for col in range(3):
        vals = np.unique(np.round(data[:, col], 12))
        axes.append(vals)
    shape = tuple(len(a) for a in axes)
    if int(np.prod(shape)) != data.shape[0]:
        raise FieldStateError(
            f"rows ({data.shape[0]}) do not fill a {shape} lattice")
    spacing = tuple(
        float(a[1] - a[0]) if len(a) > 1 else 1.0 for a in axes)
    order = np.lexsort((data[:, 2], data[:, 1], data[:, 0]))
    data = data[order]
    grid = Grid(shape=shape, spacing=spacing)
    rho = data[:, 3].reshape(shape)
    omega = data[:, 4:7].reshape(shape + (3,))
    return FieldState(grid=grid, rho=rho, omega=omega).validate()


def save_field_npz(state: FieldState, path):
    np.savez(path, shape=np.array(state.grid.shape),
             spacing=np.array(state.grid.spacing), rho=state.rho, omega=state.omega)


def load_field_npz(path) -> FieldState:
    with np.load(path) as data:
        grid = Grid(shape=tuple(int(v) for v in data["shape"]),
                    spacing=tuple(float(v) for v in data["spacing"]))
        return FieldState(grid=grid, rho=data["rho"], omega=data["omega"]).validate()
