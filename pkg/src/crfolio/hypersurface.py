"""Families of discs attached to a real hypersurface in C^2.

The boundary of the family is parametrized by ``(psi, t1, t2, t3)``. Gradients are
columns over these four rows; the 3x3 minors of ``[grad G1, grad G2, grad F]`` play
the role of the planar Jacobian, and ``K_mu`` is the determinant of
``[grad G1, grad G2, grad conj(G_nu)]`` over the rows ``(psi, t1, t2)``.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .extension import BoundaryFunction, ExtensionField, NoExtension
from .family import BOX3, DiscFamily
from .numerics import ConfigurationError, poly_eval

INCIDENCE_TOL = 1e-8
OFF_SURFACE_TOL = 1e-6


@dataclass(frozen=True)
class Hypersurface:
    """Real quadric ``rho(z) = z^H A z + 2 Re(b^H z) + c`` with Hermitian ``A``."""

    name: str
    A: np.ndarray
    b: np.ndarray
    c: float

    def __post_init__(self):
        A = np.asarray(self.A, dtype=complex)
        if A.shape != (2, 2) or not np.allclose(A, A.conj().T, atol=1e-14):
            raise ConfigurationError("quadric matrix must be a 2x2 Hermitian matrix")
        object.__setattr__(self, "A", A)
        object.__setattr__(self, "b", np.asarray(self.b, dtype=complex).reshape(2))
        object.__setattr__(self, "c", float(self.c))

    def rho(self, z) -> np.ndarray:
        z = np.asarray(z, dtype=complex)
        quad = np.einsum("...i,ij,...j->...", np.conj(z), self.A, z)
        lin = 2.0 * np.real(np.einsum("i,...i->...", np.conj(self.b), z))
        return np.real(quad) + lin + self.c

    def d_rho(self, z) -> np.ndarray:
        """``d rho / d z_j``."""
        z = np.asarray(z, dtype=complex)
        return np.einsum("...i,ij->...j", np.conj(z), self.A) + np.conj(self.b)

    def dbar_rho(self, z) -> np.ndarray:
        """``d rho / d conj(z_j)``; the conjugate of ``d_rho`` since rho is real."""
        z = np.asarray(z, dtype=complex)
        return np.einsum("ij,...j->...i", self.A, z) + self.b

    def check_gradient(self, z, floor: float = 1e-6) -> None:
        grad = np.linalg.norm(self.dbar_rho(z), axis=-1)
        if np.any(grad <= floor):
            raise ConfigurationError(f"defining function is critical at a sample (|grad rho| = "
                                     f"{float(grad.min()):.3g})")


def sphere(radius: float = 1.0) -> Hypersurface:
    if radius <= 0:
        raise ConfigurationError("sphere radius must be positive")
    return Hypersurface(f"sphere({radius:g})", np.eye(2), np.zeros(2), -radius ** 2)


def quadric(A, b=(0.0, 0.0), c: float = -1.0) -> Hypersurface:
    return Hypersurface("quadric", A, b, c)


SURFACE_CATALOG = {
    "quadric": "z^H A z + 2 Re(b^H z) + c = 0 with Hermitian A",
    "sphere": "|z1|^2 + |z2|^2 = radius^2",
}


# ---------------------------------------------------------------------------
# gradients on the boundary grid


def _require_box3(family: DiscFamily, what: str):
    if family.params.kind != BOX3 or family.ambient_dim != 2:
        raise ConfigurationError(f"{what} needs a family of discs in C^2 over a 3-parameter box")


def family_gradients(family: DiscFamily, zeta) -> np.ndarray:
    """``grad G`` at ``zeta`` for every node: ``params + (4, 2) + zeta.shape``."""
    zeta = np.asarray(zeta, dtype=complex)
    nz = zeta.ndim
    psi = np.expand_dims(1j * zeta * poly_eval(family.dzeta_data, zeta), axis=-2 - nz)
    gt = poly_eval(family.dt_data, zeta)  # params + (3, 2) + Z
    return np.concatenate([psi, gt], axis=-2 - nz)


def extension_gradients(ext: ExtensionField, zeta) -> np.ndarray:
    """``grad F`` at ``zeta``: ``params + (4,) + zeta.shape``."""
    zeta = np.asarray(zeta, dtype=complex)
    nz = zeta.ndim
    psi = np.expand_dims(1j * zeta * poly_eval(ext.dzeta_data, zeta), axis=-1 - nz)
    ft = poly_eval(ext.dt_data, zeta)  # params + (3,) + Z
    return np.concatenate([psi, ft], axis=-1 - nz)


def polar_grid(size: int = 64, rings: int = 9) -> np.ndarray:
    radii = np.linspace(0.0, 1.0, rings)
    return np.outer(radii, np.exp(2j * np.pi * np.arange(size) / size))


# ---------------------------------------------------------------------------
# minors


@dataclass(frozen=True, eq=False)
class MinorField:
    """``J^0 .. J^3`` on a polar grid times the parameter box.

    ``minors[k]`` drops row ``k`` of the 4x3 matrix with rows ``(psi, t1, t2, t3)``.
    """

    minors: np.ndarray  # (4,) + params + zeta.shape
    scales: np.ndarray  # (4,)
    zeta: np.ndarray
    valid: np.ndarray  # params

    def max_abs(self, k: int) -> float:
        return float(np.max(np.abs(self.minors[k][self.valid])))

    def relative_max(self, k: int) -> float:
        return self.max_abs(k) / self.scales[k]

    def at_centre(self, k: int) -> float:
        """Largest ``|J^k|`` at ``zeta = 0`` over the valid nodes."""
        centre = np.abs(self.zeta) == 0
        if not centre.any():
            raise ConfigurationError("the grid has no zeta = 0 sample")
        return float(np.max(np.abs(self.minors[k][self.valid][..., centre])))


def minors_from_columns(grad_g: np.ndarray, grad_f: np.ndarray, zeta, valid) -> MinorField:
    """Minors of ``[grad G1, grad G2, grad F]``.

    ``grad_g`` is ``params + (4, 2) + Z`` and ``grad_f`` is ``params + (4,) + Z``.
    """
    nz = zeta.ndim
    cols = np.concatenate([grad_g, np.expand_dims(grad_f, axis=-1 - nz)], axis=-1 - nz)
    # cols: params + (4 rows, 3 columns) + Z ; move to Z + (4, 3)
    mats = np.moveaxis(cols, (-2 - nz, -1 - nz), (-2, -1))
    minors, scales = [], []
    for k in range(4):
        rows = [r for r in range(4) if r != k]
        sub = mats[..., rows, :]
        minors.append(np.linalg.det(sub))
        hadamard = np.prod(np.linalg.norm(sub, axis=-2), axis=-1)
        scales.append(float(np.sqrt(np.mean(hadamard[valid] ** 2))))
    scales = np.array(scales)
    scales[scales == 0] = 1.0
    return MinorField(np.stack(minors), scales, zeta, valid)


def compute_minors(ext: ExtensionField, family: DiscFamily | None = None,
                   zeta=None) -> MinorField:
    """``J^0 .. J^3`` of ``[grad G1, grad G2, grad F]`` over a polar grid of the disc."""
    family = family or ext.family
    _require_box3(family, "compute_minors")
    if not ext.holds:
        raise NoExtension(f"no extension on some disc (residual {ext.residual:.3g})")
    zeta = polar_grid() if zeta is None else np.asarray(zeta, dtype=complex)
    return minors_from_columns(family_gradients(family, zeta), extension_gradients(ext, zeta),
                               zeta, family.params.valid_mask)


def lemma34_check(minors: MinorField, small: float = 1e-8, implied: float = 1e-6) -> bool:
    """Whether small ``J^1, J^2, J^3`` come with a small ``J^0`` on the grid."""
    premise = all(minors.relative_max(k) < small for k in (1, 2, 3))
    return (not premise) or minors.relative_max(0) < implied


# ---------------------------------------------------------------------------
# K_mu


@dataclass(frozen=True)
class KReport:
    max_rel_imag: dict  # mu -> max |Im K| / |K|
    samples: dict  # mu -> number of samples with that mu selected
    incidence: float


def boundary_incidence(family: DiscFamily, surface: Hypersurface, size: int = 64) -> float:
    zeta = np.exp(2j * np.pi * np.arange(size) / size)
    g = np.moveaxis(family.grid_values(zeta), -2, -1)  # params + (Z, 2)
    valid = family.params.valid_mask
    return float(np.max(np.abs(surface.rho(g[valid]))))


def K_mu_reality(family: DiscFamily, surface: Hypersurface, size: int = 64) -> KReport:
    """Largest relative imaginary part of ``K_mu`` on the boundary circles.

    ``K_mu = det[grad G1, grad G2, grad conj(G_nu)] / dbar_mu rho`` over the rows
    ``(psi, t1, t2)``, ``nu != mu``. At every sample ``mu`` maximizes
    ``|dbar_mu rho|``.
    """
    _require_box3(family, "K_mu")
    incidence = boundary_incidence(family, surface, size)
    if incidence >= INCIDENCE_TOL:
        raise ConfigurationError(f"boundary circles leave the surface (max |rho| = {incidence:.3g})")
    zeta = np.exp(2j * np.pi * np.arange(size) / size)
    grads = family_gradients(family, zeta)  # params + (4, 2, Z)
    valid = family.params.valid_mask
    grads = np.moveaxis(grads[valid], -1, 1)  # (P, Z, 4, 2)
    g = np.moveaxis(family.grid_values(zeta)[valid], -1, 1)  # (P, Z, 2)
    dbar = surface.dbar_rho(g)
    surface.check_gradient(g)
    mu = np.argmax(np.abs(dbar), axis=-1)
    nu = 1 - mu
    rows = grads[..., :3, :]
    conj_col = np.conj(np.take_along_axis(rows, nu[..., None, None], axis=-1))
    mats = np.concatenate([rows, conj_col], axis=-1)
    det = np.linalg.det(mats)
    K = det / np.take_along_axis(dbar, mu[..., None], axis=-1)[..., 0]
    out, counts = {}, {}
    for m in (0, 1):
        sel = (mu == m) & (np.abs(K) > 0)
        counts[m + 1] = int(np.sum(mu == m))
        out[m + 1] = float(np.max(np.abs(K[sel].imag) / np.abs(K[sel]))) if sel.any() else 0.0
    return KReport(out, counts, incidence)


# ---------------------------------------------------------------------------
# tangential Cauchy-Riemann operator


def _fd_dbar(f, z, h):
    z = np.asarray(z, dtype=complex)
    out = np.empty(z.shape, dtype=complex)
    for j in range(2):
        e = np.zeros(2, dtype=complex)
        e[j] = h
        dx = (f(z + e) - f(z - e)) / (2.0 * h)
        dy = (f(z + 1j * e) - f(z - 1j * e)) / (2.0 * h)
        out[..., j] = 0.5 * (dx + 1j * dy)
    return out


def dbar_mu_nu(f: BoundaryFunction, surface: Hypersurface, z, mu: int, nu: int,
               h: float | None = None) -> np.ndarray:
    """``dbar_mu rho * dbar_nu f - dbar_nu rho * dbar_mu f`` (indices 1 or 2)."""
    z = np.asarray(z, dtype=complex)
    if h is None:
        h = 1e-5 * max(1.0, float(np.max(np.abs(z))))
    df = _fd_dbar(f, z, h)
    dr = surface.dbar_rho(z)
    a, b = mu - 1, nu - 1
    return dr[..., a] * df[..., b] - dr[..., b] * df[..., a]


def tangential_cr_residual(f: BoundaryFunction, surface: Hypersurface, sample_points,
                           h: float | None = None) -> float:
    """``max |dbar_b f|`` with ``dbar_b = dbar_1 rho dbar_2 - dbar_2 rho dbar_1``."""
    z = np.asarray(sample_points, dtype=complex).reshape(-1, 2)
    off = np.abs(surface.rho(z))
    if np.any(off > OFF_SURFACE_TOL):
        raise ConfigurationError(f"sample off the surface by {float(off.max()):.3g}")
    surface.check_gradient(z)
    return float(np.max(np.abs(dbar_mu_nu(f, surface, z, 1, 2, h))))


def boundary_samples(family: DiscFamily, size: int = 32) -> np.ndarray:
    """Points of the boundary circles at the valid nodes, shape ``(P * size, 2)``."""
    zeta = np.exp(2j * np.pi * np.arange(size) / size)
    g = np.moveaxis(family.grid_values(zeta), -2, -1)
    return g[family.params.valid_mask].reshape(-1, 2)


def trace_constancy(ext: ExtensionField) -> float:
    """Largest deviation of the boundary traces from their means over the discs."""
    trace = ext.boundary_trace[ext.family.params.valid_mask]
    return float(np.max(np.abs(trace - trace.mean(axis=-1, keepdims=True))))
