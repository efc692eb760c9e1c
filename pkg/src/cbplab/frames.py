"""The complex structure on R^{2n}: xi -> xi_perp, section frames, R_theta,
and symmetry-reduced direction grids on the sphere."""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np
from scipy import stats

_UNIT_TOL = 1e-12


def _require_even(dim):
    if dim % 2 != 0 or dim < 4:
        raise ValueError(f"dimension must be even and >= 4, got {dim}")


def perp(xi):
    """The partner direction (-xi_12, xi_11, ..., -xi_n2, xi_n1)."""
    xi = np.asarray(xi, dtype=float)
    out = np.empty_like(xi)
    out[..., 0::2] = -xi[..., 1::2]
    out[..., 1::2] = xi[..., 0::2]
    return out


def rotate(x, theta):
    """Apply the blockwise rotation R_theta to every coordinate pair of x."""
    x = np.asarray(x, dtype=float)
    if x.shape[-1] % 2 != 0:
        raise ValueError("rotate requires an even-dimensional vector")
    c, s = math.cos(theta), math.sin(theta)
    a = x[..., 0::2]
    b = x[..., 1::2]
    out = np.empty_like(x)
    out[..., 0::2] = c * a - s * b
    out[..., 1::2] = s * a + c * b
    return out


@dataclass(frozen=True)
class ComplexFrame:
    """A direction xi, its partner xi_perp, and an orthonormal basis of the
    section subspace H_xi (the real form of the complex hyperplane)."""

    xi: np.ndarray
    xi_perp: np.ndarray
    basis: np.ndarray  # (2n-2, 2n) rows

    @property
    def dim(self) -> int:
        return self.xi.shape[0]


def make_frame(xi) -> ComplexFrame:
    """Build the section frame for a unit direction xi in R^{2n}."""
    xi = np.asarray(xi, dtype=float)
    _require_even(xi.shape[0])
    if abs(np.linalg.norm(xi) - 1.0) > _UNIT_TOL:
        raise ValueError("xi must be a unit vector")
    xp = perp(xi)
    d = xi.shape[0]
    # orthonormal complement of span{xi, xi_perp} from the projector's
    # eigenspace; SVD makes the completion deterministic
    proj = np.eye(d) - np.outer(xi, xi) - np.outer(xp, xp)
    u, s, _ = np.linalg.svd(proj)
    basis = u[:, :d - 2].T.copy()
    return ComplexFrame(xi=xi.copy(), xi_perp=xp, basis=basis)


def orbit_distance(p, q, samples=256):
    """min over theta of |R_theta p - q|, estimated on a theta grid."""
    thetas = np.linspace(0.0, 2.0 * math.pi, samples, endpoint=False)
    best = math.inf
    for t in thetas:
        best = min(best, float(np.linalg.norm(rotate(p, t) - q)))
    return best


@dataclass(frozen=True)
class DirectionGrid:
    """Scan directions on S^{dim-1}.

    Under orbit reduction, points take the canonical form
    (r_1, 0, r_2, 0, ..., r_n, 0) with r_j >= 0, one representative per
    R_theta orbit; `weights` then integrate R_theta-invariant functions
    (they sum to the sphere area).
    """

    dim: int
    points: np.ndarray  # (N, dim)
    reduction: str  # "none" | "orbit_reduced"
    resolution: int
    seed: int = 0
    weights: np.ndarray | None = field(default=None)

    def __len__(self):
        return len(self.points)


def _moduli_angle_grid(n, res):
    """Product grid over the spherical angles of the moduli vector on
    S^{n-1}_+, with invariant-measure weights (density prod_j m_j)."""
    edges = np.linspace(0.0, math.pi / 2.0, res + 1)
    mids = 0.5 * (edges[:-1] + edges[1:])
    step = edges[1] - edges[0]
    grids = np.meshgrid(*([mids] * (n - 1)), indexing="ij")
    phis = np.stack([g.ravel() for g in grids], axis=1)  # (N, n-1)
    m = np.empty((phis.shape[0], n))
    sin_prod = np.ones(phis.shape[0])
    for i in range(n - 1):
        m[:, i] = sin_prod * np.cos(phis[:, i])
        sin_prod = sin_prod * np.sin(phis[:, i])
    m[:, n - 1] = sin_prod
    # surface element of S^{n-1} in these angles: prod_i sin^{n-1-i}(phi_i)
    jac = np.ones(phis.shape[0])
    for i in range(n - 1):
        jac *= np.sin(phis[:, i]) ** (n - 2 - i)
    dens = np.prod(m, axis=1)  # pushforward of the uniform sphere measure
    w = dens * jac * step ** (n - 1)
    return m, w


def make_grid(dim, resolution, reduction="none", seed=0,
              sort_moduli=False) -> DirectionGrid:
    """Deterministic direction grid on S^{dim-1}.

    reduction="none": a quasi-uniform (Sobol) point set of `resolution` points.
    reduction="orbit_reduced": canonical representatives on the moduli
    simplex, optionally sorted descending for permutation-symmetric bodies.
    """
    _require_even(dim)
    if resolution < 8:
        raise ValueError("resolution must be >= 8")
    n = dim // 2
    if reduction == "none":
        eng = stats.qmc.Sobol(d=dim, scramble=True, seed=seed)
        z = stats.norm.ppf(np.clip(eng.random(int(resolution)), 1e-15, 1 - 1e-15))
        pts = z / np.linalg.norm(z, axis=1, keepdims=True)
        return DirectionGrid(dim, pts, "none", int(resolution), seed)
    if reduction != "orbit_reduced":
        raise ValueError(f"unknown reduction {reduction!r}")
    if n == 1:
        raise ValueError("orbit reduction needs n >= 2")
    m, w = _moduli_angle_grid(n, int(resolution))
    if sort_moduli:
        key = np.sort(m, axis=1)[:, ::-1]
        # fold permutation copies onto the sorted representative
        uniq, inv = np.unique(np.round(key, 12), axis=0, return_inverse=True)
        wsum = np.zeros(len(uniq))
        np.add.at(wsum, inv, w)
        m, w = uniq, wsum
    pts = np.zeros((m.shape[0], dim))
    pts[:, 0::2] = m
    pts /= np.linalg.norm(pts, axis=1, keepdims=True)
    # scale weights so invariant quadrature reproduces the sphere area
    from .quadrature import sphere_area
    w = w * (sphere_area(dim) / w.sum())
    return DirectionGrid(dim, pts, "orbit_reduced", int(resolution), seed, w)
