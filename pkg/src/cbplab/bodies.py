"""Origin-symmetric star bodies in R^{2n} encoded by their Minkowski
functionals, with the invariance structure of complex norms.

Every body exposes a vectorized gauge `norm(X)` over (N, dim) arrays; all
downstream geometry (volumes, sections, Fourier routes) consumes only
`norm` / `radial`.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np
from scipy import stats

from .frames import rotate

INVARIANCE_CLASSES = ("general", "complex_rotation", "independent_rotation")
SMOOTHNESS = ("nonsmooth", "C2", "C_infinity")


class StarBody:
    """Base class: a 1-homogeneous even gauge with certified radial bounds."""

    dim: int
    invariance_class: str = "general"
    smoothness_hint: str = "C2"
    r_min: float = 1.0
    r_max: float = 1.0
    #: radial function depends only on the block moduli (full symmetry group)
    moduli_symmetric: bool = False

    def norm(self, x):
        raise NotImplementedError

    def radial(self, theta):
        """rho(theta) = 1/norm(theta) for unit directions."""
        return 1.0 / self.norm(theta)

    def spec(self) -> str:
        raise NotImplementedError

    @property
    def n_blocks(self) -> int:
        return self.dim // 2


def block_moduli(x):
    """Per-block moduli sqrt(x_{j1}^2 + x_{j2}^2) of points in R^{2n}."""
    x = np.asarray(x, dtype=float)
    return np.sqrt(x[..., 0::2] ** 2 + x[..., 1::2] ** 2)


def norm_eval(body: StarBody, x) -> float:
    """Minkowski functional of the body at x (x != 0)."""
    x = np.asarray(x, dtype=float)
    if x.ndim == 1 and not np.any(x):
        raise ValueError("norm is undefined at the zero vector")
    return float(body.norm(x)) if x.ndim == 1 else body.norm(x)


def radial_eval(body: StarBody, theta) -> float:
    """Radius of the body in a unit direction."""
    theta = np.asarray(theta, dtype=float)
    nrm = np.linalg.norm(theta, axis=-1)
    if np.any(np.abs(nrm - 1.0) > 1e-12):
        raise ValueError("radial_eval requires a unit direction")
    r = 1.0 / body.norm(theta)
    return float(r) if theta.ndim == 1 else r


class EuclideanBall(StarBody):
    def __init__(self, dim):
        if dim % 2 != 0 or dim < 4:
            raise ValueError("dim must be even and >= 4")
        self.dim = int(dim)
        self.invariance_class = "independent_rotation"
        self.smoothness_hint = "C_infinity"
        self.r_min = self.r_max = 1.0
        self.moduli_symmetric = True

    def norm(self, x):
        return np.linalg.norm(np.asarray(x, dtype=float), axis=-1)

    def spec(self):
        return f"ball:dim={self.dim}"


class ComplexLqBall(StarBody):
    """Unit ball of the complex l_q^n space viewed in R^{2n}."""

    def __init__(self, n, q):
        if n < 2:
            raise ValueError("n must be >= 2")
        if q < 1:
            raise ValueError("q must be >= 1")
        self.n = int(n)
        self.q = float(q)
        self.dim = 2 * self.n
        self.invariance_class = "independent_rotation"
        if self.q % 2 == 0:
            self.smoothness_hint = "C_infinity"
        else:
            self.smoothness_hint = "C2" if self.q > 2 else "nonsmooth"
        bounds = sorted([1.0, self.n ** (0.5 - 1.0 / self.q)])
        self.r_min, self.r_max = bounds
        self.moduli_symmetric = True

    def norm(self, x):
        m = block_moduli(x)
        return np.sum(m ** self.q, axis=-1) ** (1.0 / self.q)

    def spec(self):
        q = self.q
        qs = int(q) if q == int(q) else q
        return f"clq:n={self.n},q={qs}"


class ScaledBody(StarBody):
    """lam * K: the gauge divides by lam, the radius multiplies."""

    def __init__(self, base: StarBody, lam: float):
        if lam <= 0:
            raise ValueError("scale factor must be positive")
        self.base = base
        self.lam = float(lam)
        self.dim = base.dim
        self.invariance_class = base.invariance_class
        self.smoothness_hint = base.smoothness_hint
        self.r_min = base.r_min * self.lam
        self.r_max = base.r_max * self.lam
        self.moduli_symmetric = base.moduli_symmetric

    def norm(self, x):
        return self.base.norm(x) / self.lam

    def spec(self):
        return f"scale:base=({self.base.spec()}),lam={self.lam:g}"


def scale(body: StarBody, lam: float) -> ScaledBody:
    return ScaledBody(body, lam)


class RadialPerturbation(StarBody):
    """Body K with rho_K^s = rho_L^s - eps * g on the sphere, i.e.
    ||x||_K^{-s} = ||x||_L^{-s} - eps g(x/|x|) |x|^{-s}."""

    def __init__(self, base: StarBody, exponent: float, amplitude: float, bump,
                 bump_id="custom", check_samples=2**14, seed=7):
        if exponent <= 0:
            raise ValueError("exponent must be positive")
        self.base = base
        self.s = float(exponent)
        self.eps = float(amplitude)
        self.bump = bump
        self.bump_id = bump_id
        self.dim = base.dim

        g = np.random.Generator(np.random.Philox(key=seed))
        theta = g.standard_normal((check_samples, self.dim))
        theta /= np.linalg.norm(theta, axis=1, keepdims=True)
        gv = np.asarray(bump(theta), dtype=float)
        rad_pow = base.radial(theta) ** self.s - self.eps * gv
        if np.min(rad_pow) <= 0:
            raise ValueError(
                "perturbed radial power is not strictly positive on the sphere"
            )
        sup_pos = max(float(np.max(gv)), 0.0)
        sup_neg = max(float(np.max(-gv)), 0.0)
        safety = 1.05
        low = base.r_min ** self.s - safety * self.eps * sup_pos
        if low <= 0:
            low = float(np.min(rad_pow)) / safety
        self.r_min = low ** (1.0 / self.s)
        self.r_max = (base.r_max ** self.s + safety * self.eps * sup_neg) ** (1.0 / self.s)

        if base.invariance_class in ("complex_rotation", "independent_rotation"):
            if getattr(bump, "moduli_symmetric", False):
                self.invariance_class = "complex_rotation"
            else:
                # the bump must be constant on rotation orbits too; check it
                # on the positivity sample
                dev = 0.0
                for ang in (0.9, 2.3):
                    gv2 = np.asarray(bump(rotate(theta, ang)), dtype=float)
                    dev = max(dev, float(np.max(np.abs(gv2 - gv))))
                scale = max(float(np.max(np.abs(gv))), 1.0)
                self.invariance_class = ("complex_rotation"
                                         if dev <= 1e-10 * scale else "general")
        else:
            self.invariance_class = "general"
        self.smoothness_hint = base.smoothness_hint
        self.moduli_symmetric = base.moduli_symmetric and getattr(
            bump, "moduli_symmetric", False)

    def norm(self, x):
        x = np.asarray(x, dtype=float)
        r = np.linalg.norm(x, axis=-1)
        with np.errstate(invalid="ignore", divide="ignore"):
            xhat = x / r[..., None]
        rad_pow = self.base.radial(xhat) ** self.s - self.eps * np.asarray(
            self.bump(xhat), dtype=float)
        return r * rad_pow ** (-1.0 / self.s)

    def spec(self):
        return (f"perturb:base=({self.base.spec()}),eps={self.eps:.12g},"
                f"bump={self.bump_id},exponent={self.s:g}")


def _canonicalize_orbit(x):
    """Rotate each point by a common blockwise angle so the largest-modulus
    block lands on the positive first axis; constant on R_theta orbits."""
    x = np.asarray(x, dtype=float)
    m = block_moduli(x)
    j = np.argmax(m, axis=-1)
    idx = np.arange(x.shape[0])
    a = x[idx, 2 * j]
    b = x[idx, 2 * j + 1]
    phi = np.arctan2(b, a)
    c, s = np.cos(-phi), np.sin(-phi)
    out = np.empty_like(x)
    out[:, 0::2] = c[:, None] * x[:, 0::2] - s[:, None] * x[:, 1::2]
    out[:, 1::2] = s[:, None] * x[:, 0::2] + c[:, None] * x[:, 1::2]
    return out


class MollifiedBody(StarBody):
    """Spherical convolution of the radial function with a smooth zonal kernel.

    The kernel is zonal (a function of the geodesic angle alone), so the
    convolution preserves every rotation symmetry of the body.  Two
    realizations are used:

    * For bodies whose radial function depends only on the block moduli,
      the radial function is expanded in moduli-symmetric spherical
      harmonics up to `max_degree` and each degree-j component is damped by
      the heat-kernel factor exp(-j (j + d - 2) width^2 / 2).  The result
      is a polynomial in the block moduli: exactly invariant, C^infinity,
      with exact derivatives of all orders, and cheap to evaluate.

    * Otherwise a C^inf cap bump of angular width `width` is discretized
      (Gauss-Legendre in the geodesic angle, a fixed low-discrepancy cloud
      of tangent directions) and evaluated at a canonical representative of
      the R_theta orbit, which keeps the block-rotation invariance exact.
    """

    _SERIES_RES = 64

    def __init__(self, base: StarBody, width: float, n_alpha=8, n_tangent=128,
                 band_limited=None, max_degree=16):
        if not 0.0 < width < 1.0:
            raise ValueError("width must lie in (0, 1)")
        self.base = base
        self.width = float(width)
        self.dim = base.dim
        self.n_alpha = int(n_alpha)
        self.n_tangent = int(n_tangent)
        self.invariance_class = (
            base.invariance_class
            if base.invariance_class != "general" else "complex_rotation")
        self.smoothness_hint = "C_infinity"
        slack = 1e-3 * (base.r_max - base.r_min) + 1e-12
        self.r_min = base.r_min - slack
        self.r_max = base.r_max + slack
        self.moduli_symmetric = base.moduli_symmetric

        # cap quadrature: Gauss-Legendre in the geodesic angle, a fixed
        # Sobol-Gaussian cloud projected per-point for tangent directions
        t, w = np.polynomial.legendre.leggauss(self.n_alpha)
        alpha = 0.5 * self.width * (t + 1.0)
        with np.errstate(divide="ignore", over="ignore"):
            kern = np.exp(-1.0 / np.maximum(1.0 - (alpha / self.width) ** 2, 1e-300))
        wa = w * kern * np.sin(alpha) ** (self.dim - 2)
        self._alpha = alpha
        self._wa = wa / wa.sum()
        eng = stats.qmc.Sobol(d=self.dim, scramble=True, seed=20160827)
        self._cloud = stats.norm.ppf(
            np.clip(eng.random(self._pow2(self.n_tangent)), 1e-12, 1 - 1e-12))

        self._series = None
        self.max_degree = int(max_degree)
        use_series = (band_limited if band_limited is not None
                      else base.moduli_symmetric)
        if use_series:
            if not base.moduli_symmetric:
                raise ValueError(
                    "band-limited mollification needs a moduli-symmetric body")
            self._build_series()

    @staticmethod
    def _pow2(n):
        return 1 << (int(n) - 1).bit_length()

    # -- generic convolution ----------------------------------------------

    def _radial_conv(self, xhat):
        """Cap-convolved radial function at unit points (N, dim)."""
        xhat = np.atleast_2d(np.asarray(xhat, dtype=float))
        n, d = xhat.shape
        per_point = self.n_alpha * len(self._cloud)
        chunk = max(1, int(4e6 // per_point))
        if n > chunk:
            out = np.empty(n)
            for i in range(0, n, chunk):
                out[i:i + chunk] = self._radial_conv(xhat[i:i + chunk])
            return out
        z = self._cloud  # (T, d)
        proj = z[None, :, :] - (xhat @ z.T)[:, :, None] * xhat[:, None, :]
        proj /= np.linalg.norm(proj, axis=2, keepdims=True)
        ca = np.cos(self._alpha)
        sa = np.sin(self._alpha)
        # nodes: (N, A, T, d)
        nodes = (ca[None, :, None, None] * xhat[:, None, None, :]
                 + sa[None, :, None, None] * proj[:, None, :, :])
        vals = self.base.radial(nodes.reshape(-1, d)).reshape(n, len(ca), -1)
        return np.einsum("a,nat->n", self._wa, vals) / vals.shape[2]

    # -- band-limited path for moduli-symmetric bases ----------------------

    def _build_series(self):
        from .harmonics import (c_eval, moduli_gauss_quadrature,
                                symmetric_harmonic_atoms)

        m, weights = moduli_gauss_quadrature(self.n_blocks, self._SERIES_RES)
        pts = np.zeros((m.shape[0], self.dim))
        pts[:, 0::2] = m
        rho = self.base.radial(pts)
        d = self.dim
        series = {}
        for atom in symmetric_harmonic_atoms(self.n_blocks, self.max_degree):
            pa = c_eval(atom.c_poly, m ** 2)
            coef = float(np.dot(weights, rho * pa))
            damp = math.exp(
                -0.5 * atom.degree * (atom.degree + d - 2) * self.width ** 2)
            for mono, cc in atom.c_poly.items():
                series[mono] = series.get(mono, 0.0) + coef * damp * cc
        self._series = series
        # compact power-sum form for fast evaluation on the sphere
        from .harmonics import symmetric_power_form
        self._power_form = symmetric_power_form(series, self.n_blocks)
        vals = c_eval(series, m ** 2)
        lo, hi = float(np.min(vals)), float(np.max(vals))
        if lo <= 0.0:
            raise ValueError("mollified radial function lost positivity; "
                             "reduce the width or raise max_degree")
        pad = 0.02 * (hi - lo) + 1e-9
        self.r_min = max(lo - pad, 0.5 * lo)
        self.r_max = hi + pad

    def _radial_series(self, xhat):
        from .harmonics import power_form_eval

        m2 = xhat[..., 0::2] ** 2 + xhat[..., 1::2] ** 2
        m2 /= np.sum(m2, axis=-1, keepdims=True)
        return power_form_eval(*self._power_form, m2)

    def norm(self, x):
        x = np.asarray(x, dtype=float)
        single = x.ndim == 1
        pts = np.atleast_2d(x)
        flat = pts.reshape(-1, self.dim)
        r = np.linalg.norm(flat, axis=-1)
        xhat = flat / r[:, None]
        if self._series is not None:
            rho = self._radial_series(xhat)
        else:
            rho = self._radial_conv(_canonicalize_orbit(xhat))
        out = (r / rho).reshape(pts.shape[:-1])
        return float(out[0]) if single else out.reshape(x.shape[:-1])

    def spec(self):
        return f"mollify:base=({self.base.spec()}),width={self.width:g}"


def mollify(body: StarBody, width: float, **kw) -> StarBody:
    """Smooth approximation of the body in the radial metric."""
    return MollifiedBody(body, width, **kw)


@dataclass(frozen=True)
class ConvexityReport:
    violations: int
    worst_gap: float
    samples: int
    tol: float


def convexity_probe(body: StarBody, samples=10**5, seed=0,
                    tol=1e-9) -> ConvexityReport:
    """Sampled midpoint test on boundary pairs; a probe, not a certificate."""
    g = np.random.Generator(np.random.Philox(key=seed))
    worst = -math.inf
    violations = 0
    batch = 2**14
    done = 0
    while done < samples:
        k = min(batch, samples - done)
        theta = g.standard_normal((2, k, body.dim))
        theta /= np.linalg.norm(theta, axis=2, keepdims=True)
        rho = body.radial(theta.reshape(-1, body.dim)).reshape(2, k)
        pts = rho[..., None] * theta
        mids = 0.5 * (pts[0] + pts[1])
        nrm = body.norm(mids)
        worst = max(worst, float(np.max(nrm) - 1.0))
        violations += int(np.count_nonzero(nrm > 1.0 + tol))
        done += k
    return ConvexityReport(violations=violations, worst_gap=worst,
                           samples=samples, tol=tol)


def radial_metric(a: StarBody, b: StarBody, samples=2**12, seed=3) -> float:
    """Sampled sup-distance between radial functions."""
    g = np.random.Generator(np.random.Philox(key=seed))
    theta = g.standard_normal((samples, a.dim))
    theta /= np.linalg.norm(theta, axis=1, keepdims=True)
    return float(np.max(np.abs(a.radial(theta) - b.radial(theta))))
