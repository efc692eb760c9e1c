"""The Fourier transform of negative powers of a norm, evaluated on the
sphere by three independent routes, plus the spherical-harmonic multiplier
engine and the Parseval / circle-integral identity checks.

Conventions: f_hat(y) = int f(x) exp(-i<x,y>) dx, so that
(|x|^{-p})^ = c(d, p) |y|^{-(d-p)} with c as in classical_ft_constant.
For a body K invariant under the common blockwise rotation, the transform
of ||x||_K^{-p} restricted to the unit sphere is constant along rotation
orbits, and values at non-unit y follow by (p - d)-homogeneity.
"""

from __future__ import annotations

import math
import threading
from dataclasses import dataclass, field

import numpy as np
from scipy import interpolate, special

from .bodies import StarBody, block_moduli
from .frames import make_frame, ComplexFrame
from .harmonics import (build_invariant_harmonics, c_eval,
                        moduli_gauss_quadrature, symmetric_harmonic_atoms)
from .quadrature import (Estimate, SphereRule, fractional_radial,
                         kahan_reduce, sphere_area)
from .sections import (NoisyEstimateError, laplacian_at_zero,
                       parallel_section, section_volume)


class UnsupportedRouteError(ValueError):
    """The requested route does not apply to this body or exponent."""


@dataclass(frozen=True)
class FtSample:
    """One evaluation of (||x||^{-p})^ at a unit direction."""

    direction: np.ndarray
    exponent: float
    value: float
    stderr: float
    method: str  # derivative | fractional | pairing | multiplier
    flags: tuple = field(default=())

    def agrees_with(self, other: "FtSample", factor: float = 3.0) -> bool:
        # the relative floor lets two deterministic (stderr 0) samples that
        # match to round-off count as agreeing
        tol = factor * math.hypot(self.stderr, other.stderr)
        tol += 1e-9 * max(abs(self.value), abs(other.value))
        return abs(self.value - other.value) <= tol


def classical_ft_constant(d: int, p: float) -> float:
    """c(d, p) with (|x|^{-p})^ = c(d, p)|y|^{-(d-p)}, 0 < p < d."""
    if not 0.0 < p < d:
        raise ValueError("p must lie in (0, d)")
    return (2.0 ** (d - p) * math.pi ** (d / 2.0)
            * special.gamma((d - p) / 2.0) / special.gamma(p / 2.0))


def _require_invariant(body: StarBody):
    if body.invariance_class not in ("complex_rotation", "independent_rotation"):
        raise UnsupportedRouteError(
            "this route needs a body invariant under the common blockwise "
            "rotation; use pairing_oracle instead")


def default_section_rule(dim, seed=0, node_count=2 ** 14) -> SphereRule:
    """Default rule on the (dim-2)-dimensional section sphere."""
    if dim - 2 <= 4:
        return SphereRule(dim - 2, "product_gauss", level=16)
    return SphereRule(dim - 2, "quasi_monte_carlo", node_count=node_count,
                      seed=seed)


# ---------------------------------------------------------------------------
# route 1: Laplacian powers of the parallel section function
# ---------------------------------------------------------------------------

def ft_derivative_route(body: StarBody, xi, m: int, rule: SphereRule = None,
                        h: float = 0.1) -> FtSample:
    """(||x||^{-p})^(xi) for p = 2n - 2m - 2 from Delta^m A_{K,H_xi}(0).

    value = (-1)^m 4 pi (n - m - 1) Delta^m A(0); m = 0 uses the central
    section volume directly.
    """
    _require_invariant(body)
    n = body.dim // 2
    if not 0 <= m < n - 1:
        raise UnsupportedRouteError(f"m={m} needs 0 <= m < n-1 = {n - 1}")
    xi = np.asarray(xi, dtype=float)
    frame = make_frame(xi)
    if rule is None:
        rule = default_section_rule(body.dim)
    p = 2 * n - 2 * m - 2
    flags = ()
    if m == 0:
        est = section_volume(body, frame, rule)
        scale = 4.0 * math.pi * (n - 1)
    else:
        scale = (-1.0) ** m * 4.0 * math.pi * (n - m - 1)
        try:
            est = laplacian_at_zero(body, frame, m, h, rule)
        except NoisyEstimateError as exc:
            # near a zero of the transform the relative noise gate cannot
            # pass; keep the estimate with its honest error bar and flag it
            if exc.estimate is None:
                raise
            est = exc.estimate
            flags = ("noisy",)
    return FtSample(xi, float(p), scale * est.value, abs(scale) * est.stderr,
                    "derivative", flags)


# ---------------------------------------------------------------------------
# route 2: fractional pairing of the section profile
# ---------------------------------------------------------------------------

def section_profile(body: StarBody, xi, rule: SphereRule = None,
                    profile_points: int = 97):
    """Spline of the section profile t -> A_{K,H_xi}(t xi) on [0, rho(xi)].

    By rotation invariance the profile does not depend on the offset
    direction within span{xi, xi_perp}.  Returns (spline, cutoff,
    worst_node_stderr); the profile can be reused for every fractional
    exponent at this direction.
    """
    _require_invariant(body)
    xi = np.asarray(xi, dtype=float)
    frame = make_frame(xi)
    if rule is None:
        rule = default_section_rule(body.dim)
    cutoff = float(body.radial(xi))
    # stop a hair inside the boundary: at t = cutoff the base point sits on
    # the surface and its inside/outside classification is round-off noise
    ts = np.linspace(0.0, cutoff * (1.0 - 1e-9), profile_points)
    vals = np.empty(profile_points)
    errs = np.empty(profile_points)
    for i, t in enumerate(ts):
        est = parallel_section(body, frame, (t, 0.0), rule)
        vals[i] = est.value
        errs[i] = est.stderr
    spline = interpolate.CubicSpline(ts, vals, bc_type=((1, 0.0), "not-a-knot"))
    return spline, cutoff, float(np.max(errs))


def fractional_from_profile(spline, cutoff, max_err, q, n, xi) -> FtSample:
    """Finish the fractional route from a precomputed section profile."""
    if not 0.0 < q < 2.0:
        raise UnsupportedRouteError("q must lie strictly inside (0, 2)")

    def profile(t):
        return float(spline(t)) if t < cutoff else 0.0

    radial = fractional_radial(profile, q, cutoff)
    pairing = 2.0 * math.pi * radial / special.gamma(-q / 2.0)
    p = 2.0 * n - q - 2.0
    scale = 2.0 ** (q + 1.0) * special.gamma((q + 2.0) / 2.0) * (2 * n - q - 2)
    # profile noise enters nearly linearly; bound it by the worst node error
    stderr = abs(scale * 2.0 * math.pi / special.gamma(-q / 2.0)) * (
        max_err * (1.0 / q + 1.0 / (2.0 - q)) * max(cutoff, 1.0))
    return FtSample(np.asarray(xi, dtype=float), p, scale * pairing, stderr,
                    "fractional")


def ft_fractional_route(body: StarBody, xi, q: float,
                        rule: SphereRule = None,
                        profile_points: int = 97) -> FtSample:
    """(||x||^{-p})^(xi) for p = 2n - q - 2, q in (0, 2).

    The section profile t -> A(t theta) is constant over the circle of
    offset directions theta by rotation invariance, so the planar pairing
    <|u|^{-q-2}/Gamma(-q/2), A(u)> collapses to 2 pi times the fractional
    radial integral of one spline-interpolated profile.
    """
    spline, cutoff, max_err = section_profile(body, xi, rule, profile_points)
    return fractional_from_profile(spline, cutoff, max_err, q,
                                   body.dim // 2, xi)


# ---------------------------------------------------------------------------
# route 3: distributional pairing against an explicit Gaussian bump pair
# ---------------------------------------------------------------------------

def _radial_cos_integral(t, mu, beta):
    """Exact int_0^inf r^{mu-1} exp(-beta r^2) cos(r t) dr (elementwise)."""
    return (0.5 * beta ** (-mu / 2.0) * special.gamma(mu / 2.0)
            * special.hyp1f1(mu / 2.0, 0.5, -np.square(t) / (4.0 * beta)))


def _bump_weighted_mass(d, p, sigma):
    """int |y|^{-(d-p)} phi_sigma(y) dy for the unit Gaussian pair phi."""
    return _harmonic_bump_moment(d, p, 0, sigma)


def _harmonic_bump_moment(d, p, j, sigma, r_nodes=600, t_nodes=400):
    """int P_j(y/|y|) |y|^{-(d-p)} phi_sigma(y) dy / P_j(xi) for the unit
    Gaussian pair phi at +-xi, any degree-j harmonic P_j.

    Funk-Hecke collapses the angular integral onto the Gegenbauer kernel,
    leaving a 2-D (radius x cosine) quadrature with a stable combined
    exponent exp(-(r^2 - 2rt + 1)/(2 sigma^2)).
    """
    nu = (d - 2) / 2.0
    t, wt = special.roots_jacobi(t_nodes, (d - 3) / 2.0, (d - 3) / 2.0)
    gegen = special.eval_gegenbauer(j, nu, t) / special.eval_gegenbauer(j, nu, 1.0)
    hi = 1.0 + 15.0 * sigma
    r, wr = np.polynomial.legendre.leggauss(r_nodes)
    r = 0.5 * hi * (r + 1.0)
    wr = 0.5 * hi * wr
    expo = -(r[:, None] ** 2 - 2.0 * r[:, None] * t[None, :] + 1.0) / (2.0 * sigma ** 2)
    inner = np.exp(expo) @ (wt * gegen)
    radial = float(np.dot(wr, r ** (p - 1) * inner))
    return ((2.0 * math.pi * sigma ** 2) ** (-d / 2.0)
            * sphere_area(d - 1) * radial)


def _perp_basis(xi):
    """Orthonormal rows spanning the hyperplane orthogonal to unit xi."""
    d = len(xi)
    proj = np.eye(d) - np.outer(xi, xi)
    _, s, vt = np.linalg.svd(proj)
    return vt[: d - 1]


def _latitude_nodes(d, sigma_min):
    """Composite Gauss rule in t = <xi, theta> resolving the width-sigma
    band of the bump response around the equator; returns (t, w) on [0, 1]
    with the surface jacobian (1-t^2)^{(d-3)/2} folded into w."""
    edges = [0.0, min(10.0 * sigma_min, 0.5), min(30.0 * sigma_min, 0.75), 1.0]
    counts = [48, 24, 16]
    ts, ws = [], []
    for (a, b), m in zip(zip(edges[:-1], edges[1:]), counts):
        if b <= a:
            continue
        x, w = np.polynomial.legendre.leggauss(m)
        ts.append(0.5 * (b - a) * (x + 1.0) + a)
        ws.append(0.5 * (b - a) * w)
    t = np.concatenate(ts)
    w = np.concatenate(ws) * (1.0 - t ** 2) ** ((d - 3) / 2.0)
    return t, w


def _pairing_core(angular, d, xi, p, sigma, rule, levels=2, masses=None):
    """<f^, phi> / weighted-mass for f = angular(x/|x|) |x|^{-p}, with
    `angular` even on the sphere.

    phi is the even pair of unit-mass Gaussians at +-xi with width sigma.
    <f^, phi> = <f, phi^> with phi^(x) = cos(<xi, x>) exp(-sigma^2|x|^2/2);
    the radial integral is exact (confluent hypergeometric), leaving a
    spherical integral whose latitude profile G(t) concentrates in a
    width-sigma band around the equator t = <xi, theta> = 0.  The sphere
    integral therefore splits into an exact composite Gauss rule in t and a
    quadrature over the orthogonal subsphere, which removes the 1/sigma
    variance blow-up of uniform sampling.  Richardson extrapolation in
    sigma^2 over {sigma, sigma/2, ...} removes the bump-width bias; all
    widths share nodes.  Callers with an exactly-known bump moment pass it
    via `masses` (with levels=1 the result is then unbiased).
    """
    mu = d - p
    sigmas = [sigma / 2 ** i for i in range(levels)]
    if masses is None:
        masses = [_bump_weighted_mass(d, p, s) for s in sigmas]
    xi = np.asarray(xi, dtype=float)
    t, wt = _latitude_nodes(d, sigmas[-1])
    # even integrand: fold to t >= 0 and double
    gw = np.stack([2.0 * wt * _radial_cos_integral(t, mu, s ** 2 / 2.0)
                   for s in sigmas])  # (levels, T)
    basis = _perp_basis(xi)
    if rule.dim == d:
        n_u = max(rule.node_count // len(t), 2 ** 10)
        n_u = 1 << (n_u - 1).bit_length()  # Sobol wants powers of two
        u_rule = SphereRule(d - 1, rule.kind, node_count=n_u, seed=rule.seed,
                            level=rule.level, batch_count=rule.batch_count)
    elif rule.dim == d - 1:
        u_rule = rule
    else:
        raise ValueError("rule dimension must be d or d-1")
    root = np.sqrt(1.0 - t ** 2)
    per = np.zeros((levels, u_rule.batch_count))
    for bi, (pts, w) in enumerate(u_rule.batches()):
        u = pts @ basis  # (U, d)
        theta = (t[:, None, None] * xi[None, None, :]
                 + root[:, None, None] * u[None, :, :])
        a = np.asarray(angular(theta.reshape(-1, d)), dtype=float)
        a = a.reshape(len(t), -1)
        lat = a @ w  # (T,) subsphere integrals at each latitude
        for li in range(levels):
            per[li, bi] = float(np.dot(gw[li], lat)) / masses[li]
    # eliminate sigma^2, sigma^4, ... terms batchwise (shared nodes)
    prev = per
    for stage in range(1, levels):
        fac = 4.0 ** stage
        prev = per
        per = (fac * per[1:] - per[:-1]) / (fac - 1.0)
    comb = per[0]
    value = float(kahan_reduce(comb))
    # the gap to the previous extrapolation order (on the finest widths)
    # estimates the residual width bias
    residual = abs(value - float(kahan_reduce(prev[-1]))) if levels > 1 else 0.0
    if u_rule.deterministic:
        return value, 0.0, residual
    ests = comb * u_rule.batch_count
    stderr = float(np.std(ests, ddof=1) / math.sqrt(len(ests)))
    return value, stderr, residual


def pairing_oracle(body: StarBody, xi, p: float, sigma: float = 0.2,
                   rule: SphereRule = None, levels: int = 2) -> FtSample:
    """(||x||^{-p})^(xi) by pairing with an explicit Gaussian test pair.

    Needs no invariance assumption; serves as the independent oracle for
    the derivative and fractional routes.  Flags the sample as
    'inconclusive' when the error bar exceeds 10% of the value.
    """
    if not 0.0 < p < body.dim:
        raise ValueError("p must lie in (0, dim)")
    if sigma > 0.2:
        raise ValueError("sigma must be <= 0.2 for a usable bump")
    xi = np.asarray(xi, dtype=float)
    if rule is None:
        rule = SphereRule(body.dim, "quasi_monte_carlo", node_count=2 ** 19,
                          seed=5)
    value, stderr, residual = _pairing_core(
        lambda pts: body.radial(pts) ** p, body.dim, xi, p, sigma, rule,
        levels=levels)
    # fold the residual extrapolation bias estimate into the error bar
    stderr = stderr + residual / 3.0
    flags = ("inconclusive",) if stderr > 0.1 * abs(value) else ()
    return FtSample(xi, float(p), value, stderr, "pairing", flags)


# ---------------------------------------------------------------------------
# route 4: harmonic expansion times calibrated multipliers
# ---------------------------------------------------------------------------

def classical_multiplier(j, p, d):
    """Closed-form multiplier of (P_j(x/|x|)|x|^{-p})^ for a degree-j
    spherical harmonic.  Measurement routes always use calibrated values;
    the closed form bounds truncated high-degree tails and transforms
    constructed bumps exactly."""
    return ((-1.0) ** (j // 2) * 2.0 ** (d - p) * math.pi ** (d / 2.0)
            * special.gamma((j + d - p) / 2.0)
            / special.gamma((j + p) / 2.0))


def ft_multiplier_route(body: StarBody, xi, p: float, max_degree: int = 12,
                        tail_degree: int = 24,
                        quad_res: int = 64) -> FtSample:
    """(||x||^{-p})^(xi) by harmonic expansion of the norm power.

    rho^p is projected onto the fully symmetric harmonic atoms (spectrally
    accurate moduli-angle quadrature) and each degree is multiplied by its
    calibrated lambda(j, p).  Degrees in (max_degree, tail_degree] cannot be
    calibrated reliably; their worst-case contribution, bounded with the
    closed-form multiplier, is added to the error bar.
    """
    _require_invariant(body)
    if not body.moduli_symmetric:
        raise UnsupportedRouteError(
            "the multiplier route needs a body whose radial function "
            "depends only on the block moduli")
    if not 0.0 < p < body.dim:
        raise ValueError("p must lie in (0, dim)")
    n = body.dim // 2
    xi = np.asarray(xi, dtype=float)
    m, w = moduli_gauss_quadrature(n, quad_res)
    pts = np.zeros((m.shape[0], body.dim))
    pts[:, 0::2] = m
    a = body.radial(pts) ** p
    cxi = np.atleast_2d(block_moduli(xi) ** 2)
    table = multiplier_table(n)
    value = 0.0
    var = 0.0
    tail = 0.0
    for atom in symmetric_harmonic_atoms(n, tail_degree):
        coef = float(np.dot(w, a * c_eval(atom.c_poly, m ** 2)))
        contrib = coef * float(c_eval(atom.c_poly, cxi)[0])
        if atom.degree <= max_degree:
            lam, err = table.get_with_error(atom.degree, p)
            value += lam * contrib
            var += (err * contrib) ** 2
        else:
            tail += abs(classical_multiplier(atom.degree, p, body.dim)
                        * contrib)
    return FtSample(xi, float(p), value, math.sqrt(var) + tail, "multiplier")


# ---------------------------------------------------------------------------
# route dispatch
# ---------------------------------------------------------------------------

def ft_value(body: StarBody, xi, p: float, rule: SphereRule = None,
             method: str = None) -> FtSample:
    """Evaluate (||x||^{-p})^(xi) by the natural route for this exponent:
    derivative when p = 2m + 2, fractional when 2n - p - 2 in (0, 2)."""
    n = body.dim // 2
    q = 2 * n - p - 2
    if method == "pairing":
        return pairing_oracle(body, xi, p)
    if method == "multiplier":
        return ft_multiplier_route(body, xi, p)
    if method in (None, "derivative"):
        if abs(p - round(p)) < 1e-12 and round(p) % 2 == 0:
            m = (2 * n - 2 - round(p)) // 2
            if 0 <= m < n - 1:
                return ft_derivative_route(body, xi, m, rule)
        if method == "derivative":
            raise UnsupportedRouteError(f"p={p} is not of the form 2m+2")
    if 0.0 < q < 2.0:
        return ft_fractional_route(body, xi, q, rule)
    raise UnsupportedRouteError(f"no implemented route reaches p={p} in dim {2 * n}")


# ---------------------------------------------------------------------------
# identity checks
# ---------------------------------------------------------------------------

def parseval_check(bodyK: StarBody, bodyL: StarBody, p: float, grid,
                   rule: SphereRule = None,
                   sphere_rule: SphereRule = None) -> dict:
    """Two-sided spherical Parseval check.

    lhs = int_S (||x||_K^{-p})^ (||x||_L^{-(d-p)})^ dxi  (direction grid),
    rhs = (2 pi)^d int_S ||th||_K^{-p} ||th||_L^{-(d-p)} dth.
    """
    d = bodyK.dim
    if bodyL.dim != d:
        raise ValueError("bodies must share a dimension")
    _require_invariant(bodyK)
    _require_invariant(bodyL)
    if grid.weights is None:
        raise ValueError("parseval_check needs an orbit-reduced grid "
                         "with quadrature weights")
    lhs = 0.0
    var = 0.0
    for w, xi in zip(grid.weights, grid.points):
        fk = ft_value(bodyK, xi, p, rule)
        fl = ft_value(bodyL, xi, d - p, rule)
        lhs += w * fk.value * fl.value
        var += (w * math.hypot(fk.stderr * fl.value,
                               fl.stderr * fk.value)) ** 2
    if sphere_rule is None:
        sphere_rule = SphereRule(d, "quasi_monte_carlo", node_count=2 ** 16,
                                 seed=2)
    sums = []
    for pts, w in sphere_rule.batches():
        vals = bodyK.radial(pts) ** p * bodyL.radial(pts) ** (d - p)
        sums.append(float(np.dot(w, vals)))
    rhs = (2.0 * math.pi) ** d * kahan_reduce(sums)
    rel_gap = abs(lhs - rhs) / max(abs(lhs), abs(rhs))
    return {"lhs": lhs, "rhs": rhs, "rel_gap": rel_gap,
            "lhs_stderr": math.sqrt(var)}


def sph_identity_check(v, q: float, level: int = 40) -> dict:
    """Check |v|^{-q-2} = Gamma(-q/2) / (2 Gamma((-q-1)/2) sqrt(pi)) *
    int_{S^1} |<v, u>|^{-q-2} du for q in (-2, -1).

    The circle integral has integrable |cos|^s singularities (s = -q-2 in
    (-1, 0)); writing the quarter period as int_0^{pi/2} u^s (sin u / u)^s du
    and using a Gauss-Jacobi rule with endpoint weight u^s leaves a smooth
    integrand, so the rule converges spectrally.
    """
    v = np.asarray(v, dtype=float)
    if not -2.0 < q < -1.0:
        raise ValueError("q must lie in (-2, -1)")
    r = float(np.linalg.norm(v))
    if r == 0.0:
        raise ValueError("v must be nonzero")
    s = -q - 2.0
    c = math.pi / 2.0
    t, w = special.roots_jacobi(level, 0.0, s)
    u = c * (t + 1.0) / 2.0
    quarter = (c / 2.0) ** (s + 1.0) * float(np.dot(w, (np.sin(u) / u) ** s))
    circle = 4.0 * quarter
    # |<v,u>| = |v| |cos(t - t0)|; the shift drops out over a full period
    integral = r ** s * circle
    factor = special.gamma(-q / 2.0) / (
        2.0 * special.gamma((-q - 1.0) / 2.0) * math.sqrt(math.pi))
    lhs = r ** s
    rhs = factor * integral
    return {"lhs": lhs, "rhs": rhs,
            "rel_gap": abs(lhs - rhs) / max(abs(lhs), abs(rhs))}


# ---------------------------------------------------------------------------
# the multiplier engine
# ---------------------------------------------------------------------------

class CalibrationError(RuntimeError):
    """A multiplier calibration came back too noisy to cache."""


class MultiplierTable:
    """Write-once cache of lambda(j, p) with
    (P_j(x/|x|) |x|^{-p})^ = lambda P_j(y/|y|) |y|^{-(d-p)}.

    Values are calibrated by the pairing oracle against one atom of each
    degree; the first finished calibration wins under concurrency, later
    ones reuse it.  Calibrations with stderr above 5% are refused.
    """

    def __init__(self, n, sigma=0.2, node_count=2 ** 19, seed=13):
        self.n = int(n)
        self.dim = 2 * self.n
        self.sigma = float(sigma)
        self.node_count = int(node_count)
        self.seed = int(seed)
        self._values: dict[tuple, tuple] = {}
        self._atoms: dict[int, object] = {}
        self._lock = threading.Lock()

    def _degree_sigma(self, j, p):
        """Bump width for degree j: the bump response of a degree-j harmonic
        shrinks like exp(-j(j+d-2) sigma^2/2), so high degrees calibrate at
        widths keeping that attenuation O(1)."""
        if j == 0:
            return self.sigma
        return min(self.sigma, math.sqrt(2.0 / (j * (j + self.dim - 2))))

    def _atom(self, j):
        with self._lock:
            if j in self._atoms:
                return self._atoms[j]
        sym = [a for a in symmetric_harmonic_atoms(self.n, max(j, 4))
               if a.degree == j]
        if sym:
            atom = sym[0]
        else:
            gen = [a for a in build_invariant_harmonics(self.n, min(max(j, 2), 8))
                   if a.degree == j]
            if not gen:
                raise CalibrationError(
                    f"no invariant harmonic atom of degree {j} available "
                    f"for n={self.n}")
            atom = gen[0]
        with self._lock:
            self._atoms.setdefault(j, atom)
            return self._atoms[j]

    def _calibrate(self, j, p):
        if j == 0:
            # degree zero is the classical radial transform; calibrate it
            # the same way so the audit against the closed form is honest
            angular = lambda pts: np.ones(len(pts))
            xi = np.zeros(self.dim)
            xi[0] = 1.0
            ref = 1.0
        else:
            atom = self._atom(j)
            probe = SphereRule(self.dim, "quasi_monte_carlo",
                               node_count=2 ** 12, seed=101).nodes()
            vals = atom(probe)
            xi = probe[int(np.argmax(np.abs(vals)))]
            ref = float(atom(xi[None, :])[0])
            angular = atom
        sigma = self._degree_sigma(j, p)
        # pairing variance grows with the harmonic space dimension, so the
        # node budget scales up with the degree (capped: calibrations cache
        # per process and high degrees are only tail audits)
        boost = min(64, 1 << max(0, (j - 6) // 2))
        rule = SphereRule(self.dim, "quasi_monte_carlo",
                          node_count=self.node_count * boost, seed=self.seed)
        # the bump moment of a degree-j harmonic is exactly computable, so
        # no width extrapolation is needed and the estimate is unbiased
        moment = _harmonic_bump_moment(self.dim, p, j, sigma)
        value, stderr, _ = _pairing_core(angular, self.dim, xi, p, sigma,
                                         rule, levels=1, masses=[moment])
        lam = value / ref
        err = abs(stderr / ref)
        if err > 0.05 * abs(lam):
            raise CalibrationError(
                f"multiplier({j}, {p}) calibration stderr {err:.3g} exceeds "
                f"5% of |{lam:.6g}|")
        return lam, err

    def get_with_error(self, j: int, p: float) -> tuple:
        """(lambda, calibration stderr) for degree j and exponent p."""
        if j % 2 != 0 or j < 0:
            raise ValueError("degree j must be a nonnegative even integer")
        if not 0.0 < p < self.dim:
            raise ValueError("p must lie in (0, dim)")
        key = (int(j), float(p))
        with self._lock:
            if key in self._values:
                return self._values[key]
        pair = self._calibrate(j, p)
        with self._lock:
            # first writer wins; a concurrent calibration is discarded
            self._values.setdefault(key, pair)
            return self._values[key]

    def get(self, j: int, p: float) -> float:
        return self.get_with_error(j, p)[0]


_TABLES: dict[int, MultiplierTable] = {}
_TABLES_LOCK = threading.Lock()


def multiplier_table(n: int) -> MultiplierTable:
    with _TABLES_LOCK:
        if n not in _TABLES:
            _TABLES[n] = MultiplierTable(n)
        return _TABLES[n]


def multiplier(j: int, p: float, n: int) -> float:
    """lambda(j, p) on R^{2n}, calibrated once and cached per process."""
    return multiplier_table(n).get(j, p)
