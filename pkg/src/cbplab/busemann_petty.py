"""Section-dominance versus volume comparison for invariant convex bodies,
and a constructor for dominance/volume-order violations in dim >= 8.

`bp_verify` asks the comparison question directly: if every central complex
hyperplane section of K is no larger than the matching section of L, did the
volume comparison follow?  `bp_construct` builds a pair where it does not:
starting from a body whose norm-power transform is negative somewhere, a
nonnegative spherical bump f supported near the negativity region is pushed
through the harmonic multiplier transform and subtracted from the radial
power of L.  Sections shrink pointwise (the transform of the perturbation is
-eps f up to positive constants) while the volume grows (the first-order
volume change pairs f against the negative transform values).
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from .bodies import (ComplexLqBall, RadialPerturbation, StarBody,
                     block_moduli, convexity_probe, mollify)
from .embedding import scan
from .frames import DirectionGrid, make_frame, make_grid
from .fourier import classical_multiplier
from .harmonics import (c_add, c_eval, c_harmonic_components, c_mul, c_scale,
                        symmetric_harmonic_atoms)
from .quadrature import Estimate, SphereRule, kahan_reduce
from .sections import volume


class ConstructionImpossibleError(RuntimeError):
    """No negativity region exists, so no violating pair can be built."""


class ConstructionFailedError(RuntimeError):
    """The amplitude search exhausted its halvings without a violation."""


@dataclass
class BpReport:
    """Result of comparing section volumes and total volumes of two bodies.

    verdict is one of
      consistent:    sections of K dominated by L and Vol(K) <= Vol(L)
      violation:     sections dominated but Vol(K) > Vol(L) + 3 stderr
      not_dominated: some section of K exceeds L (or the comparison ties)
    """

    body_K: str
    body_L: str
    grid: DirectionGrid
    gaps: np.ndarray          # A_K(0) - A_L(0) per grid direction
    gap_stderrs: np.ndarray
    vol_K: Estimate
    vol_L: Estimate
    vol_gap: Estimate         # Vol(K) - Vol(L), common-node estimate
    verdict: str
    flags: tuple = ()
    details: dict = field(default_factory=dict)

    @property
    def max_gap(self) -> float:
        return float(np.max(self.gaps))

    @property
    def max_gap_stderr(self) -> float:
        return float(self.gap_stderrs[int(np.argmax(self.gaps))])

    def as_record(self) -> dict:
        return {
            "body_K": self.body_K,
            "body_L": self.body_L,
            "verdict": self.verdict,
            "flags": list(self.flags),
            "max_gap": self.max_gap,
            "max_gap_stderr": self.max_gap_stderr,
            "vol_K": self.vol_K.value,
            "vol_K_stderr": self.vol_K.stderr,
            "vol_L": self.vol_L.value,
            "vol_L_stderr": self.vol_L.stderr,
            "vol_gap": self.vol_gap.value,
            "vol_gap_stderr": self.vol_gap.stderr,
            "details": self.details,
        }


def _require_invariant(body: StarBody):
    if body.invariance_class not in ("complex_rotation", "independent_rotation"):
        raise ValueError(f"{body.spec()} is not complex-rotation invariant")


def _batch_stats(sums):
    ests = np.asarray(sums) * len(sums)
    return (float(kahan_reduce(sums)),
            float(np.std(ests, ddof=1) / math.sqrt(len(ests))))


def _section_gaps(K, L, grid, rule):
    """Per-direction A_K(0) - A_L(0) with both integrals on shared nodes,
    so the quadrature noise cancels in the difference."""
    m = K.dim - 2
    gaps = np.empty(len(grid.points))
    errs = np.empty(len(grid.points))
    for i, xi in enumerate(grid.points):
        frame = make_frame(xi)
        sums = []
        for pts, w in rule.batches():
            x = pts @ frame.basis
            diff = K.radial(x) ** m - L.radial(x) ** m
            sums.append(float(np.dot(w, diff)) / m)
        if rule.deterministic:
            gaps[i], errs[i] = float(kahan_reduce(sums)), 0.0
        else:
            gaps[i], errs[i] = _batch_stats(sums)
    return gaps, errs


def _volume_gap(K, L, rule):
    """Vol(K) - Vol(L) on shared nodes (the difference is usually tiny
    against either volume, and common nodes keep its error bar tiny too)."""
    d = K.dim
    sums = []
    for pts, w in rule.batches():
        diff = K.radial(pts) ** d - L.radial(pts) ** d
        sums.append(float(np.dot(w, diff)) / d)
    if rule.deterministic:
        return Estimate(float(kahan_reduce(sums)), 0.0, rule.node_count,
                        "polar_volume_gap")
    value, stderr = _batch_stats(sums)
    return Estimate(value, stderr, rule.node_count, "polar_volume_gap")


def bp_verify(K: StarBody, L: StarBody, grid: DirectionGrid,
              rule: SphereRule = None, vol_rule: SphereRule = None) -> BpReport:
    """Compare all central section volumes of K and L over the grid, then
    the total volumes, and classify the outcome.

    A violation needs the dominance gap <= +3 stderr at every grid point
    and Vol(K) > Vol(L) + 3 combined stderr.  A positive gap inside its own
    3-stderr band is an undecidable dominance comparison: the verdict is
    not_dominated with the flag "tie".
    """
    _require_invariant(K)
    _require_invariant(L)
    if K.dim != L.dim:
        raise ValueError("bodies must share a dimension")
    if grid.dim != K.dim:
        raise ValueError("grid dimension does not match the bodies")
    if rule is None:
        rule = SphereRule(K.dim - 2, "quasi_monte_carlo", node_count=2 ** 13,
                          seed=11)
    if vol_rule is None:
        vol_rule = SphereRule(K.dim, "quasi_monte_carlo", node_count=2 ** 16,
                              seed=12)
    gaps, errs = _section_gaps(K, L, grid, rule)
    vol_K = volume(K, vol_rule)
    vol_L = volume(L, vol_rule)
    vgap = _volume_gap(K, L, vol_rule)

    flags = []
    exceeds = gaps > 3.0 * errs
    ties = (gaps > 0.0) & ~exceeds
    if np.any(exceeds):
        verdict = "not_dominated"
    elif np.any(ties):
        verdict = "not_dominated"
        flags.append("tie")
    elif vgap.value > 3.0 * vgap.stderr:
        verdict = "violation"
    else:
        verdict = "consistent"
    return BpReport(
        body_K=K.spec(), body_L=L.spec(), grid=grid, gaps=gaps,
        gap_stderrs=errs, vol_K=vol_K, vol_L=vol_L, vol_gap=vgap,
        verdict=verdict, flags=tuple(flags),
        details={"exceed_count": int(np.sum(exceeds)),
                 "tie_count": int(np.sum(ties))})


def holder_chain_check(K: StarBody, L: StarBody,
                       rule: SphereRule = None) -> dict:
    """Numerical check of the volume comparison chain on the sphere:

        2n Vol(K) = int rho_K^{2n}
                 <= int rho_L^{2n-2} rho_K^2          (section dominance)
                 <= (2n Vol L)^{(n-1)/n} (2n Vol K)^{1/n}   (Hoelder)

    Returns the three integrals and both slacks with error bars; a slack
    below -3 stderr marks the corresponding inequality as failed.
    """
    _require_invariant(K)
    _require_invariant(L)
    if K.dim != L.dim:
        raise ValueError("bodies must share a dimension")
    d = K.dim
    n = d // 2
    if rule is None:
        rule = SphereRule(d, "quasi_monte_carlo", node_count=2 ** 16, seed=17)
    s1, s2, s3 = [], [], []
    for pts, w in rule.batches():
        rk = K.radial(pts)
        rl = L.radial(pts)
        s1.append(float(np.dot(w, rk ** d)))
        s2.append(float(np.dot(w, rl ** (d - 2) * rk ** 2)))
        s3.append(float(np.dot(w, rl ** d)))
    i1, e1 = _batch_stats(s1)
    i2, e2 = _batch_stats(s2)
    voll, evoll = _batch_stats(s3)
    i3 = voll ** ((n - 1.0) / n) * i1 ** (1.0 / n)
    # first-order error propagation through the product of powers
    e3 = abs(i3) * math.hypot((n - 1.0) / n * evoll / voll, e1 / (n * i1))
    slack1 = i2 - i1
    err1 = math.hypot(e1, e2)
    slack2 = i3 - i2
    err2 = math.hypot(e2, e3)
    # round-off floor: with deterministic or variance-free integrands the
    # stderrs vanish and a slack of a few ulps must not count as a failure
    floor = 1e-12 * max(abs(i1), abs(i2), abs(i3))
    return {
        "i1": i1, "i1_stderr": e1,
        "i2": i2, "i2_stderr": e2,
        "i3": i3, "i3_stderr": e3,
        "slack1": slack1, "slack1_stderr": err1,
        "slack2": slack2, "slack2_stderr": err2,
        "ok": bool(slack1 >= -(3.0 * err1 + floor)
                   and slack2 >= -(3.0 * err2 + floor)),
    }


class HarmonicBump:
    """Even spherical function given by a polynomial in the block moduli
    squared; callable on points, serializable, orbit-invariant."""

    def __init__(self, c_poly: dict, label: str = "bump"):
        self.c_poly = dict(c_poly)
        self.label = label
        self.moduli_symmetric = True

    def __call__(self, x):
        x = np.atleast_2d(np.asarray(x, dtype=float))
        m2 = block_moduli(x) ** 2
        m2 /= np.sum(m2, axis=-1, keepdims=True)
        return c_eval(self.c_poly, m2)

    def as_record(self) -> dict:
        return {"label": self.label,
                "c_poly": {" ".join(map(str, k)): v
                           for k, v in sorted(self.c_poly.items())}}


def _negative_weighted_square(n, grid, values, max_atom_degree):
    """f = h^2 minimizing int f * F over the sphere for h in the symmetric
    harmonic subspace of degree <= max_atom_degree, F being the scanned
    transform values on the invariant grid.

    With A_{ia} = P_a(xi_i) and the invariant grid weights w, the integral
    is c^T (A^T diag(w F) A) c for f = (sum_a c_a P_a)^2; the minimizing
    unit c is the bottom eigenvector.  f is nonnegative by construction."""
    atoms = [a for a in symmetric_harmonic_atoms(n, max_atom_degree)
             if a.degree <= max_atom_degree]
    w = grid.weights
    if w is None:
        from .quadrature import sphere_area
        w = np.full(len(grid.points), sphere_area(2 * n) / len(grid.points))
    A = np.stack([a(grid.points) for a in atoms], axis=1)
    M = A.T @ (w[:, None] * values[:, None] * A)
    M = 0.5 * (M + M.T)
    evals, evecs = np.linalg.eigh(M)
    c = evecs[:, 0]
    h = {}
    coefs = {}
    for a, ca in zip(atoms, c):
        coefs[a.label] = float(ca)
        h = c_add(h, c_scale(a.c_poly, float(ca)))
    return c_mul(h, h), coefs, float(evals[0])


def _transform_bump(f_poly, n, p=2.0):
    """g with (f(x/|x|)|x|^{-p})^ = g(y/|y|)|y|^{-(2n-p)}: each harmonic
    component of f is scaled by its closed-form multiplier.

    The closed form keeps g exact, so the transform of the perturbation is
    exactly proportional to -f and the section gaps of the constructed pair
    inherit the sign of -f with no multiplier error.  (Calibrated tables are
    for measurement routes; here the polynomial identity is the point.)"""
    comps = c_harmonic_components(f_poly, n)
    g = {}
    for deg, poly in sorted(comps.items()):
        g = c_add(g, c_scale(poly, classical_multiplier(deg, p, 2 * n)))
    return g


def bp_construct(n: int, q_body: float, width: float = 0.1,
                 grid: DirectionGrid = None, rule: SphereRule = None,
                 scan_rule: SphereRule = None, max_atom_degree: int = 6,
                 max_halvings: int = 8, seed: int = 0):
    """Build a pair (K, L) with dominated sections but Vol(K) > Vol(L).

    Pipeline: L is the mollified complex l_q ball; a p=2 sign scan locates
    the negativity region of (||x||_L^{-2})^; a nonnegative squared-harmonic
    bump f concentrated there is transformed into g; K carries the radial
    power rho_K^{2n-2} = rho_L^{2n-2} - eps g.  The amplitude starts at the
    positivity-safe bound and halves until bp_verify returns violation.

    Returns (K, L, BpReport, trace) where trace records the construction
    inputs needed to replay the pair.
    """
    if n < 2:
        raise ValueError("n must be >= 2")
    d = 2 * n
    L = mollify(ComplexLqBall(n, q_body), width)
    if grid is None:
        res = {2: 224, 3: 16}.get(n, 8)
        grid = make_grid(d, res, reduction="orbit_reduced", sort_moduli=True)
    if scan_rule is None:
        scan_rule = SphereRule(d - 2, "quasi_monte_carlo",
                               node_count=2 ** 11, seed=7)
    verdict = scan(L, 2.0, grid, rule=scan_rule)
    if verdict.conclusion != "negativity_witness":
        raise ConstructionImpossibleError(
            f"no negativity region for n={n} (scan: {verdict.conclusion})")

    f_poly, f_coefs, predicted = _negative_weighted_square(
        n, grid, verdict.values, max_atom_degree)
    # the construction only works if f weighs the negative part of the
    # transform more than the positive part
    fvals = c_eval(f_poly, block_moduli(grid.points) ** 2)
    w = grid.weights
    if w is None:
        from .quadrature import sphere_area
        w = np.full(len(grid.points), sphere_area(d) / len(grid.points))
    neg = float(np.dot(w, fvals * np.minimum(verdict.values, 0.0)))
    pos = float(np.dot(w, fvals * np.maximum(verdict.values, 0.0)))
    if not neg + pos < 0.0:
        raise ConstructionFailedError(
            f"bump does not concentrate on the negativity region "
            f"(weighted transform integral {neg + pos:.3g} >= 0)")

    g_poly = _transform_bump(f_poly, n, p=2.0)
    bump = HarmonicBump(g_poly, label=f"sq_kernel_deg{max_atom_degree}")
    if rule is None and d - 2 <= 6:
        # rho_K^{2n-2} - rho_L^{2n-2} = -eps g is a polynomial on the
        # section sphere, so a Gauss rule makes every gap exact: the tiny
        # negative gaps near the zeros of f would otherwise drown in
        # Monte Carlo noise and spoil the dominance verdict
        rule = SphereRule(d - 2, "product_gauss",
                          level=max(8, max_atom_degree + 2))
    probe = SphereRule(d, "quasi_monte_carlo", node_count=2 ** 14,
                       seed=seed + 3).nodes()
    sup_g = float(np.max(np.abs(bump(probe))))
    eps = 0.5 * L.r_min ** (d - 2) / sup_g

    trace = {"L": L.spec(), "f_coefs": f_coefs, "bump": bump.as_record(),
             "argmin": [float(v) for v in verdict.argmin],
             "scan_min": verdict.min_value, "sup_g": sup_g,
             "weighted_integral": neg + pos, "predicted_integral": predicted,
             "eps_trace": [], "seed": seed}
    for _ in range(max_halvings + 1):
        try:
            K = RadialPerturbation(L, d - 2, eps, bump,
                                   bump_id=bump.label, seed=seed + 5)
            bad = convexity_probe(K, samples=10 ** 5, seed=seed + 9).violations
        except ValueError:
            trace["eps_trace"].append({"eps": eps, "status": "not_positive"})
            eps *= 0.5
            continue
        if bad > 0:
            trace["eps_trace"].append({"eps": eps, "status": "not_convex",
                                       "violations": int(bad)})
            eps *= 0.5
            continue
        report = bp_verify(K, L, grid, rule=rule)
        trace["eps_trace"].append({"eps": eps, "status": report.verdict})
        if report.verdict == "violation":
            trace["eps"] = eps
            report.details["construction"] = trace
            return K, L, report, trace
        eps *= 0.5
    raise ConstructionFailedError(
        f"no violating amplitude found; trace: {trace['eps_trace']}")
