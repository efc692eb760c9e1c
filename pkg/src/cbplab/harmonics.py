"""Rotation-invariant harmonic polynomials on R^{2n}.

Two engines share the HarmonicAtom interface:

* a general engine over x-monomials, building atoms from the quadratic
  invariants Re(z_j conj(z_l)), Im(z_j conj(z_l)), |z_j|^2 of the common
  blockwise rotation, with exact Fischer-product orthonormalization;

* a small engine over the block moduli squared c_j = |z_j|^2 for fully
  symmetric atoms (invariant under independent block rotations and
  permutations), with exact Dirichlet-moment inner products and fast
  vectorized evaluation.  These are the atoms used to build perturbation
  bumps, because bodies perturbed by them keep the full symmetry group.
"""

from __future__ import annotations

import itertools
import math
from functools import lru_cache

import numpy as np
from scipy import linalg, sparse, special

from .bodies import block_moduli
from .quadrature import sphere_area


# ---------------------------------------------------------------------------
# dense x-monomial algebra (cached per dimension and degree)
# ---------------------------------------------------------------------------

@lru_cache(maxsize=None)
def _monomials(d, deg):
    """Exponent tuples of all degree-`deg` monomials in d variables."""
    if deg == 0:
        return (tuple([0] * d),)
    out = []

    def rec(prefix, rem, slots):
        if slots == 1:
            out.append(tuple(prefix + [rem]))
            return
        for k in range(rem + 1):
            rec(prefix + [k], rem - k, slots - 1)

    rec([], deg, d)
    return tuple(out)


@lru_cache(maxsize=None)
def _mono_index(d, deg):
    return {m: i for i, m in enumerate(_monomials(d, deg))}


@lru_cache(maxsize=None)
def _laplacian_matrix(d, deg):
    """Sparse matrix of the Laplacian from degree deg to deg-2."""
    src = _monomials(d, deg)
    dst = _mono_index(d, deg - 2)
    rows, cols, vals = [], [], []
    for j, mono in enumerate(src):
        for i, e in enumerate(mono):
            if e >= 2:
                m2 = list(mono)
                m2[i] -= 2
                rows.append(dst[tuple(m2)])
                cols.append(j)
                vals.append(float(e * (e - 1)))
    return sparse.csr_matrix((vals, (rows, cols)),
                             shape=(len(dst), len(src)))


@lru_cache(maxsize=None)
def _r2_matrix(d, deg):
    """Sparse matrix of multiplication by |x|^2 from degree deg to deg+2."""
    src = _monomials(d, deg)
    dst = _mono_index(d, deg + 2)
    rows, cols, vals = [], [], []
    for j, mono in enumerate(src):
        for i in range(d):
            m2 = list(mono)
            m2[i] += 2
            rows.append(dst[tuple(m2)])
            cols.append(j)
            vals.append(1.0)
    return sparse.csr_matrix((vals, (rows, cols)),
                             shape=(len(dst), len(src)))


@lru_cache(maxsize=None)
def _harmonic_solver(d, deg):
    """LU factorization of Delta o (|x|^2 .) on degree deg-2 coefficients."""
    A = (_laplacian_matrix(d, deg) @ _r2_matrix(d, deg - 2)).toarray()
    return linalg.lu_factor(A)


def _dict_to_vec(poly, d, deg):
    v = np.zeros(len(_monomials(d, deg)))
    idx = _mono_index(d, deg)
    for mono, c in poly.items():
        v[idx[mono]] += c
    return v


def _dict_mul(p, q):
    out = {}
    for m1, c1 in p.items():
        for m2, c2 in q.items():
            key = tuple(a + b for a, b in zip(m1, m2))
            out[key] = out.get(key, 0.0) + c1 * c2
    return out


def _x_harmonic_project(vec, d, deg):
    """Harmonic part of a homogeneous degree-`deg` coefficient vector."""
    if deg < 2:
        return vec
    rhs = _laplacian_matrix(d, deg) @ vec
    s = linalg.lu_solve(_harmonic_solver(d, deg), rhs)
    return vec - _r2_matrix(d, deg - 2) @ s


@lru_cache(maxsize=None)
def _fischer_weights(d, deg):
    monos = _monomials(d, deg)
    return np.array([np.prod(special.factorial(m)) for m in monos])


def _sphere_norm_factor(d, deg):
    """int_S P Q dsigma = factor * <P, Q>_Fischer for harmonics of `deg`."""
    poch = special.gamma(d / 2.0 + deg) / special.gamma(d / 2.0)
    return sphere_area(d) / (2.0 ** deg * poch)


# ---------------------------------------------------------------------------
# the symmetric c-algebra (c_j = |z_j|^2)
# ---------------------------------------------------------------------------

def c_mul(p, q):
    return _dict_mul(p, q)


def c_scale(p, a):
    return {m: a * c for m, c in p.items()}


def c_add(p, q):
    out = dict(p)
    for m, c in q.items():
        out[m] = out.get(m, 0.0) + c
    return {m: c for m, c in out.items() if c != 0.0}


def c_laplacian(p):
    """x-Laplacian of F(c): 4 sum_j (dF/dc_j + c_j d2F/dc_j^2)."""
    out = {}
    for mono, coef in p.items():
        n = len(mono)
        for j in range(n):
            e = mono[j]
            if e == 0:
                continue
            m1 = list(mono)
            m1[j] -= 1
            key = tuple(m1)
            # 4 dF/dc_j  +  4 c_j d2F/dc_j^2 : both land on mono - e_j
            out[key] = out.get(key, 0.0) + 4.0 * coef * e + 4.0 * coef * e * (e - 1)
    return {m: c for m, c in out.items() if c != 0.0}


def c_p1(n):
    """|x|^2 = sum_j c_j."""
    return {tuple(1 if i == j else 0 for i in range(n)): 1.0 for j in range(n)}


@lru_cache(maxsize=None)
def _c_harmonic_solver(n, k):
    """Factorized Delta o (p1 .) on c-degree k-1 coefficient space."""
    monos = _monomials(n, k - 1)
    idx = _mono_index(n, k - 1)
    p1 = c_p1(n)
    A = np.zeros((len(monos), len(monos)))
    for j, mono in enumerate(monos):
        img = c_laplacian(c_mul(p1, {mono: 1.0}))
        for m, c in img.items():
            A[idx[m], j] += c
    return linalg.lu_factor(A)


def c_harmonic_split(p, n, k):
    """p (homogeneous c-degree k) = H + p1 * S with H x-harmonic; returns (H, S)."""
    if k == 0:
        return dict(p), {}
    lap = c_laplacian(p)
    rhs = _dict_to_vec(lap, n, k - 1)
    s = linalg.lu_solve(_c_harmonic_solver(n, k), rhs)
    monos = _monomials(n, k - 1)
    S = {m: float(c) for m, c in zip(monos, s) if c != 0.0}
    H = c_add(p, c_scale(c_mul(c_p1(n), S), -1.0))
    return H, S


def c_harmonic_components(p, n):
    """Decompose a (possibly inhomogeneous) c-polynomial restricted to the
    sphere into x-harmonic pieces: returns {x_degree: harmonic c-poly}."""
    by_deg = {}
    for mono, coef in p.items():
        by_deg.setdefault(sum(mono), {})[mono] = coef
    comps = {}
    for k in sorted(by_deg, reverse=True):
        work = by_deg[k]
        kk = k
        while work:
            H, S = c_harmonic_split(work, n, kk)
            if H:
                deg = 2 * kk
                comps[deg] = c_add(comps.get(deg, {}), H)
            work = S
            kk -= 1
    # drop float dust left by cancellations across degrees
    scale = max((abs(c) for p in comps.values() for c in p.values()), default=0.0)
    out = {}
    for deg, poly in comps.items():
        poly = {m: c for m, c in poly.items() if abs(c) > 1e-12 * scale}
        if poly:
            out[deg] = poly
    return out


def c_eval(p, cvals):
    """Evaluate a c-polynomial at rows of cvals (N, n)."""
    cvals = np.atleast_2d(np.asarray(cvals, dtype=float))
    out = np.zeros(cvals.shape[0])
    if not p:
        return out
    # shared power table: pows[j][e] = cvals[:, j]**e
    max_e = [0] * cvals.shape[1]
    for mono in p:
        for j, e in enumerate(mono):
            if e > max_e[j]:
                max_e[j] = e
    pows = []
    for j, top in enumerate(max_e):
        col = [None, cvals[:, j]]
        for e in range(2, top + 1):
            col.append(col[-1] * cvals[:, j])
        pows.append(col)
    for mono, coef in p.items():
        term = None
        for j, e in enumerate(mono):
            if e:
                term = pows[j][e] if term is None else term * pows[j][e]
        out += coef if term is None else coef * term
    return out


def moduli_gauss_quadrature(n, res=64):
    """Gauss-Legendre quadrature in the block-moduli angles of S^{2n-1}.

    Returns (m, weights): m is an (N, n) array of nonnegative moduli with
    sum(m^2) = 1 per row, and weights carry the invariant surface measure,
    normalized so that any function of the moduli alone integrates over the
    sphere as weights . f(m).  Spectrally accurate for smooth integrands.
    """
    res = int(res)
    x, w = np.polynomial.legendre.leggauss(res)
    phi = 0.25 * math.pi * (x + 1.0)
    wp = 0.25 * math.pi * w
    grids = np.meshgrid(*([phi] * (n - 1)), indexing="ij")
    wgrids = np.meshgrid(*([wp] * (n - 1)), indexing="ij")
    phis = np.stack([g.ravel() for g in grids], axis=1)
    weights = np.prod(np.stack([g.ravel() for g in wgrids], axis=1), axis=1)
    m = np.empty((phis.shape[0], n))
    sin_prod = np.ones(phis.shape[0])
    for i in range(n - 1):
        m[:, i] = sin_prod * np.cos(phis[:, i])
        sin_prod = sin_prod * np.sin(phis[:, i])
    m[:, n - 1] = sin_prod
    jac = np.ones(phis.shape[0])
    for i in range(n - 1):
        jac = jac * np.sin(phis[:, i]) ** (n - 2 - i)
    weights = weights * jac * np.prod(m, axis=1)
    weights *= sphere_area(2 * n) / weights.sum()
    return m, weights


def symmetric_power_form(p, n, tol=1e-9, seed=29):
    """Rewrite a symmetric c-polynomial, restricted to sum(c) = 1, in the
    power sums p_k = sum_j c_j^k, k = 2..n.

    Returns (exps, coefs): exps is an (M, n-1) integer array of exponents
    of (p_2, ..., p_n).  Evaluation through this form is much cheaper than
    the raw monomial expansion.  Raises ValueError when the fit residual
    exceeds tol (e.g. for a non-symmetric polynomial).
    """
    deg = max((sum(m) for m in p), default=0)
    cand = []
    for exps in itertools.product(*(range(deg // k + 1) for k in range(2, n + 1))):
        if sum(e * k for e, k in zip(exps, range(2, n + 1))) <= deg:
            cand.append(exps)
    cand = np.array(sorted(cand), dtype=int).reshape(len(cand), max(n - 1, 0))
    rng = np.random.Generator(np.random.Philox(key=seed))
    npts = 8 * max(len(cand), 8)
    c = rng.dirichlet(np.ones(n), size=npts)
    target = c_eval(p, c)
    pows = np.stack([np.sum(c ** k, axis=1) for k in range(2, n + 1)], axis=1)
    design = np.ones((npts, len(cand)))
    for i, exps in enumerate(cand):
        for j, e in enumerate(exps):
            if e:
                design[:, i] *= pows[:, j] ** e
    coefs, *_ = np.linalg.lstsq(design, target, rcond=None)
    resid = np.max(np.abs(design @ coefs - target))
    scale = max(np.max(np.abs(target)), 1.0)
    if resid > tol * scale:
        raise ValueError(
            f"power-sum fit residual {resid:.3g} exceeds tolerance; "
            "polynomial is not symmetric on the simplex")
    keep = np.abs(coefs) > 1e-13 * np.max(np.abs(coefs))
    return cand[keep], coefs[keep]


def power_form_eval(exps, coefs, cvals):
    """Evaluate a symmetric_power_form at rows of cvals (N, n) with
    sum(c) = 1 per row."""
    cvals = np.atleast_2d(np.asarray(cvals, dtype=float))
    n = cvals.shape[1]
    pows = [np.sum(cvals ** k, axis=1) for k in range(2, n + 1)]
    out = np.zeros(cvals.shape[0])
    for exps_row, coef in zip(exps, coefs):
        term = None
        for j, e in enumerate(exps_row):
            if e:
                f = pows[j] if e == 1 else pows[j] ** e
                term = f if term is None else term * f
        out += coef if term is None else coef * term
    return out


def c_sphere_integral(p, n):
    """Exact integral over S^{2n-1}: block moduli^2 are Dirichlet(1,..,1)."""
    total = 0.0
    for mono, coef in p.items():
        k = sum(mono)
        mom = (math.factorial(n - 1)
               * math.prod(math.factorial(e) for e in mono)
               / math.factorial(n - 1 + k))
        total += coef * mom
    return total * sphere_area(2 * n)


def c_sphere_inner(p, q, n):
    """Exact <p, q> over S^{2n-1}, vectorized over the merged exponents."""
    if not p or not q:
        return 0.0
    m1 = list(p)
    m2 = list(q)
    v1 = np.array([p[m] for m in m1])
    v2 = np.array([q[m] for m in m2])
    E = (np.array(m1, dtype=int)[:, None, :]
         + np.array(m2, dtype=int)[None, :, :])
    top = int(E.max())
    fact = special.factorial(np.arange(top + 1), exact=False)
    k = E.sum(axis=2)
    kfact = special.factorial(np.arange(n - 1, n - 1 + int(k.max()) + 1),
                              exact=False)
    mom = (math.factorial(n - 1) * np.prod(fact[E], axis=2)
           / kfact[k])
    return float(v1 @ mom @ v2) * sphere_area(2 * n)


# ---------------------------------------------------------------------------
# atoms
# ---------------------------------------------------------------------------

class HarmonicAtom:
    """A unit-L^2(S) harmonic, R_theta-invariant polynomial."""

    def __init__(self, n, degree, c_poly=None, x_vec=None, label=""):
        self.n = int(n)
        self.dim = 2 * self.n
        self.degree = int(degree)
        self.c_poly = c_poly
        self.label = label
        self.moduli_symmetric = c_poly is not None
        if x_vec is not None:
            nz = np.nonzero(np.abs(x_vec) > 1e-14 * max(1.0, np.abs(x_vec).max()))[0]
            monos = _monomials(self.dim, self.degree)
            self._x_terms = ([monos[i] for i in nz], x_vec[nz])
        else:
            self._x_terms = None

    def __call__(self, x):
        x = np.atleast_2d(np.asarray(x, dtype=float))
        if self.c_poly is not None:
            return c_eval(self.c_poly, block_moduli(x) ** 2)
        monos, coefs = self._x_terms
        out = np.zeros(x.shape[0])
        for mono, coef in zip(monos, coefs):
            term = np.full(x.shape[0], coef)
            for i, e in enumerate(mono):
                if e:
                    term *= x[:, i] ** e
            out += term
        return out

    def on_sphere(self, x):
        x = np.atleast_2d(np.asarray(x, dtype=float))
        return self(x / np.linalg.norm(x, axis=-1, keepdims=True))

    def __repr__(self):
        kind = "sym" if self.moduli_symmetric else "gen"
        return f"HarmonicAtom(n={self.n}, degree={self.degree}, {kind})"


def _invariant_quadratics(n):
    """x-monomial dicts of c_j, Re(z_j conj z_l), Im(z_j conj z_l)."""
    d = 2 * n

    def e(*pairs):
        m = [0] * d
        for i, k in pairs:
            m[i] += k
        return tuple(m)

    quads = []
    for j in range(n):
        quads.append(("c%d" % j, {e((2 * j, 2)): 1.0, e((2 * j + 1, 2)): 1.0}))
    for j in range(n):
        for l in range(j + 1, n):
            quads.append(("a%d%d" % (j, l),
                          {e((2 * j, 1), (2 * l, 1)): 1.0,
                           e((2 * j + 1, 1), (2 * l + 1, 1)): 1.0}))
            quads.append(("b%d%d" % (j, l),
                          {e((2 * j + 1, 1), (2 * l, 1)): 1.0,
                           e((2 * j, 1), (2 * l + 1, 1)): -1.0}))
    return quads


def build_invariant_harmonics(n, max_degree):
    """Orthonormal R_theta-invariant harmonic atoms up to an even degree.

    Candidates are monomials in the diagonal invariants c_j times at most
    one off-diagonal invariant; degenerate directions are dropped, so the
    returned basis can be smaller than the candidate count.
    """
    if max_degree % 2 != 0 or max_degree > 8:
        raise ValueError("max_degree must be even and <= 8")
    d = 2 * n
    atoms = [HarmonicAtom(n, 0, c_poly={tuple([0] * n): 1.0 / math.sqrt(sphere_area(d))},
                          label="const")]
    quads = _invariant_quadratics(n)
    c_quads = quads[:n]
    off_quads = quads[n:]
    for deg in range(2, max_degree + 1, 2):
        k = deg // 2
        cands = []
        for combo in itertools.combinations_with_replacement(range(n), k):
            poly = {tuple([0] * d): 1.0}
            for j in combo:
                poly = _dict_mul(poly, c_quads[j][1])
            cands.append(poly)
        for _, off in off_quads:
            for combo in itertools.combinations_with_replacement(range(n), k - 1):
                poly = dict(off)
                for j in combo:
                    poly = _dict_mul(poly, c_quads[j][1])
                cands.append(poly)
        raw = np.stack([_dict_to_vec(p, d, deg) for p in cands], axis=1)
        V = np.stack([_x_harmonic_project(raw[:, i], d, deg)
                      for i in range(raw.shape[1])], axis=1)
        wF = _fischer_weights(d, deg)
        G = V.T @ (wF[:, None] * V)
        cand_scale = float(np.max(np.sum(wF[:, None] * raw * raw, axis=0)))
        evals, evecs = linalg.eigh(G)
        # relative cut plus an absolute floor against the candidate scale,
        # so round-off ghosts of an empty harmonic space are rejected
        keep = (evals > 1e-9 * evals.max()) & (evals > 1e-20 * cand_scale)
        if not keep.any():
            continue
        basis = V @ (evecs[:, keep] / np.sqrt(evals[keep]))
        scale = 1.0 / math.sqrt(_sphere_norm_factor(d, deg))
        for i in range(basis.shape[1]):
            atoms.append(HarmonicAtom(n, deg, x_vec=basis[:, i] * scale,
                                      label=f"deg{deg}/{i}"))
    return atoms


_SYM_ATOM_CACHE: dict = {}


def symmetric_harmonic_atoms(n, max_degree):
    """Unit-L^2 harmonic atoms in the fully symmetric algebra (polynomials
    in the block moduli squared), one list over even degrees <= max_degree.
    Atom lists are cached per (n, max_degree); treat them as read-only."""
    if max_degree % 2 != 0:
        raise ValueError("max_degree must be even")
    key = (int(n), int(max_degree))
    cached = _SYM_ATOM_CACHE.get(key)
    if cached is not None:
        return cached
    atoms = [HarmonicAtom(n, 0, c_poly={tuple([0] * n): 1.0 / math.sqrt(sphere_area(2 * n))},
                          label="const")]
    for deg in range(4, max_degree + 1, 2):
        k = deg // 2
        cands = []
        for part in _partitions(k, n):
            mono = {}
            for perm in set(itertools.permutations(part)):
                mono[perm] = 1.0
            cands.append(mono)
        scale = max(c_sphere_inner(p, p, n) for p in cands)
        projs = [c_harmonic_split(p, n, k)[0] for p in cands]
        projs = [p for p in projs if p]
        if not projs:
            continue
        G = np.array([[c_sphere_inner(p, q, n) for q in projs] for p in projs])
        evals, evecs = linalg.eigh(G)
        # genuine harmonic parts may be tiny relative to the monomials, so
        # the cut is relative to the leading eigenvalue; the absolute floor
        # (vs the candidate scale) rejects round-off ghosts when the
        # symmetric harmonic space at this degree is actually empty
        keep = (evals > 1e-9 * evals.max()) & (evals > 1e-20 * scale)
        if not keep.any():
            continue
        coefs = evecs[:, keep] / np.sqrt(evals[keep])
        for i in range(coefs.shape[1]):
            poly = {}
            for c, p in zip(coefs[:, i], projs):
                poly = c_add(poly, c_scale(p, c))
            atoms.append(HarmonicAtom(n, deg, c_poly=poly, label=f"sym{deg}/{i}"))
    _SYM_ATOM_CACHE[key] = atoms
    return atoms


def _partitions(k, max_parts):
    """Partitions of k into at most max_parts parts (tuples padded with 0)."""
    def rec(rem, maxv, parts):
        if rem == 0:
            yield tuple(parts + [0] * (max_parts - len(parts)))
            return
        if len(parts) == max_parts:
            return
        for v in range(min(rem, maxv), 0, -1):
            yield from rec(rem - v, v, parts + [v])

    yield from rec(k, k, [])
