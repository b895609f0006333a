"""Simplex-ordered heat-kernel integrals via confluent divided differences.

The scalar kernel is

    E(mu_0, ..., mu_n) = int_{0<=s_1<=...<=s_n<=1}
                         exp(-sum_k (s_{k+1}-s_k) mu_k) d^n s

with s_0 = 0 and s_{n+1} = 1.  By the Hermite-Genocchi formula this equals
the n-th divided difference of exp at the points (-mu_0, ..., -mu_n), which
is what `exp_divided_difference` returns.  Chain integrals of the form

    int_{Delta_n} Tr(G x_0 e^{-s_1 H} x_1 e^{-(s_2-s_1) H} ... x_n e^{-(1-s_n) H}) d^n s

reduce, in the eigenbasis of H, to sums of matrix-element products weighted
by E at eigenvalue chains; `chain_integral` evaluates that sum with the
weights grouped by eigenvalue multiset.  `simplex_quadrature` provides the
independent cubature oracles (tensor Gauss-Legendre through the ordered
Duffy map, and seeded Monte Carlo).
"""

import enum
import math
import os
from dataclasses import dataclass

import numpy as np
import scipy.linalg

from .errors import ChainBudgetExceeded, DimensionMismatch
from .graded import GradingOperator, as_matrix

DEFAULT_CHAIN_BUDGET = 1e8
_CLUSTER_SPREAD = 1e-6


@dataclass(frozen=True)
class DividedDifferenceRequest:
    """Node multiset mu_0..mu_n for one divided-difference evaluation."""

    nodes: tuple

    def __post_init__(self):
        arr = np.asarray(self.nodes, dtype=float)
        if arr.ndim != 1 or arr.size == 0 or not np.all(np.isfinite(arr)):
            raise ValueError("nodes must be a nonempty finite 1-d sequence")
        object.__setattr__(self, "nodes", tuple(float(v) for v in arr))


def exp_divided_difference(nodes):
    """Divided difference of t -> e^{-t} at the given nodes.

    Parameters
    ----------
    nodes : sequence of float or DividedDifferenceRequest
        Points mu_0, ..., mu_n; repetitions allowed (confluent case).

    Returns
    -------
    float
        The ordered-simplex integral of exp(-sum (s_{k+1}-s_k) mu_k),
        equal to exp[-mu_0, ..., -mu_n].  All nodes equal to mu gives
        e^{-mu}/n!.

    Notes
    -----
    The recursive difference table is catastrophically unstable for
    clustered nodes, so the value is read off as the corner entry of the
    exponential of the bidiagonal matrix carrying the nodes (Opitz form).
    Below a node spread of 1e-6 a centered Taylor expansion in the
    complete homogeneous symmetric polynomials takes over.
    """
    if isinstance(nodes, DividedDifferenceRequest):
        nodes = nodes.nodes
    mu = np.asarray(nodes, dtype=float)
    if mu.ndim != 1 or mu.size == 0:
        raise ValueError("nodes must be a nonempty 1-d sequence")
    if not np.all(np.isfinite(mu)):
        raise ValueError("nodes must be finite")
    n = mu.size - 1
    if n == 0:
        return float(np.exp(-mu[0]))
    spread = float(mu.max() - mu.min())
    if spread < _CLUSTER_SPREAD:
        return _edd_clustered(mu)
    return _edd_opitz(mu)


def _edd_opitz(mu):
    # corner entry of expm of the upper-bidiagonal node matrix
    k = mu.size
    z = np.diag(-mu) + np.diag(np.ones(k - 1), 1)
    return float(scipy.linalg.expm(z)[0, k - 1])


def _edd_clustered(mu):
    # e^{-mean} * sum_k (-1)^k h_k(eps) / (n+k)!  with eps centered,
    # h_k the complete homogeneous symmetric polynomials; eps is below
    # 1e-6 so four terms reach machine precision
    n = mu.size - 1
    mean = float(mu.mean())
    eps = mu - mean
    kmax = 4
    # h_k via Newton's identity k h_k = sum_{i=1..k} p_i h_{k-i}
    p = [float(np.sum(eps ** i)) for i in range(kmax + 1)]
    h = [1.0] * (kmax + 1)
    for k in range(1, kmax + 1):
        h[k] = sum(p[i] * h[k - i] for i in range(1, k + 1)) / k
    total = 0.0
    for k in range(kmax + 1):
        total += (-1) ** k * h[k] / math.factorial(n + k)
    return float(math.exp(-mean) * total)


# ---------------------------------------------------------------------------
# spectra and chain integrals


class Spectrum:
    """Eigendecomposition of a selfadjoint generator with chain-weight caches.

    Eigenvalues are deduplicated with `dedup_tol` into classes; the
    divided-difference weight of a chain depends only on the multiset of
    classes visited, so weights are memoized per class-count vector.
    """

    def __init__(self, evals, vecs, dedup_tol=1e-9):
        evals = np.asarray(evals, dtype=float)
        vecs = np.asarray(vecs, dtype=complex)
        if evals.ndim != 1 or vecs.shape != (evals.size, evals.size):
            raise DimensionMismatch("spectrum shapes inconsistent")
        order = np.argsort(evals, kind="stable")
        self.evals = evals[order]
        self.vecs = vecs[:, order]
        self.dim = evals.size
        self.evals.setflags(write=False)
        self.vecs.setflags(write=False)

        class_of = np.empty(self.dim, dtype=np.int64)
        class_pos = np.empty(self.dim, dtype=np.int64)
        values = []
        members = []
        for i, lam in enumerate(self.evals):
            if values and lam - members[-1][0] <= dedup_tol:
                c = len(values) - 1
            else:
                c = len(values)
                values.append(0.0)
                members.append((lam, 0))
            class_of[i] = c
            class_pos[i] = members[c][1]
            members[c] = (lam, members[c][1] + 1)
            values[c] += lam
        counts = np.array([m[1] for m in members], dtype=np.int64)
        self.class_values = np.array(values) / counts
        self.class_of = class_of
        self.class_pos = class_pos
        self.block = int(counts.max())
        self.n_classes = len(values)
        self._dd_memo = {}

    def to_eigenbasis(self, m):
        return self.vecs.conj().T @ m @ self.vecs

    def from_eigenbasis(self, m):
        return self.vecs @ m @ self.vecs.conj().T

    def weight_for_counts(self, counts):
        """Memoized divided-difference weight for a class-count vector."""
        key = counts.tobytes()
        val = self._dd_memo.get(key)
        if val is None:
            nodes = np.repeat(self.class_values, counts)
            val = exp_divided_difference(nodes)
            self._dd_memo[key] = val
        return val


def chain_budget():
    """Current chain-term budget; SKMS_CHAIN_BUDGET overrides the default."""
    raw = os.environ.get("SKMS_CHAIN_BUDGET")
    if raw is None:
        return DEFAULT_CHAIN_BUDGET
    return float(raw)


# multiset patterns shared across spectra: for m classes and chain length
# n+1, maps each flat class tuple to its count-vector id
_PATTERN_CACHE = {}


def _chain_pattern(m, n):
    key = (m, n)
    hit = _PATTERN_CACHE.get(key)
    if hit is not None:
        return hit
    length = n + 1
    if m == 1:
        inv = np.zeros(1, dtype=np.int64)
        counts = np.array([[length]], dtype=np.int64)
        _PATTERN_CACHE[key] = (inv, counts)
        return inv, counts
    # scalar keys: counts per class are <= n+1, so base n+2 digits encode
    # the count vector injectively when the top digit fits in int64
    if (m - 1) * math.log2(n + 2) < 62 - math.log2(length):
        base = (n + 2) ** np.arange(m, dtype=np.int64)
        acc = base
        for _ in range(n):
            acc = np.add.outer(acc, base)
        flat = acc.reshape(-1)
        uniq, inv = np.unique(flat, return_inverse=True)
        counts = np.zeros((uniq.size, m), dtype=np.int64)
        rem = uniq.copy()
        for c in range(m):
            counts[:, c] = rem % (n + 2)
            rem //= (n + 2)
    else:
        # large class count: sort index rows and deduplicate directly
        if m > 255:
            raise ChainBudgetExceeded(
                "eigenvalue class structure too large for chain grouping")
        idx = np.indices((m,) * length, dtype=np.uint8).reshape(length, -1).T
        rows = np.sort(idx, axis=1)
        uniq, inv = np.unique(rows, axis=0, return_inverse=True)
        counts = np.zeros((uniq.shape[0], m), dtype=np.int64)
        for c in range(m):
            counts[:, c] = (uniq == c).sum(axis=1)
    inv = inv.astype(np.int64).reshape(-1)
    _PATTERN_CACHE[key] = (inv, counts)
    return inv, counts


def _padded_blocks(spectrum, m_eig):
    # scatter a d x d matrix (eigenbasis) into (classes, classes, block, block)
    m = spectrum.n_classes
    b = spectrum.block
    ci = spectrum.class_of
    pi = spectrum.class_pos
    out = np.zeros((m, m, b, b), dtype=complex)
    out[ci[:, None], ci[None, :], pi[:, None], pi[None, :]] = m_eig
    return out


def _grading_matrix(grading):
    if isinstance(grading, GradingOperator):
        return grading.matrix
    if grading is None:
        return None
    return as_matrix(grading)


def chain_integral(spectrum, xs, grading, budget=None):
    """Ordered-simplex heat chain integral.

    Parameters
    ----------
    spectrum : Spectrum
        Eigendecomposition of the generator H.
    xs : list of matrices
        Insertions x_0, ..., x_n (n >= 0).
    grading : GradingOperator, matrix, or None
        Gamma in the supertrace; None means plain trace.
    budget : float, optional
        Chain-term budget; defaults to SKMS_CHAIN_BUDGET or 1e8.

    Returns
    -------
    complex
        int_{Delta_n} Tr(Gamma x_0 e^{-s_1 H} x_1 ... x_n e^{-(1-s_n) H}) d^n s.
        For n = 0 this is Tr(Gamma x_0 e^{-H}).
    """
    mats = [as_matrix(x) for x in xs]
    if not mats:
        raise ValueError("need at least one insertion x_0")
    d = spectrum.dim
    for m_ in mats:
        if m_.shape[0] != d:
            raise DimensionMismatch(
                "insertion dimension %d does not match spectrum dimension %d"
                % (m_.shape[0], d))
    n = len(mats) - 1
    if budget is None:
        budget = chain_budget()
    if d ** (n + 1) > budget:
        raise ChainBudgetExceeded(
            "chain with d=%d, n=%d exceeds budget %g" % (d, n, budget))

    g = _grading_matrix(grading)
    head = mats[0] if g is None else g @ mats[0]
    y0 = spectrum.to_eigenbasis(head)
    if n == 0:
        return complex(np.sum(np.diag(y0) * np.exp(-spectrum.evals)))

    m = spectrum.n_classes
    b = spectrum.block
    if (m ** (n + 1)) * b * b > budget:
        raise ChainBudgetExceeded(
            "class-space chain with m=%d, b=%d, n=%d exceeds budget %g"
            % (m, b, n, budget))

    blocks = [_padded_blocks(spectrum, y0)]
    for k in range(1, n + 1):
        blocks.append(_padded_blocks(spectrum, spectrum.to_eigenbasis(mats[k])))

    # accumulate R[c_0..c_k, beta_0, beta_k] by absorbing one insertion at a time
    r = blocks[0]
    for k in range(1, n):
        r = np.einsum("...iab,ijbc->...ijac", r, blocks[k])
    s = np.einsum("i...jab,jiba->i...j", r, blocks[n])

    inv, counts = _chain_pattern(m, n)
    vals = np.empty(counts.shape[0])
    for u in range(counts.shape[0]):
        vals[u] = spectrum.weight_for_counts(counts[u])
    return complex(np.dot(s.reshape(-1), vals[inv]))


def heat_chain_integrand(spectrum, xs, grading, max_block=None):
    """Vectorized integrand for the chain trace at given simplex points.

    Returns f mapping an array of ordered points with shape (B, n) to the
    (B,) complex values Tr(Gamma x_0 e^{-s_1 H} x_1 ... x_n e^{-(1-s_n) H}).
    Used by the quadrature oracles that cross-check `chain_integral`.
    """
    mats = [as_matrix(x) for x in xs]
    n = len(mats) - 1
    d = spectrum.dim
    g = _grading_matrix(grading)
    head = mats[0] if g is None else g @ mats[0]
    ys = [spectrum.to_eigenbasis(head)]
    ys += [spectrum.to_eigenbasis(mats[k]) for k in range(1, n + 1)]
    lam = spectrum.evals
    if max_block is None:
        max_block = max(1, int(4e6 // (d * d)))

    def integrand(points):
        pts = np.atleast_2d(np.asarray(points, dtype=float))
        if n == 0:
            val = np.sum(np.diag(ys[0]) * np.exp(-lam))
            return np.full(pts.shape[0], val, dtype=complex)
        if pts.shape[1] != n:
            raise ValueError("expected points of dimension %d" % n)
        out = np.empty(pts.shape[0], dtype=complex)
        for lo in range(0, pts.shape[0], max_block):
            chunk = pts[lo:lo + max_block]
            bounds = np.concatenate(
                [np.zeros((chunk.shape[0], 1)), chunk, np.ones((chunk.shape[0], 1))],
                axis=1)
            gaps = np.diff(bounds, axis=1)
            acc = ys[0][None, :, :] * np.exp(-np.outer(gaps[:, 0], lam))[:, None, :]
            for k in range(1, n + 1):
                factor = ys[k][None, :, :] * np.exp(-np.outer(gaps[:, k], lam))[:, None, :]
                acc = acc @ factor
            out[lo:lo + max_block] = np.einsum("bii->b", acc)
        return out

    return integrand


# ---------------------------------------------------------------------------
# simplex quadrature


class QuadKind(enum.Enum):
    GaussTensorDuffy = "gauss"
    MonteCarlo = "mc"


@dataclass(frozen=True)
class SimplexQuadratureRule:
    """Cubature rule on the ordered simplex Delta_n.

    kind 'gauss' uses a tensor Gauss-Legendre rule of the given order mapped
    through the ordered Duffy transform; kind 'mc' averages the integrand
    over seeded sorted-uniform samples.  vectorized marks integrands that
    accept a (B, n) batch of points.
    """

    kind: QuadKind
    order_or_samples: int
    seed: int = 0
    vectorized: bool = False

    def __post_init__(self):
        kind = self.kind
        if isinstance(kind, str):
            kind = QuadKind(kind)
            object.__setattr__(self, "kind", kind)
        if self.order_or_samples < 1:
            raise ValueError("order_or_samples must be positive")


def gauss_legendre_01(order):
    """Gauss-Legendre nodes and weights on [0, 1]."""
    x, w = np.polynomial.legendre.leggauss(order)
    return (x + 1.0) / 2.0, w / 2.0


def _duffy_points(order, n):
    u, w = gauss_legendre_01(order)
    grids = np.meshgrid(*([u] * n), indexing="ij")
    upts = np.stack([g.reshape(-1) for g in grids], axis=1)
    wgrids = np.meshgrid(*([w] * n), indexing="ij")
    wts = np.prod(np.stack([g.reshape(-1) for g in wgrids], axis=1), axis=1)
    # ordered map s_k = prod_{j >= k} u_j, jacobian prod_j u_j^{j-1} (1-based)
    s = np.cumprod(upts[:, ::-1], axis=1)[:, ::-1]
    jac = np.prod(upts ** np.arange(n)[None, :], axis=1)
    return s, wts * jac


def _eval_integrand(integrand, pts, vectorized):
    if vectorized:
        return np.asarray(integrand(pts), dtype=complex).reshape(-1)
    return np.array([integrand(p) for p in pts], dtype=complex)


def simplex_quadrature(integrand, n, rule):
    """Integrate over the ordered simplex Delta_n.

    Returns (value, error_estimate).  For the Gauss path the estimate is
    the difference against a lower-order rule; for Monte Carlo it is the
    standard error of the mean.  The Gauss path rejects n > 6 (tensor cost).
    """
    if n < 0:
        raise ValueError("degree must be >= 0")
    if n == 0:
        pts = np.zeros((1, 0))
        val = _eval_integrand(integrand, pts, rule.vectorized)[0]
        return complex(val), 0.0

    if rule.kind is QuadKind.GaussTensorDuffy:
        if n > 6:
            raise ValueError("Gauss tensor rule rejected for n > 6 (cost guard)")
        order = int(rule.order_or_samples)
        s, w = _duffy_points(order, n)
        vals = _eval_integrand(integrand, s, rule.vectorized)
        value = complex(np.dot(w, vals))
        low = max(1, order - 2)
        s2, w2 = _duffy_points(low, n)
        vals2 = _eval_integrand(integrand, s2, rule.vectorized)
        value_low = complex(np.dot(w2, vals2))
        return value, abs(value - value_low)

    rng = np.random.default_rng(rule.seed)
    total = int(rule.order_or_samples)
    batch = max(1, min(total, int(2e5)))
    nfact = math.factorial(n)
    count = 0
    acc = 0.0 + 0.0j
    acc_sq = 0.0
    while count < total:
        take = min(batch, total - count)
        pts = np.sort(rng.random((take, n)), axis=1)
        vals = _eval_integrand(integrand, pts, rule.vectorized)
        acc += vals.sum()
        acc_sq += float(np.sum(np.abs(vals) ** 2))
        count += take
    mean = acc / count
    if count > 1:
        var = max(0.0, (acc_sq / count - abs(mean) ** 2) * count / (count - 1))
        stderr = math.sqrt(var / count) / nfact
    else:
        stderr = float("inf")
    return mean / nfact, stderr


# ---------------------------------------------------------------------------
# nested indefinite integration on Gauss nodes (for iterated Dyson integrals)


def indefinite_integration_matrix(order):
    """Spectral integration on Gauss-Legendre nodes of [0, 1].

    Returns (nodes, weights, Q) where (Q @ f)(i) approximates the integral
    of f from 0 to node i, exactly for polynomials of degree < order.
    """
    u, w = gauss_legendre_01(order)
    # Vandermonde in shifted Legendre polynomials
    v = np.empty((order, order))
    for k in range(order):
        coeff = np.zeros(k + 1)
        coeff[k] = 1.0
        v[:, k] = np.polynomial.legendre.legval(2 * u - 1, coeff)
    # antiderivative of shifted P_k vanishing at 0
    a = np.empty((order, order))
    a[:, 0] = u
    for k in range(1, order):
        up = np.zeros(k + 2)
        up[k + 1] = 1.0
        down = np.zeros(k)
        down[k - 1] = 1.0
        a[:, k] = (np.polynomial.legendre.legval(2 * u - 1, up)
                   - np.polynomial.legendre.legval(2 * u - 1, down)) / (2 * (2 * k + 1))
    q = a @ np.linalg.inv(v)
    return u, w, q
