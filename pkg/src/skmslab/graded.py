"""Z2-graded matrix algebra.

The grading is Ad(Gamma) for a selfadjoint unitary Gamma != 1.  Elements
split into an even part commuting with Gamma and an odd part anticommuting
with it.  The graded commutator agrees with the commutator unless both
arguments are odd, where it is the anticommutator; on mixed elements it is
the bilinear extension.
"""

import enum

import numpy as np

from .errors import DimensionMismatch


class Parity(enum.Enum):
    EVEN = "even"
    ODD = "odd"
    MIXED = "mixed"


def as_matrix(x):
    """Return the underlying square complex ndarray of x."""
    if isinstance(x, AlgebraElement):
        return x.entries
    m = np.asarray(x, dtype=complex)
    if m.ndim != 2 or m.shape[0] != m.shape[1]:
        raise DimensionMismatch("expected a square matrix, got shape %s" % (m.shape,))
    return m


def operator_norm(x):
    """Largest singular value of x."""
    return float(np.linalg.norm(as_matrix(x), 2))


class GradingOperator:
    """Selfadjoint unitary involution defining the grading.

    Validates Gamma = Gamma*, Gamma^2 = 1 and Gamma != 1 at construction;
    the stored matrix is read-only.
    """

    def __init__(self, matrix, tol=1e-12):
        m = np.array(matrix, dtype=complex)
        if m.ndim != 2 or m.shape[0] != m.shape[1]:
            raise DimensionMismatch("grading operator must be square, got shape %s" % (m.shape,))
        d = m.shape[0]
        if np.linalg.norm(m - m.conj().T) > tol * max(1.0, np.linalg.norm(m)):
            raise ValueError("grading operator is not selfadjoint")
        if np.linalg.norm(m @ m - np.eye(d)) > tol * d:
            raise ValueError("grading operator is not an involution")
        if np.linalg.norm(m - np.eye(d)) <= tol * d:
            raise ValueError("grading operator equals the identity; grading is trivial")
        m.setflags(write=False)
        self.matrix = m
        self.dim = d

    def conjugate(self, x):
        """gamma(x) = Gamma x Gamma."""
        if isinstance(x, AlgebraElement):
            return AlgebraElement(self.matrix @ x.entries @ self.matrix, self)
        return self.matrix @ as_matrix(x) @ self.matrix

    def classify(self, x, tol=1e-10):
        m = as_matrix(x)
        g = self.matrix @ m @ self.matrix
        scale = max(1.0, np.linalg.norm(m))
        even = np.linalg.norm(m - g) <= tol * scale
        odd = np.linalg.norm(m + g) <= tol * scale
        if even and not odd:
            return Parity.EVEN
        if odd and not even:
            return Parity.ODD
        if even and odd:
            # only the zero matrix is both
            return Parity.EVEN
        return Parity.MIXED

    def element(self, entries):
        return AlgebraElement(entries, self)

    def unit(self):
        return AlgebraElement(np.eye(self.dim), self)


class AlgebraElement:
    """Square complex matrix carrying its grading; parity cached on first use."""

    __slots__ = ("entries", "grading", "_parity")

    def __init__(self, entries, grading):
        m = np.array(entries, dtype=complex)
        if m.ndim != 2 or m.shape[0] != m.shape[1]:
            raise DimensionMismatch("element must be square, got shape %s" % (m.shape,))
        if m.shape[0] != grading.dim:
            raise DimensionMismatch(
                "element dimension %d does not match grading dimension %d"
                % (m.shape[0], grading.dim))
        m.setflags(write=False)
        self.entries = m
        self.grading = grading
        self._parity = None

    @property
    def parity(self):
        if self._parity is None:
            self._parity = self.grading.classify(self.entries)
        return self._parity

    @property
    def dim(self):
        return self.entries.shape[0]

    def adjoint(self):
        return AlgebraElement(self.entries.conj().T, self.grading)

    def norm(self):
        return operator_norm(self.entries)

    def _wrap(self, m):
        return AlgebraElement(m, self.grading)

    def __matmul__(self, other):
        return self._wrap(self.entries @ as_matrix(other))

    def __rmatmul__(self, other):
        return self._wrap(as_matrix(other) @ self.entries)

    def __add__(self, other):
        return self._wrap(self.entries + as_matrix(other))

    def __sub__(self, other):
        return self._wrap(self.entries - as_matrix(other))

    def __neg__(self):
        return self._wrap(-self.entries)

    def __mul__(self, scalar):
        return self._wrap(self.entries * complex(scalar))

    __rmul__ = __mul__

    def __array__(self, dtype=None, copy=None):
        if dtype is None:
            return self.entries
        return self.entries.astype(dtype)

    def __repr__(self):
        return "AlgebraElement(dim=%d, parity=%s)" % (self.dim, self.parity.value)


def _split_matrices(x, grading):
    m = as_matrix(x)
    g = grading.conjugate(m)
    return (m + g) / 2, (m - g) / 2


def parity_split(x, grading=None):
    """Split x into (even, odd) parts; even + odd reconstructs x."""
    if grading is None:
        grading = x.grading
    even, odd = _split_matrices(x, grading)
    if isinstance(x, AlgebraElement):
        return AlgebraElement(even, grading), AlgebraElement(odd, grading)
    return even, odd


def graded_commutator(x, y, grading=None):
    """[x, y] = xy - (-1)^{|x||y|} yx on homogeneous parts, extended bilinearly.

    Equivalent closed form: xy - y_even x - y_odd gamma(x).
    """
    if grading is None:
        grading = x.grading if isinstance(x, AlgebraElement) else y.grading
    xm = as_matrix(x)
    ym = as_matrix(y)
    if xm.shape != ym.shape:
        raise DimensionMismatch("graded commutator operands differ in shape")
    y_even, y_odd = _split_matrices(ym, grading)
    out = xm @ ym - y_even @ xm - y_odd @ grading.conjugate(xm)
    if isinstance(x, AlgebraElement) or isinstance(y, AlgebraElement):
        return AlgebraElement(out, grading)
    return out


def supertrace(x, grading):
    """Tr(Gamma x); vanishes on odd elements."""
    return complex(np.trace(grading.matrix @ as_matrix(x)))
