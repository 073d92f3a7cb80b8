"""Constant-coefficient exterior algebra on R^n with exact rational coefficients.

A k-form is stored sparsely as a map from strictly increasing 1-based index
tuples to nonzero Fractions.  ``e(8, 1, 2)`` is dx1^dx2 on R^8.  Operator
``^`` is the wedge product.
"""

from dataclasses import dataclass
from fractions import Fraction
from itertools import combinations
from math import isqrt

from . import _linalg as la

MAX_DIM = 9


class DimensionError(ValueError):
    pass


def _perm_sign(seq):
    """Sign of the permutation sorting ``seq`` (entries distinct)."""
    s = 1
    seq = list(seq)
    for i in range(len(seq)):
        for j in range(i + 1, len(seq)):
            if seq[i] > seq[j]:
                s = -s
            elif seq[i] == seq[j]:
                return 0
    return s


def as_fraction(x):
    if isinstance(x, Fraction):
        return x
    if isinstance(x, float):
        raise TypeError("floats are not exact scalars; pass a Fraction or int")
    return Fraction(x)


class KForm:
    """Immutable sparse alternating form of fixed degree on R^dim."""

    __slots__ = ("dim", "degree", "_coeffs", "_hash")

    def __init__(self, dim, degree, coeffs=None):
        if not 1 <= dim <= MAX_DIM:
            raise DimensionError(f"dim must be in 1..{MAX_DIM}, got {dim}")
        if not 0 <= degree <= dim:
            raise DimensionError(f"degree {degree} out of range for dim {dim}")
        clean = {}
        for key, val in (coeffs or {}).items():
            key = tuple(key)
            if len(key) != degree:
                raise DimensionError(f"index {key} has wrong length for degree {degree}")
            if any(not 1 <= i <= dim for i in key):
                raise DimensionError(f"index {key} out of range for dim {dim}")
            sgn = _perm_sign(key)
            if sgn == 0:
                continue
            val = as_fraction(val) * sgn
            skey = tuple(sorted(key))
            clean[skey] = clean.get(skey, Fraction(0)) + val
        self.dim = dim
        self.degree = degree
        self._coeffs = {k: v for k, v in sorted(clean.items()) if v != 0}
        self._hash = None

    @classmethod
    def zero(cls, dim, degree):
        return cls(dim, degree)

    @property
    def coeffs(self):
        return dict(self._coeffs)

    def items(self):
        return self._coeffs.items()

    def __getitem__(self, key):
        key = tuple(key)
        sgn = _perm_sign(key)
        return sgn * self._coeffs.get(tuple(sorted(key)), Fraction(0))

    def __len__(self):
        return len(self._coeffs)

    def is_zero(self):
        return not self._coeffs

    def __eq__(self, other):
        if isinstance(other, int) and other == 0:
            return self.is_zero()
        if not isinstance(other, KForm):
            return NotImplemented
        return (self.dim, self.degree, self._coeffs) == (other.dim, other.degree, other._coeffs)

    def __hash__(self):
        if self._hash is None:
            self._hash = hash((self.dim, self.degree, tuple(self._coeffs.items())))
        return self._hash

    def _check_same(self, other):
        if (self.dim, self.degree) != (other.dim, other.degree):
            raise DimensionError(
                f"cannot combine ({self.dim},{self.degree}) with ({other.dim},{other.degree})")

    def __add__(self, other):
        if isinstance(other, int) and other == 0:
            return self
        self._check_same(other)
        out = dict(self._coeffs)
        for k, v in other._coeffs.items():
            out[k] = out.get(k, Fraction(0)) + v
        return KForm(self.dim, self.degree, out)

    __radd__ = __add__

    def __neg__(self):
        return KForm(self.dim, self.degree, {k: -v for k, v in self._coeffs.items()})

    def __sub__(self, other):
        return self + (-other)

    def __mul__(self, c):
        if isinstance(c, KForm):
            return NotImplemented
        c = as_fraction(c)
        return KForm(self.dim, self.degree, {k: c * v for k, v in self._coeffs.items()})

    __rmul__ = __mul__

    def __truediv__(self, c):
        return self * (1 / as_fraction(c))

    def __xor__(self, other):
        return wedge(self, other)

    def __repr__(self):
        if not self._coeffs:
            return f"KForm({self.dim}, {self.degree}, 0)"
        terms = " + ".join(f"{v}*e{''.join(map(str, k))}" for k, v in self._coeffs.items())
        return f"KForm({self.dim}, {self.degree}, {terms})"

    def to_records(self):
        return [{"indices": list(k), "numerator": v.numerator, "denominator": v.denominator}
                for k, v in self._coeffs.items()]

    @classmethod
    def from_records(cls, dim, degree, records):
        return cls(dim, degree, {tuple(r["indices"]): Fraction(r["numerator"], r["denominator"])
                                 for r in records})

    def vector(self):
        """Dense coefficient vector in lexicographic basis order."""
        return [self[I] for I in basis_indices(self.dim, self.degree)]

    @classmethod
    def from_vector(cls, dim, degree, vec):
        return cls(dim, degree, dict(zip(basis_indices(dim, degree), vec)))


def basis_indices(dim, degree):
    return list(combinations(range(1, dim + 1), degree))


def e(dim, *indices):
    """Basis monomial dx_{i1}^...^dx_{ik} (indices need not be sorted)."""
    return KForm(dim, len(indices), {tuple(indices): 1})


def volume(dim):
    return e(dim, *range(1, dim + 1))


def one(dim):
    return KForm(dim, 0, {(): 1})


def wedge(a, b):
    if a.dim != b.dim:
        raise DimensionError(f"wedge of forms on R^{a.dim} and R^{b.dim}")
    deg = a.degree + b.degree
    if deg > a.dim:
        # degree overflow is the zero form, by convention not an error
        return KForm(a.dim, a.dim)
    out = {}
    for I, x in a.items():
        sI = set(I)
        for J, y in b.items():
            if sI.intersection(J):
                continue
            sgn = sum(1 for i in I for j in J if i > j)
            key = tuple(sorted(I + J))
            val = x * y if sgn % 2 == 0 else -x * y
            out[key] = out.get(key, Fraction(0)) + val
    return KForm(a.dim, deg, out)


def wedge_all(*forms):
    out = forms[0]
    for f in forms[1:]:
        out = wedge(out, f)
    return out


def contract(v, a):
    """Interior product i_v a."""
    if len(v) != a.dim:
        raise DimensionError(f"vector of length {len(v)} on R^{a.dim}")
    if a.degree == 0:
        return KForm(a.dim, 0)
    v = [as_fraction(x) for x in v]
    out = {}
    for I, x in a.items():
        for p, i in enumerate(I):
            c = v[i - 1]
            if c:
                key = I[:p] + I[p + 1:]
                val = c * x if p % 2 == 0 else -c * x
                out[key] = out.get(key, Fraction(0)) + val
    return KForm(a.dim, a.degree - 1, out)


def coordinate_vector(dim, i):
    return [Fraction(int(j == i)) for j in range(1, dim + 1)]


def inner(a, b):
    """Euclidean inner product: the monomials e^I are orthonormal."""
    a._check_same(b)
    return sum((x * b._coeffs.get(I, 0) for I, x in a.items()), Fraction(0))


def norm2(a):
    return inner(a, a)


@dataclass(frozen=True)
class Metric:
    entries: tuple

    def __post_init__(self):
        rows = tuple(tuple(as_fraction(x) for x in r) for r in self.entries)
        object.__setattr__(self, "entries", rows)
        n = len(rows)
        if any(len(r) != n for r in rows):
            raise DimensionError("metric must be square")
        if any(rows[i][j] != rows[j][i] for i in range(n) for j in range(n)):
            raise ValueError("metric is not symmetric")
        if not la.is_positive_definite(rows):
            raise ValueError("metric is not positive definite")

    @property
    def dim(self):
        return len(self.entries)

    @classmethod
    def euclidean(cls, n):
        return cls(tuple(map(tuple, la.identity(n))))

    def matrix(self):
        return [list(r) for r in self.entries]

    @property
    def is_euclidean(self):
        n = self.dim
        return all(self.entries[i][j] == (i == j) for i in range(n) for j in range(n))


def _exact_sqrt(q):
    q = as_fraction(q)
    n, d = isqrt(q.numerator), isqrt(q.denominator)
    if n * n != q.numerator or d * d != q.denominator:
        raise ValueError(f"sqrt({q}) is irrational; Hodge star needs a rational volume factor")
    return Fraction(n, d)


def _minor(m, rows, cols):
    return la.det([[m[r - 1][c - 1] for c in cols] for r in rows]) if rows else Fraction(1)


def hodge_star(a, g=None, orientation=1, root=None):
    """Hodge star, characterized by  x ^ *y = <x, y>_g vol_g.

    ``g`` holds g(e_i, e_j); None means Euclidean.  The volume form is
    orientation * sqrt(det g) dx_1^...^dx_n, so det g must be a rational
    square unless ``root`` supplies the volume factor explicitly.
    """
    n = a.dim
    if orientation not in (1, -1):
        raise ValueError("orientation must be +1 or -1")
    full = tuple(range(1, n + 1))
    if g is not None and g.is_euclidean and root is None:
        g = None
    if g is None:
        factor = orientation * (1 if root is None else as_fraction(root))
        out = {}
        for I, x in a.items():
            comp = tuple(i for i in full if i not in I)
            out[comp] = factor * _perm_sign(I + comp) * x
        return KForm(n, n - a.degree, out)
    if g.dim != n:
        raise DimensionError(f"metric of dim {g.dim} on R^{n}")
    gm = g.matrix()
    if root is None:
        root = _exact_sqrt(la.det(gm))
    ginv = la.inv(gm)
    out = {}
    for I, x in a.items():
        for K in basis_indices(n, a.degree):
            gik = _minor(ginv, I, K)
            if gik:
                comp = tuple(i for i in full if i not in K)
                out[comp] = out.get(comp, Fraction(0)) + orientation * root * gik * _perm_sign(K + comp) * x
    return KForm(n, n - a.degree, out)


def metric_inner(a, b, g=None):
    """Inner product induced by g on k-forms: <e^I, e^K> = det(g^{-1}[I, K])."""
    if g is None or g.is_euclidean:
        return inner(a, b)
    a._check_same(b)
    ginv = la.inv(g.matrix())
    total = Fraction(0)
    for I, x in a.items():
        for K, y in b.items():
            total += x * y * _minor(ginv, I, K)
    return total


def evaluate(a, vectors):
    """a(v_1, ..., v_k) for k = degree."""
    if len(vectors) != a.degree:
        raise DimensionError(f"{a.degree}-form evaluated on {len(vectors)} vectors")
    cols = [[as_fraction(x) for x in v] for v in vectors]
    total = Fraction(0)
    for I, x in a.items():
        total += x * la.det([[cols[c][i - 1] for c in range(len(cols))] for i in I]) if I else x
    return total


def pullback_rect(a, m):
    """Pull back along the linear map R^k -> R^n given by the n x k matrix m."""
    n = len(m)
    if n != a.dim:
        raise DimensionError(f"matrix with {n} rows on R^{a.dim}")
    k = len(m[0])
    if a.degree > k:
        return KForm(k, k) if k else KForm(1, 0)
    m = [[as_fraction(x) for x in r] for r in m]
    out = {}
    for J in basis_indices(k, a.degree):
        val = Fraction(0)
        for I, x in a.items():
            val += x * la.det([[m[i - 1][j - 1] for j in J] for i in I]) if I else x
        if val:
            out[J] = val
    return KForm(k, a.degree, out)


def pullback(a, m):
    """A^* a, i.e. (A^* a)(v, ...) = a(Av, ...), for a square matrix A."""
    if len(m) != a.dim or any(len(r) != a.dim for r in m):
        raise DimensionError(f"pullback on R^{a.dim} needs a {a.dim}x{a.dim} matrix")
    return pullback_rect(a, m)


@dataclass(frozen=True)
class OrientedPlane:
    """Oriented k-plane in R^dim spanned by the given vectors (taken as an
    ordered basis; ``orientation`` = -1 flips it)."""

    dim: int
    vectors: tuple
    orientation: int = 1

    def __post_init__(self):
        vecs = tuple(tuple(as_fraction(x) for x in v) for v in self.vectors)
        object.__setattr__(self, "vectors", vecs)
        if any(len(v) != self.dim for v in vecs):
            raise DimensionError("spanning vector has wrong length")
        if self.orientation not in (1, -1):
            raise ValueError("orientation must be +1 or -1")
        if la.rank(vecs) != len(vecs):
            raise ValueError("degenerate plane: spanning vectors are dependent")

    @property
    def k(self):
        return len(self.vectors)

    def matrix(self):
        """dim x k matrix whose columns span the plane (orientation folded in)."""
        cols = [list(v) for v in self.vectors]
        if self.orientation == -1:
            cols[0] = [-x for x in cols[0]]
        return la.transpose(cols)

    def gram(self):
        return [[sum(a * b for a, b in zip(u, v)) for v in self.vectors] for u in self.vectors]

    @classmethod
    def coordinate(cls, dim, indices, orientation=1):
        return cls(dim, tuple(tuple(coordinate_vector(dim, i)) for i in indices), orientation)


def restrict(a, plane):
    """Restriction of ``a`` to the plane, in the coordinates of its spanning basis."""
    if plane.dim != a.dim:
        raise DimensionError(f"plane in R^{plane.dim}, form on R^{a.dim}")
    if a.degree > plane.k:
        return KForm(plane.k, plane.k)
    return pullback_rect(a, plane.matrix())


