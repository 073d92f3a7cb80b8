"""Exact rational linear algebra on lists of Fractions.

Thin wrappers around sympy's DomainMatrix over QQ; everything enters and
leaves as ``fractions.Fraction`` so callers never see gmpy/sympy types.
"""

from fractions import Fraction

from sympy import QQ
from sympy.polys.matrices import DomainMatrix


def _to_dm(rows):
    rows = [list(r) for r in rows]
    m = len(rows)
    n = len(rows[0]) if m else 0
    data = [[QQ(int(Fraction(x).numerator), int(Fraction(x).denominator)) for x in r] for r in rows]
    return DomainMatrix(data, (m, n), QQ)


def _frac(x):
    return Fraction(int(x.numerator), int(x.denominator))


def _from_dm(dm):
    return [[_frac(x) for x in row] for row in dm.to_list()]


def rank(rows):
    rows = list(rows)
    if not rows or not len(rows[0]):
        return 0
    return _to_dm(rows).rank()


def nullspace(rows):
    """Basis of {x : rows @ x = 0}, as a list of vectors."""
    rows = list(rows)
    ns = _to_dm(rows).nullspace()
    if ns.shape[0] == 0:
        return []
    return _from_dm(ns)


def row_space(rows):
    """Nonzero rows of the reduced row echelon form."""
    rref, pivots = _to_dm(rows).rref()
    return _from_dm(rref)[: len(pivots)]


def det(rows):
    return _frac(_to_dm(rows).det())


def inv(rows):
    return _from_dm(_to_dm(rows).inv())


def matmul(a, b):
    return _from_dm(_to_dm(a) * _to_dm(b))


def identity(n):
    return [[Fraction(int(i == j)) for j in range(n)] for i in range(n)]


def transpose(a):
    return [list(col) for col in zip(*a)]


def matvec(a, v):
    return [sum((x * y for x, y in zip(row, v)), Fraction(0)) for row in a]


def is_positive_definite(rows):
    """Sylvester's criterion, exact."""
    n = len(rows)
    return all(det([r[:k] for r in rows[:k]]) > 0 for k in range(1, n + 1))


def ldl_signature(rows):
    """Inertia (n_pos, n_neg, n_zero) of a symmetric rational matrix.

    Symmetric Gaussian elimination with the usual 2x2 pivot trick when a
    diagonal entry vanishes; exact.
    """
    a = [[Fraction(x) for x in r] for r in rows]
    n = len(a)
    idx = list(range(n))
    pos = neg = 0
    while idx:
        piv = next((i for i in idx if a[i][i] != 0), None)
        if piv is None:
            pair = next(((i, j) for i in idx for j in idx if i < j and a[i][j] != 0), None)
            if pair is None:
                break
            i, j = pair
            # replace row/col i by i + j so the diagonal becomes 2*a_ij
            for k in range(n):
                a[i][k] += a[j][k]
            for k in range(n):
                a[k][i] += a[k][j]
            piv = i
        d = a[piv][piv]
        if d > 0:
            pos += 1
        else:
            neg += 1
        rest = [i for i in idx if i != piv]
        for i in rest:
            f = a[i][piv] / d
            if f:
                for k in rest:
                    a[i][k] -= f * a[piv][k]
        idx = rest
    return pos, neg, n - pos - neg


def gram_schmidt(vectors, inner):
    """Orthogonal (not normalized) basis of span(vectors), exact."""
    out = []
    for v in vectors:
        w = list(v)
        for u in out:
            c = inner(w, u) / inner(u, u)
            w = [a - c * b for a, b in zip(w, u)]
        if any(w):
            out.append(w)
    return out
