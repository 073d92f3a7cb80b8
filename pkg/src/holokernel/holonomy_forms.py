"""Flat-model Spin(7), G2 and SU(3) forms and the algebra built on them.

Coordinates
-----------
R^8: (x1..x4, y1..y4) = indices 1..8, oriented by dx1234 dy1234.
R^7: (y1, y2, y3, x1..x4) = indices 1..7, oriented by dy123 dx1234.
R^6: (y2, y3, x1..x4) = indices 1..6, the slice s = y1 of R^7.

On the x-factor the self-dual forms are taken in the order
    w1 = dx12 + dx34,  w2 = dx14 + dx23,  w3 = dx13 + dx42
and on the y-factor of R^8 in the order
    w1' = dy12 + dy34,  w2' = dy13 + dy42,  w3' = dy14 + dy23.
Both orderings are forced: with any orientation-preserving identification
R^3 -> Lambda^+ the 3-form phi0 is the split (indefinite) G2 form, and with
an orientation-preserving w <-> w' the 4-form Omega0 is the split Spin(7)
form.  With these choices *phi0 = sigma0 in the Euclidean metric and the
2-form eigenvalue splittings come out as 3/-1 (dim 8) and 2/-1 (dim 7).
"""

from dataclasses import dataclass
from fractions import Fraction
from functools import lru_cache
from math import isqrt
import numpy as np
from scipy.linalg import expm
from sympy import integer_nthroot

from . import _linalg as la
from .config import CAYLEY_SAMPLES, DEFAULT_SEED
from .exterior_algebra import (
    DimensionError, KForm, Metric, OrientedPlane, basis_indices, contract,
    coordinate_vector, e, hodge_star, inner, metric_inner, norm2, pullback,
    restrict, volume, wedge, wedge_all,
)

# sigma = rho2 ^ ds + c * omega ^ omega; c is pinned by sigma = *phi after lifting
OMEGA_SQUARED_FACTOR = Fraction(1, 2)


def _sd_x(dim, a, b, c, d):
    return [e(dim, a, b) + e(dim, c, d), e(dim, a, d) + e(dim, b, c), e(dim, a, c) + e(dim, d, b)]


def _sd_y(dim, a, b, c, d):
    return [e(dim, a, b) + e(dim, c, d), e(dim, a, c) + e(dim, d, b), e(dim, a, d) + e(dim, b, c)]


def _standard_omega():
    w, wp = _sd_x(8, 1, 2, 3, 4), _sd_y(8, 5, 6, 7, 8)
    out = e(8, 1, 2, 3, 4) + e(8, 5, 6, 7, 8)
    for a, b in zip(w, wp):
        out = out + wedge(a, b)
    return out


def _standard_phi_sigma():
    w = _sd_x(7, 4, 5, 6, 7)
    phi = e(7, 1, 2, 3)
    for i in range(3):
        phi = phi + wedge(e(7, i + 1), w[i])
    sigma = (wedge(w[0], e(7, 2, 3)) + wedge(w[1], e(7, 3, 1)) + wedge(w[2], e(7, 1, 2))
             + e(7, 4, 5, 6, 7))
    return phi, sigma


def _standard_su3():
    w = _sd_x(6, 3, 4, 5, 6)
    omega = e(6, 1, 2) + w[0]
    rho1 = wedge(e(6, 1), w[1]) + wedge(e(6, 2), w[2])
    rho2 = wedge(e(6, 2), w[1]) - wedge(e(6, 1), w[2])
    return omega, rho1, rho2


OMEGA0 = _standard_omega()
PHI0, SIGMA0 = _standard_phi_sigma()
KAHLER0, RHO1_0, RHO2_0 = _standard_su3()
# I e1 = e2, I e3 = e4, I e5 = e6
I0 = tuple(tuple(Fraction(v) for v in row) for row in [
    [0, -1, 0, 0, 0, 0], [1, 0, 0, 0, 0, 0],
    [0, 0, 0, -1, 0, 0], [0, 0, 1, 0, 0, 0],
    [0, 0, 0, 0, 0, -1], [0, 0, 0, 0, 1, 0]])

# (y1, y2, y3, x1..x4, t) of the cylinder over R^7  ->  (x1..x4, y1..y4) of R^8:
# y1 -> y3, y2 -> -y2, y3 -> y1, t -> y4.
LIFT_RELABEL = tuple(tuple(Fraction(v) for v in row) for row in [
    [0, 0, 0, 1, 0, 0, 0, 0],
    [0, 0, 0, 0, 1, 0, 0, 0],
    [0, 0, 0, 0, 0, 1, 0, 0],
    [0, 0, 0, 0, 0, 0, 1, 0],
    [0, 0, 1, 0, 0, 0, 0, 0],
    [0, -1, 0, 0, 0, 0, 0, 0],
    [1, 0, 0, 0, 0, 0, 0, 0],
    [0, 0, 0, 0, 0, 0, 0, 1]])


def _mat(m):
    return tuple(tuple(Fraction(x) for x in r) for r in m)


def _check_frame(frame, n):
    if len(frame) != n or any(len(r) != n for r in frame):
        raise DimensionError(f"frame must be {n}x{n}")
    if la.det(frame) <= 0:
        raise ValueError("frame must have positive determinant")


def act(a_mat, form):
    """Natural left action of GL on forms: A.form = (A^{-1})^* form."""
    return pullback(form, la.inv(a_mat))


def embed(form, dim, offset):
    """Push a form on R^k into R^dim by shifting every index by ``offset``."""
    return KForm(dim, form.degree, {tuple(i + offset for i in I): x for I, x in form.items()})


def block_diag(*blocks):
    n = sum(len(b) for b in blocks)
    out = [[Fraction(0)] * n for _ in range(n)]
    o = 0
    for b in blocks:
        for i, r in enumerate(b):
            for j, x in enumerate(r):
                out[o + i][o + j] = Fraction(x)
        o += len(b)
    return out


@dataclass(frozen=True)
class Spin7Model:
    """Spin(7) 4-form constructed as pullback(OMEGA0, frame)."""

    omega: KForm
    frame: tuple

    def __post_init__(self):
        object.__setattr__(self, "frame", _mat(self.frame))
        _check_frame(self.frame, 8)
        if pullback(OMEGA0, self.frame) != self.omega:
            raise ValueError("omega is not the pullback of OMEGA0 by the frame")

    dim = 8

    @classmethod
    def from_frame(cls, frame):
        return cls(pullback(OMEGA0, frame), frame)

    def metric(self):
        f = [list(r) for r in self.frame]
        return Metric(tuple(map(tuple, la.matmul(la.transpose(f), f))))

    def volume_factor(self):
        return la.det(self.frame)

    def pullback(self, a):
        return Spin7Model(pullback(self.omega, a), la.matmul(self.frame, a))


@dataclass(frozen=True)
class G2Model:
    phi: KForm
    sigma: KForm
    frame: tuple

    def __post_init__(self):
        object.__setattr__(self, "frame", _mat(self.frame))
        _check_frame(self.frame, 7)
        if pullback(PHI0, self.frame) != self.phi or pullback(SIGMA0, self.frame) != self.sigma:
            raise ValueError("(phi, sigma) is not the pullback of the standard pair by the frame")

    dim = 7

    @classmethod
    def from_frame(cls, frame):
        return cls(pullback(PHI0, frame), pullback(SIGMA0, frame), frame)

    def metric(self):
        f = [list(r) for r in self.frame]
        return Metric(tuple(map(tuple, la.matmul(la.transpose(f), f))))

    def volume_factor(self):
        return la.det(self.frame)

    def pullback(self, a):
        return G2Model(pullback(self.phi, a), pullback(self.sigma, a), la.matmul(self.frame, a))


@dataclass(frozen=True)
class SU3Model:
    rho1: KForm
    rho2: KForm
    omega: KForm
    complex_structure: tuple
    frame: tuple

    def __post_init__(self):
        object.__setattr__(self, "frame", _mat(self.frame))
        object.__setattr__(self, "complex_structure", _mat(self.complex_structure))
        _check_frame(self.frame, 6)
        f = [list(r) for r in self.frame]
        if (pullback(RHO1_0, f) != self.rho1 or pullback(RHO2_0, f) != self.rho2
                or pullback(KAHLER0, f) != self.omega):
            raise ValueError("forms are not the pullback of the standard SU(3) data by the frame")
        expect = la.matmul(la.matmul(la.inv(f), [list(r) for r in I0]), f)
        if _mat(expect) != self.complex_structure:
            raise ValueError("complex structure does not match the frame")

    dim = 6

    @classmethod
    def from_frame(cls, frame):
        f = [[Fraction(x) for x in r] for r in frame]
        cs = la.matmul(la.matmul(la.inv(f), [list(r) for r in I0]), f)
        return cls(pullback(RHO1_0, f), pullback(RHO2_0, f), pullback(KAHLER0, f), cs, f)

    def metric(self):
        """g(u, v) = omega(u, I v)."""
        w = two_form_matrix(self.omega)
        return Metric(tuple(map(tuple, la.matmul(w, [list(r) for r in self.complex_structure]))))

    def pullback(self, a):
        return SU3Model.from_frame(la.matmul(self.frame, a))


def standard_models():
    ident = lambda n: la.identity(n)
    return (Spin7Model(OMEGA0, ident(8)), G2Model(PHI0, SIGMA0, ident(7)),
            SU3Model(RHO1_0, RHO2_0, KAHLER0, I0, ident(6)))


def two_form_matrix(w):
    """Skew matrix W with W[i][j] = w(e_i, e_j)."""
    n = w.dim
    out = [[Fraction(0)] * n for _ in range(n)]
    for (i, j), x in w.items():
        out[i - 1][j - 1] = x
        out[j - 1][i - 1] = -x
    return out


def skew_to_two_form(a):
    n = len(a)
    return KForm(n, 2, {(i + 1, j + 1): a[i][j] for i in range(n) for j in range(i + 1, n) if a[i][j]})


# cylinder lifts ------------------------------------------------------------

def cylinder_lift_7to8(m):
    """Omega = phi ^ dt + sigma on R^7 x R_t (t is coordinate 8)."""
    if not isinstance(m, G2Model):
        raise TypeError("expected a G2Model")
    omega = wedge(embed(m.phi, 8, 0), e(8, 8)) + embed(m.sigma, 8, 0)
    frame = la.matmul([list(r) for r in LIFT_RELABEL], block_diag(m.frame, [[1]]))
    return Spin7Model(omega, frame)


def cylinder_lift_6to7(m):
    """phi = omega ^ ds + rho1, sigma = rho2 ^ ds + omega^2 / 2 (s is coordinate 1)."""
    if not isinstance(m, SU3Model):
        raise TypeError("expected an SU3Model")
    ds = e(7, 1)
    w = embed(m.omega, 7, 1)
    phi = wedge(w, ds) + embed(m.rho1, 7, 1)
    sigma = wedge(embed(m.rho2, 7, 1), ds) + OMEGA_SQUARED_FACTOR * wedge(w, w)
    return G2Model(phi, sigma, block_diag([[1]], m.frame))


def lift_pair(phi, sigma):
    """Omega' = sigma' + phi' ^ dt for an arbitrary (3-form, 4-form) pair on R^7."""
    if phi.dim != 7 or sigma.dim != 7 or phi.degree != 3 or sigma.degree != 4:
        raise DimensionError("need a 3-form and a 4-form on R^7")
    return embed(sigma, 8, 0) + wedge(embed(phi, 8, 0), e(8, 8))


# 2-form decompositions ------------------------------------------------------

def _basis_forms(dim, degree):
    return [KForm(dim, degree, {I: 1}) for I in basis_indices(dim, degree)]


def _operator_matrix(fn, dim, degree):
    cols = [fn(b).vector() for b in _basis_forms(dim, degree)]
    return la.transpose(cols)


def _lin(*terms):
    """sum of c * M over (c, M) pairs."""
    n = len(terms[0][1])
    return [[sum(c * m[i][j] for c, m in terms) for j in range(n)] for i in range(n)]


@lru_cache(maxsize=None)
def projector_matrices(m):
    """Projectors on Lambda^2 as matrices acting on coefficient vectors.

    dim 8: {"7", "21"};  dim 7: {"7", "14"};  dim 6: {"1", "6", "8"}.
    """
    ident = la.identity(len(basis_indices(m.dim, 2)))
    if isinstance(m, SU3Model):
        cs = [list(r) for r in m.complex_structure]
        g = m.metric()
        flip = _operator_matrix(lambda b: pullback(b, cs), 6, 2)
        wn = metric_inner(m.omega, m.omega, g)
        line = _operator_matrix(lambda b: m.omega * (metric_inner(b, m.omega, g) / wn), 6, 2)
        p11 = _lin((Fraction(1, 2), ident), (Fraction(1, 2), flip))
        return {"1": line, "6": _lin((Fraction(1, 2), ident), (Fraction(-1, 2), flip)),
                "8": _lin((1, p11), (-1, line))}
    g = m.metric()
    if isinstance(m, Spin7Model):
        form, lo, hi, small, big = m.omega, -1, 3, "7", "21"
    elif isinstance(m, G2Model):
        form, lo, hi, small, big = m.phi, -1, 2, "7", "14"
    else:
        raise TypeError(f"unsupported model {type(m).__name__}")
    star = lambda b: hodge_star(wedge(b, form), g)
    t = _operator_matrix(star, m.dim, 2)
    span = Fraction(1, hi - lo)
    # T has eigenvalue hi on the small part and lo on the big part
    return {small: _lin((span, t), (-span * lo, ident)),
            big: _lin((-span, t), (span * hi, ident))}


def project2(beta, m):
    if beta.degree != 2 or beta.dim != m.dim:
        raise DimensionError(f"need a 2-form on R^{m.dim}")
    v = beta.vector()
    return {k: KForm.from_vector(m.dim, 2, la.matvec(p, v)) for k, p in projector_matrices(m).items()}


def component_basis(m, name):
    """Rational basis of one component (row space of its projector)."""
    p = projector_matrices(m)[name]
    return [KForm.from_vector(m.dim, 2, row) for row in la.row_space(la.transpose(p))]


def seven_square_sum(m, basis=None):
    """sum theta_i ^ theta_i over a metric-orthonormal basis theta_i of the 7-part.

    Exact: an orthogonal basis is used and each square is divided by its norm,
    so no square roots appear.  ``basis`` may supply any spanning set.
    """
    if not isinstance(m, Spin7Model):
        raise TypeError("needs a Spin7Model")
    g = m.metric()
    vecs = [b.vector() for b in (basis or component_basis(m, "7"))]
    ip = lambda a, b: metric_inner(KForm.from_vector(8, 2, a), KForm.from_vector(8, 2, b), g)
    total = KForm(8, 4, {})
    for v in la.gram_schmidt(vecs, ip):
        t = KForm.from_vector(8, 2, v)
        total = total + wedge(t, t) / ip(v, v)
    return total


def spin7_rotation_generators():
    """2-forms e_ij +/- e_kl lying in the 21-dimensional component of OMEGA0.

    As skew matrices they satisfy A^3 = -A, so exp(tA) = I + sin t A +
    (1 - cos t) A^2 is rational at Pythagorean angles.
    """
    return list(_rotation_generators())


@lru_cache(maxsize=1)
def _rotation_generators():
    m = standard_models()[0]
    p21 = projector_matrices(m)["21"]
    out = []
    pairs = basis_indices(8, 2)
    for a in range(len(pairs)):
        for b in range(a + 1, len(pairs)):
            if set(pairs[a]) & set(pairs[b]):
                continue
            for s in (1, -1):
                f = e(8, *pairs[a]) + s * e(8, *pairs[b])
                if la.matvec(p21, f.vector()) == f.vector():
                    out.append(f)
    return tuple(out)


def pythagorean_rotation(gen, m, n):
    """exp(tA) for A = skew(gen) at cos t = (m^2 - n^2)/(m^2 + n^2)."""
    a = two_form_matrix(gen)
    r = m * m + n * n
    c, s = Fraction(m * m - n * n, r), Fraction(2 * m * n, r)
    a2 = la.matmul(a, a)
    ident = la.identity(len(a))
    return [[ident[i][j] + s * a[i][j] + (1 - c) * a2[i][j] for j in range(len(a))]
            for i in range(len(a))]


def exact_spin7_element(rng, factors=4):
    gens = spin7_rotation_generators()
    out = la.identity(8)
    for _ in range(factors):
        g = gens[rng.randrange(len(gens))]
        out = la.matmul(out, pythagorean_rotation(g, rng.randint(1, 4), rng.randint(1, 4)))
    return out


def random_spin7_float(rng, count, scale=np.pi):
    """Float Spin(7) elements exp(A) for Gaussian A in the 21-dim algebra."""
    gens = np.array([np.array(two_form_matrix(g), dtype=float) for g in spin7_rotation_generators()])
    out = np.empty((count, 8, 8))
    for k in range(count):
        coef = rng.normal(size=len(gens)) * scale / np.sqrt(len(gens))
        out[k] = expm(np.tensordot(coef, gens, axes=1))
    return out


# planes ---------------------------------------------------------------------

@dataclass(frozen=True)
class PlaneClass:
    kind: str
    defect: tuple


def _top_coeff(form):
    return form[tuple(range(1, form.degree + 1))] if form.degree else Fraction(0)


def _rational_sqrt(q):
    if q < 0:
        return None
    n, d = isqrt(q.numerator), isqrt(q.denominator)
    return Fraction(n, d) if n * n == q.numerator and d * d == q.denominator else None


def _induced_gram(plane, g):
    u = plane.matrix()
    return la.matmul(la.matmul(la.transpose(u), g.matrix()), u)


def eq9_residuals(plane, m, root=None):
    """Residuals of  i_v(Omega)|_P - *_P(v^flat|_P)  over the coordinate vectors v.

    *_P uses the induced metric and the volume factor ``root``
    (default sqrt(det Gram), which must then be rational).
    """
    g = m.metric()
    gram = _induced_gram(plane, g)
    if root is None:
        root = _rational_sqrt(la.det(gram))
        if root is None:
            raise ValueError("induced volume is irrational; pass root explicitly")
    induced = Metric(tuple(map(tuple, gram)))
    u = plane.matrix()
    gm = g.matrix()
    out = []
    for k in range(1, m.dim + 1):
        v = coordinate_vector(m.dim, k)
        lhs = restrict(contract(v, m.omega), plane)
        gv = la.matvec(gm, v)
        flat = KForm(plane.k, 1, {(a + 1,): sum(gv[i] * u[i][a] for i in range(m.dim))
                                  for a in range(plane.k)})
        rhs = hodge_star(flat, induced, root=root)
        out.extend((lhs - rhs).vector())
    return tuple(out)


def classify_plane(plane, m):
    """Cayley test in dim 8, associative (k=3) / coassociative (k=4) in dim 7."""
    if plane.dim != m.dim:
        raise DimensionError(f"plane in R^{plane.dim}, model on R^{m.dim}")
    if isinstance(m, Spin7Model):
        if plane.k != 4:
            raise DimensionError("Cayley test needs a 4-plane")
        c = _top_coeff(restrict(m.omega, plane))
        det_gram = la.det(_induced_gram(plane, m.metric()))
        root = _rational_sqrt(det_gram)
        if root is None:
            # a Cayley plane always has |Omega|_P| = vol_P rational, so this is never zero
            defect = (c * c - det_gram,) + eq9_residuals(plane, m, root=c or Fraction(1))
        else:
            defect = (c - root,) + eq9_residuals(plane, m, root=root)
        return PlaneClass("cayley" if not any(defect) else "none", defect)
    if isinstance(m, G2Model):
        if plane.k == 3:
            defect = tuple(_top_coeff(restrict(contract(coordinate_vector(7, k), m.sigma), plane))
                           for k in range(1, 8))
            return PlaneClass("associative" if not any(defect) else "none", defect)
        if plane.k == 4:
            defect = tuple(restrict(m.phi, plane).vector())
            return PlaneClass("coassociative" if not any(defect) else "none", defect)
        raise DimensionError("G2 plane tests need k = 3 or 4")
    raise TypeError(f"no plane classification for {type(m).__name__}")


def calibration_ratio(form, frames):
    """Float form(P)/vol_P for a batch of n x k frames (shape (N, n, k))."""
    frames = np.asarray(frames, dtype=float)
    idx = [np.array(I) - 1 for I, _ in form.items()]
    coef = np.array([float(x) for _, x in form.items()])
    val = np.zeros(frames.shape[0])
    for I, c in zip(idx, coef):
        val += c * np.linalg.det(frames[:, I, :])
    gram = np.einsum("nik,nil->nkl", frames, frames)
    return val / np.sqrt(np.linalg.det(gram))


# energy identity -----------------------------------------------------------

def energy_identity_check(alpha, m=None):
    """alpha ^ alpha ^ Omega + |alpha|^2 vol for the 21-part of alpha (exactly zero)."""
    m = m or standard_models()[0]
    if alpha.degree != 2 or alpha.dim != 8:
        raise DimensionError("need a 2-form on R^8")
    a21 = KForm.from_vector(8, 2, la.matvec(projector_matrices(m)["21"], alpha.vector()))
    g = m.metric()
    vol = volume(8) * m.volume_factor()
    return wedge_all(a21, a21, m.omega) + vol * metric_inner(a21, a21, g)


# orbit dimensions -----------------------------------------------------------

def gl_derivative(form, a):
    """d/dt|0 pullback(form, exp(tA))."""
    n = form.dim
    out = {}
    for I, x in form.items():
        for p, i in enumerate(I):
            for b in range(1, n + 1):
                c = a[i - 1][b - 1]
                if c:
                    J = I[:p] + (b,) + I[p + 1:]
                    if len(set(J)) < len(J):
                        continue
                    term = KForm(n, form.degree, {J: c * x})
                    for K, y in term.items():
                        out[K] = out.get(K, Fraction(0)) + y
    return KForm(n, form.degree, out)


def linearized_action_rank(form):
    n = form.dim
    rows = []
    for a in range(n):
        for b in range(n):
            unit = [[int(i == a and j == b) for j in range(n)] for i in range(n)]
            rows.append(gl_derivative(form, unit).vector())
    return la.rank(rows)


def stabilizer_algebra(form):
    """Basis of {A : d/dt pullback(form, exp tA) = 0} as n x n matrices."""
    n = form.dim
    cols = []
    for a in range(n):
        for b in range(n):
            unit = [[int(i == a and j == b) for j in range(n)] for i in range(n)]
            cols.append(gl_derivative(form, unit).vector())
    return [[v[i * n:(i + 1) * n] for i in range(n)] for v in la.nullspace(la.transpose(cols))]


def _first_order(fn):
    """p'(0) for p of degree <= 4, from exact values at t = +-1, +-2."""
    p1, m1, p2, m2 = fn(Fraction(1)), fn(Fraction(-1)), fn(Fraction(2)), fn(Fraction(-2))
    return [(8 * (a - b) - (c - d)) / 12 for a, b, c, d in zip(p1, m1, p2, m2)]


def cayley_linearization_rank(plane=None):
    """Rank of the linearized Cayley condition at an orthonormal 4-plane of OMEGA0.

    Planes near P are graphs u_a + t sum_b X_ba f_b over a basis f_b of the
    orthogonal complement.  Their Gram matrix is I + O(t^2), so to first order
    the Euclidean star in the u-coordinates is the induced star.
    """
    plane = plane or OrientedPlane.coordinate(8, (1, 2, 3, 4))
    m = standard_models()[0]
    u = la.transpose(plane.matrix())
    if la.matmul(u, la.transpose(u)) != la.identity(4):
        raise ValueError("plane basis must be orthonormal")
    normal = la.gram_schmidt(la.nullspace(u), lambda a, b: sum(x * y for x, y in zip(a, b)))

    def residual(xmat, t):
        vecs = [[u[a][i] + t * sum(xmat[b][a] * normal[b][i] for b in range(4)) for i in range(8)]
                for a in range(4)]
        mat = la.transpose(vecs)
        out = []
        from .exterior_algebra import pullback_rect
        for k in range(1, 9):
            v = coordinate_vector(8, k)
            lhs = pullback_rect(contract(v, m.omega), mat)
            flat = KForm(4, 1, {(a + 1,): vecs[a][k - 1] for a in range(4)})
            out.extend((lhs - hodge_star(flat)).vector())
        return out

    rows = []
    for b in range(4):
        for a in range(4):
            xmat = [[Fraction(int(i == b and j == a)) for j in range(4)] for i in range(4)]
            rows.append(_first_order(lambda t: residual(xmat, t)))
    return la.rank(rows)


def orbit_rank_checks(m):
    if isinstance(m, Spin7Model):
        r = linearized_action_rank(m.omega)
        report = {"orbit_rank": r, "stabilizer_dim": 64 - r}
        if all(m.frame[i][j] == (i == j) for i in range(8) for j in range(8)):
            c = cayley_linearization_rank()
            report.update(cayley_linearization_rank=c, cayley_locus_dim=16 - c)
        return report
    if isinstance(m, G2Model):
        r = linearized_action_rank(m.phi)
        return {"orbit_rank": r, "stabilizer_dim": 49 - r}
    if isinstance(m, SU3Model):
        r = linearized_action_rank(m.rho1)
        return {"orbit_rank": r, "stabilizer_dim": 36 - r}
    raise TypeError(f"unsupported model {type(m).__name__}")


# metric of a 3-form ---------------------------------------------------------

@dataclass(frozen=True)
class MetricFromForm:
    positive: bool
    bilinear: tuple            # B(e_i, e_j) as a vol-coefficient matrix
    metric: Metric = None      # exact when the normalizing 9th root is rational
    metric_float: tuple = None
    volume: object = None      # sqrt(det g), exact when available
    orientation: int = 1


def _rational_root(q, n):
    num, ok1 = integer_nthroot(abs(q.numerator), n)
    den, ok2 = integer_nthroot(q.denominator, n)
    if not (ok1 and ok2):
        return None
    r = Fraction(int(num), int(den))
    return -r if q < 0 else r


def metric_from_3form(phi):
    """g_phi from B(u, v) = (i_u phi) ^ (i_v phi) ^ phi = 6 g(u, v) vol_g.

    Returns a verdict object; forms outside the open orbit give positive=False.
    """
    if phi.dim != 7 or phi.degree != 3:
        raise DimensionError("need a 3-form on R^7")
    top = tuple(range(1, 8))
    ips = [contract(coordinate_vector(7, i), phi) for i in range(1, 8)]
    b = [[wedge_all(ips[i], ips[j], phi)[top] for j in range(7)] for i in range(7)]
    btup = tuple(map(tuple, b))
    pos, neg, _ = la.ldl_signature(b)
    if pos == 7:
        orient, bb = 1, b
    elif neg == 7:
        orient, bb = -1, [[-x for x in r] for r in b]
    else:
        return MetricFromForm(False, btup)
    # bb = 6 sqrt(det g) g  =>  det g = (det bb / 6^7)^(2/9)
    q = la.det(bb) / Fraction(6) ** 7
    root9 = _rational_root(q, 9)
    if root9 is None:
        scale = 6 * float(q) ** (1.0 / 9.0)
        gf = tuple(tuple(float(x) / scale for x in r) for r in bb)
        return MetricFromForm(True, btup, None, gf, float(q) ** (1.0 / 9.0), orient)
    g = Metric(tuple(tuple(x / (6 * root9) for x in r) for r in bb))
    return MetricFromForm(True, btup, g, tuple(tuple(float(x) for x in r) for r in g.entries),
                          root9, orient)


# taming ---------------------------------------------------------------------

@dataclass(frozen=True)
class TamingCertificate:
    candidate: KForm
    gram: tuple                 # q(b_i, b_j) on a basis of the 21-part
    relative: tuple             # N^{-1} Q with N the norm Gram matrix
    inertia: tuple              # (positive, negative, zero) of Q
    gram_negative_definite: bool
    samples: int
    seed: int
    min_cayley_margin: float
    tamed: bool


def taming_check(candidate, m=None, samples=CAYLEY_SAMPLES, seed=DEFAULT_SEED):
    """Certificate for a 4-form (dim 8) or a (phi', sigma') pair (dim 7).

    The quadratic form alpha -> alpha ^ alpha ^ Omega' on the 21-part must be
    definite with the sign of the self-taming case (q = -|alpha|^2), and
    Omega' must be strictly positive on sampled Cayley planes.
    """
    if isinstance(candidate, tuple):
        if m is None:
            m = standard_models()[1]
        if not isinstance(m, G2Model):
            raise TypeError("a (phi', sigma') pair needs a G2Model")
        omega_p = lift_pair(*candidate)
        m = cylinder_lift_7to8(m)
    else:
        omega_p = candidate
        m = m or standard_models()[0]
    if omega_p.dim != 8 or omega_p.degree != 4:
        raise DimensionError("taming candidate must be a 4-form on R^8")
    std = standard_models()[0]
    base = component_basis(std, "21")
    frame = [list(r) for r in m.frame]
    det_f = la.det(frame)
    moved = [pullback(b, frame) for b in base]
    top = tuple(range(1, 9))
    n = len(base)
    q = [[wedge_all(moved[i], moved[j], omega_p)[top] / det_f for j in range(n)] for i in range(n)]
    nrm = [[inner(base[i], base[j]) for j in range(n)] for i in range(n)]
    rel = la.matmul(la.inv(nrm), q)
    inertia = la.ldl_signature(q)
    negdef = inertia == (0, n, 0)

    rng = np.random.default_rng(seed)
    ks = random_spin7_float(rng, samples)
    finv = np.array(la.inv(frame), dtype=float)
    planes = np.einsum("ij,njk->nik", finv, ks[:, :, :4])
    metric = np.array(m.metric().matrix(), dtype=float)
    vals = np.zeros(samples)
    for I, c in omega_p.items():
        vals += float(c) * np.linalg.det(planes[:, np.array(I) - 1, :])
    gram = np.einsum("nik,ij,njl->nkl", planes, metric, planes)
    margins = vals / np.sqrt(np.linalg.det(gram))
    min_margin = float(margins.min()) if samples else float("nan")
    return TamingCertificate(
        candidate=omega_p, gram=tuple(map(tuple, q)), relative=tuple(map(tuple, rel)),
        inertia=inertia, gram_negative_definite=negdef, samples=samples, seed=seed,
        min_cayley_margin=min_margin, tamed=negdef and samples > 0 and min_margin > 0)


# SU(3) structures ----------------------------------------------------------

@dataclass(frozen=True)
class SU3Verdict:
    lam: Fraction
    k_matrix: tuple
    rho_positive: bool
    wedge_vanishes: bool
    omega_positive: bool
    complex_structure: tuple = None   # None when sqrt(-lam) is irrational or rho not positive

    @property
    def passed(self):
        return self.rho_positive and self.wedge_vanishes and self.omega_positive


def _five_form_to_vector(b):
    # the vector w with i_w vol = b
    out = []
    for k in range(1, 7):
        idx = tuple(i for i in range(1, 7) if i != k)
        out.append(b[idx] if k % 2 else -b[idx])
    return out


def hitchin_endomorphism(rho):
    """K(v) = A((i_v rho) ^ rho), A: Lambda^5 -> V through the standard volume."""
    if rho.dim != 6 or rho.degree != 3:
        raise DimensionError("need a 3-form on R^6")
    cols = [_five_form_to_vector(wedge(contract(coordinate_vector(6, k), rho), rho))
            for k in range(1, 7)]
    return la.transpose(cols)


def su3_check(omega, rho):
    if omega.dim != 6 or omega.degree != 2:
        raise DimensionError("need a 2-form on R^6")
    k = hitchin_endomorphism(rho)
    k2 = la.matmul(k, k)
    lam = sum(k2[i][i] for i in range(6)) / 6
    ident = la.identity(6)
    rho_pos = lam < 0 and k2 == [[lam * x for x in r] for r in ident]
    wedge_zero = wedge(omega, rho).is_zero()
    w = two_form_matrix(omega)
    omega_pos, cs = False, None
    if rho_pos:
        root = _rational_sqrt(-lam)
        wk = la.matmul(w, k)
        sym = lambda a: [[(a[i][j] + a[j][i]) / 2 for j in range(6)] for i in range(6)]
        for sign in (1, -1):
            cand = [[sign * x for x in r] for r in wk]
            # omega(., I .) must be symmetric positive definite
            if cand == sym(cand) and la.is_positive_definite(cand):
                omega_pos = True
                if root is not None:
                    cs = tuple(tuple(sign * x / root for x in r) for r in k)
                break
    return SU3Verdict(lam, tuple(map(tuple, k)), rho_pos, wedge_zero, omega_pos, cs)
