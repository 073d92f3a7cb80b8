"""The flat Fueter operator on a periodic cubic lattice, and spectral flow.

Fields are arrays of shape (4, N, N, N): quaternion components (1, i, j, k)
over lattice sites, spacing h = 1/N, periodic in every direction.  The
operator is  D f = i d1 f + j d2 f + k d3 f  with central differences and
the units acting by left multiplication.  Its square is minus the
double-spacing Laplacian, exactly.
"""

from dataclasses import dataclass
import math

import numpy as np
import scipy.sparse as sp

from .config import SPECTRAL_ZERO_TOL


@dataclass(frozen=True)
class Quaternion:
    a: float
    b: float = 0.0
    c: float = 0.0
    d: float = 0.0

    def __mul__(self, o):
        if not isinstance(o, Quaternion):
            return Quaternion(self.a * o, self.b * o, self.c * o, self.d * o)
        a1, b1, c1, d1 = self.a, self.b, self.c, self.d
        a2, b2, c2, d2 = o.a, o.b, o.c, o.d
        return Quaternion(
            a1 * a2 - b1 * b2 - c1 * c2 - d1 * d2,
            a1 * b2 + b1 * a2 + c1 * d2 - d1 * c2,
            a1 * c2 - b1 * d2 + c1 * a2 + d1 * b2,
            a1 * d2 + b1 * c2 - c1 * b2 + d1 * a2,
        )

    def __add__(self, o):
        return Quaternion(self.a + o.a, self.b + o.b, self.c + o.c, self.d + o.d)

    def __neg__(self):
        return Quaternion(-self.a, -self.b, -self.c, -self.d)

    def __iter__(self):
        return iter((self.a, self.b, self.c, self.d))


ONE = Quaternion(1.0)
I = Quaternion(0.0, 1.0)
J = Quaternion(0.0, 0.0, 1.0)
K = Quaternion(0.0, 0.0, 0.0, 1.0)
UNITS = {"i": I, "j": J, "k": K}


def left_matrix(q):
    """4x4 real matrix of x -> q x on components (1, i, j, k)."""
    basis = (ONE, I, J, K)
    return np.array([list(q * e) for e in basis], dtype=float).T


class LatticeError(ValueError):
    pass


@dataclass(frozen=True)
class QuaternionField:
    data: np.ndarray

    def __post_init__(self):
        d = np.asarray(self.data, dtype=float)
        if d.ndim != 4 or d.shape[0] != 4 or not (d.shape[1] == d.shape[2] == d.shape[3]):
            raise LatticeError(f"field must have shape (4, N, N, N), got {d.shape}")
        if d.shape[1] % 2 == 0:
            raise LatticeError(f"lattice size must be odd, got N = {d.shape[1]}")
        object.__setattr__(self, "data", d)

    @property
    def n(self):
        return self.data.shape[1]

    @property
    def h(self):
        return 1.0 / self.n

    @classmethod
    def from_function(cls, n, fn):
        """Sample fn(y1, y2, y3) -> 4-vector on the lattice y = index / n."""
        y = np.arange(n) / n
        y1, y2, y3 = np.meshgrid(y, y, y, indexing="ij")
        return cls(np.asarray(fn(y1, y2, y3), dtype=float))

    @classmethod
    def random(cls, n, rng):
        return cls(rng.standard_normal((4, n, n, n)))

    def norm_inf(self):
        return float(np.abs(self.data).max())

    def norm2(self):
        return float(np.linalg.norm(self.data))


def _central(f, axis, h):
    return (np.roll(f, -1, axis=axis) - np.roll(f, 1, axis=axis)) / (2 * h)


def _left(q, f):
    return np.tensordot(left_matrix(q), f, axes=(1, 0))


def fueter_apply(f, units=("i", "j", "k")):
    """D f = u1 d1 f + u2 d2 f + u3 d3 f, units acting on the left."""
    out = np.zeros_like(f.data)
    for axis, u in enumerate(units, start=1):
        out += _left(UNITS[u], _central(f.data, axis, f.h))
    return QuaternionField(out)


def laplacian2(f):
    """Sum over axes of (f(x + 2h) - 2 f(x) + f(x - 2h)) / (2h)^2."""
    h2 = (2 * f.h) ** 2
    out = np.zeros_like(f.data)
    for axis in (1, 2, 3):
        out += (np.roll(f.data, -2, axis) - 2 * f.data + np.roll(f.data, 2, axis)) / h2
    return QuaternionField(out)


def fueter_square_residual(f, units=("i", "j", "k")):
    """||D(D f) + Delta_2 f||_inf."""
    dd = fueter_apply(fueter_apply(f, units), units)
    return float(np.abs(dd.data + laplacian2(f).data).max())


def symbol(n, k, units=("i", "j", "k")):
    """4x4 complex symbol of D on the Fourier mode exp(2 pi i <k, y>)."""
    h = 1.0 / n
    s = np.zeros((4, 4), dtype=complex)
    for a, u in enumerate(units):
        s += 1j * math.sin(2 * math.pi * k[a] / n) / h * left_matrix(UNITS[u])
    return s


def kernel_dimension(n, tol=1e-9):
    """dim ker D on the N^3 torus, summed over Fourier modes."""
    if n < 1 or n % 2 == 0:
        raise LatticeError(f"kernel_dimension needs odd N, got {n}")
    total = 0
    scale = n  # symbol entries are at most 1/h
    for k1 in range(n):
        for k2 in range(n):
            for k3 in range(n):
                sv = np.linalg.svd(symbol(n, (k1, k2, k3)), compute_uv=False)
                total += int((sv <= tol * scale).sum())
    return total


def assemble_operator(n, units=("i", "j", "k")):
    """Sparse real matrix of D acting on flattened fields (component-major)."""
    if n % 2 == 0:
        raise LatticeError(f"lattice size must be odd, got N = {n}")
    h = 1.0 / n
    shift = sp.diags([np.ones(n - 1), [1.0]], [1, -(n - 1)], shape=(n, n))
    d1 = (shift - shift.T) / (2 * h)
    eye = sp.identity(n)
    parts = [sp.kron(sp.kron(d1, eye), eye), sp.kron(sp.kron(eye, d1), eye),
             sp.kron(sp.kron(eye, eye), d1)]
    op = sp.csr_matrix((4 * n ** 3, 4 * n ** 3))
    for part, u in zip(parts, units):
        op = op + sp.kron(sp.csr_matrix(left_matrix(UNITS[u])), part)
    return op.tocsr()


def nonlinear_eigen_residual(f, lam):
    """||D f - lam f||_2 / ||f||_2: in the linear fibre the dilation field at f is f."""
    nrm = f.norm2()
    if nrm == 0:
        raise LatticeError("zero field has no eigen-residual")
    return float(np.linalg.norm(fueter_apply(f).data - lam * f.data)) / nrm


# spectral flow ---------------------------------------------------------------

class SpectralFlowError(ValueError):
    pass


@dataclass(frozen=True)
class SelfAdjointFamily:
    """Piecewise-linear family through matrices at the parameter grid."""

    params: tuple
    matrices: tuple

    def __post_init__(self):
        ps = tuple(float(t) for t in self.params)
        ms = tuple(np.asarray(m) for m in self.matrices)
        if len(ps) != len(ms) or len(ps) < 2:
            raise SpectralFlowError("need at least two parameters, one matrix each")
        if any(b <= a for a, b in zip(ps, ps[1:])):
            raise SpectralFlowError("parameters must increase strictly")
        shape = ms[0].shape
        for m in ms:
            if m.shape != shape or m.ndim != 2 or shape[0] != shape[1]:
                raise SpectralFlowError("matrices must be square and of one size")
            if np.abs(m - m.conj().T).max() > 1e-12 * max(1.0, np.abs(m).max()):
                raise SpectralFlowError("matrices must be self-adjoint")
        object.__setattr__(self, "params", ps)
        object.__setattr__(self, "matrices", ms)

    def at(self, t):
        ps = self.params
        i = min(max(int(np.searchsorted(ps, t, side="right")) - 1, 0), len(ps) - 2)
        s = (t - ps[i]) / (ps[i + 1] - ps[i])
        return (1 - s) * self.matrices[i] + s * self.matrices[i + 1]

    def reversed(self):
        return SelfAdjointFamily(tuple(-t for t in reversed(self.params)),
                                 tuple(reversed(self.matrices)))

    def concat(self, other):
        """This path followed by ``other`` (which must start where this ends)."""
        if np.abs(self.matrices[-1] - other.matrices[0]).max() > 1e-12:
            raise SpectralFlowError("paths do not meet")
        shift = self.params[-1] - other.params[0]
        return SelfAdjointFamily(self.params + tuple(t + shift for t in other.params[1:]),
                                 self.matrices + other.matrices[1:])


@dataclass(frozen=True)
class SpectralFlowResult:
    flow: int
    crossings: tuple        # (parameter, signed count)
    simple: bool


def _negative(m):
    return int((np.linalg.eigvalsh(m) < 0).sum())


def _min_abs_eig(m):
    return float(np.abs(np.linalg.eigvalsh(m)).min())


def spectral_flow(fam, samples_per_segment=8, tol=SPECTRAL_ZERO_TOL):
    """Signed count of eigenvalues crossing zero from below along the family.

    Sign changes are located on a sampled grid and isolated by bisection to
    width ``tol``; a crossing that moves more than one eigenvalue at once is
    flagged as non-simple.
    """
    for t in (fam.params[0], fam.params[-1]):
        if _min_abs_eig(fam.at(t)) < tol:
            raise SpectralFlowError(f"eigenvalue within {tol} of zero at endpoint t = {t}")
    grid = []
    for a, b in zip(fam.params, fam.params[1:]):
        grid.extend(np.linspace(a, b, samples_per_segment + 1)[:-1])
    grid.append(fam.params[-1])
    crossings = []
    simple = True
    counts = [_negative(fam.at(t)) for t in grid]
    for (a, na), (b, nb) in zip(zip(grid, counts), zip(grid[1:], counts[1:])):
        stack = [(a, na, b, nb)]
        while stack:
            lo, nlo, hi, nhi = stack.pop()
            if nlo == nhi:
                continue
            if hi - lo <= tol:
                if abs(nlo - nhi) > 1:
                    simple = False
                crossings.append((0.5 * (lo + hi), nlo - nhi))
                continue
            mid = 0.5 * (lo + hi)
            nm = _negative(fam.at(mid))
            stack.append((mid, nm, hi, nhi))
            stack.append((lo, nlo, mid, nm))
    crossings.sort()
    flow = sum(c for _, c in crossings)
    return SpectralFlowResult(flow, tuple(crossings), simple)


def realify(m):
    """Real symmetric [[A, -B], [B, A]] of a Hermitian A + iB."""
    a, b = np.real(m), np.imag(m)
    return np.block([[a, -b], [b, a]])


def realify_family(fam):
    return SelfAdjointFamily(fam.params, tuple(realify(m) for m in fam.matrices))


def load_family(data):
    try:
        params = [float(t) for t in data["params"]]
        mats = [np.array(m, dtype=float) for m in data["matrices"]]
        if "imag" in data:
            mats = [m + 1j * np.array(b, dtype=float) for m, b in zip(mats, data["imag"])]
        return SelfAdjointFamily(params, mats)
    except (KeyError, TypeError, ValueError) as exc:
        if isinstance(exc, SpectralFlowError):
            raise
        raise SpectralFlowError(f"family: {type(exc).__name__}: {exc}") from exc
