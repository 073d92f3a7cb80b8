"""Finite Morse-Novikov models graded by the free part of H_1.

Everything is built on ``ExpSum``: finite sums  sum_g c_g exp(<g, alpha>)
over rational class vectors g.  A flow model's differential, a continuation
table and a cellular local system all become matrices of ExpSums, which are
compared exactly and evaluated at complex covectors alpha.
"""

from dataclasses import dataclass, field
from fractions import Fraction
import cmath
import math

import numpy as np
import scipy.linalg

from .config import MAX_EXPONENT, RANK_RTOL


class EvaluationOverflow(ArithmeticError):
    pass


class DivergenceError(ArithmeticError):
    pass


class SchemaError(ValueError):
    pass


def _cls(v):
    return tuple(Fraction(x) for x in v)


def _pair(g, a):
    return sum(float(x) * y for x, y in zip(g, a))


class ExpSum:
    """Finite exponential sum over a rank-``rank`` lattice.

    If ``horizon`` is set, terms with <class, direction> > horizon are
    dropped on construction, so results are exact below the horizon.
    """

    __slots__ = ("rank", "terms", "horizon", "direction")

    def __init__(self, rank, terms=None, horizon=None, direction=None):
        self.rank = rank
        self.horizon = None if horizon is None else Fraction(horizon)
        self.direction = None if direction is None else _cls(direction)
        if self.horizon is not None and self.direction is None:
            raise ValueError("a horizon needs a direction covector")
        out = {}
        for g, c in (terms or {}).items():
            g = _cls(g)
            if len(g) != rank:
                raise ValueError(f"class {g} has length {len(g)}, lattice rank is {rank}")
            if c == 0:
                continue
            if self.horizon is not None and sum(x * y for x, y in zip(g, self.direction)) > self.horizon:
                continue
            out[g] = out.get(g, 0) + c
        self.terms = {g: c for g, c in sorted(out.items()) if c != 0}

    @classmethod
    def monomial(cls, g, c=1, **kw):
        return cls(len(g), {tuple(g): c}, **kw)

    @classmethod
    def constant(cls, rank, c=1, **kw):
        return cls(rank, {(0,) * rank: c}, **kw)

    def _like(self, terms, other=None):
        h, d = self.horizon, self.direction
        if other is not None and other.horizon is not None:
            if h is None or other.horizon < h:
                h, d = other.horizon, other.direction
        return ExpSum(self.rank, terms, h, d)

    def _check(self, other):
        if self.rank != other.rank:
            raise ValueError(f"lattice ranks differ: {self.rank} vs {other.rank}")

    def __add__(self, other):
        if isinstance(other, int) and other == 0:
            return self
        self._check(other)
        out = dict(self.terms)
        for g, c in other.terms.items():
            out[g] = out.get(g, 0) + c
        return self._like(out, other)

    __radd__ = __add__

    def __neg__(self):
        return self._like({g: -c for g, c in self.terms.items()})

    def __sub__(self, other):
        return self + (-other)

    def __mul__(self, other):
        if not isinstance(other, ExpSum):
            return self._like({g: c * other for g, c in self.terms.items()})
        self._check(other)
        out = {}
        for g, c in self.terms.items():
            for h, d in other.terms.items():
                k = tuple(x + y for x, y in zip(g, h))
                out[k] = out.get(k, 0) + c * d
        return self._like(out, other)

    __rmul__ = __mul__

    def __eq__(self, other):
        if isinstance(other, int) and other == 0:
            return not self.terms
        if not isinstance(other, ExpSum):
            return NotImplemented
        return self.rank == other.rank and self.terms == other.terms

    def __hash__(self):
        return hash((self.rank, tuple(self.terms.items())))

    def __repr__(self):
        if not self.terms:
            return "ExpSum(0)"
        return "ExpSum(" + " + ".join(
            f"{c}*exp<{','.join(map(str, g))}>" for g, c in self.terms.items()) + ")"

    def is_zero(self):
        return not self.terms

    def shift(self, g):
        """Multiply by exp(<g, .>)."""
        g = _cls(g)
        return self._like({tuple(x + y for x, y in zip(k, g)): c for k, c in self.terms.items()})

    def evaluate(self, alpha):
        if len(alpha) != self.rank:
            raise ValueError(f"covector of length {len(alpha)} on rank {self.rank}")
        total = 0j
        for g, c in self.terms.items():
            z = sum(complex(a) * float(x) for x, a in zip(g, alpha))
            if abs(z.real) > MAX_EXPONENT:
                raise EvaluationOverflow(f"exponent {z.real:.3g} exceeds {MAX_EXPONENT}")
            total += complex(c) * cmath.exp(z)
        return total

    def magnitude(self, alpha):
        """sum |c| |exp(<g, alpha>)|, the size of the terms before cancellation."""
        total = 0.0
        for g, c in self.terms.items():
            z = sum(complex(a).real * float(x) for x, a in zip(g, alpha))
            if abs(z) > MAX_EXPONENT:
                raise EvaluationOverflow(f"exponent {z:.3g} exceeds {MAX_EXPONENT}")
            total += abs(complex(c)) * math.exp(z)
        return total


def monodromy(alpha, gamma):
    """rho(gamma) = exp(<gamma, alpha>)."""
    if len(alpha) != len(gamma):
        raise ValueError("covector and class have different lengths")
    return cmath.exp(sum(complex(a) * float(g) for a, g in zip(alpha, gamma)))


# ExpSum matrices are plain lists of rows.

def zero_matrix(rank, rows, cols):
    return [[ExpSum(rank) for _ in range(cols)] for _ in range(rows)]


def exp_matmul(a, b, rank):
    if not a or not b:
        return [[ExpSum(rank) for _ in range(len(b[0]) if b else 0)] for _ in a]
    n, m, p = len(a), len(b), len(b[0])
    if len(a[0]) != m:
        raise ValueError("inner dimensions differ")
    out = []
    for i in range(n):
        row = []
        for j in range(p):
            s = ExpSum(rank)
            for k in range(m):
                if a[i][k].terms and b[k][j].terms:
                    s = s + a[i][k] * b[k][j]
            row.append(s)
        out.append(row)
    return out


def exp_equal(a, b):
    return len(a) == len(b) and all(
        len(ra) == len(rb) and all(x == y for x, y in zip(ra, rb)) for ra, rb in zip(a, b))


def evaluate_matrix(a, alpha, shape=None):
    if not a:
        return np.zeros(shape or (0, 0), dtype=complex)
    return np.array([[x.evaluate(alpha) for x in row] for row in a], dtype=complex).reshape(
        shape or (len(a), len(a[0])))


def magnitude_matrix(a, alpha):
    if not a or not a[0]:
        return 0.0
    return max(x.magnitude(alpha) for row in a for x in row)


def numerical_rank(m, scale, method="svd"):
    """Rank with tolerance RANK_RTOL * max(1, scale)."""
    if m.size == 0:
        return 0
    tol = RANK_RTOL * max(1.0, scale)
    if method == "svd":
        s = np.linalg.svd(m, compute_uv=False)
        return int((s > tol).sum())
    _, r, _ = scipy.linalg.qr(m, pivoting=True)
    d = np.abs(np.diag(r))
    return int((d > tol).sum())


# count tables ---------------------------------------------------------------

@dataclass(frozen=True)
class Record:
    source: str
    target: str
    cls: tuple
    count: object

    def __post_init__(self):
        object.__setattr__(self, "cls", _cls(self.cls))


@dataclass(frozen=True)
class CountTable:
    """Class-graded signed counts  source -> target  (an equivariant table)."""

    rank: int
    sources: tuple
    targets: tuple
    records: tuple = ()

    def __post_init__(self):
        object.__setattr__(self, "sources", tuple(self.sources))
        object.__setattr__(self, "targets", tuple(self.targets))
        recs = tuple(r if isinstance(r, Record) else Record(*r) for r in self.records)
        object.__setattr__(self, "records", recs)
        src, tgt = set(self.sources), set(self.targets)
        for r in recs:
            if r.source not in src or r.target not in tgt:
                raise SchemaError(f"record {r.source}->{r.target} names an unknown generator")
            if len(r.cls) != self.rank:
                raise SchemaError(f"record {r.source}->{r.target} has class of wrong length")

    def matrix(self, horizon=None, direction=None):
        """ExpSum matrix, rows = targets, columns = sources."""
        ti = {n: i for i, n in enumerate(self.targets)}
        si = {n: i for i, n in enumerate(self.sources)}
        terms = [[{} for _ in self.sources] for _ in self.targets]
        for r in self.records:
            d = terms[ti[r.target]][si[r.source]]
            d[r.cls] = d.get(r.cls, 0) + r.count
        return [[ExpSum(self.rank, t, horizon, direction) for t in row] for row in terms]

    def canonical(self):
        """Records merged by (source, target, class), zero counts dropped, sorted."""
        acc = {}
        for r in self.records:
            key = (r.source, r.target, r.cls)
            acc[key] = acc.get(key, 0) + r.count
        recs = tuple(Record(s, t, g, c) for (s, t, g), c in sorted(acc.items()) if c != 0)
        return CountTable(self.rank, self.sources, self.targets, recs)

    @classmethod
    def identity(cls, rank, names):
        zero = (0,) * rank
        return cls(rank, names, names, tuple(Record(n, n, zero, 1) for n in names))


def compose_tables(t, u):
    """t after u, by direct convolution of records: (p -u-> q -t-> r)."""
    if tuple(u.targets) != tuple(t.sources):
        raise ValueError("tables are not composable")
    if t.rank != u.rank:
        raise ValueError("lattice ranks differ")
    out = []
    by_source = {}
    for r in t.records:
        by_source.setdefault(r.source, []).append(r)
    for a in u.records:
        for b in by_source.get(a.target, ()):
            out.append(Record(a.source, b.target, tuple(x + y for x, y in zip(a.cls, b.cls)),
                              a.count * b.count))
    return CountTable(t.rank, u.sources, t.targets, tuple(out)).canonical()


def hat_transform(table, alpha, divergence_check=None):
    """Evaluate the exponential weighting of a count table at alpha."""
    if divergence_check is not None:
        divergence_check(alpha)
    return evaluate_matrix(table.matrix(), alpha, (len(table.targets), len(table.sources)))


# flow models ----------------------------------------------------------------

@dataclass(frozen=True)
class CriticalPoint:
    name: str
    index: int


@dataclass(frozen=True)
class FlowModel:
    """Critical points with Morse indices and lattice-graded signed flow counts.

    ``tail`` optionally declares aggregate counts per period shell beyond the
    stored table (a synthetic growth model for convergence profiling).
    """

    rank: int
    crit: tuple
    flows: tuple
    theta: tuple
    tail: tuple = ()

    def __post_init__(self):
        crit = tuple(c if isinstance(c, CriticalPoint) else CriticalPoint(*c) for c in self.crit)
        flows = tuple(f if isinstance(f, Record) else Record(*f) for f in self.flows)
        object.__setattr__(self, "crit", crit)
        object.__setattr__(self, "flows", flows)
        object.__setattr__(self, "theta", tuple(float(x) for x in self.theta))
        object.__setattr__(self, "tail", tuple(self.tail))
        names = [c.name for c in crit]
        if len(set(names)) != len(names):
            raise SchemaError("critical point names must be unique")
        if len(self.theta) != self.rank:
            raise SchemaError(f"theta has length {len(self.theta)}, lattice rank is {self.rank}")
        idx = {c.name: c.index for c in crit}
        seen = set()
        for f in flows:
            if f.source not in idx or f.target not in idx:
                raise SchemaError(f"flow {f.source}->{f.target} names an unknown critical point")
            if len(f.cls) != self.rank:
                raise SchemaError(f"flow {f.source}->{f.target} has class of wrong length")
            if f.count != 0 and idx[f.target] != idx[f.source] - 1:
                raise SchemaError(f"flow {f.source}->{f.target} does not drop the index by one")
            key = (f.source, f.target, f.cls)
            if key in seen:
                raise SchemaError(f"duplicate class {f.cls} for {f.source}->{f.target}")
            seen.add(key)

    def points(self, k):
        return tuple(c.name for c in self.crit if c.index == k)

    @property
    def degrees(self):
        if not self.crit:
            return range(0)
        return range(min(c.index for c in self.crit), max(c.index for c in self.crit) + 1)

    def differential_table(self, k):
        """Count table C_k -> C_{k-1}."""
        src, tgt = self.points(k), self.points(k - 1)
        recs = tuple(f for f in self.flows if f.source in src)
        return CountTable(self.rank, src, tgt, recs)

    def exp_differentials(self, horizon=None, direction=None):
        return {k: self.differential_table(k).matrix(horizon, direction) for k in self.degrees}

    def check_d_squared(self):
        """First (k, row, col) where d_{k-1} d_k != 0 as an ExpSum, or None."""
        ds = self.exp_differentials()
        for k in self.degrees:
            if k - 1 not in ds or not ds[k] or not ds[k - 1]:
                continue
            prod = exp_matmul(ds[k - 1], ds[k], self.rank)
            for i, row in enumerate(prod):
                for j, x in enumerate(row):
                    if not x.is_zero():
                        return k, self.points(k - 2)[i], self.points(k)[j], x
        return None


def load_flow_model(data):
    """Build a FlowModel from the JSON schema and refuse it unless d^2 = 0."""
    try:
        rank = int(data["lattice_rank"])
        crit = [CriticalPoint(str(c["name"]), int(c["index"])) for c in data["critical_points"]]
        flows = [Record(str(f["from"]), str(f["to"]), [Fraction(x) for x in f["class"]],
                        int(f["count"])) for f in data.get("flows", [])]
        theta = [float(x) for x in data["theta"]]
        tail = [int(x) for x in data.get("tail", [])]
    except (KeyError, TypeError, ValueError) as exc:
        raise SchemaError(f"flow model: {type(exc).__name__}: {exc}") from exc
    model = FlowModel(rank, crit, flows, theta, tail)
    bad = model.check_d_squared()
    if bad is not None:
        k, p, r, x = bad
        raise SchemaError(f"d^2 != 0 at degree {k}: {r} -> {p} has {x}")
    return model


def dump_flow_model(model):
    return {
        "lattice_rank": model.rank,
        "theta": list(model.theta),
        "critical_points": [{"name": c.name, "index": c.index} for c in model.crit],
        "flows": [{"from": f.source, "to": f.target, "class": [str(x) for x in f.cls],
                   "count": f.count} for f in model.flows],
        **({"tail": list(model.tail)} if model.tail else {}),
    }


# convergence ----------------------------------------------------------------

@dataclass(frozen=True)
class ConvergenceProfile:
    rho_hat: float
    shells: tuple

    def terms(self, s):
        return [a * cmath.exp(-s * (l + 1)) for l, a in enumerate(self.shells)]

    def partial_sums(self, s):
        out, acc = [], 0j
        for t in self.terms(s):
            acc += t
            out.append(acc)
        return out

    def diverges(self, s):
        """Root test against rho_hat, confirmed by growth of the tail terms."""
        if not self.shells:
            return False
        if complex(s).real < self.rho_hat:
            return True
        mags = [abs(t) for t in self.terms(s)]
        tail = mags[len(mags) // 2:]
        return len(tail) > 2 and all(b > a for a, b in zip(tail, tail[1:]))


def convergence_profile(source):
    """Empirical growth threshold: limsup of log|a_l| / l over the tail shells.

    ``source`` is a FlowModel (its declared tail, if any) or a sequence of
    aggregate counts a_1, a_2, ... per period shell.
    """
    if isinstance(source, FlowModel):
        shells = source.tail
    else:
        shells = tuple(source)
    if not shells:
        return ConvergenceProfile(0.0, ())
    rates = [math.log(abs(a)) / (l + 1) for l, a in enumerate(shells) if a]
    if not rates:
        return ConvergenceProfile(0.0, tuple(shells))
    tail = rates[len(rates) // 2:]
    return ConvergenceProfile(max(0.0, max(tail)), tuple(shells))


def effective_decay(alpha, theta):
    """s with Re alpha ~ -s theta: the decay rate of exp(<g, alpha>) along theta."""
    th = np.asarray(theta, dtype=float)
    nn = float(th @ th)
    if nn == 0:
        return math.inf
    return -float(np.real(np.asarray(alpha, dtype=complex)) @ th) / nn


# Novikov complex ------------------------------------------------------------

@dataclass
class NovikovComplex:
    model: FlowModel
    alpha: tuple
    exp: dict
    evaluated: dict
    scales: dict = field(default_factory=dict)

    def ranks(self, method="qr"):
        return {k: numerical_rank(m, self.scales[k], method) for k, m in self.evaluated.items()}

    def betti(self):
        r = self.ranks()
        out = []
        for k in self.model.degrees:
            n = len(self.model.points(k))
            out.append(n - r.get(k, 0) - r.get(k + 1, 0))
        return tuple(out)


def novikov_differential(model, alpha, horizon=None):
    """d_alpha p = sum N^g_pq exp(<g, alpha>) q, per degree."""
    alpha = tuple(complex(a) for a in alpha)
    if len(alpha) != model.rank:
        raise ValueError(f"alpha has length {len(alpha)}, lattice rank is {model.rank}")
    if model.tail:
        prof = convergence_profile(model)
        s = effective_decay(alpha, model.theta)
        if s <= prof.rho_hat or prof.diverges(s):
            raise DivergenceError(
                f"decay rate {s:.4g} along theta does not exceed growth threshold {prof.rho_hat:.4g}")
    direction = model.theta if horizon is not None else None
    exp = {}
    for k in model.degrees:
        table = model.differential_table(k)
        exp[k] = table.matrix(
            horizon, [Fraction(x).limit_denominator(10**6) for x in direction] if direction else None)
    evaluated = {k: evaluate_matrix(m, alpha, (len(model.points(k - 1)), len(model.points(k))))
                 for k, m in exp.items()}
    scales = {k: magnitude_matrix(m, alpha) for k, m in exp.items()}
    return NovikovComplex(model, alpha, exp, evaluated, scales)


# cellular oracle -------------------------------------------------------------

@dataclass(frozen=True)
class LocalSystemComplex:
    """Cells per dimension and boundary matrices with ExpSum (group-ring) entries.

    ``boundary[k]`` maps k-cells to (k-1)-cells: rows = cells[k-1], cols = cells[k].
    """

    rank: int
    cells: dict
    boundary: dict

    def check(self):
        for k in self.cells:
            if k in self.boundary and k - 1 in self.boundary:
                prod = exp_matmul(self.boundary[k - 1], self.boundary[k], self.rank)
                if any(not x.is_zero() for row in prod for x in row):
                    return False
        return True


def graph_complex(rank, vertices, edges):
    """Rank-1 local system on a graph: d e = t^class end - start.

    ``edges`` are (name, start, end, class) with the class of the edge's lift.
    """
    vi = {v: i for i, v in enumerate(vertices)}
    d1 = [[ExpSum(rank) for _ in edges] for _ in vertices]
    zero = (0,) * rank
    for j, (_, start, end, cls) in enumerate(edges):
        d1[vi[end]][j] = d1[vi[end]][j] + ExpSum.monomial(cls)
        d1[vi[start]][j] = d1[vi[start]][j] - ExpSum.monomial(zero)
    cells = {0: tuple(vertices), 1: tuple(e[0] for e in edges)}
    return LocalSystemComplex(rank, cells, {1: d1})


def _embed_class(g, offset, rank):
    out = [Fraction(0)] * rank
    for i, x in enumerate(g):
        out[offset + i] = x
    return tuple(out)


def product_complex(a, b):
    """Tensor product of cellular complexes, lattices concatenated (Koszul signs)."""
    rank = a.rank + b.rank
    dims = sorted({p + q for p in a.cells for q in b.cells})
    cells = {n: tuple((x, y) for p in sorted(a.cells) for q in sorted(b.cells) if p + q == n
                      for x in a.cells[p] for y in b.cells[q]) for n in dims}
    dim_a = {x: p for p, xs in a.cells.items() for x in xs}
    dim_b = {y: q for q, ys in b.cells.items() for y in ys}
    pos_a = {x: i for p, xs in a.cells.items() for i, x in enumerate(xs)}
    pos_b = {y: i for q, ys in b.cells.items() for i, y in enumerate(ys)}

    def lift(x, which):
        g = next(iter(x.terms)) if x.terms else None
        return ExpSum(rank, {(_embed_class(g, 0, rank) if which == "a" else
                              _embed_class(g, a.rank, rank)): c for g, c in x.terms.items()})

    boundary = {}
    for n in dims:
        if n - 1 not in cells:
            continue
        row_of = {c: i for i, c in enumerate(cells[n - 1])}
        mat = [[ExpSum(rank) for _ in cells[n]] for _ in cells[n - 1]]
        for j, (x, y) in enumerate(cells[n]):
            p, q = dim_a[x], dim_b[y]
            if p in a.boundary:
                for i, x2 in enumerate(a.cells[p - 1]):
                    coef = a.boundary[p][i][pos_a[x]]
                    if coef.terms:
                        r = row_of[(x2, y)]
                        mat[r][j] = mat[r][j] + lift(coef, "a")
            if q in b.boundary:
                sign = -1 if p % 2 else 1
                for i, y2 in enumerate(b.cells[q - 1]):
                    coef = b.boundary[q][i][pos_b[y]]
                    if coef.terms:
                        r = row_of[(x, y2)]
                        mat[r][j] = mat[r][j] + lift(coef, "b") * sign
        boundary[n] = mat
    return LocalSystemComplex(rank, cells, boundary)


def cellular_twisted_cohomology(cx, alpha):
    """Betti numbers of the local system with monodromy exp(<., alpha>), by SVD rank."""
    alpha = tuple(complex(a) for a in alpha)
    ranks = {}
    for k, mat in cx.boundary.items():
        shape = (len(cx.cells.get(k - 1, ())), len(cx.cells[k]))
        m = evaluate_matrix(mat, alpha, shape)
        ranks[k] = numerical_rank(m, magnitude_matrix(mat, alpha), "svd")
    lo, hi = min(cx.cells), max(cx.cells)
    return tuple(len(cx.cells[k]) - ranks.get(k, 0) - ranks.get(k + 1, 0) for k in range(lo, hi + 1))


def euler_characteristic(betti, start=0):
    return sum((-1) ** (k + start) * b for k, b in enumerate(betti))


# continuation maps -----------------------------------------------------------

@dataclass(frozen=True)
class ContinuationData:
    source: FlowModel
    target: FlowModel
    records: tuple

    def __post_init__(self):
        recs = tuple(r if isinstance(r, Record) else Record(*r) for r in self.records)
        object.__setattr__(self, "records", recs)
        i0 = {c.name: c.index for c in self.source.crit}
        i1 = {c.name: c.index for c in self.target.crit}
        for r in recs:
            if r.source not in i0 or r.target not in i1:
                raise SchemaError(f"continuation record {r.source}->{r.target} names an unknown point")
            if i0[r.source] != i1[r.target]:
                raise SchemaError(f"continuation record {r.source}->{r.target} changes the index")

    def table(self, k):
        src, tgt = self.source.points(k), self.target.points(k)
        return CountTable(self.source.rank, src, tgt,
                          tuple(r for r in self.records if r.source in src))


@dataclass
class ContinuationReport:
    chain_map: bool
    offending: tuple = None      # (degree, row, col, difference)
    numeric_residual: float = 0.0
    holomorphic: bool = False
    determinants: dict = field(default_factory=dict)
    invertible: bool = True

    @property
    def passed(self):
        return self.chain_map and self.invertible


def continuation_check(f0, f1, psi, alpha=None, tol=1e-9):
    """Verify d1 Psi = Psi d0 exactly (ExpSum) and, at alpha, numerically.

    When both differentials vanish the continuation maps must be isomorphisms.
    """
    rank = f0.rank
    d0, d1 = f0.exp_differentials(), f1.exp_differentials()
    degrees = sorted(set(f0.degrees) | set(f1.degrees))
    report = ContinuationReport(True)
    for k in degrees:
        pk, pk1 = psi.table(k).matrix(), psi.table(k - 1).matrix()
        a0 = d0.get(k)
        b1 = d1.get(k)
        if not f0.points(k) or not f1.points(k - 1):
            continue
        lhs = exp_matmul(b1, pk, rank) if b1 and pk else zero_matrix(rank, len(f1.points(k - 1)), len(f0.points(k)))
        rhs = exp_matmul(pk1, a0, rank) if a0 and pk1 else zero_matrix(rank, len(f1.points(k - 1)), len(f0.points(k)))
        for i, (ra, rb) in enumerate(zip(lhs, rhs)):
            for j, (x, y) in enumerate(zip(ra, rb)):
                if x != y:
                    report.chain_map = False
                    report.offending = (k, f1.points(k - 1)[i], f0.points(k)[j], x - y)
                    return report
        if alpha is not None:
            n = (len(f1.points(k - 1)), len(f0.points(k)))
            res = evaluate_matrix(lhs, alpha, n) - evaluate_matrix(rhs, alpha, n)
            scale = max(1.0, magnitude_matrix(lhs, alpha), magnitude_matrix(rhs, alpha))
            report.numeric_residual = max(report.numeric_residual,
                                          float(np.abs(res).max()) / scale if res.size else 0.0)
    if alpha is not None and report.numeric_residual > tol:
        report.chain_map = False
    no_flows = all(f.count == 0 for f in f0.flows) and all(f.count == 0 for f in f1.flows)
    report.holomorphic = no_flows
    if no_flows:
        at = alpha if alpha is not None else (0.0,) * rank
        for k in degrees:
            t = psi.table(k)
            if len(t.sources) != len(t.targets):
                report.invertible = False
                continue
            if not t.sources:
                continue
            m = hat_transform(t, at)
            det = complex(np.linalg.det(m))
            report.determinants[k] = det
            if abs(det) < tol:
                report.invertible = False
    return report


# Picard-Lefschetz crossing calculus ------------------------------------------

class NonGenericMove(ValueError):
    pass


@dataclass(frozen=True)
class CriticalValueDiagram:
    points: tuple
    table: tuple
    labels: tuple = None

    def __post_init__(self):
        pts = tuple(complex(z) for z in self.points)
        tab = tuple(tuple(int(x) for x in r) for r in self.table)
        n = len(pts)
        object.__setattr__(self, "points", pts)
        object.__setattr__(self, "table", tab)
        object.__setattr__(self, "labels", tuple(self.labels) if self.labels else
                           tuple(f"A{i + 1}" for i in range(n)))
        if len(tab) != n or any(len(r) != n for r in tab):
            raise SchemaError("intersection table must be n x n")
        if any(tab[i][j] != -tab[j][i] for i in range(n) for j in range(n)):
            raise SchemaError("intersection table must be antisymmetric")
        if len(set(pts)) != n:
            raise SchemaError("critical values must be distinct")


@dataclass(frozen=True)
class SegmentMove:
    """Point k moves in a straight line to ``target`` across the segment (i, j)."""
    k: int
    i: int
    j: int
    target: complex


@dataclass(frozen=True)
class RayMove:
    """Point j moves to ``target`` across the rightward horizontal ray of point i."""
    j: int
    i: int
    target: complex


_EPS = 1e-12


def _cross(a, b):
    return a.real * b.imag - a.imag * b.real


def _segments_cross(p, q, a, b):
    """Strict proper intersection of segments pq and ab; None if degenerate."""
    d1, d2 = _cross(q - p, a - p), _cross(q - p, b - p)
    d3, d4 = _cross(b - a, p - a), _cross(b - a, q - a)
    if min(abs(d1), abs(d2), abs(d3), abs(d4)) < _EPS:
        if (abs(d1) < _EPS and abs(d2) < _EPS) or _on_segment(a, p, q) or _on_segment(b, p, q) \
                or _on_segment(p, a, b) or _on_segment(q, a, b):
            return None
    return (d1 > 0) != (d2 > 0) and (d3 > 0) != (d4 > 0)


def _on_segment(z, a, b):
    if abs(_cross(b - a, z - a)) > _EPS:
        return False
    return min(a.real, b.real) - _EPS <= z.real <= max(a.real, b.real) + _EPS and \
        min(a.imag, b.imag) - _EPS <= z.imag <= max(a.imag, b.imag) + _EPS


def _crosses_ray(p, q, z):
    """Does segment pq cross the ray {Im = Im z, Re > Re z}?  None if degenerate."""
    y = z.imag
    if abs(p.imag - y) < _EPS or abs(q.imag - y) < _EPS:
        return None
    if (p.imag > y) == (q.imag > y):
        return False
    x = p.real + (y - p.imag) * (q.real - p.real) / (q.imag - p.imag)
    if abs(x - z.real) < _EPS:
        return None
    return x > z.real


def _in_triangle(z, a, b, c):
    d1, d2, d3 = _cross(b - a, z - a), _cross(c - b, z - b), _cross(a - c, z - c)
    if min(abs(d1), abs(d2), abs(d3)) < _EPS:
        return None
    return (d1 > 0) == (d2 > 0) == (d3 > 0)


def _events(points, mover, target, family):
    """Crossing events of one family ("segment" or "ray") when ``mover`` moves
    straight to ``target``.  The other family is not tracked by this move."""
    p, q = points[mover], complex(target)
    others = [a for a in range(len(points)) if a != mover]
    out = []
    for a in others:
        if family == "segment":
            for b in others:
                if a < b:
                    hit = _segments_cross(p, q, points[a], points[b])
                    if hit is None:
                        raise NonGenericMove(
                            f"path of point {mover} meets segment ({a},{b}) degenerately")
                    if hit:
                        out.append(("segment", a, b))
            # segments (mover, x) sweep a triangle as the mover travels
            for x in others:
                if x != a:
                    inside = _in_triangle(points[a], p, q, points[x])
                    if inside is None:
                        raise NonGenericMove(f"points {mover}, {x}, {a} become collinear")
                    if inside:
                        out.append(("swept-segment", x, a))
        else:
            hit = _crosses_ray(p, q, points[a])
            if hit is None:
                raise NonGenericMove(f"path of point {mover} is level with point {a}")
            if hit:
                out.append(("ray", a))
            lo, hi = sorted((p.imag, q.imag))
            za = points[a]
            if lo < za.imag < hi:
                x = p.real + (za.imag - p.imag) * (q.real - p.real) / (q.imag - p.imag)
                if abs(x - za.real) < _EPS:
                    raise NonGenericMove(f"point {a} lies on the path of point {mover}")
                if za.real > x:
                    out.append(("swept-ray", a))
    return out


def _with_point(d, k, z):
    pts = list(d.points)
    pts[k] = complex(z)
    return pts


def crossing_update(d, move):
    """Apply one crossing and return (new diagram, basis-change matrix).

    Sign conventions (frozen by the fixture in the test suite):
      segment move: n_ij += eps * n_ik * n_kj with eps = +1 when point k
        passes from the left of the directed segment i -> j to its right;
      ray move: A_i -> A_i + eps * n_ij A_j with eps = +1 when point j
        moves downward through the ray of i; the table follows by congruence.
    A segment move only tracks segment events and a ray move only ray events.
    """
    n = len(d.points)
    tab = [list(r) for r in d.table]
    ident = [[int(a == b) for b in range(n)] for a in range(n)]
    if isinstance(move, SegmentMove):
        k, i, j = move.k, move.i, move.j
        if len({k, i, j}) != 3:
            raise NonGenericMove("segment move needs three distinct points")
        ev = _events(d.points, k, move.target, "segment")
        want = ("segment", min(i, j), max(i, j))
        if ev != [want]:
            raise NonGenericMove(f"move of point {k} produces events {ev}, expected only {want}")
        zi, zj = d.points[i], d.points[j]
        before = _cross(zj - zi, d.points[k] - zi)
        eps = 1 if before > 0 else -1
        delta = eps * tab[i][k] * tab[k][j]
        tab[i][j] += delta
        tab[j][i] -= delta
        new = CriticalValueDiagram(_with_point(d, k, move.target), tab, d.labels)
        return new, ident
    if isinstance(move, RayMove):
        j, i = move.j, move.i
        if i == j:
            raise NonGenericMove("ray move needs two distinct points")
        ev = _events(d.points, j, move.target, "ray")
        if ev != [("ray", i)]:
            raise NonGenericMove(f"move of point {j} produces events {ev}, expected only ray of {i}")
        eps = 1 if d.points[j].imag > d.points[i].imag else -1
        basis = [row[:] for row in ident]
        basis[i][j] += eps * tab[i][j]
        newtab = np.array(basis) @ np.array(tab) @ np.array(basis).T
        new = CriticalValueDiagram(_with_point(d, j, move.target), newtab.tolist(), d.labels)
        return new, basis
    raise TypeError(f"unknown move {move!r}")


def reverse_move(d_before, move):
    """The move that undoes ``move`` (applied to the diagram it produced)."""
    if isinstance(move, SegmentMove):
        return SegmentMove(move.k, move.i, move.j, d_before.points[move.k])
    return RayMove(move.j, move.i, d_before.points[move.j])


def load_diagram(data):
    try:
        pts = [complex(float(p[0]), float(p[1])) for p in data["points"]]
        return CriticalValueDiagram(pts, data["table"], data.get("labels"))
    except (KeyError, TypeError, ValueError, IndexError) as exc:
        raise SchemaError(f"diagram: {type(exc).__name__}: {exc}") from exc


def load_oracle(data, rank):
    """Cellular complex from {"graph": {...}} or {"product": [a, b]}."""
    try:
        if "graph" in data:
            g = data["graph"]
            edges = [(str(n), str(s), str(t), [Fraction(x) for x in c]) for n, s, t, c in g["edges"]]
            sub = len(edges[0][3]) if edges else rank
            return graph_complex(sub, [str(v) for v in g["vertices"]], edges)
        if "product" in data:
            a, b = (load_oracle(x, rank) for x in data["product"])
            return product_complex(a, b)
    except (KeyError, TypeError, ValueError) as exc:
        raise SchemaError(f"oracle: {type(exc).__name__}: {exc}") from exc
    raise SchemaError("oracle must be a graph or a product")


def load_continuation(data):
    src, tgt = load_flow_model(data["source"]), load_flow_model(data["target"])
    try:
        recs = tuple(Record(str(r["from"]), str(r["to"]), [Fraction(x) for x in r["class"]],
                            int(r["count"])) for r in data["records"])
    except (KeyError, TypeError, ValueError) as exc:
        raise SchemaError(f"continuation: {type(exc).__name__}: {exc}") from exc
    return ContinuationData(src, tgt, recs)


def relift(model, offsets):
    """Change the lifts of critical points: flow p -> q gains c_q - c_p.

    The twisted differential is conjugated by diagonal exponentials, so every
    Betti number is unchanged.
    """
    zero = (Fraction(0),) * model.rank
    off = {k: _cls(v) for k, v in offsets.items()}
    flows = tuple(Record(f.source, f.target,
                         tuple(g + b - a for g, a, b in zip(f.cls, off.get(f.source, zero),
                                                           off.get(f.target, zero))),
                         f.count) for f in model.flows)
    return FlowModel(model.rank, model.crit, flows, model.theta, model.tail)
