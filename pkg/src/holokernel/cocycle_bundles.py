"""Transition families of exponential sums over a chart atlas.

A transition family from chart A to chart B is a class-graded count table
whose records (S, S', g, n) evaluate to the matrix entry
(S', S) = sum n exp(-<g, psi>).  Atlases are checked for the cocycle
identity at the record level, glued into bundles by a cokernel
presentation, and used to pair sections into generating functions.
"""

from dataclasses import dataclass, field
from fractions import Fraction
from functools import lru_cache
import cmath
import itertools

import numpy as np

from .config import MAX_EXPONENT, RANK_RTOL
from .morse_novikov import (
    CountTable,
    ExpSum,
    Record,
    SchemaError,
    compose_tables,
    exp_matmul,
    hat_transform,
)


class HorizonExceeded(ArithmeticError):
    pass


class ConeViolation(ValueError):
    pass


def _cls(v):
    return tuple(Fraction(x) for x in v)


def _dot(a, b):
    return sum((Fraction(x) * Fraction(y) for x, y in zip(a, b)), Fraction(0))


@dataclass(frozen=True)
class Chart:
    label: str
    solutions: tuple          # names
    charges: tuple            # one rational vector per solution

    def __post_init__(self):
        object.__setattr__(self, "solutions", tuple(self.solutions))
        object.__setattr__(self, "charges", tuple(_cls(c) for c in self.charges))
        if len(set(self.solutions)) != len(self.solutions):
            raise SchemaError(f"chart {self.label}: solution names must be unique")
        if len(self.charges) != len(self.solutions):
            raise SchemaError(f"chart {self.label}: one charge per solution")

    def charge(self, name):
        return self.charges[self.solutions.index(name)]


@dataclass(frozen=True)
class Horizon:
    """Keep records with <g, direction> <= bound."""
    bound: Fraction
    direction: tuple

    def admits(self, g):
        return _dot(g, self.direction) <= self.bound


@dataclass(frozen=True)
class TransitionFamily:
    source: Chart
    target: Chart
    records: tuple
    rank: int
    truncated: bool = False

    def __post_init__(self):
        recs = tuple(r if isinstance(r, Record) else Record(*r) for r in self.records)
        object.__setattr__(self, "records", recs)
        for r in recs:
            if r.source not in self.source.solutions:
                raise SchemaError(f"{r.source} is not a solution of chart {self.source.label}")
            if r.target not in self.target.solutions:
                raise SchemaError(f"{r.target} is not a solution of chart {self.target.label}")
            if len(r.cls) != self.rank:
                raise SchemaError(f"record class {r.cls} has wrong length")

    @property
    def table(self):
        return CountTable(self.rank, self.source.solutions, self.target.solutions, self.records)

    def canonical(self):
        return TransitionFamily(self.source, self.target, self.table.canonical().records,
                                self.rank, self.truncated)

    def key(self):
        return frozenset((r.source, r.target, r.cls, r.count) for r in self.canonical().records)

    @classmethod
    def identity(cls, chart, rank):
        zero = (0,) * rank
        return cls(chart, chart, tuple(Record(s, s, zero, 1) for s in chart.solutions), rank)


def evaluate_transition(family, psi):
    """Matrix with entry (S', S) = sum over records of n exp(-<g, psi>)."""
    if family.truncated:
        raise HorizonExceeded(
            f"family {family.source.label}->{family.target.label} was truncated at the horizon")
    psi = tuple(complex(x) for x in psi)
    if len(psi) != family.rank:
        raise ValueError(f"psi has length {len(psi)}, lattice rank is {family.rank}")
    return hat_transform(family.table, tuple(-x for x in psi))


def compose_transitions(g1, g2, horizon=None):
    """G1: A -> B followed by G2: B -> C, as a family A -> C.

    Evaluates to evaluate(G2) @ evaluate(G1).
    """
    if g1.target.label != g2.source.label:
        raise SchemaError(f"cannot compose {g1.source.label}->{g1.target.label} "
                          f"with {g2.source.label}->{g2.target.label}")
    if g1.rank != g2.rank:
        raise SchemaError("lattice ranks differ")
    table = compose_tables(g2.table, g1.table)
    recs = table.records
    truncated = g1.truncated or g2.truncated
    if horizon is not None:
        kept = tuple(r for r in recs if horizon.admits(r.cls))
        truncated = truncated or len(kept) != len(recs)
        recs = kept
    return TransitionFamily(g1.source, g2.target, recs, g1.rank, truncated)


@dataclass(frozen=True)
class Atlas:
    rank: int
    charts: tuple
    families: dict = field(hash=False, compare=False)
    horizon: Horizon = None
    duality: dict = field(default=None, hash=False, compare=False)

    def __post_init__(self):
        labels = [c.label for c in self.charts]
        if len(set(labels)) != len(labels):
            raise SchemaError("chart labels must be unique")
        for (a, b), fam in self.families.items():
            if fam.source.label != a or fam.target.label != b:
                raise SchemaError(f"family stored under ({a},{b}) links "
                                  f"{fam.source.label}->{fam.target.label}")

    def chart(self, label):
        for c in self.charts:
            if c.label == label:
                return c
        raise KeyError(label)

    def family(self, a, b):
        if a == b:
            return self.families.get((a, b), TransitionFamily.identity(self.chart(a), self.rank))
        try:
            return self.families[(a, b)]
        except KeyError:
            raise SchemaError(f"atlas has no family {a}->{b}") from None


def _restrict(family, horizon):
    if horizon is None:
        return family.canonical()
    return TransitionFamily(family.source, family.target,
                            tuple(r for r in family.canonical().records if horizon.admits(r.cls)),
                            family.rank, family.truncated)


def gauge_transform(atlas, lam):
    """Conjugate by diagonal factors exp(-lam[chart] <charge(S), psi>).

    The record S -> S' of the family A -> B has its class shifted by
    lam[B] charge(S') - lam[A] charge(S).  ``lam`` maps chart labels to
    rational scalars; missing charts get 0.
    """
    lam = {k: Fraction(v) for k, v in lam.items()}
    fams = {}
    for (a, b), fam in atlas.families.items():
        ca, cb = fam.source, fam.target
        la, lb = lam.get(a, Fraction(0)), lam.get(b, Fraction(0))
        recs = tuple(Record(r.source, r.target,
                            tuple(g + lb * y - la * x for g, x, y in
                                  zip(r.cls, ca.charge(r.source), cb.charge(r.target))),
                            r.count) for r in fam.records)
        fams[(a, b)] = TransitionFamily(ca, cb, recs, fam.rank, fam.truncated)
    return Atlas(atlas.rank, atlas.charts, fams, atlas.horizon, atlas.duality)


@dataclass
class CocycleReport:
    verified: bool
    triples_checked: int = 0
    failure: dict = None


def _first_difference(got, want):
    gd = {(r.source, r.target, r.cls): r.count for r in got.records}
    wd = {(r.source, r.target, r.cls): r.count for r in want.records}
    for key in sorted(set(gd) | set(wd)):
        if gd.get(key, 0) != wd.get(key, 0):
            s, t, g = key
            return {"source": s, "target": t, "class": [str(x) for x in g],
                    "composite": gd.get(key, 0), "stored": wd.get(key, 0)}
    return None


def check_cocycle(atlas):
    """Record-level check of G_{B->C} o G_{A->B} = G_{A->C} for all triples,
    and G_{B->A} o G_{A->B} = id, up to the atlas horizon."""
    labels = [c.label for c in atlas.charts]
    hz = atlas.horizon
    report = CocycleReport(True)
    triples = [(a, b, c) for a in labels for b in labels for c in labels
               if len({a, b, c}) == 3 or (a == c and a != b)]
    for a, b, c in triples:
        comp = _restrict(compose_transitions(atlas.family(a, b), atlas.family(b, c), hz), hz)
        want = _restrict(atlas.family(a, c), hz)
        report.triples_checked += 1
        diff = _first_difference(comp, want)
        if diff is not None:
            report.verified = False
            report.failure = {"triple": [a, b, c], **diff}
            return report
    return report


# bundle assembly -------------------------------------------------------------

@dataclass
class SampleFrame:
    index: int
    psi: tuple
    rank: int
    frames: dict            # chart -> projection matrix onto the cokernel
    max_transition_error: float


@dataclass
class BundleReport:
    expected_rank: int
    samples: list
    skipped: list           # (index, reason)

    @property
    def consistent(self):
        return all(s.rank == self.expected_rank and s.max_transition_error < 1e-9
                   for s in self.samples)


def _left_null(m, scale):
    u, s, _ = np.linalg.svd(m)
    tol = RANK_RTOL * max(1.0, scale)
    r = int((s > tol).sum())
    return u[:, r:].conj().T, r


def assemble_bundle(atlas, samples):
    """Cokernel of Phi: (+) V_xy -> (+) V_z, with Phi(v) = v at x minus Psi_xy v at y.

    Returns per-sample cokernel rank, the chart frames (projections of V_z onto
    the cokernel) and the largest deviation between frame-induced chart
    identifications and the evaluated transitions.
    """
    labels = [c.label for c in atlas.charts]
    dims = {c.label: len(c.solutions) for c in atlas.charts}
    if len(set(dims.values())) != 1:
        raise SchemaError("charts must have the same number of solutions")
    n = next(iter(dims.values()))
    offset = {lab: i * n for i, lab in enumerate(labels)}
    pairs = [(x, y) for x in labels for y in labels if x != y and (x, y) in atlas.families]
    report = BundleReport(n, [], [])
    for idx, psi in enumerate(samples):
        try:
            mats = {p: evaluate_transition(atlas.family(*p), psi) for p in pairs}
        except (OverflowError, HorizonExceeded, ArithmeticError) as exc:
            report.skipped.append((idx, str(exc)))
            continue
        bad = [p for p, m in mats.items() if abs(np.linalg.det(m)) < 1e-12]
        if bad:
            report.skipped.append((idx, f"singular transition {bad[0][0]}->{bad[0][1]}"))
            continue
        phi = np.zeros((n * len(labels), n * len(pairs)), dtype=complex)
        for j, (x, y) in enumerate(pairs):
            cols = slice(j * n, (j + 1) * n)
            phi[offset[x]:offset[x] + n, cols] += np.eye(n)
            phi[offset[y]:offset[y] + n, cols] -= mats[(x, y)]
        scale = max([1.0] + [float(np.abs(m).max()) for m in mats.values()])
        if pairs:
            q, r = _left_null(phi, scale)
        else:
            q, r = np.eye(n * len(labels)), 0
        frames = {lab: q[:, offset[lab]:offset[lab] + n] for lab in labels}
        err = 0.0
        if q.shape[0] == n:
            for (x, y), m in mats.items():
                induced = np.linalg.solve(frames[y], frames[x])
                err = max(err, float(np.abs(induced - m).max()) / max(1.0, float(np.abs(m).max())))
        else:
            err = float("inf")
        report.samples.append(SampleFrame(idx, tuple(psi), q.shape[0], frames, err))
    return report


# sections and generating functions -------------------------------------------

@dataclass(frozen=True)
class SectionData:
    chart: str
    rank: int
    entries: dict           # solution name -> ExpSum (classes weighted by exp(-<b, psi>))

    def scaled(self, k):
        return SectionData(self.chart, self.rank, {s: e * k for s, e in self.entries.items()})


@dataclass(frozen=True)
class GeneratingFunction:
    """f(psi) = sum n_b exp(-<b, psi>), supported in {<phi, b> >= 0}."""

    phi: tuple
    terms: tuple            # sorted (class, n) pairs, n != 0

    @property
    def cone(self):
        return (self.phi,)

    def as_dict(self):
        return dict(self.terms)

    def coefficient(self, b):
        return self.as_dict().get(_cls(b), 0)

    def evaluate(self, psi):
        total = 0j
        for b, c in self.terms:
            z = -sum(complex(p) * float(x) for p, x in zip(psi, b))
            if abs(z.real) > MAX_EXPONENT:
                raise OverflowError(f"exponent {z.real:.3g} exceeds {MAX_EXPONENT}")
            total += complex(c) * cmath.exp(z)
        return total

    def shell_magnitudes(self, psi):
        """|sum of terms| per shell <phi, b>, in increasing shell order."""
        shells = {}
        for b, c in self.terms:
            z = -sum(complex(p) * float(x) for p, x in zip(psi, b))
            shells[_dot(self.phi, b)] = shells.get(_dot(self.phi, b), 0j) + complex(c) * cmath.exp(z)
        return [(k, abs(v)) for k, v in sorted(shells.items())]


def generating_function(counts, phi):
    """Package {b: n_b} with its cone certificate; refuse terms with <phi, b> < 0."""
    if phi is None:
        raise ConeViolation("a phi covector is required")
    phi = _cls(phi)
    items = counts.items() if isinstance(counts, dict) else counts
    acc = {}
    for b, n in items:
        b = _cls(b)
        if len(b) != len(phi):
            raise SchemaError(f"class {b} does not match covector length {len(phi)}")
        acc[b] = acc.get(b, 0) + n
    for b, n in acc.items():
        if n != 0 and _dot(phi, b) < 0:
            raise ConeViolation(f"n_b = {n} at class {[str(x) for x in b]} with <phi, b> < 0")
    return GeneratingFunction(phi, tuple(sorted((b, n) for b, n in acc.items() if n != 0)))


def _transport(section, family):
    """Apply a family to a section vector: out[S'] = sum G(S', S) sec[S]."""
    out = {s: ExpSum(section.rank) for s in family.target.solutions}
    for r in family.records:
        if r.source in section.entries:
            out[r.target] = out[r.target] + section.entries[r.source].shift(r.cls) * r.count
    return SectionData(family.target.label, section.rank, out)


def _transport_dual(section, family):
    """Pull a dual section back along a family: out[S] = sum G(S', S) sec[S']."""
    out = {s: ExpSum(section.rank) for s in family.source.solutions}
    for r in family.records:
        if r.target in section.entries:
            out[r.source] = out[r.source] + section.entries[r.target].shift(r.cls) * r.count
    return SectionData(family.source.label, section.rank, out)


def pair_sections(g1, g2, atlas, phi, chart=None):
    """sum_S g1[S] g2[S] as a generating function, computed on ``chart``.

    g1 is transported forward into the chart and g2 (a dual section) is pulled
    back; by the cocycle identity the result does not depend on the chart.
    Names of g2 pass through the atlas duality bijection when one is declared.
    """
    chart = chart or g2.chart
    g2 = _apply_duality(g2, atlas)
    a = _transport(g1, atlas.family(g1.chart, chart)) if g1.chart != chart else g1
    b = _transport_dual(g2, atlas.family(chart, g2.chart)) if g2.chart != chart else g2
    total = ExpSum(g1.rank)
    for s, x in a.entries.items():
        if s in b.entries:
            total = total + x * b.entries[s]
    return generating_function(total.terms, phi)


def _apply_duality(section, atlas):
    if not atlas.duality:
        names = atlas.chart(section.chart).solutions
        missing = [s for s in section.entries if s not in names]
        if missing:
            raise SchemaError(f"section names {missing} are not solutions of chart {section.chart}")
        return section
    out = {}
    for s, e in section.entries.items():
        if s not in atlas.duality:
            raise SchemaError(f"no dual identification for solution {s}")
        out[atlas.duality[s]] = e
    return SectionData(section.chart, section.rank, out)


def gauge_section(section, atlas, lam, dual=False):
    """Apply the diagonal factor of chart ``section.chart`` (inverse for dual sections)."""
    chart = atlas.chart(section.chart)
    l = Fraction(lam.get(section.chart, 0))
    sign = -1 if dual else 1
    return SectionData(section.chart, section.rank,
                       {s: e.shift(tuple(sign * l * x for x in chart.charge(s)))
                        for s, e in section.entries.items()})


# configuration counts -------------------------------------------------------

def slag_count(weights, classes, kappa, positivity):
    """Sum over multisets {(k_i, P_i)} with sum k_i P_i = kappa of prod w(k_i, P_i).

    ``weights`` maps (k, class index) to a rational (missing means 0) or is a
    callable.  ``positivity`` must pair strictly positively with every class.
    """
    if positivity is None:
        raise ConeViolation("a positivity covector is required for a finite enumeration")
    classes = [_cls(c) for c in classes]
    kappa, positivity = _cls(kappa), _cls(positivity)
    heights = [_dot(positivity, c) for c in classes]
    if any(h <= 0 for h in heights):
        raise ConeViolation("every class must pair strictly positively with the positivity covector")
    budget = _dot(positivity, kappa)
    if budget < 0:
        return Fraction(0)
    w = weights if callable(weights) else (lambda k, i: weights.get((k, i), 0))
    parts = []
    for i, (c, h) in enumerate(zip(classes, heights)):
        k = 1
        while k * h <= budget:
            wk = Fraction(w(k, i))
            if wk:
                parts.append((tuple(k * x for x in c), k * h, wk))
            k += 1

    @lru_cache(maxsize=None)
    def count(idx, rest):
        if not any(rest):
            return Fraction(1)
        if idx == len(parts):
            return Fraction(0)
        vec, h, wk = parts[idx]
        total = count(idx + 1, rest)
        used, r, m = Fraction(1), rest, 0
        while True:
            r = tuple(a - b for a, b in zip(r, vec))
            m += 1
            if _dot(positivity, r) < 0:
                break
            used *= wk
            total += used * count(idx + 1, r)
        return total

    return count(0, kappa)


# construction helpers --------------------------------------------------------

def family_from_matrix(source, target, matrix, rank):
    """Family whose evaluation is ``matrix``: a dict (target name, source name) -> ExpSum."""
    recs = []
    for (t, s), e in matrix.items():
        for g, c in e.terms.items():
            recs.append(Record(s, t, g, c))
    return TransitionFamily(source, target, tuple(recs), rank).canonical()


def unipotent_inverse(family):
    """Inverse of a family whose class-graded matrix is identity plus nilpotent."""
    names = family.source.solutions
    if names != family.target.solutions:
        raise SchemaError("unipotent inverse needs matching solution lists")
    rank = family.rank
    n = len(names)
    m = family.table.matrix()
    nil = [[m[i][j] - (ExpSum.constant(rank) if i == j else ExpSum(rank)) for j in range(n)]
           for i in range(n)]
    inv = [[ExpSum.constant(rank) if i == j else ExpSum(rank) for j in range(n)] for i in range(n)]
    power = [row[:] for row in inv]
    for k in range(1, n + 1):
        power = exp_matmul(nil, power, rank)
        if all(x.is_zero() for row in power for x in row):
            break
        sign = -1 if k % 2 else 1
        inv = [[inv[i][j] + power[i][j] * sign for j in range(n)] for i in range(n)]
    else:
        if any(not x.is_zero() for row in power for x in row):
            raise ValueError("family is not unipotent")
    return family_from_matrix(family.target, family.source,
                              {(names[i], names[j]): inv[i][j] for i in range(n) for j in range(n)},
                              rank)


def atlas_from_frames(charts, frames, rank, horizon=None):
    """Cocycle-consistent atlas with G_{x->y} = F_y^{-1} F_x.

    ``frames`` maps each label to a unipotent family x -> x; all charts must
    share solution names.
    """
    by = {c.label: c for c in charts}
    inv = {lab: unipotent_inverse(f) for lab, f in frames.items()}
    fams = {}
    for x, y in itertools.permutations(by, 2):
        fx = TransitionFamily(by[x], by[y], frames[x].records, rank)
        fams[(x, y)] = compose_transitions(fx, inv[y]).canonical()
    return Atlas(rank, tuple(charts), fams, horizon)


# JSON loading ---------------------------------------------------------------

def _infer_rank(data):
    if "lattice_rank" in data:
        return int(data["lattice_rank"])
    for f in data.get("transitions", []):
        for r in f["records"]:
            return len(r["class"])
    for c in data["charts"]:
        for s in c["solutions"]:
            if "charge" in s:
                return len(s["charge"])
    raise SchemaError("atlas: cannot infer the lattice rank")


def load_atlas(data):
    try:
        rank = _infer_rank(data)
        charts = [Chart(str(c["label"]), [s["name"] for s in c["solutions"]],
                        [s.get("charge", [0] * rank) for s in c["solutions"]])
                  for c in data["charts"]]
        by = {c.label: c for c in charts}
        fams = {}
        for f in data.get("transitions", []):
            a, b = str(f["from"]), str(f["to"])
            if (a, b) in fams:
                raise SchemaError(f"duplicate family {a}->{b}")
            recs = tuple(Record(str(r["s"]), str(r["s_prime"]),
                                [Fraction(x) for x in r["class"]], int(r["count"]))
                         for r in f["records"])
            fams[(a, b)] = TransitionFamily(by[a], by[b], recs, rank)
        hz = data.get("horizon")
        horizon = Horizon(Fraction(hz["bound"]), _cls(hz["direction"])) if hz else None
        duality = data.get("duality")
    except (KeyError, TypeError, ValueError) as exc:
        if isinstance(exc, SchemaError):
            raise
        raise SchemaError(f"atlas: {type(exc).__name__}: {exc}") from exc
    return Atlas(rank, tuple(charts), fams, horizon, duality)


def dump_atlas(atlas):
    out = {
        "lattice_rank": atlas.rank,
        "charts": [{"label": c.label,
                    "solutions": [{"name": s, "charge": [str(x) for x in q]}
                                  for s, q in zip(c.solutions, c.charges)]}
                   for c in atlas.charts],
        "transitions": [{"from": a, "to": b,
                         "records": [{"s": r.source, "s_prime": r.target,
                                      "class": [str(x) for x in r.cls], "count": r.count}
                                     for r in fam.canonical().records]}
                        for (a, b), fam in sorted(atlas.families.items())],
    }
    if atlas.horizon:
        out["horizon"] = {"bound": str(atlas.horizon.bound),
                          "direction": [str(x) for x in atlas.horizon.direction]}
    if atlas.duality:
        out["duality"] = dict(atlas.duality)
    return out


def load_section(data, rank):
    try:
        entries = {}
        for name, terms in data["entries"].items():
            acc = {}
            for t in terms:
                g = tuple(Fraction(x) for x in t["class"])
                acc[g] = acc.get(g, 0) + int(t["count"])
            entries[str(name)] = ExpSum(rank, acc)
        return SectionData(str(data["chart"]), rank, entries)
    except (KeyError, TypeError, ValueError) as exc:
        raise SchemaError(f"section: {type(exc).__name__}: {exc}") from exc
