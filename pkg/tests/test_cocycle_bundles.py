from fractions import Fraction
import itertools
import json
import random

import numpy as np
import pytest

from holokernel import _fixtures as fx
from holokernel import cocycle_bundles as cb
from holokernel.cocycle_bundles import Atlas, Chart, TransitionFamily
from holokernel.morse_novikov import ExpSum, Record, SchemaError


def _psis(rank, count, seed):
    rng = np.random.default_rng(seed)
    return [tuple(complex(*rng.normal(0, 1, 2)) for _ in range(rank)) for _ in range(count)]


def _random_family(rng, a, b, rank, size=5):
    recs = [Record(rng.choice(a.solutions), rng.choice(b.solutions),
                   tuple(Fraction(rng.randint(-2, 2), rng.randint(1, 2)) for _ in range(rank)),
                   rng.randint(-3, 3)) for _ in range(size)]
    return TransitionFamily(a, b, tuple(recs), rank)


def _charts(labels, names=("S1", "S2", "S3"), rank=2, seed=0):
    rng = random.Random(seed)
    return [Chart(l, names, [tuple(rng.randint(-2, 2) for _ in range(rank)) for _ in names])
            for l in labels]


# evaluation and composition ------------------------------------------------------

def test_evaluation_examples():
    a, b = _charts("AB")
    assert not np.any(cb.evaluate_transition(TransitionFamily(a, b, (), 2), (0.3, 1j)))
    single = TransitionFamily(a, b, (Record("S1", "S3", (0, 0), 1),), 2)
    m = cb.evaluate_transition(single, (0.7, -2j))
    expected = np.zeros((3, 3))
    expected[2, 0] = 1
    assert np.array_equal(m, expected)
    two = TransitionFamily(a, b, (Record("S1", "S3", (1, 0), 2), Record("S1", "S3", (0, 3), -5)), 2)
    assert cb.evaluate_transition(two, (0, 0))[2, 0] == -3
    z = cb.evaluate_transition(two, (0.5, 0.1))[2, 0]
    assert abs(z - (2 * np.exp(-0.5) - 5 * np.exp(-0.3))) < 1e-12


def test_compose_with_identity():
    rng = random.Random(1)
    a, b = _charts("AB")
    g = _random_family(rng, a, b, 2)
    assert cb.compose_transitions(TransitionFamily.identity(a, 2), g).key() == g.key()
    assert cb.compose_transitions(g, TransitionFamily.identity(b, 2)).key() == g.key()
    with pytest.raises(SchemaError):
        cb.compose_transitions(g, g)


def test_composition_associative_and_homomorphic():
    rng = random.Random(2)
    a, b, c, d = _charts("ABCD")
    for _ in range(3):
        g1, g2, g3 = (_random_family(rng, x, y, 2) for x, y in ((a, b), (b, c), (c, d)))
        left = cb.compose_transitions(cb.compose_transitions(g1, g2), g3)
        right = cb.compose_transitions(g1, cb.compose_transitions(g2, g3))
        assert left.canonical().records == right.canonical().records
        g12 = cb.compose_transitions(g1, g2)
        for psi in _psis(2, 20, seed=3):
            lhs = cb.evaluate_transition(g12, psi)
            rhs = cb.evaluate_transition(g2, psi) @ cb.evaluate_transition(g1, psi)
            assert np.abs(lhs - rhs).max() <= 1e-9 * max(1.0, np.abs(rhs).max())


def test_horizon_truncation_refuses_evaluation():
    a, b, c = _charts("ABC")
    g1 = TransitionFamily(a, b, (Record("S1", "S1", (2, 0), 1),), 2)
    g2 = TransitionFamily(b, c, (Record("S1", "S2", (1, 0), 1),), 2)
    hz = cb.Horizon(Fraction(2), (1, 0))
    comp = cb.compose_transitions(g1, g2, hz)
    assert comp.truncated and not comp.records
    with pytest.raises(cb.HorizonExceeded):
        cb.evaluate_transition(comp, (0, 0))
    assert not cb.compose_transitions(g1, g2, cb.Horizon(Fraction(3), (1, 0))).truncated


# cocycle and gauge -----------------------------------------------------------------

def test_single_chart_atlas_verified():
    (a,) = _charts("A")
    rep = cb.check_cocycle(Atlas(2, (a,), {}))
    assert rep.verified and rep.triples_checked == 0


def test_wall_atlas_verified():
    atlas = fx.wall_atlas()
    rep = cb.check_cocycle(atlas)
    assert rep.verified and rep.triples_checked == 12


def test_wall_atlas_built_from_crossing():
    ab = fx.wall_atlas().family("A", "B")
    off = [r for r in ab.records if r.source != r.target]
    assert len(off) == 1 and off[0].cls == fx.WALL_CLASS
    assert abs(off[0].count) == abs(fx.wall_diagram().table[0][1])


def test_mutation_is_pinpointed():
    atlas = fx.wall_atlas()
    fam = atlas.family("A", "B")
    recs = list(fam.records)
    i = next(k for k, r in enumerate(recs) if r.source != r.target)
    recs[i] = Record(recs[i].source, recs[i].target, recs[i].cls, recs[i].count + 1)
    fams = dict(atlas.families)
    fams[("A", "B")] = TransitionFamily(fam.source, fam.target, tuple(recs), fam.rank)
    rep = cb.check_cocycle(Atlas(atlas.rank, atlas.charts, fams))
    assert not rep.verified
    f = rep.failure
    assert f["triple"] == ["A", "B", "A"]
    assert f["composite"] != f["stored"]


def test_gauge_zero_is_identity():
    atlas = fx.wall_atlas()
    moved = cb.gauge_transform(atlas, {})
    for key, fam in atlas.families.items():
        assert moved.families[key].key() == fam.key()


def test_gauge_preserves_verdict():
    rng = random.Random(5)
    good = fx.wall_atlas()
    fams = dict(good.families)
    bad_fam = fams[("B", "C")]
    fams[("B", "C")] = TransitionFamily(bad_fam.source, bad_fam.target,
                                        bad_fam.records + (Record("S1", "S2", (0, 0), 1),), 2)
    bad = Atlas(2, good.charts, fams)
    for _ in range(10):
        lam = {c: Fraction(rng.randint(-5, 5), rng.randint(1, 3)) for c in "ABC"}
        assert cb.check_cocycle(cb.gauge_transform(good, lam)).verified
        assert not cb.check_cocycle(cb.gauge_transform(bad, lam)).verified


def test_gauge_is_diagonal_conjugation():
    atlas = fx.wall_atlas()
    lam = {"A": Fraction(1, 2), "B": Fraction(-2)}
    moved = cb.gauge_transform(atlas, lam)
    psi = (0.3 + 0.2j, -0.1 + 1j)

    def diag(label):
        c = atlas.chart(label)
        return np.diag([np.exp(-float(lam.get(label, 0)) * sum(float(q) * p for q, p in zip(ch, psi)))
                        for ch in c.charges])

    m = cb.evaluate_transition(atlas.family("A", "B"), psi)
    m2 = cb.evaluate_transition(moved.family("A", "B"), psi)
    assert np.allclose(m2, diag("B") @ m @ np.linalg.inv(diag("A")))


# bundle ----------------------------------------------------------------------------------

def test_bundle_two_chambers():
    atlas = fx.wall_atlas()
    two = Atlas(2, atlas.charts[:2], {k: v for k, v in atlas.families.items() if set(k) <= {"A", "B"}})
    rep = cb.assemble_bundle(two, _psis(2, 20, seed=7))
    assert [s.rank for s in rep.samples] == [3] * 20
    assert rep.consistent and not rep.skipped


def test_bundle_three_chambers():
    rep = cb.assemble_bundle(fx.wall_atlas(), _psis(2, 20, seed=8))
    assert rep.consistent and len(rep.samples) == 20


def test_bundle_identity_atlas():
    charts = _charts("AB")
    fams = {("A", "B"): TransitionFamily(charts[0], charts[1],
                                         tuple(Record(s, s, (0, 0), 1) for s in charts[0].solutions), 2),
            ("B", "A"): TransitionFamily(charts[1], charts[0],
                                         tuple(Record(s, s, (0, 0), 1) for s in charts[0].solutions), 2)}
    rep = cb.assemble_bundle(Atlas(2, tuple(charts), fams), _psis(2, 5, seed=1))
    for s in rep.samples:
        assert s.rank == 3
        assert np.allclose(np.linalg.solve(s.frames["B"], s.frames["A"]), np.eye(3))


def test_bundle_dense_wall_variant():
    rng = random.Random(12)
    charts = _charts("PQRS", seed=3)
    frames = {}
    for c in charts:
        recs = [Record(s, s, (0, 0), 1) for s in c.solutions]
        i, j = sorted(rng.sample(range(3), 2))
        recs.append(Record(c.solutions[j], c.solutions[i], (rng.randint(-1, 1), rng.randint(0, 2)),
                           rng.choice([-2, -1, 1, 2])))
        frames[c.label] = TransitionFamily(c, c, tuple(recs), 2)
    atlas = cb.atlas_from_frames(charts, frames, 2)
    assert cb.check_cocycle(atlas).verified
    rep = cb.assemble_bundle(atlas, _psis(2, 20, seed=13))
    assert rep.consistent and [s.rank for s in rep.samples] == [3] * 20


def test_bundle_skips_singular_samples():
    a, b = _charts("AB", names=("S1",))
    fam = TransitionFamily(a, b, (Record("S1", "S1", (0, 0), 1), Record("S1", "S1", (1, 0), -1)), 2)
    back = TransitionFamily(b, a, (Record("S1", "S1", (0, 0), 1),), 2)
    rep = cb.assemble_bundle(Atlas(2, (a, b), {("A", "B"): fam, ("B", "A"): back}), [(0, 0), (1, 0)])
    assert [i for i, _ in rep.skipped] == [0]


# sections and pairing ----------------------------------------------------------------------

def _fixture_sections():
    atlas = cb.load_atlas(json.loads((fx.FIXTURE_DIR / "sections_atlas.json").read_text()))
    data = json.loads((fx.FIXTURE_DIR / "sections.json").read_text())
    return atlas, cb.load_section(data["first"], 1), cb.load_section(data["second"], 1), data["phi"]


def test_trivial_pairing():
    (a,) = _charts("A", names=("S",), rank=1)
    atlas = Atlas(1, (a,), {})
    s = cb.SectionData("A", 1, {"S": ExpSum.constant(1)})
    f = cb.pair_sections(s, s, atlas, (1,))
    assert f.terms == (((Fraction(0),), 1),)


def test_pairing_fixture_gives_thirteen():
    atlas, g1, g2, phi = _fixture_sections()
    f = cb.pair_sections(g1, g2, atlas, phi)
    assert f.coefficient((4,)) == 13
    assert f.as_dict() == {(Fraction(4),): 13}


def test_pairing_is_chart_independent():
    atlas, g1, g2, phi = _fixture_sections()
    on_a = cb.pair_sections(g1, g2, atlas, phi, "A")
    on_b = cb.pair_sections(g1, g2, atlas, phi, "B")
    assert on_a == on_b
    for psi in _psis(1, 20, seed=21):
        assert abs(on_a.evaluate(psi) - on_b.evaluate(psi)) <= 1e-9 * max(1.0, abs(on_a.evaluate(psi)))


def test_pairing_with_transported_first_section():
    atlas, g1, g2, phi = _fixture_sections()
    moved = cb._transport(g1, atlas.family("A", "B"))
    assert moved.chart == "B"
    assert cb.pair_sections(moved, g2, atlas, phi) == cb.pair_sections(g1, g2, atlas, phi)


def test_pairing_is_bilinear():
    atlas, g1, g2, phi = _fixture_sections()
    base = cb.pair_sections(g1, g2, atlas, phi).as_dict()
    for k1, k2 in ((2, 1), (1, -3), (4, 5)):
        got = cb.pair_sections(g1.scaled(k1), g2.scaled(k2), atlas, phi).as_dict()
        assert got == {b: n * k1 * k2 for b, n in base.items()}


def test_gauge_factors_cancel_in_pairing():
    atlas, g1, g2, phi = _fixture_sections()
    lam = {"A": Fraction(3), "B": Fraction(-1, 2)}
    moved = cb.gauge_transform(atlas, lam)
    for chart in ("A", "B"):
        got = cb.pair_sections(cb.gauge_section(g1, atlas, lam),
                               cb.gauge_section(g2, atlas, lam, dual=True), moved, phi, chart)
        assert got == cb.pair_sections(g1, g2, atlas, phi)


def test_cone_support_enforced():
    assert cb.generating_function({}, (1,)).terms == ()
    assert cb.generating_function({(2,): 3}, (1,)).coefficient((2,)) == 3
    with pytest.raises(cb.ConeViolation):
        cb.generating_function({(-1,): 1}, (1,))
    atlas, g1, _, _ = _fixture_sections()
    neg = cb.SectionData("A", 1, {"S1": ExpSum(1, {(-5,): 1})})
    with pytest.raises(cb.ConeViolation):
        cb.pair_sections(g1, neg, atlas, (1,))


def test_shells_decrease_along_phi():
    f = cb.generating_function({(1, 0): 1, (1, 1): 2, (2, 1): 6, (3, 0): -20, (4, 2): 50}, (1, 0))
    for r in (5, 10):
        mags = [m for _, m in f.shell_magnitudes((r, 0))]
        assert all(b < a for a, b in zip(mags, mags[1:]))


def test_duality_bijection():
    (a,) = _charts("A", names=("S1", "S2"), rank=1)
    atlas = Atlas(1, (a,), {}, duality={"T1": "S2", "T2": "S1"})
    g1 = cb.SectionData("A", 1, {"S1": ExpSum.monomial((1,)), "S2": ExpSum.monomial((2,), 3)})
    g2 = cb.SectionData("A", 1, {"T1": ExpSum.monomial((0,), 5)})
    assert cb.pair_sections(g1, g2, atlas, (1,)).as_dict() == {(Fraction(2),): 15}
    with pytest.raises(SchemaError):
        cb.pair_sections(g1, cb.SectionData("A", 1, {"X": ExpSum.constant(1)}), atlas, (1,))


# configuration counts ------------------------------------------------------------------------

def _series_count(weights, classes, kappa, positivity):
    """Coefficient of x^kappa in prod over parts of 1 / (1 - w x^(k P))."""
    classes = [tuple(Fraction(x) for x in c) for c in classes]
    kappa = tuple(Fraction(x) for x in kappa)
    dot = lambda v: sum(Fraction(p) * x for p, x in zip(positivity, v))
    budget = dot(kappa)
    if budget < 0:
        return Fraction(0)
    series = {tuple(Fraction(0) for _ in kappa): Fraction(1)}
    for i, c in enumerate(classes):
        k = 1
        while k * dot(c) <= budget:
            w = Fraction(weights.get((k, i), 0))
            if w:
                vec = tuple(k * x for x in c)
                new = dict(series)
                for g, v in series.items():
                    cur, coef = g, v
                    while True:
                        cur = tuple(a + b for a, b in zip(cur, vec))
                        if dot(cur) > budget:
                            break
                        coef *= w
                        new[cur] = new.get(cur, 0) + coef
                series = new
            k += 1
    return series.get(kappa, Fraction(0))


def _enumerated_count(weights, classes, kappa):
    """Sum over sorted tuples of parts (multisets) by explicit listing."""
    parts = sorted(weights)
    total = Fraction(0)
    for size in range(1, 9):
        for combo in itertools.combinations_with_replacement(parts, size):
            s = tuple(sum(k * Fraction(classes[i][d]) for k, i in combo) for d in range(len(kappa)))
            if s == tuple(Fraction(x) for x in kappa):
                prod = Fraction(1)
                for p in combo:
                    prod *= weights[p]
                total += prod
    return total


def test_slag_examples():
    data = fx.slag_weights()
    weights = {(w["k"], w["class"]): Fraction(w["w"]) for w in data["weights"]}
    assert cb.slag_count(weights, data["classes"], (2, 1), (1, 1)) == 2
    assert _enumerated_count(weights, data["classes"], (2, 1)) == 2
    assert cb.slag_count({(1, 0): 1}, [(1,)], (1,), (1,)) == 1
    assert cb.slag_count({(1, 0): 1}, [(1,)], (-2,), (1,)) == 0
    assert cb.slag_count(weights, data["classes"], (0, 0), (1, 1)) == 1


def test_slag_refuses_without_positivity():
    with pytest.raises(cb.ConeViolation):
        cb.slag_count({(1, 0): 1}, [(1,)], (1,), None)
    with pytest.raises(cb.ConeViolation):
        cb.slag_count({(1, 0): 1}, [(1, -1)], (1, 0), (1, 1))


def test_slag_matches_series_oracle():
    rng = random.Random(47)
    checked = 0
    for _ in range(300):
        rank = rng.randint(1, 3)
        ncls = rng.randint(1, 3)
        positivity = tuple(rng.randint(1, 2) for _ in range(rank))
        classes = []
        while len(classes) < ncls:
            c = tuple(rng.randint(-1, 2) for _ in range(rank))
            if sum(p * x for p, x in zip(positivity, c)) > 0:
                classes.append(c)
        kappa = tuple(rng.randint(-1, 4) for _ in range(rank))
        budget = sum(p * x for p, x in zip(positivity, kappa))
        if budget > 8:
            continue
        weights = {(k, i): Fraction(rng.randint(-3, 3), rng.randint(1, 2))
                   for i in range(ncls) for k in range(1, 9) if rng.random() < 0.6}
        got = cb.slag_count(weights, classes, kappa, positivity)
        assert got == _series_count(weights, classes, kappa, positivity)
        checked += 1
    assert checked >= 100


def test_slag_matches_listing_on_small_instances():
    rng = random.Random(48)
    for _ in range(30):
        classes = [(1, 0), (0, 1), (1, 1)][:rng.randint(1, 3)]
        weights = {(k, i): Fraction(rng.randint(1, 3)) for i in range(len(classes)) for k in (1, 2)
                   if rng.random() < 0.8}
        kappa = (rng.randint(0, 3), rng.randint(0, 2))
        got = cb.slag_count(weights, classes, kappa, (1, 1))
        if kappa == (0, 0):
            assert got == 1
            continue
        assert got == _enumerated_count(weights, classes, kappa)


# schema --------------------------------------------------------------------------------------

def test_atlas_round_trip():
    atlas = fx.wall_atlas()
    again = cb.load_atlas(json.loads(json.dumps(cb.dump_atlas(atlas))))
    assert again.rank == 2 and [c.label for c in again.charts] == ["A", "B", "C"]
    for key, fam in atlas.families.items():
        assert again.families[key].key() == fam.key()


def test_atlas_schema_errors():
    data = cb.dump_atlas(fx.wall_atlas())
    data["transitions"][0]["records"][0]["s"] = "nope"
    with pytest.raises(SchemaError):
        cb.load_atlas(data)
    with pytest.raises(SchemaError):
        cb.load_atlas({"charts": [{"label": "A", "solutions": [{"name": "S"}]}]})
