"""Builders for the bundled JSON fixtures.

The shipped files under ``fixtures/`` are the output of ``build_all``; a test
regenerates them and compares, so the data can always be traced back here.
"""

from fractions import Fraction
import json
from pathlib import Path

from .cocycle_bundles import (
    Atlas, Chart, TransitionFamily, dump_atlas, family_from_matrix, unipotent_inverse,
)
from .morse_novikov import (
    CriticalValueDiagram, ExpSum, FlowModel, Record, RayMove, crossing_update, dump_flow_model,
)

FIXTURE_DIR = Path(__file__).parent / "fixtures"


def circle_model():
    # height function on S^1 with one extra winding on the second gradient line
    return FlowModel(1, [("p", 1), ("q", 0)],
                     [("p", "q", (0,), 1), ("p", "q", (1,), -1)], (1.0,))


def torus_model():
    return FlowModel(2, [("f", 2), ("a", 1), ("b", 1), ("v", 0)], [
        ("a", "v", (1, 0), 1), ("a", "v", (0, 0), -1),
        ("b", "v", (0, 1), 1), ("b", "v", (0, 0), -1),
        ("f", "a", (0, 0), 1), ("f", "a", (0, 1), -1),
        ("f", "b", (0, 0), -1), ("f", "b", (1, 0), 1),
    ], (1.0, 0.7))


def figure_eight_model():
    return FlowModel(2, [("a", 1), ("b", 1), ("v", 0)], [
        ("a", "v", (1, 0), 1), ("a", "v", (0, 0), -1),
        ("b", "v", (0, 1), 1), ("b", "v", (0, 0), -1),
    ], (1.0, 0.5))


def growth_model(shells=40):
    """Synthetic model whose tail has aggregate count 2^l at period l."""
    base = circle_model()
    return FlowModel(base.rank, base.crit, base.flows, base.theta, tuple(2 ** l for l in range(1, shells + 1)))


ORACLES = {
    "circle": {"graph": {"vertices": ["v"], "edges": [["e", "v", "v", ["1"]]]}},
    "torus": {"product": [
        {"graph": {"vertices": ["v"], "edges": [["e", "v", "v", ["1"]]]}},
        {"graph": {"vertices": ["v"], "edges": [["e", "v", "v", ["1"]]]}},
    ]},
    "figure_eight": {"graph": {"vertices": ["v"], "edges": [
        ["a", "v", "v", ["1", "0"]], ["b", "v", "v", ["0", "1"]]]}},
}


def wall_diagram():
    """Three critical values; point 2 is moved downward through the ray of point 1."""
    return CriticalValueDiagram([0, 2 + 1j, 1 - 0.5j], [[0, 2, 1], [-2, 0, 3], [-1, -3, 0]])


WALL_MOVE = RayMove(1, 0, 2 - 0.2j)
WALL_CLASS = (Fraction(1), Fraction(1, 2))
SOLUTIONS = ("S1", "S2", "S3")


def _wall_matrix():
    _, basis = crossing_update(wall_diagram(), WALL_MOVE)
    n = len(basis)
    return {(SOLUTIONS[i], SOLUTIONS[j]):
            ExpSum.constant(2) if i == j else ExpSum.monomial(WALL_CLASS) * basis[i][j]
            for i in range(n) for j in range(n) if basis[i][j]}


def wall_atlas():
    """Charts A | wall | B, C with no wall between B and C."""
    a = Chart("A", SOLUTIONS, [(0, 0), (1, 0), (0, 1)])
    b = Chart("B", SOLUTIONS, [(0, 1), (1, 1), (2, 0)])
    c = Chart("C", SOLUTIONS, [(1, 0), (0, 0), (0, 0)])
    mat = _wall_matrix()
    ab, ac = family_from_matrix(a, b, mat, 2), family_from_matrix(a, c, mat, 2)
    ident = lambda x, y: TransitionFamily(x, y, [Record(s, s, (0, 0), 1) for s in SOLUTIONS], 2)
    fams = {("A", "B"): ab, ("B", "A"): unipotent_inverse(ab),
            ("A", "C"): ac, ("C", "A"): unipotent_inverse(ac),
            ("B", "C"): ident(b, c), ("C", "B"): ident(c, b)}
    return Atlas(2, (a, b, c), fams)


def wall_continuation():
    """Holomorphic Morse model (three index-1 points, no flows) across the wall."""
    model = FlowModel(2, [(s, 1) for s in SOLUTIONS], [], (1.0, 0.5))
    recs = []
    for (t, s), e in _wall_matrix().items():
        for g, c in e.terms.items():
            recs.append({"from": s, "to": t, "class": [str(x) for x in g], "count": int(c)})
    return {"source": dump_flow_model(model), "target": dump_flow_model(model), "records": recs}


def sections_atlas():
    """Two charts, two solutions, one unipotent transition."""
    a = Chart("A", ("S1", "S2"), [(0,), (0,)])
    b = Chart("B", ("S1", "S2"), [(1,), (0,)])
    fwd = TransitionFamily(a, b, [Record("S1", "S1", (0,), 1), Record("S2", "S2", (0,), 1),
                                  Record("S1", "S2", (1,), 4)], 1)
    return Atlas(1, (a, b), {("A", "B"): fwd, ("B", "A"): unipotent_inverse(fwd)})


def sections():
    """n(E1) in {1, 2} and n(E2) in {3, 5} over two solutions, matched at class 4."""
    return {
        "phi": ["1"],
        "first": {"chart": "A", "entries": {
            "S1": [{"class": ["1"], "count": 1}], "S2": [{"class": ["2"], "count": 2}]}},
        "second": {"chart": "A", "entries": {
            "S1": [{"class": ["3"], "count": 3}], "S2": [{"class": ["2"], "count": 5}]}},
    }


def slag_weights():
    """Two classes e1, e2 in Z^2 with w(k, .) = 1 for k <= 2."""
    return {
        "classes": [["1", "0"], ["0", "1"]],
        "positivity": ["1", "1"],
        "kappa": ["2", "1"],
        "weights": [{"k": k, "class": i, "w": "1"} for i in (0, 1) for k in (1, 2)],
    }


def build_all():
    out = {}
    for name, model in (("circle", circle_model()), ("torus", torus_model()),
                        ("figure_eight", figure_eight_model())):
        out[f"{name}.json"] = {**dump_flow_model(model), "oracle": ORACLES[name]}
    out["growth.json"] = dump_flow_model(growth_model())
    out["wall_atlas.json"] = dump_atlas(wall_atlas())
    out["wall_continuation.json"] = wall_continuation()
    d = wall_diagram()
    out["wall_diagram.json"] = {"points": [[z.real, z.imag] for z in d.points],
                                "table": [list(r) for r in d.table]}
    out["sections_atlas.json"] = dump_atlas(sections_atlas())
    out["sections.json"] = sections()
    out["slag_weights.json"] = slag_weights()
    return out


def dumps(data):
    return json.dumps(data, indent=2, sort_keys=True) + "\n"


def write_all(directory=FIXTURE_DIR):
    directory.mkdir(parents=True, exist_ok=True)
    for name, data in build_all().items():
        (directory / name).write_text(dumps(data))


if __name__ == "__main__":
    write_all()
