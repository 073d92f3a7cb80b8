"""Command-line entry point: ``holokernel <command> [options]``.

Exit codes: 0 pass, 2 verification failure, 3 schema or precondition error,
4 divergence.  Reports are deterministic for fixed inputs, seed and options.
"""

import argparse
from fractions import Fraction
import json
import math
from pathlib import Path
import random
import sys

import numpy as np

from . import _fixtures
from . import _linalg as la
from . import cocycle_bundles as cb
from . import fueter_lattice as fl
from . import holonomy_forms as hf
from . import morse_novikov as mn
from .config import CALIBRATION_TOL, CAYLEY_SAMPLES, DEFAULT_SEED
from .exterior_algebra import KForm, OrientedPlane, e, hodge_star, pullback

EXIT_OK, EXIT_FAIL, EXIT_SCHEMA, EXIT_DIVERGENCE = 0, 2, 3, 4


class CliError(Exception):
    def __init__(self, code, message):
        super().__init__(message)
        self.code = code


def _fixture(name):
    return _fixtures.FIXTURE_DIR / name


def _load_json(path):
    try:
        return json.loads(Path(path).read_text())
    except json.JSONDecodeError as exc:
        raise CliError(EXIT_SCHEMA, f"{path}: line {exc.lineno} column {exc.colno}: {exc.msg}")
    except OSError as exc:
        raise CliError(EXIT_SCHEMA, f"{path}: {exc.strerror}")


def _fmt(x):
    if isinstance(x, Fraction):
        return str(x)
    if isinstance(x, float):
        return float(f"{x:.12g}")
    if isinstance(x, complex):
        return [_fmt(x.real), _fmt(x.imag)]
    if isinstance(x, dict):
        return {str(k): _fmt(v) for k, v in x.items()}
    if isinstance(x, (list, tuple)):
        return [_fmt(v) for v in x]
    if isinstance(x, (np.integer,)):
        return int(x)
    if isinstance(x, (np.floating,)):
        return _fmt(float(x))
    return x


def _render(report, as_json):
    report = _fmt(report)
    if as_json:
        return json.dumps(report, indent=2, sort_keys=True) + "\n"
    lines = []

    def walk(obj, prefix):
        if isinstance(obj, dict) and obj:
            for k in sorted(obj):
                walk(obj[k], f"{prefix}.{k}" if prefix else k)
        else:
            lines.append(f"{prefix}: {json.dumps(obj, sort_keys=True)}")

    walk(report, "")
    return "\n".join(lines) + "\n"


def _emit(args, report):
    text = _render(report, args.json)
    if args.output:
        Path(args.output).write_text(text)
    else:
        sys.stdout.write(text)


# forms-verify ----------------------------------------------------------------

def _forms_checks(args):
    """(name, passed, detail) for every exact identity, in a fixed order."""
    spin7, g2, su3 = hf.standard_models()
    omega = hf.OMEGA0
    if args.mutate:
        key = next(iter(omega.items()))[0]
        omega = omega + KForm(8, 4, {key: -2 * omega[key]})
    checks = []

    def add(name, ok, **detail):
        checks.append({"name": name, "passed": bool(ok), **detail})

    proj = {"8": hf.projector_matrices(spin7), "7": hf.projector_matrices(g2),
            "6": hf.projector_matrices(su3)}
    ranks = {}
    for dim, ps in proj.items():
        for name, p in ps.items():
            ranks[f"dim{dim}.{name}"] = la.rank(p)
            add(f"projector rank dim {dim} part {name}", la.rank(p) == int(name), rank=la.rank(p))
            add(f"projector idempotent dim {dim} part {name}", la.matmul(p, p) == p)
        total = [[sum(p[i][j] for p in ps.values()) for j in range(len(p))] for i in range(len(p))]
        add(f"projectors sum to identity dim {dim}", total == la.identity(len(total)))

    squares = hf.seven_square_sum(spin7)
    add("seven-part square sum equals 3/2 Omega", squares * Fraction(2, 3) == omega)
    literal = squares / 7 == omega
    orbit8 = hf.orbit_rank_checks(spin7)
    add("orbit rank of Omega", hf.linearized_action_rank(omega) == 43,
        rank=hf.linearized_action_rank(omega))
    add("Cayley locus dimension", orbit8["cayley_locus_dim"] == 12, dim=orbit8["cayley_locus_dim"])
    r7 = hf.linearized_action_rank(g2.phi)
    add("orbit rank of phi", r7 == 35, rank=r7)
    r6 = hf.linearized_action_rank(su3.rho1)
    add("orbit rank of rho", r6 == 20, rank=r6)
    ranks.update({"orbit.dim8": hf.linearized_action_rank(omega), "orbit.dim7": r7,
                  "orbit.dim6": r6, "cayley_locus": orbit8["cayley_locus_dim"]})

    add("star phi equals sigma", hodge_star(hf.PHI0) == hf.SIGMA0)
    relabel = [list(r) for r in hf.LIFT_RELABEL]
    add("cylinder lift 7 to 8 reproduces Omega",
        hf.cylinder_lift_7to8(g2).omega == pullback(omega, relabel))
    lifted = hf.cylinder_lift_6to7(su3)
    add("cylinder lift 6 to 7 reproduces phi and sigma",
        lifted.phi == hf.PHI0 and lifted.sigma == hf.SIGMA0)
    add("SU(3) data is compatible", hf.su3_check(su3.omega, su3.rho1).passed)
    met = hf.metric_from_3form(hf.PHI0)
    add("metric of phi is Euclidean", met.positive and met.metric is not None
        and met.metric.is_euclidean)

    rng = random.Random(args.seed)
    n_alpha = 20
    ok = True
    for _ in range(n_alpha):
        a = KForm(8, 2, {I: Fraction(rng.randint(-9, 9), rng.randint(1, 9))
                         for I in ((i, j) for i in range(1, 9) for j in range(i + 1, 9))})
        if not hf.energy_identity_check(a, spin7).is_zero():
            ok = False
            break
    add("energy identity on the 21-part", ok, samples=n_alpha)

    cert = hf.taming_check(omega, samples=args.samples, seed=args.seed)
    neg_id = [[-int(i == j) for j in range(21)] for i in range(21)]
    add("Omega tames itself", cert.tamed and [list(r) for r in cert.relative] == neg_id,
        min_margin=cert.min_cayley_margin)
    add("minus Omega is rejected",
        not hf.taming_check(-hf.OMEGA0, samples=min(args.samples, 200), seed=args.seed).tamed)
    pert = hf.OMEGA0 + e(8, 1, 2, 3, 4) / 100
    add("Omega + dx1234/100 is tamed", hf.taming_check(pert, samples=args.samples, seed=args.seed).tamed)

    cayley_ok = True
    for _ in range(5):
        g = hf.exact_spin7_element(rng)
        plane = OrientedPlane(8, [[row[c] for row in g] for c in range(4)])
        if hf.classify_plane(plane, spin7).kind != "cayley":
            cayley_ok = False
    add("exact Spin(7) images of R4 are Cayley", cayley_ok)
    nrng = np.random.default_rng(args.seed)
    frames = nrng.standard_normal((args.samples, 8, 4))
    ratios = hf.calibration_ratio(omega, frames)
    add("calibration inequality on random planes", float(ratios.max()) <= 1 + args.tolerance,
        max_ratio=float(ratios.max()), samples=args.samples)
    return checks, ranks, literal


def cmd_forms_verify(args):
    checks, ranks, literal = _forms_checks(args)
    failed = [c for c in checks if not c["passed"]]
    report = {
        "command": "forms-verify", "seed": args.seed, "samples": args.samples,
        "tolerance": args.tolerance, "mutated": bool(args.mutate),
        "ranks": ranks, "checks": checks,
        "informational": {"seven_square_sum_over_7_equals_Omega": literal},
        "verdict": "pass" if not failed else "fail",
    }
    if failed:
        report["first_failure"] = failed[0]
    _emit(args, report)
    return EXIT_OK if not failed else EXIT_FAIL


# model-run -------------------------------------------------------------------

def _parse_alpha(text, rank):
    vals = [complex(x.strip().replace(" ", "")) for x in text.split(",")]
    if len(vals) != rank:
        raise CliError(EXIT_SCHEMA, f"alpha {text!r} has {len(vals)} entries, lattice rank is {rank}")
    return tuple(vals)


def cmd_model_run(args):
    data = _load_json(args.input or _fixture("circle.json"))
    try:
        model = mn.load_flow_model(data)
        oracle = mn.load_oracle(data["oracle"], model.rank) if "oracle" in data else None
    except mn.SchemaError as exc:
        raise CliError(EXIT_SCHEMA, str(exc))
    rng = np.random.default_rng(args.seed)
    alphas = [tuple(0j for _ in range(model.rank)), tuple(2j * math.pi for _ in range(model.rank))]
    alphas += [tuple(complex(*rng.uniform(-2, 2, 2)) for _ in range(model.rank))
               for _ in range(args.samples)]
    if args.alpha:
        alphas = [_parse_alpha(a, model.rank) for a in args.alpha]
    prof = mn.convergence_profile(model)
    rows, agree = [], True
    for a in alphas:
        try:
            cx = mn.novikov_differential(model, a, args.horizon)
        except mn.DivergenceError as exc:
            raise CliError(EXIT_DIVERGENCE, f"alpha {_fmt(list(a))}: {exc}")
        except mn.EvaluationOverflow as exc:
            raise CliError(EXIT_DIVERGENCE, f"alpha {_fmt(list(a))}: {exc}")
        betti = cx.betti()
        row = {"alpha": list(a), "betti": list(betti)}
        if oracle is not None:
            ob = mn.cellular_twisted_cohomology(oracle, a)
            row["oracle"] = list(ob)
            agree &= tuple(ob) == tuple(betti)
        rows.append(row)
    euler = {mn.euler_characteristic(r["betti"], min(model.degrees)) for r in rows}
    report = {
        "command": "model-run", "seed": args.seed, "samples": args.samples,
        "horizon": args.horizon, "rank_tolerance": mn.RANK_RTOL,
        "model": {"lattice_rank": model.rank, "critical_points": len(model.crit),
                  "flows": len(model.flows)},
        "convergence": {"rho_hat": prof.rho_hat, "shells": len(prof.shells)},
        "results": rows,
        "euler_characteristic_constant": len(euler) == 1,
        "oracle": "none" if oracle is None else ("agree" if agree else "disagree"),
    }
    _emit(args, report)
    return EXIT_OK if agree and len(euler) == 1 else EXIT_FAIL


# atlas-check -----------------------------------------------------------------

def _load_atlas(path):
    try:
        return cb.load_atlas(_load_json(path))
    except (cb.SchemaError, KeyError) as exc:
        raise CliError(EXIT_SCHEMA, f"{path}: {exc}")


def _psi_samples(rank, count, seed):
    rng = np.random.default_rng(seed)
    return [tuple(complex(*rng.normal(0, 1, 2)) for _ in range(rank)) for _ in range(count)]


def cmd_atlas_check(args):
    path = args.input or _fixture("wall_atlas.json")
    atlas = _load_atlas(path)
    if args.horizon is not None and atlas.horizon is None:
        atlas = cb.Atlas(atlas.rank, atlas.charts, atlas.families,
                         cb.Horizon(Fraction(args.horizon), (Fraction(1),) * atlas.rank),
                         atlas.duality)
    verdict = cb.check_cocycle(atlas)
    rng = random.Random(args.seed)
    gauges = []
    for _ in range(5):
        lam = {c.label: Fraction(rng.randint(-6, 6), rng.randint(1, 4)) for c in atlas.charts}
        gauges.append(cb.check_cocycle(cb.gauge_transform(atlas, lam)).verified == verdict.verified)
    bundle = None
    if verdict.verified:
        try:
            bundle = cb.assemble_bundle(atlas, _psi_samples(atlas.rank, args.samples, args.seed))
        except cb.SchemaError as exc:
            raise CliError(EXIT_SCHEMA, str(exc))
    report = {
        "command": "atlas-check", "seed": args.seed, "samples": args.samples,
        "charts": [c.label for c in atlas.charts],
        "cocycle": {"verified": verdict.verified, "triples_checked": verdict.triples_checked,
                    "failure": verdict.failure},
        "gauge_invariant": all(gauges),
    }
    if bundle is not None:
        report["bundle"] = {
            "expected_rank": bundle.expected_rank,
            "ranks": [s.rank for s in bundle.samples],
            "max_transition_error": max([s.max_transition_error for s in bundle.samples] or [0.0]),
            "skipped": [list(s) for s in bundle.skipped],
            "consistent": bundle.consistent,
        }
    _emit(args, report)
    ok = verdict.verified and all(gauges) and bundle is not None and bundle.consistent
    return EXIT_OK if ok else EXIT_FAIL


# glue ----------------------------------------------------------------------------

def _gf_json(f):
    return {"phi": [str(x) for x in f.phi],
            "terms": [{"class": [str(x) for x in b], "n": str(n)} for b, n in f.terms]}


def cmd_glue(args):
    atlas = _load_atlas(args.input or _fixture("sections_atlas.json"))
    data = _load_json(args.sections or _fixture("sections.json"))
    try:
        g1 = cb.load_section(data["first"], atlas.rank)
        g2 = cb.load_section(data["second"], atlas.rank)
        phi = [Fraction(x) for x in data["phi"]]
        per_chart = {c.label: cb.pair_sections(g1, g2, atlas, phi, c.label) for c in atlas.charts}
    except (cb.SchemaError, KeyError) as exc:
        raise CliError(EXIT_SCHEMA, f"sections: {exc}")
    except cb.ConeViolation as exc:
        raise CliError(EXIT_FAIL, f"cone support violated: {exc}")
    home = per_chart[g2.chart]
    exact = all(f == home for f in per_chart.values())
    worst = 0.0
    for psi in _psi_samples(atlas.rank, args.samples, args.seed):
        vals = [f.evaluate(psi) for f in per_chart.values()]
        worst = max(worst, max(abs(v - vals[0]) for v in vals) / max(1.0, abs(vals[0])))
    report = {
        "command": "glue", "seed": args.seed, "samples": args.samples,
        "generating_function": _gf_json(home),
        "chart_independent_exact": exact,
        "chart_transport_max_error": worst,
    }
    _emit(args, report)
    return EXIT_OK if exact and worst <= args.tolerance else EXIT_FAIL


# slag --------------------------------------------------------------------------------

def cmd_slag(args):
    data = _load_json(args.input or _fixture("slag_weights.json"))
    try:
        classes = [[Fraction(x) for x in c] for c in data["classes"]]
        weights = {(int(w["k"]), int(w["class"])): Fraction(w["w"]) for w in data["weights"]}
        positivity = [Fraction(x) for x in data["positivity"]] if "positivity" in data else None
        kappa = [Fraction(x) for x in (args.kappa.split(",") if args.kappa else data["kappa"])]
    except (KeyError, TypeError, ValueError) as exc:
        raise CliError(EXIT_SCHEMA, f"weights: {type(exc).__name__}: {exc}")
    try:
        value = cb.slag_count(weights, classes, kappa, positivity)
    except cb.ConeViolation as exc:
        raise CliError(EXIT_SCHEMA, str(exc))
    _emit(args, {"command": "slag", "kappa": [str(x) for x in kappa], "value": str(value)})
    return EXIT_OK


# fueter --------------------------------------------------------------------------

def cmd_fueter(args):
    n = args.N
    try:
        kdim = fl.kernel_dimension(n)
    except fl.LatticeError as exc:
        raise CliError(EXIT_SCHEMA, str(exc))
    rng = np.random.default_rng(args.seed)
    residuals = []
    for _ in range(args.samples):
        f = fl.QuaternionField.random(n, rng)
        residuals.append(fl.fueter_square_residual(f) / f.norm_inf())
    # spectrum of D from its Fourier symbol: +-|s(k)|, each twice
    mags = {}
    for k1 in range(n):
        for k2 in range(n):
            for k3 in range(n):
                s = math.sqrt(sum((n * math.sin(2 * math.pi * k / n)) ** 2 for k in (k1, k2, k3)))
                key = round(s, 9)
                mags[key] = mags.get(key, 0) + 2
    spectrum = [{"abs_eigenvalue": v, "multiplicity_each_sign": m} for v, m in sorted(mags.items())[:6]]
    report = {
        "command": "fueter", "N": n, "seed": args.seed, "samples": args.samples,
        "tolerance": args.tolerance,
        "kernel_dimension": kdim,
        "max_square_residual": max(residuals or [0.0]),
        "spectrum_low": spectrum,
    }
    ok = kdim == 4 and all(r <= 1e-12 for r in residuals)
    if args.input:
        try:
            fam = fl.load_family(_load_json(args.input))
            res = fl.spectral_flow(fam)
        except fl.SpectralFlowError as exc:
            raise CliError(EXIT_SCHEMA, str(exc))
        report["spectral_flow"] = {"flow": res.flow, "simple": res.simple,
                                   "crossings": [list(c) for c in res.crossings]}
    _emit(args, report)
    return EXIT_OK if ok else EXIT_FAIL


def build_parser():
    p = argparse.ArgumentParser(prog="holokernel", description=__doc__.splitlines()[0])
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--input", help="input file (defaults to the bundled fixture)")
    common.add_argument("--output", help="write the report here instead of stdout")
    common.add_argument("--horizon", type=float, default=None, help="truncation horizon")
    common.add_argument("--seed", type=int, default=DEFAULT_SEED)
    common.add_argument("--tolerance", type=float, default=CALIBRATION_TOL)
    common.add_argument("--json", action="store_true", help="machine-readable report")
    sub = p.add_subparsers(dest="command", required=True)

    s = sub.add_parser("forms-verify", parents=[common], help="exact form identities")
    s.add_argument("--samples", type=int, default=CAYLEY_SAMPLES)
    s.add_argument("--mutate", action="store_true", help="flip one coefficient of Omega")
    s.set_defaults(func=cmd_forms_verify)

    s = sub.add_parser("model-run", parents=[common], help="twisted Betti numbers of a flow model")
    s.add_argument("--samples", type=int, default=100, help="random alpha count")
    s.add_argument("--alpha", action="append", help="comma-separated complex covector (repeatable)")
    s.set_defaults(func=cmd_model_run)

    s = sub.add_parser("atlas-check", parents=[common], help="cocycle and bundle checks")
    s.add_argument("--samples", type=int, default=20)
    s.set_defaults(func=cmd_atlas_check)

    s = sub.add_parser("glue", parents=[common], help="pair two sections")
    s.add_argument("--sections", help="file with phi, first and second sections")
    s.add_argument("--samples", type=int, default=20)
    s.set_defaults(func=cmd_glue)

    s = sub.add_parser("slag", parents=[common], help="multiset configuration count")
    s.add_argument("--kappa", help="comma-separated rational class")
    s.set_defaults(func=cmd_slag)

    s = sub.add_parser("fueter", parents=[common], help="lattice Fueter operator report")
    s.add_argument("--N", type=int, default=5)
    s.add_argument("--samples", type=int, default=5, help="random fields for the square identity")
    s.set_defaults(func=cmd_fueter)
    return p


def main(argv=None):
    args = build_parser().parse_args(argv)
    try:
        return args.func(args)
    except CliError as exc:
        sys.stderr.write(f"holokernel {args.command}: {exc}\n")
        return exc.code


if __name__ == "__main__":
    sys.exit(main())
