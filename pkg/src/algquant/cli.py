"""Command-line driver: load algebroid presentations from JSON files, run
the verification suites, print Poisson structures and star products, and run
the purification and operator-oracle demos.

Exit codes: 0 all checks pass, 1 a mathematical check failed, 2 input error,
3 numeric non-convergence.  Reports are deterministic for a fixed (file,
seed, thread count); wall-clock timing goes to stderr only, so stdout and
the JSON report are byte-identical across runs.
"""

from __future__ import annotations

import argparse
import json
import os
import sys
import time
from fractions import Fraction
from importlib import resources

import numpy as np

from . import __version__
from .algebroid import AlgebroidPresentation, check_axioms
from .fock import FockSpace, purify_projector
from .poisson import (
    NondegeneracyError,
    SymplecticFormOnFrame,
    central_extension,
    check_symplectic,
    contact_form_check,
    dirac_bracket_on_S,
    induced_poisson,
    poisson_bracket,
    schouten_jacobi,
)
from .rings import Chart, ParseError, parse_poly
from .star import (
    FlatFrameConfig,
    FlatFrameError,
    check_associativity,
    oracle_compare,
    star,
)

EXIT_OK = 0
EXIT_MATH = 1
EXIT_INPUT = 2
EXIT_NUMERIC = 3


class CaseError(ValueError):
    """Malformed input file."""


class Case:
    def __init__(self, name, presentation, omega, fock, star_cfg, points):
        self.name = name
        self.presentation = presentation
        self.omega = omega
        self.fock = fock
        self.star = star_cfg
        self.points = points


def bundled_cases():
    base = resources.files("algquant") / "cases"
    return sorted(p.name[: -len(".json")] for p in base.iterdir() if p.name.endswith(".json"))


def load_case(path_or_name):
    """Load a case file from a path, or a bundled case by name."""
    if os.path.exists(path_or_name):
        with open(path_or_name) as fh:
            text = fh.read()
    else:
        base = resources.files("algquant") / "cases" / f"{path_or_name}.json"
        try:
            text = base.read_text()
        except FileNotFoundError:
            raise CaseError(
                f"no such file or bundled case: {path_or_name!r} "
                f"(bundled: {', '.join(bundled_cases())})"
            ) from None
    try:
        doc = json.loads(text)
    except json.JSONDecodeError as exc:
        raise CaseError(f"invalid JSON: {exc}") from None
    try:
        coords = tuple(doc["chart"]["coords"])
        chart = Chart(coords)
        alg = doc["algebroid"]
        rank = int(alg["rank"])
        flat_anchor = [parse_poly(src, chart) for src in alg.get("anchor", [])]
        if len(flat_anchor) != rank * chart.dim:
            raise CaseError(
                f"anchor needs rank*dim = {rank * chart.dim} entries, got {len(flat_anchor)}"
            )
        anchor = [
            flat_anchor[i * chart.dim : (i + 1) * chart.dim] for i in range(rank)
        ]
        structure = {}
        for entry in alg.get("structure", []):
            i, j, k = int(entry["i"]), int(entry["j"]), int(entry["k"])
            if not (1 <= i < j <= rank and 1 <= k <= rank):
                raise CaseError(f"structure indices out of range (need 1 <= i < j <= rank): {entry}")
            structure[(i - 1, j - 1, k - 1)] = parse_poly(entry["expr"], chart)
        A = AlgebroidPresentation.build(chart, rank, anchor, structure)
        omega_entries = {}
        for entry in doc.get("omega", []):
            i, j = int(entry["i"]), int(entry["j"])
            if not 1 <= i < j <= rank:
                raise CaseError(f"omega indices need 1 <= i < j <= rank: {entry}")
            omega_entries[(i - 1, j - 1)] = parse_poly(entry["expr"], chart)
        omega = SymplecticFormOnFrame.from_entries(A, omega_entries)
        points = [tuple(Fraction(str(x)) for x in p) for p in doc.get("points", [])]
        for p in points:
            if len(p) != chart.dim:
                raise CaseError(f"base point {p} has wrong dimension")
        return Case(
            doc.get("name", os.path.basename(str(path_or_name))),
            A,
            omega,
            doc.get("fock", {}),
            doc.get("star", {}),
            points,
        )
    except ParseError as exc:
        raise CaseError(f"expression error: {exc}") from None
    except (KeyError, TypeError, ValueError) as exc:
        if isinstance(exc, CaseError):
            raise
        raise CaseError(f"malformed case file: {exc}") from None


# ---------------------------------------------------------------------------
# reports


class Report:
    """Per-check verdicts with witnesses plus a versioned config echo.

    Deterministic given (file, seed, threads): no timestamps or timings in
    the payload.
    """

    def __init__(self, command, source, seed=None, threads=1):
        self.doc = {
            "version": __version__,
            "command": command,
            "source": str(source),
            "seed": seed,
            "threads": threads,
            "checks": [],
            "extras": {},
        }

    def check(self, name, passed, witness=None, detail=None):
        item = {"name": name, "passed": bool(passed)}
        if witness:
            item["witness"] = witness
        if detail is not None:
            item["detail"] = detail
        self.doc["checks"].append(item)
        return passed

    def extra(self, key, value):
        self.doc["extras"][key] = value

    @property
    def all_passed(self):
        return all(c["passed"] for c in self.doc["checks"])

    def emit(self, json_path=None):
        lines = [f"algquant {__version__} :: {self.doc['command']} :: {self.doc['source']}"]
        if self.doc["seed"] is not None:
            lines.append(f"seed = {self.doc['seed']}")
        for c in self.doc["checks"]:
            status = "PASS" if c["passed"] else "FAIL"
            line = f"check {c['name']}: {status}"
            if c.get("witness"):
                line += f"  [witness: {c['witness']}]"
            lines.append(line)
        for key, value in self.doc["extras"].items():
            if isinstance(value, list):
                lines.append(f"{key}:")
                lines.extend(f"  {v}" for v in value)
            else:
                lines.append(f"{key}: {value}")
        out = "\n".join(lines) + "\n"
        sys.stdout.write(out)
        if json_path:
            with open(json_path, "w") as fh:
                json.dump(self.doc, fh, indent=2, sort_keys=True)
                fh.write("\n")


# ---------------------------------------------------------------------------
# commands


def cmd_check(args):
    case = load_case(args.file)
    report = Report("check", args.file, threads=args.threads)
    ax = check_axioms(case.presentation)
    for item in ax.items():
        report.check(f"axiom {item.name}", item.passed, item.witness)
    sv = check_symplectic(case.presentation, case.omega)
    report.check("omega closed", sv.closed, sv.closed_witness)
    report.check(
        "omega nondegenerate",
        sv.nondegenerate,
        None if sv.nondegenerate else f"det = {sv.determinant}",
        detail=f"det = {sv.determinant}",
    )
    ext = central_extension(case.presentation, case.omega)
    ext_ax = check_axioms(ext.ext)
    for item in ext_ax.items():
        report.check(f"extension {item.name}", item.passed, item.witness)
    contact = contact_form_check(ext)
    report.check("contact d(theta) = pullback", contact.matches_pullback, contact.pullback_witness)
    report.check("contact d(d theta) = 0", contact.differential_closed, contact.closed_witness)
    report.emit(args.report_json)
    return EXIT_OK if report.all_passed else EXIT_MATH


def cmd_poisson(args):
    case = load_case(args.file)
    report = Report("poisson", args.file, seed=args.seed, threads=args.threads)
    sv = check_symplectic(case.presentation, case.omega)
    report.check("symplectic", sv.passed, sv.closed_witness)
    if not sv.passed:
        report.emit(args.report_json)
        return EXIT_MATH
    pi = induced_poisson(case.presentation, case.omega)
    entries = [
        f"pi[{a+1}][{b+1}] = {pi.matrix[a][b]}"
        for a in range(pi.chart.dim)
        for b in range(a + 1, pi.chart.dim)
        if not pi.matrix[a][b].is_zero()
    ]
    report.extra("poisson", entries if entries else ["pi = 0"])
    tri = schouten_jacobi(pi)
    witness = None
    if not tri.is_zero():
        key, p = tri.first_nonzero()
        witness = f"[pi,pi][{key[0]+1}][{key[1]+1}][{key[2]+1}] = {p}"
    report.check("schouten [pi,pi] = 0", tri.is_zero(), witness)
    dirac_ok, dirac_witness = _verify_dirac(case, seed=args.seed)
    report.check("dirac bracket lemma", dirac_ok, dirac_witness)
    report.emit(args.report_json)
    return EXIT_OK if report.all_passed else EXIT_MATH


def _verify_dirac(case, seed=0, pairs=8, degree=3):
    """The bracket comparison on the stratum for coordinate pairs plus a few
    seeded random polynomial pairs; exact equality."""
    import random

    from .poisson import FiberLinearFn
    from .star import _random_poly

    if not case.omega.is_constant():
        return True, "skipped (nonconstant frame form)"
    A = case.presentation
    ext = central_extension(A, case.omega)
    pi = induced_poisson(A, case.omega)
    rng = random.Random(seed)
    funcs = [parse_poly(name, A.chart) for name in A.chart.coords]
    for _ in range(pairs):
        funcs.append(_random_poly(A.chart, rng, degree))
    tested = 0
    for i in range(len(funcs)):
        for j in range(i + 1, len(funcs)):
            f, g = funcs[i], funcs[j]
            lhs = dirac_bracket_on_S(ext, f, g)
            rhs = FiberLinearFn.from_base(poisson_bracket(pi, f, g), A.rank).mul_eta(-1)
            if lhs != rhs:
                return False, f"{{~{f}, ~{g}}}_S != (1/eta){{f,g}}~"
            tested += 1
            if tested >= 2 * pairs:
                return True, None
    return True, None


def cmd_star(args):
    case = load_case(args.file)
    report = Report("star", args.file, seed=args.seed, threads=args.threads)
    order = args.order if args.order is not None else int(case.star.get("order", 2))
    try:
        cfg = FlatFrameConfig.build(case.presentation, case.omega)
    except FlatFrameError as exc:
        report.check("flat frame", False, str(exc))
        report.emit(args.report_json)
        return EXIT_MATH
    report.check("flat frame", True)
    f = parse_poly(args.f, case.presentation.chart)
    g = parse_poly(args.g, case.presentation.chart)
    series = star(cfg, f, g, order)
    report.extra("star", [f"order {k}: {c}" for k, c in enumerate(series.coeffs)])
    pi = induced_poisson(case.presentation, case.omega)
    comm = star(cfg, f, g, 1) - star(cfg, g, f, 1)
    expected = poisson_bracket(pi, f, g)
    # commutator = -i hbar {f, g} + O(hbar^2): order-1 part is -i{f,g}
    ok = comm.coeffs[0].is_zero() and comm.coeffs[1].re.is_zero() and comm.coeffs[1].im == -expected
    report.check(
        "commutator = -i*hbar*{f,g} + O(hbar^2)",
        ok,
        None if ok else f"order-1 commutator {comm.coeffs[1]}, poisson bracket {expected}",
    )
    trials = int(case.star.get("trials", 10))
    seed = args.seed if args.seed is not None else int(case.star.get("seed", 0))
    assoc = check_associativity(cfg, order=max(order, 3), trials=min(trials, 10), seed=seed)
    report.check(
        "associativity",
        assoc.passed,
        assoc.witness,
        detail=f"{assoc.trials} trials through order {assoc.order}",
    )
    report.emit(args.report_json)
    return EXIT_OK if report.all_passed else EXIT_MATH


def cmd_purify(args):
    report = Report("purify", f"dim={args.dim}", seed=args.seed, threads=args.threads)
    rng = np.random.default_rng(args.seed)
    s0 = _seed_near_projector(rng, args.dim, args.delta0)
    try:
        result = purify_projector(s0, tol=args.tol)
    except ValueError as exc:
        sys.stderr.write(f"error: {exc}\n")
        return EXIT_INPUT
    except RuntimeError as exc:
        sys.stderr.write(f"error: {exc}\n")
        return EXIT_NUMERIC
    report.extra(
        "residual history", [f"iter {k}: {r:.6e}" for k, r in enumerate(result.residuals)]
    )
    order = result.convergence_order()
    report.extra("convergence order fit", "n/a" if order is None else f"{order:.4f}")
    report.check("converged", result.converged, detail=f"{result.iterations} iterations")
    report.check(
        "residual identity",
        all(d <= 1e-12 for d in result.identity_defects),
        None
        if not result.identity_defects
        else f"max defect {max(result.identity_defects):.3e}",
    )
    if args.dump_operator:
        if args.dump_operator.endswith(".npy"):
            np.save(args.dump_operator, result.matrix)
        else:
            _dump_matrix_text(result.matrix, args.dump_operator)
        report.extra("dump", args.dump_operator)
    report.emit(args.report_json)
    return EXIT_OK if report.all_passed else EXIT_MATH


def _dump_matrix_text(mat, path):
    with open(path, "w") as fh:
        for row in mat:
            fh.write(" ".join(f"{z.real:.17g} {z.imag:.17g}" for z in row) + "\n")


def _seed_near_projector(rng, dim, delta0):
    """Hermitian matrix at residual norm exactly delta0 from a random
    orthogonal projector (bisection on the perturbation scale)."""
    q, _ = np.linalg.qr(rng.standard_normal((dim, dim)))
    k = max(1, dim // 2)
    p = q[:, :k] @ q[:, :k].conj().T
    e = rng.standard_normal((dim, dim))
    e = 0.5 * (e + e.T)
    e /= np.linalg.norm(e, 2)

    def resid(t):
        s = p + t * e
        return np.linalg.norm(s @ s - s, 2)

    lo, hi = 0.0, 1.0
    while resid(hi) < delta0:
        hi *= 2.0
    for _ in range(80):
        mid = 0.5 * (lo + hi)
        if resid(mid) < delta0:
            lo = mid
        else:
            hi = mid
    return p + hi * e


def _parse_grid(spec):
    if ":" in spec:
        lo, hi, count = spec.split(":")
        lo, hi, count = float(Fraction(lo)), float(Fraction(hi)), int(count)
        if count < 2 or lo <= 0 or hi <= lo:
            raise CaseError(f"bad hbar grid {spec!r}")
        ratio = (hi / lo) ** (1.0 / (count - 1))
        return [lo * ratio**i for i in range(count)]
    return [float(Fraction(x)) for x in spec.split(",")]


def cmd_oracle(args):
    case = load_case(args.file)
    report = Report("oracle", args.file, seed=args.seed, threads=args.threads)
    try:
        cfg = FlatFrameConfig.build(case.presentation, case.omega)
    except FlatFrameError as exc:
        report.check("flat frame", False, str(exc))
        report.emit(args.report_json)
        return EXIT_MATH
    f = parse_poly(args.f, case.presentation.chart)
    g = parse_poly(args.g, case.presentation.chart)
    modes = case.presentation.chart.dim // 2
    cutoff = args.cutoff if args.cutoff is not None else int(case.fock.get("cutoff", 32))
    buffer = args.buffer if args.buffer is not None else int(case.fock.get("buffer", 8))
    space = FockSpace(modes, cutoff)
    grid = sorted(_parse_grid(args.hbar_grid), reverse=True)
    try:
        rep = oracle_compare(cfg, f, g, args.order, grid, space, buffer=buffer)
    except FlatFrameError as exc:
        report.check("standard frame", False, str(exc))
        report.emit(args.report_json)
        return EXIT_MATH
    report.extra("remainders", [f"hbar {h:.6g}: {r:.6e}" for h, r in rep.points])
    if rep.floored:
        report.check(
            "slope",
            True,
            detail="remainder at floating-point floor (exact match within roundoff)",
        )
    else:
        report.check(
            "slope",
            rep.slope >= args.order + 0.8,
            None if rep.slope >= args.order + 0.8 else f"slope {rep.slope:.3f}",
            detail=f"fitted slope {rep.slope:.3f} (target >= {args.order + 0.8})",
        )
    report.emit(args.report_json)
    return EXIT_OK if report.all_passed else EXIT_MATH


def main(argv=None):
    parser = argparse.ArgumentParser(
        prog="algquant",
        description="symplectic algebroid verification and quantization toolkit",
    )
    parser.add_argument("--version", action="version", version=f"algquant {__version__}")
    sub = parser.add_subparsers(dest="command", required=True)

    def common(p, needs_file=True):
        if needs_file:
            p.add_argument("file", help="case file path or bundled case name")
        p.add_argument("--seed", type=int, default=None)
        p.add_argument("--threads", type=int, default=1)
        p.add_argument("--report-json", default=None)

    p = sub.add_parser("check", help="verify algebroid and symplectic axioms")
    common(p)
    p.set_defaults(func=cmd_check)

    p = sub.add_parser("poisson", help="induced Poisson tensor and certifications")
    common(p)
    p.set_defaults(func=cmd_poisson)

    p = sub.add_parser("star", help="star product of two polynomials")
    common(p)
    p.add_argument("--f", required=True)
    p.add_argument("--g", required=True)
    p.add_argument("--order", type=int, default=None)
    p.set_defaults(func=cmd_star)

    p = sub.add_parser("purify", help="projector purification demo")
    common(p, needs_file=False)
    p.add_argument("--dim", type=int, default=20)
    p.add_argument("--delta0", type=float, default=0.1)
    p.add_argument("--tol", type=float, default=1e-12)
    p.add_argument("--dump-operator", default=None)
    p.set_defaults(func=cmd_purify)

    p = sub.add_parser("oracle", help="Toeplitz-oracle remainder slopes")
    common(p)
    p.add_argument("--f", required=True)
    p.add_argument("--g", required=True)
    p.add_argument("--order", type=int, default=1)
    p.add_argument("--cutoff", type=int, default=None)
    p.add_argument("--buffer", type=int, default=None)
    p.add_argument("--hbar-grid", default="1/64:1/4:7")
    p.set_defaults(func=cmd_oracle)

    args = parser.parse_args(argv)
    env_seed = os.environ.get("AQ_SEED")
    if env_seed is not None:
        args.seed = int(env_seed)
    if args.seed is None:
        args.seed = 0
    start = time.perf_counter()
    try:
        code = args.func(args)
    except CaseError as exc:
        sys.stderr.write(f"input error: {exc}\n")
        return EXIT_INPUT
    except ParseError as exc:
        sys.stderr.write(f"input error: {exc}\n")
        return EXIT_INPUT
    except NondegeneracyError as exc:
        sys.stderr.write(f"check failed: {exc}\n")
        return EXIT_MATH
    sys.stderr.write(f"elapsed: {time.perf_counter() - start:.3f}s\n")
    return code


if __name__ == "__main__":
    sys.exit(main())
