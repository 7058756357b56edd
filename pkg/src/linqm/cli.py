"""Command-line entry point for all suites and simulators.

Exit codes: 0 when every requested relation passes, 2 when any relation
fails (the report is still written), 1 on usage errors.  All stochastic
commands are fully determined by --seed; identical invocations produce
byte-identical reports.  LINQM_REPORT_DIR, when set, is prepended to
relative --out paths.
"""

from __future__ import annotations

import argparse
import json
import os
import random
import sys
from fractions import Fraction

from . import branching, collapse, fock, oplib, report, reps
from .scalar import Scalar


class Parser(argparse.ArgumentParser):
    def error(self, message: str):  # exit 1 on usage problems, not 2
        self.print_usage(sys.stderr)
        self.exit(1, f"{self.prog}: error: {message}\n")


LIE_SETS = ["xyz", "su2", "lorentz", "translations", "translations-reconstructed",
            "poincare", "poincare-reconstructed", "poincare-mutated", "sun"]
TARGETS = ["laplacian", "oscillator"]


def _resolve_out(path: str | None) -> str | None:
    if path is None:
        return None
    base = os.environ.get("LINQM_REPORT_DIR")
    if base and not os.path.isabs(path):
        return os.path.join(base, path)
    return path


def _emit(reports_list, out: str | None, fmt: str, extra: dict | None = None) -> int:
    payload = report.reports_payload(reports_list, **(extra or {}))
    text = report.render_json(payload) if fmt == "json" \
        else report.render_text(reports_list)
    sys.stdout.write(text)
    if out:
        report.write_report(out, payload)
    return 0 if payload["pass"] else 2


def _parse_fraction(text: str) -> Scalar:
    if "i" in text:
        raise ValueError("complex constants are not accepted here")
    return Scalar(Fraction(text))


def _parse_eta(path: str) -> list[list[Scalar]]:
    with open(path, "r", encoding="utf-8") as fh:
        raw = json.load(fh)

    def cell(x) -> Scalar:
        if isinstance(x, str):
            return Scalar(Fraction(x))
        if isinstance(x, int):
            return Scalar(Fraction(x))
        if isinstance(x, list) and len(x) == 2:
            return Scalar(Fraction(x[0]), Fraction(x[1]))
        raise ValueError(f"bad eta cell: {x!r}")

    return [[cell(x) for x in row] for row in raw]


# ----------------------------------------------------------------------
# verify subcommands
# ----------------------------------------------------------------------
def cmd_verify_lie(args) -> int:
    opset = oplib.build_operators(args.set, n=args.n)
    table = oplib.TABLES[args.set]()
    reports_list = oplib.verify_commutator_table(opset, table)
    return _emit(reports_list, _resolve_out(args.out), args.format,
                 {"set": args.set, "n": args.n})


def cmd_verify_hermiticity(args) -> int:
    opset = oplib.build_operators(args.set, n=args.n)
    reports_list = oplib.verify_hermiticity(opset)
    return _emit(reports_list, _resolve_out(args.out), args.format,
                 {"set": args.set, "n": args.n})


def cmd_verify_invariance(args) -> int:
    target_set = oplib.build_operators(args.target, n=args.n)
    target = target_set["O"]
    gens = oplib.build_operators(args.gens, n=args.n)
    reports_list = oplib.verify_invariance(target, gens, target_name=args.target)
    if args.finite_unitaries:
        rng = random.Random(args.seed)
        subs = []
        for k in range(args.finite_unitaries):
            a = reps.random_su2(rng)
            subs.append((f"A{k}", reps.substitution_of_matrix(a)))
        reports_list += oplib.verify_substitution_invariance(
            target, subs, target_name=args.target)
    return _emit(reports_list, _resolve_out(args.out), args.format,
                 {"target": args.target, "gens": args.gens, "n": args.n})


def cmd_verify_spacetime(args) -> int:
    if args.eta:
        eta = _parse_eta(args.eta)
    elif args.random_eta is not None:
        eta = oplib.random_eta(args.n, args.random_eta)
    else:
        eta = [[Scalar(Fraction(0)) for _ in range(args.n)] for _ in range(args.n)]
        if args.n >= 2:
            eta[0][1] = Scalar(Fraction(1))
            eta[1][0] = Scalar(Fraction(-1))
    st = oplib.build_spacetime_map(eta, reading=args.reading)
    pset = oplib.translation_generators(
        len(eta), reconstructed=args.reconstructed)
    reports_list = oplib.verify_spacetime_relations(pset, st)
    return _emit(reports_list, _resolve_out(args.out), args.format,
                 {"reading": args.reading, "n": len(eta),
                  "set": pset.name})


def cmd_verify_translation_flow(args) -> int:
    xs = [_parse_fraction(tok) for tok in args.x.split(",")]
    if len(xs) != 4:
        raise ValueError("--x needs four comma-separated rationals")
    pset = oplib.build_operators(args.set, n=args.n)
    reports_list = oplib.translation_flow_check(pset, xs)
    return _emit(reports_list, _resolve_out(args.out), args.format,
                 {"set": args.set, "x": args.x})


# ----------------------------------------------------------------------
# repr subcommands
# ----------------------------------------------------------------------
def cmd_repr_table(args) -> int:
    space = reps.RepSpace.homogeneous(args.degree)
    spin = oplib.spin_generators()
    spectrum = reps.spin_spectrum(space, spin)
    _, blocks = reps.casimir_spectrum(spin, space)
    payload = {
        "degree": args.degree,
        "dimension": space.dim,
        "basis": [f"u^{a} v^{b}" for a, b in space.monomials],
        "norms2": [str(x) for x in space.norms2],
        "invariant_norms2": [str(x) for x in space.invariant_norms2],
        "sz_spectrum": [str(x) for x in spectrum],
        "casimir_blocks": [{"eigenvalue": str(lam), "indices": idx}
                           for lam, idx in blocks],
        "matrices": {},
    }
    for label in ("Sx", "Sy", "Sz"):
        exact = reps.matrix_rep(spin[label], space)
        norm = reps.matrix_rep(spin[label], space, normalized=True)
        payload["matrices"][label] = {
            "exact": [[str(e) for e in row] for row in exact.entries],
            "normalized": [[[z.real, z.imag] for z in row]
                           for row in norm.to_numpy().tolist()],
        }
    text = report.render_json(payload)
    if args.format == "text":
        lines = [f"degree {args.degree}  dimension {space.dim}"]
        for i, mono in enumerate(payload["basis"]):
            lines.append(f"  {mono:10s} norm2={payload['norms2'][i]:8s} "
                         f"sz={payload['sz_spectrum'][i]}")
        lines.append("casimir blocks: " + ", ".join(
            f"{b['eigenvalue']} on {b['indices']}" for b in payload["casimir_blocks"]))
        text = "\n".join(lines) + "\n"
    sys.stdout.write(text)
    out = _resolve_out(args.out)
    if out:
        report.write_report(out, payload)
    return 0


def cmd_repr_homomorphism(args) -> int:
    rng = random.Random(args.seed)
    space = reps.RepSpace.homogeneous(args.degree)
    reports_list = []
    for k in range(args.pairs):
        a = reps.random_su2(rng)
        b = reps.random_su2(rng)
        lhs = reps.rep_of_group_element(b, space) @ reps.rep_of_group_element(a, space)
        rhs = reps.rep_of_group_element(reps.mat2_mul(b, a), space)
        ok = lhs == rhs
        reports_list.append(report.RelationReport(
            suite=f"homomorphism:deg{args.degree}",
            relation=f"rep(B{k})rep(A{k}) = rep(B{k}A{k})",
            expected="equal exact matrices",
            actual="equal" if ok else "different",
            residual="0" if ok else "nonzero",
            passed=ok,
        ))
    return _emit(reports_list, _resolve_out(args.out), args.format,
                 {"degree": args.degree, "pairs": args.pairs, "seed": args.seed})


# ----------------------------------------------------------------------
# fock subcommands
# ----------------------------------------------------------------------
def cmd_fock_car(args) -> int:
    reports_list = fock.verify_car(args.modes,
                                   include_printed_variant=args.printed_variant)
    return _emit(reports_list, _resolve_out(args.out), args.format,
                 {"modes": args.modes})


def cmd_fock_antisym(args) -> int:
    labels = list(args.labels)
    product = fock.LabeledKet.of(*[(lbl, i + 1) for i, lbl in enumerate(labels)])
    result = fock.antisymmetrize(product)
    sys.stdout.write(f"antisymmetrize({product}) = {result}\n")
    return 0


# ----------------------------------------------------------------------
# simulators
# ----------------------------------------------------------------------
def cmd_sim_branch(args) -> int:
    with open(args.scenario, "r", encoding="utf-8") as fh:
        doc = json.load(fh)
    name = doc.get("scenario")
    params = dict(doc.get("params") or {})
    for key in ("rules", "initial"):
        if key in doc and key not in params:
            params[key] = doc[key]
    for key in ("amps", "weights"):
        if key in params and params[key] is not None:
            params[key] = [complex(c[0], c[1]) if isinstance(c, list) else complex(c)
                           for c in params[key]]
    state, reports_list = branching.run_scenario(name, params)
    extra = {"scenario": name, "branches": branching.ledger_payload(state)}
    return _emit(reports_list, _resolve_out(args.out), args.format, extra)


def cmd_collapse_run(args) -> int:
    probs = [float(tok) for tok in args.amps.split(",")]
    cfg = collapse.CollapseConfig.from_probs(
        probs, args.scheme, args.runs, args.seed,
        dt=args.dt, steps=args.steps, record_traces=args.record_traces)
    traces, summary = collapse.run_scheme(cfg)
    born = collapse.born_test(summary, cfg.amplitudes)
    payload = {
        "config": cfg.to_json_obj(),
        "frequencies": born.frequencies,
        "chi2": born.chi2,
        "p_value": born.p_value,
        "pass": born.passed,
        "nonconverged_count": summary.nonconverged,
    }
    sys.stdout.write(report.render_json(payload))
    out = _resolve_out(args.out)
    if out:
        report.write_report(out, payload)
    return 0 if born.passed else 2


def cmd_report(args) -> int:
    with open(args.file, "r", encoding="utf-8") as fh:
        payload = json.load(fh)
    if args.format == "json" or "relations" not in payload:
        sys.stdout.write(report.render_json(payload))
    else:
        rows = [report.RelationReport(r["suite"], r["relation"], r["expected"],
                                      r["actual"], r["residual"], r["pass"])
                for r in payload["relations"]]
        sys.stdout.write(report.render_text(rows))
    return 0 if payload.get("pass", True) else 2


# ----------------------------------------------------------------------
# parser
# ----------------------------------------------------------------------
def build_parser() -> Parser:
    parser = Parser(prog="linqm")
    sub = parser.add_subparsers(dest="command", required=True, parser_class=Parser)

    def common(p: Parser) -> None:
        p.add_argument("--out", default=None, help="write the JSON report here")
        p.add_argument("--format", choices=["json", "text"], default="text")

    verify = sub.add_parser("verify", help="exact relation suites")
    vsub = verify.add_subparsers(dest="verify_command", required=True,
                                 parser_class=Parser)

    p = vsub.add_parser("lie", help="commutator tables")
    p.add_argument("--set", choices=LIE_SETS, default="xyz")
    p.add_argument("--n", type=int, default=1, help="site count")
    common(p)
    p.set_defaults(fn=cmd_verify_lie)

    p = vsub.add_parser("hermiticity")
    p.add_argument("--set", choices=LIE_SETS + TARGETS, default="su2")
    p.add_argument("--n", type=int, default=1)
    common(p)
    p.set_defaults(fn=cmd_verify_hermiticity)

    p = vsub.add_parser("invariance")
    p.add_argument("--target", choices=TARGETS, default="laplacian")
    p.add_argument("--gens", choices=LIE_SETS, default="su2")
    p.add_argument("--n", type=int, default=1)
    p.add_argument("--finite-unitaries", type=int, default=0,
                   help="also check this many exact unitary substitutions")
    p.add_argument("--seed", type=int, default=0)
    common(p)
    p.set_defaults(fn=cmd_verify_invariance)

    p = vsub.add_parser("spacetime")
    p.add_argument("--eta", default=None, help="JSON file with the eta matrix")
    p.add_argument("--random-eta", type=int, default=None, metavar="SEED")
    p.add_argument("--n", type=int, default=2)
    p.add_argument("--reading", choices=["site-slot", "slot-site"],
                   default="site-slot")
    p.add_argument("--reconstructed", action="store_true")
    common(p)
    p.set_defaults(fn=cmd_verify_spacetime)

    p = vsub.add_parser("translation-flow")
    p.add_argument("--x", default="1,0,0,0", help="four rationals, comma separated")
    p.add_argument("--set", choices=["translations", "translations-reconstructed"],
                   default="translations")
    p.add_argument("--n", type=int, default=1)
    common(p)
    p.set_defaults(fn=cmd_verify_translation_flow)

    rep = sub.add_parser("repr", help="representation tables")
    rsub = rep.add_subparsers(dest="repr_command", required=True, parser_class=Parser)

    p = rsub.add_parser("table")
    p.add_argument("--degree", type=int, required=True)
    common(p)
    p.set_defaults(fn=cmd_repr_table)

    p = rsub.add_parser("homomorphism")
    p.add_argument("--degree", type=int, default=2)
    p.add_argument("--pairs", type=int, default=10)
    p.add_argument("--seed", type=int, default=0)
    common(p)
    p.set_defaults(fn=cmd_repr_homomorphism)

    fk = sub.add_parser("fock", help="occupation-space checks")
    fsub = fk.add_subparsers(dest="fock_command", required=True, parser_class=Parser)

    p = fsub.add_parser("car")
    p.add_argument("--modes", type=int, default=4)
    p.add_argument("--printed-variant", action="store_true",
                   help="also record the same-side index placement residuals")
    common(p)
    p.set_defaults(fn=cmd_fock_car)

    p = fsub.add_parser("antisym")
    p.add_argument("labels", help="one character per factor, e.g. AB")
    p.set_defaults(fn=cmd_fock_antisym)

    sim = sub.add_parser("sim", help="branch-ledger scenarios")
    ssub = sim.add_subparsers(dest="sim_command", required=True, parser_class=Parser)
    p = ssub.add_parser("branch")
    p.add_argument("scenario", help="scenario JSON file")
    common(p)
    p.set_defaults(fn=cmd_sim_branch)

    col = sub.add_parser("collapse", help="smooth-collapse schemes")
    csub = col.add_subparsers(dest="collapse_command", required=True,
                              parser_class=Parser)
    p = csub.add_parser("run")
    p.add_argument("--scheme", choices=list(collapse.SCHEMES), required=True)
    p.add_argument("--amps", required=True,
                   help="branch weights |a_k|^2, comma separated (normalized)")
    p.add_argument("--runs", type=int, default=10_000)
    p.add_argument("--seed", type=int, required=True)
    p.add_argument("--dt", type=float, default=1e-2)
    p.add_argument("--steps", type=int, default=10_000)
    p.add_argument("--record-traces", type=int, default=8)
    common(p)
    p.set_defaults(fn=cmd_collapse_run)

    p = sub.add_parser("report", help="re-render a stored report")
    p.add_argument("file")
    p.add_argument("--format", choices=["json", "text"], default="text")
    p.set_defaults(fn=cmd_report)

    return parser


def main(argv: list[str] | None = None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
        return args.fn(args)
    except SystemExit as exc:
        return int(exc.code or 0)
    except (ValueError, KeyError, OSError, json.JSONDecodeError) as exc:
        sys.stderr.write(f"linqm: error: {exc}\n")
        return 1


if __name__ == "__main__":
    sys.exit(main())
