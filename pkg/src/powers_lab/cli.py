"""Command-line harness: ``powers-lab <command> [options]``.

Every command writes one JSON document (or CSV table) to stdout or ``--out``.
JSON output uses sorted keys and embeds the full configuration, including
defaults, so a record can be rerun as is.  All randomness comes from
``--seed``.

Exit codes: 0 success, 2 usage error, 3 budget exceeded, 4 failed
verification.
"""

from __future__ import annotations

import argparse
import csv
import io
import json
import math
import sys
from pathlib import Path

import numpy as np

from . import __version__
from .errors import PowersLabError, UsageError, VerificationFailure
from .group_algebra import (
    AlgebraElement,
    PowersSchedule,
    default_free_schedule,
    parse_element,
    parse_terms,
    powers_average,
    random_element,
)
from .group_core import FREE, GroupSpec, Word
from .op_norms import (
    SOUNDNESS_SLACK,
    InterpSpec,
    NormBracket,
    bpstar_bracket,
    l2_bracket_trace,
    lp_bracket,
    norm_bracket,
    ratio_estimate_l2,
    riesz_thorin_upper,
    truncated_lower,
)
from .orlicz_builder import interpolation_pipeline
from .seq_norms import NormSpec, lorentz_pr_integral, lorentz_pr_norm, parse_number, random_values

DEFAULT_DECAY_N = (1, 2, 4, 8, 16)
DEFAULT_INTERP_P = ("4/3", "3")
DEFAULT_LORENTZ = ("lorentz:p=2,r=1.5", "lorentz:p=3,r=2", "lorentz:p=4,r=1.1")
LORENTZ_TOL = 1e-12


# ----------------------------------------------------------------------
# output


def dump_json(record: dict) -> str:
    return json.dumps(record, sort_keys=True, indent=2, allow_nan=False) + "\n"


def dump_csv(header: list[str], rows: list[list]) -> str:
    buf = io.StringIO()
    writer = csv.writer(buf, lineterminator="\n")
    writer.writerow(header)
    for row in rows:
        writer.writerow([repr(v) if isinstance(v, float) else v for v in row])
    return buf.getvalue()


def emit(args: argparse.Namespace, text: str) -> None:
    if args.out:
        Path(args.out).write_text(text)
    else:
        sys.stdout.write(text)


def config_record(args: argparse.Namespace) -> dict:
    skip = {"func", "out"}
    return {k: v for k, v in sorted(vars(args).items()) if k not in skip}


# ----------------------------------------------------------------------
# inputs


def read_elem_text(text: str) -> str:
    if text.startswith("@"):
        try:
            return Path(text[1:]).read_text().strip()
        except OSError as exc:
            raise UsageError(f"cannot read element file {text[1:]!r}: {exc}") from exc
    return text


def load_element(spec: GroupSpec, text: str) -> AlgebraElement:
    return parse_element(spec, read_elem_text(text))


def is_vector_text(text: str) -> bool:
    return read_elem_text(text).lstrip().startswith(("d[", "-d[")) or "*d[" in text


def norm_specs(args: argparse.Namespace, default: tuple = ("lp:2",)) -> list[NormSpec]:
    return [NormSpec.parse(t) for t in (args.norm or default)]


def parse_n_list(values) -> list[int]:
    out = []
    for v in values:
        for part in str(v).split(","):
            if part.strip():
                n = int(part)
                if n < 1:
                    raise UsageError(f"--n values must be >= 1, got {n}")
                out.append(n)
    return out


def norm_p(spec: NormSpec) -> float:
    if spec.kind != "lp":
        raise UsageError(f"expected an lp norm, got {spec.text!r}")
    return spec.p


# ----------------------------------------------------------------------
# commands


def cmd_norm(args: argparse.Namespace) -> str:
    """Brackets for ``||rho(a)||`` on each requested norm, or norms of a vector ``d[...]``."""
    spec = GroupSpec.parse(args.group)
    specs = norm_specs(args)
    results = []
    if is_vector_text(args.elem):
        from .seq_norms import FinVector

        vec = FinVector.from_mapping(spec, parse_terms(spec, read_elem_text(args.elem), "d"))
        mode = "vector"
        for ns in specs:
            value = float(ns(vec))
            results.append({"norm": ns.text, "bracket": NormBracket(value, value, "exact", "exact", {}).to_json()})
    else:
        a = load_element(spec, args.elem)
        mode = "operator"
        for ns in specs:
            b = norm_bracket(a, ns, args.radius, args.doublings, args.seed)
            results.append({"norm": ns.text, "bracket": b.to_json()})
    if args.format == "csv":
        rows = [[r["norm"], r["bracket"]["lower"], r["bracket"]["upper"], r["bracket"]["lower_method"], r["bracket"]["upper_method"]] for r in results]
        return dump_csv(["norm", "lower", "upper", "lower_method", "upper_method"], rows)
    return dump_json({"command": "norm", "mode": mode, "config": config_record(args), "results": results})


def decay_schedule(spec: GroupSpec, g: Word, n: int, kind: str, seed: int, radius: int) -> PowersSchedule:
    """Conjugators for the decay table.

    ``default``: the free-group schedule of powers of a generator, or
    ``h_j = j`` times the first generator on abelian groups.  ``random``:
    ``n`` seeded draws from the ball of ``radius``.
    """
    if kind == "random":
        rng = np.random.default_rng([seed, n])
        words = spec.ball(radius)
        picks = rng.integers(0, len(words), n)
        return PowersSchedule(tuple(Word(spec, words[int(i)]) for i in picks))
    if spec.kind == FREE and spec.n >= 2:
        return default_free_schedule(spec, g, n)
    gen = Word(spec, spec.generators()[0])
    h = Word.identity(spec)
    out = []
    for _ in range(n):
        h = h * gen
        out.append(h)
    return PowersSchedule(tuple(out))


def cmd_decay(args: argparse.Namespace) -> str:
    """Powers averages ``(1/n) sum u_{h_j g h_j^-1}``: bracket and ratio estimate vs ``n``."""
    spec = GroupSpec.parse(args.group)
    text = read_elem_text(args.elem).strip()
    if text.startswith("u[") and text.endswith("]"):
        text = text[2:-1]
    g = Word.parse(spec, text)
    if g.is_identity:
        raise UsageError("decay needs g != identity")
    extra = [ns for ns in norm_specs(args, ()) if not ns.is_l2]
    ns_list = parse_n_list(args.n or DEFAULT_DECAY_N)
    header = ["n", "lower", "upper", "ratio_estimate"]
    for ns in extra:
        header += [f"{ns.text}_lower", f"{ns.text}_upper"]
    rows = []
    for n in ns_list:
        avg = powers_average(g, decay_schedule(spec, g, n, args.schedule, args.seed, args.radius))
        if len(avg) == 1:
            # all conjugates coincide: the average is the isometry u_g
            br = NormBracket(1.0, 1.0, "isometry", "isometry", {})
            ratio = 1.0
        else:
            br = l2_bracket_trace(avg, args.doublings)
            ratio = ratio_estimate_l2(avg, args.moment)
        row = [n, br.lower, br.upper, ratio]
        for ns in extra:
            b = norm_bracket(avg, ns, args.radius, args.doublings, args.seed)
            row += [b.lower, b.upper]
        rows.append(row)
    if args.format == "csv":
        return dump_csv(header, rows)
    return dump_json({"command": "decay", "config": config_record(args), "columns": header, "rows": rows})


def interp_rows(elements, ps, radius: int, doublings: int, seed: int, corrupt: float) -> list[dict]:
    rows = []
    for idx, a in enumerate(elements):
        if not a:
            continue
        l1 = a.l1()
        l2 = l2_bracket_trace(a, doublings)
        for p in ps:
            if p < 2:
                upper = riesz_thorin_upper(InterpSpec.between(1, 2, p), l1, l2.upper)
            else:
                upper = riesz_thorin_upper(InterpSpec.between(2, math.inf, p), l2.upper, l1)
            upper *= corrupt
            lower = truncated_lower(a, NormSpec.lp(p), radius, seed=seed)
            rows.append({"index": idx, "p": p, "lower": lower, "upper": upper, "margin": upper - lower})
    return rows


def cmd_interp_check(args: argparse.Namespace) -> str:
    """Check ``truncated_lower <= interpolated upper`` on sampled elements."""
    spec = GroupSpec.parse(args.group)
    ps = [parse_number(t) for t in (args.p or DEFAULT_INTERP_P)]
    for p in ps:
        if not 1 < p < math.inf:
            raise UsageError(f"interp-check needs 1 < p < inf, got {p}")
    if args.elem:
        elements = [load_element(spec, args.elem)]
    else:
        count = parse_n_list(args.n or [100])[0]
        rng = np.random.default_rng(args.seed)
        elements = [random_element(spec, rng, args.radius) for _ in range(count)]
    rows = interp_rows(elements, ps, args.radius, args.doublings, args.seed, args.corrupt_upper)
    failures = [r for r in rows if r["lower"] > r["upper"] + SOUNDNESS_SLACK]
    worst = min((r["margin"] for r in rows), default=0.0)
    record = {
        "command": "interp-check",
        "config": config_record(args),
        "checked": len(rows),
        "failures": len(failures),
        "worst_margin": worst,
        "passed": not failures,
    }
    text = dump_csv(["index", "p", "lower", "upper", "margin"], [list(r.values()) for r in rows]) if args.format == "csv" else dump_json(record)
    if failures:
        emit(args, text)
        raise VerificationFailure(f"{len(failures)} of {len(rows)} checks have lower > interpolated upper (worst margin {worst:.3e})")
    return text


def cmd_orlicz_build(args: argparse.Namespace) -> str:
    """Run the interpolation pipeline for ``--norm orlicz:<fn>`` and target ``--p``."""
    specs = norm_specs(args, ("orlicz:power:1.5",))
    if len(specs) != 1 or specs[0].kind != "orlicz":
        raise UsageError("orlicz-build needs exactly one --norm orlicz:<function>")
    p = parse_number(args.p[0]) if args.p else 2.0
    result = interpolation_pipeline(specs[0].orlicz, p, depth=args.depth)
    if args.anchors:
        Path(args.anchors).write_text(result.anchor_csv())
    if args.format == "csv":
        return result.anchor_csv()
    return dump_json({"command": "orlicz-build", "config": config_record(args), "report": result.report})


def cmd_lorentz_check(args: argparse.Namespace) -> str:
    """Compare the closed-form Lorentz norm with the distribution-function integral."""
    specs = norm_specs(args, DEFAULT_LORENTZ)
    for ns in specs:
        if ns.kind != "lorentz":
            raise UsageError(f"lorentz-check needs lorentz norms, got {ns.text!r}")
    rows = []
    for k, ns in enumerate(specs):
        if args.elem:
            spec = GroupSpec.parse(args.group)
            vecs = [np.array(list(parse_terms(spec, read_elem_text(args.elem), "d").values()))]
        else:
            rng = np.random.default_rng([args.seed, k])
            count = parse_n_list(args.n or [1000])[0]
            vecs = [random_values(rng, args.max_support) for _ in range(count)]
        perm_rng = np.random.default_rng([args.seed, k, 1])
        dev = perm = 0.0
        for v in vecs:
            closed = lorentz_pr_norm(ns.p, ns.r, v)
            dev = max(dev, abs(closed - lorentz_pr_integral(ns.p, ns.r, v)))
            perm = max(perm, abs(closed - lorentz_pr_norm(ns.p, ns.r, perm_rng.permutation(v))))
        rows.append({"norm": ns.text, "p": ns.p, "r": ns.r, "vectors": len(vecs), "max_deviation": dev, "max_permutation_deviation": perm})
    bad = [r for r in rows if r["max_deviation"] > args.tol or r["max_permutation_deviation"] > args.tol]
    if args.format == "csv":
        text = dump_csv(list(rows[0]), [list(r.values()) for r in rows])
    else:
        text = dump_json({"command": "lorentz-check", "config": config_record(args), "rows": rows, "passed": not bad})
    if bad:
        emit(args, text)
        raise VerificationFailure(f"Lorentz identity deviation above {args.tol} for {[r['norm'] for r in bad]}")
    return text


def cmd_bpstar(args: argparse.Namespace) -> str:
    """Bracket for ``max(||rho_p(a)||, ||rho_p(a*)||)``."""
    spec = GroupSpec.parse(args.group)
    a = load_element(spec, args.elem)
    results = []
    for ns in norm_specs(args, ("lp:2",)):
        p = norm_p(ns)
        b = bpstar_bracket(a, p, args.strategy, radius=args.radius, doublings=args.doublings, seed=args.seed)
        results.append({"norm": ns.text, "bracket": b.to_json()})
    if args.format == "csv":
        rows = [[r["norm"], r["bracket"]["lower"], r["bracket"]["upper"]] for r in results]
        return dump_csv(["norm", "lower", "upper"], rows)
    return dump_json({"command": "bpstar", "config": config_record(args), "results": results})


# ----------------------------------------------------------------------
# parser


def build_parser() -> argparse.ArgumentParser:
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--group", default="F2", help="F2 | Fk:<k> | Z | Zd:<d> | Zmod:<m> (default: F2)")
    common.add_argument("--norm", action="append", help="norm spec, repeatable: lp:<p>, orlicz:power:<p>, lorentz:p=<p>,r=<r>")
    common.add_argument("--n", action="append", help="count(s); comma-separated or repeated")
    common.add_argument("--radius", type=int, default=3, help="truncation / sampling radius (default: 3)")
    common.add_argument("--doublings", type=int, default=6, help="trace-moment doublings (default: 6)")
    common.add_argument("--depth", type=int, default=30, help="construction depth (default: 30)")
    common.add_argument("--seed", type=int, default=0, help="random seed (default: 0)")
    common.add_argument("--out", help="write output here instead of stdout")
    common.add_argument("--format", choices=("json", "csv"), default="json")

    parser = argparse.ArgumentParser(prog="powers-lab", description=__doc__.splitlines()[0])
    parser.add_argument("--version", action="version", version=f"%(prog)s {__version__}")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("norm", parents=[common], help="norm brackets of an element or norms of a vector")
    p.add_argument("--elem", required=True, help="element text, 'd[...]' terms for a vector, or @file")
    p.set_defaults(func=cmd_norm)

    p = sub.add_parser("decay", parents=[common], help="Powers-average decay table")
    p.add_argument("--elem", default="b", help="the group element g, e.g. 'b' or 'u[b]' (default: b)")
    p.add_argument("--schedule", choices=("default", "random"), default="default")
    p.add_argument("--moment", type=int, default=8, help="moment order of the ratio estimate (default: 8)")
    p.set_defaults(func=cmd_decay)

    p = sub.add_parser("interp-check", parents=[common], help="sandwich check against the interpolated upper bound")
    p.add_argument("--elem", help="check this element only (default: --n random elements)")
    p.add_argument("--p", action="append", help="exponent(s), e.g. 4/3 (default: 4/3 and 3)")
    p.add_argument("--corrupt-upper", type=float, default=1.0, help="multiply uppers by this factor (harness self-test)")
    p.set_defaults(func=cmd_interp_check)

    p = sub.add_parser("orlicz-build", parents=[common], help="build N with l^M interpolating (l^p, l^N)")
    p.add_argument("--p", action="append", help="target exponent p (default: 2)")
    p.add_argument("--anchors", help="also write the anchor table CSV here")
    p.set_defaults(func=cmd_orlicz_build)

    p = sub.add_parser("lorentz-check", parents=[common], help="closed-form vs integral Lorentz norms")
    p.add_argument("--elem", help="check this vector ('d[...]' terms) instead of random ones")
    p.add_argument("--max-support", type=int, default=50)
    p.add_argument("--tol", type=float, default=LORENTZ_TOL)
    p.set_defaults(func=cmd_lorentz_check)

    p = sub.add_parser("bpstar", parents=[common], help="bracket for max(||a||_p, ||a*||_p)")
    p.add_argument("--elem", required=True)
    p.add_argument("--strategy", choices=("interp", "l1"), default="interp")
    p.set_defaults(func=cmd_bpstar)
    return parser


def main(argv: list[str] | None = None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        emit(args, args.func(args))
    except PowersLabError as exc:
        print(f"powers-lab: error: {exc}", file=sys.stderr)
        return exc.exit_code
    return 0


if __name__ == "__main__":
    sys.exit(main())
