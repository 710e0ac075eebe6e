"""Command-line surface: verify, enumerate, search, pipeline, campaign,
counterexample.

Exit codes: 0 pass/feasible, 1 fail/infeasible, 2 input error,
3 timeout/budget.  Results go to stdout as JSON (JSON lines for streams);
human-readable notes go to stderr.
"""

from __future__ import annotations

import argparse
import json
import os
import sys
from pathlib import Path

from .blocks import translate, translate_amount
from .designs import CyclicDesign, validate_design
from .families import is_cdf, is_ddf, is_symmetric_ddf
from .generate import (
    EnumerationBudget,
    EnumerationStats,
    enumerate_cdfs,
    enumerate_cyclic_sts,
    superimpose,
)
from .parallel import PipelineParams, full_pipeline
from .search import (
    INFEASIBLE,
    TIMEOUT,
    find_disjoint_representatives,
    prime_case_driver,
)
from .textio import (
    Certificate,
    ParseError,
    design_subject,
    family_subject,
    format_design,
    load_certificate,
    make_certificate,
    parse_design,
    parse_family,
    verify_certificate,
)

EXIT_PASS = 0
EXIT_FAIL = 1
EXIT_INPUT = 2
EXIT_BUDGET = 3

RED = "\x1b[31m"
RESET = "\x1b[0m"


def _emit(obj: dict) -> None:
    print(json.dumps(obj, sort_keys=True))


def _fail_input(message: str) -> int:
    print(f"error: {message}", file=sys.stderr)
    return EXIT_INPUT


# ---------------------------------------------------------------------------
# verify


def cmd_verify(args: argparse.Namespace) -> int:
    try:
        text = Path(args.path).read_text()
    except OSError as exc:
        return _fail_input(str(exc))
    kind = args.kind
    try:
        if kind in ("representatives", "infeasible", "pipeline", "certificate"):
            doc = load_certificate(text)
            if kind != "certificate" and doc["kind"] != kind:
                return _fail_input(f"certificate is kind {doc['kind']!r}, not {kind!r}")
            ok, detail = verify_certificate(doc)
            _emit({"kind": doc["kind"], "ok": ok, "detail": detail})
            if not ok:
                print("certificate does not re-verify", file=sys.stderr)
            return EXIT_PASS if ok else EXIT_FAIL
        if kind == "design":
            design = parse_design(text)
            result = validate_design(design)
        else:
            family = parse_family(text)
            checker = {"cdf": is_cdf, "ddf": is_ddf, "symmetric-ddf": is_symmetric_ddf}[kind]
            result = checker(family)
        _emit({"kind": kind, "result": result.to_dict()})
        if not result.ok:
            print(f"{kind} check failed: {result.to_dict()}", file=sys.stderr)
        return EXIT_PASS if result.ok else EXIT_FAIL
    except ParseError as exc:
        return _fail_input(str(exc))
    except ValueError as exc:
        return _fail_input(str(exc))


# ---------------------------------------------------------------------------
# enumerate


def cmd_enumerate(args: argparse.Namespace) -> int:
    budget = EnumerationBudget(
        max_solutions=args.max_solutions,
        max_nodes=args.max_nodes,
        canonical_only=args.canonical,
    )
    stats = EnumerationStats()
    try:
        stream = enumerate_cdfs(args.v, args.k, args.lam, budget, stats)
        for family in stream:
            result = is_cdf(family)
            cert = make_certificate(
                "cdf",
                family_subject(family),
                {"result": result.to_dict()},
                {"v": args.v, "k": args.k, "lambda": args.lam},
            )
            _emit(
                {
                    "v": family.v,
                    "k": family.k,
                    "lambda": family.lam,
                    "blocks": [list(b) for b in family.base_blocks],
                    "certificate": cert.to_dict(),
                }
            )
    except ValueError as exc:
        return _fail_input(str(exc))
    print(
        f"enumerated {stats.emitted} families, {stats.nodes} nodes, "
        f"exhaustive={stats.exhaustive}",
        file=sys.stderr,
    )
    if not stats.exhaustive and args.max_nodes is not None and stats.nodes > args.max_nodes:
        return EXIT_BUDGET
    return EXIT_PASS


# ---------------------------------------------------------------------------
# search


def _witness_blocks(design: CyclicDesign, chosen) -> list[list[int]]:
    return [list(translate(design.orbits[i].base, t, design.v)) for i, t in chosen]


def cmd_search(args: argparse.Namespace) -> int:
    try:
        design = parse_design(Path(args.path).read_text())
    except (OSError, ParseError) as exc:
        return _fail_input(str(exc))
    try:
        if args.prime_driver:
            outcome = prime_case_driver(design, max_nodes=args.max_nodes)
        else:
            outcome = find_disjoint_representatives(
                design, mode=args.mode, max_nodes=args.max_nodes
            )
    except ValueError as exc:
        return _fail_input(str(exc))
    out = outcome.to_dict()
    if outcome.chosen is not None:
        out["blocks"] = _witness_blocks(design, outcome.chosen)
    _emit(out)
    if outcome.status == TIMEOUT:
        return EXIT_BUDGET
    return EXIT_PASS if outcome.feasible else EXIT_FAIL


# ---------------------------------------------------------------------------
# pipeline


def _class_dict(pclass) -> dict:
    design = pclass.design
    out: dict[str, list[int]] = {}
    for i, _bid, block in sorted(pclass.all_blocks()):
        t = translate_amount(design.orbits[i].base, block, design.v)
        out.setdefault(str(i), []).append(t)
    for ts in out.values():
        ts.sort()
    return out


def cmd_pipeline(args: argparse.Namespace) -> int:
    try:
        design = parse_design(Path(args.path).read_text())
    except (OSError, ParseError) as exc:
        return _fail_input(str(exc))
    params = PipelineParams(
        epsilon=args.epsilon,
        eta=args.eta,
        seed=args.seed,
        batch_fraction=args.batch_fraction,
        retry_cap=args.retry_cap,
    )
    try:
        result = full_pipeline(design, params)
    except ValueError as exc:
        return _fail_input(str(exc))
    payload = dict(result.report)
    payload["status"] = result.status
    payload["stage"] = result.stage
    if result.pclass is not None:
        payload["class"] = _class_dict(result.pclass)
    if result.repair is not None:
        payload.update(result.repair.to_dict())
    cert = make_certificate(
        "pipeline",
        design_subject(design),
        payload,
        {"epsilon": args.epsilon, "eta": args.eta, "seed": args.seed},
    )
    print(cert.to_json())
    if not result.certified:
        print(f"stage precondition failed: {result.stage}", file=sys.stderr)
    return EXIT_PASS if result.certified else EXIT_FAIL


# ---------------------------------------------------------------------------
# campaign


def _design_outcome_cert(design: CyclicDesign, outcome, mode: str) -> Certificate:
    if outcome.feasible:
        payload = {
            "status": outcome.status,
            "chosen": [[i, t] for i, t in outcome.chosen],
            "nodes": outcome.stats.nodes,
        }
        kind = "representatives"
    else:
        payload = {
            "status": outcome.status,
            "nodes": outcome.stats.nodes,
            "order": list(outcome.order),
        }
        kind = "infeasible" if outcome.status == INFEASIBLE else "representatives"
    return make_certificate(kind, design_subject(design), payload, {"mode": mode})


def _campaign_designs(v: int, k: int, lam: int, budget: EnumerationBudget):
    if k == 3 and lam == 1:
        yield from enumerate_cyclic_sts(v, budget)
        return
    if lam * (v - 1) % (k * (k - 1)) != 0:
        return
    import math

    if math.gcd(v, k) != 1:
        return
    for family in enumerate_cdfs(v, k, lam, budget):
        yield CyclicDesign.from_base_blocks(v, k, lam, family.base_blocks)


def _run_instance(design_text: str, mode: str, max_nodes: int | None) -> dict:
    design = parse_design(design_text)
    outcome = find_disjoint_representatives(design, mode=mode, max_nodes=max_nodes)
    cert = _design_outcome_cert(design, outcome, mode)
    return {"status": outcome.status, "nodes": outcome.stats.nodes, "cert": cert.to_dict()}


def cmd_campaign(args: argparse.Namespace) -> int:
    out_dir = Path(args.out or os.environ.get("CYCDESIGN_OUTDIR", "campaign-out"))
    out_dir.mkdir(parents=True, exist_ok=True)
    budget = EnumerationBudget(max_nodes=args.max_nodes, canonical_only=True)
    injected: dict[int, list[str]] = {}
    for path in args.inject or []:
        try:
            design = parse_design(Path(path).read_text())
        except (OSError, ParseError) as exc:
            return _fail_input(str(exc))
        injected.setdefault(design.v, []).append(format_design(design))

    rows = []
    flagged = []
    for v in range(args.v_start, args.v_end + 1):
        vdir = out_dir / f"v{v}"
        vdir.mkdir(exist_ok=True)
        enum_path = vdir / "enumeration.json"
        if enum_path.exists():
            listing = json.loads(enum_path.read_text())
            design_texts = listing["designs"]
        else:
            design_texts = [
                format_design(d) for d in _campaign_designs(v, args.k, args.lam, budget)
            ]
            _write_atomic(
                enum_path,
                json.dumps({"v": v, "designs": design_texts, "exhaustive": True}),
            )
        design_texts = design_texts + injected.get(v, [])
        feasible = infeasible = timeouts = new_nodes = 0
        work = []
        for text in design_texts:
            from .textio import subject_hash

            h = subject_hash({"design": text})
            cert_path = vdir / f"{h}.json"
            if cert_path.exists():
                doc = json.loads(cert_path.read_text())
                status = doc["payload"]["status"]
            else:
                work.append((text, cert_path))
                continue
            feasible += status == "feasible"
            infeasible += status == "infeasible"
            timeouts += status == "timeout"

        results = _execute(work, args.mode, args.max_search_nodes, args.workers)
        for (text, cert_path), res in zip(work, results):
            _write_atomic(cert_path, json.dumps(res["cert"], sort_keys=True, indent=1))
            new_nodes += res["nodes"]
            status = res["status"]
            feasible += status == "feasible"
            infeasible += status == "infeasible"
            timeouts += status == "timeout"
            if status == "infeasible" and args.lam == 1 and v % 6 == 1:
                flagged.append((v, str(cert_path)))

        rows.append(
            {
                "v": v,
                "designs": len(design_texts),
                "feasible": feasible,
                "infeasible": infeasible,
                "timeouts": timeouts,
                "new_nodes": new_nodes,
            }
        )

    _write_atomic(out_dir / "summary.json", json.dumps(rows, indent=1))
    print(f"{'v':>5} {'designs':>8} {'feasible':>9} {'infeasible':>11} {'timeouts':>9} {'new_nodes':>10}")
    for row in rows:
        print(
            f"{row['v']:>5} {row['designs']:>8} {row['feasible']:>9} "
            f"{row['infeasible']:>11} {row['timeouts']:>9} {row['new_nodes']:>10}"
        )
    for v, cert in flagged:
        print(
            f"{RED}CONJECTURE-COUNTEREXAMPLE at v={v}: exhaustion certificate {cert}{RESET}",
            file=sys.stderr,
        )
    return EXIT_FAIL if flagged else EXIT_PASS


def _execute(work, mode: str, max_nodes: int | None, workers: int) -> list[dict]:
    if workers <= 1 or len(work) <= 1:
        return [_run_instance(text, mode, max_nodes) for text, _ in work]
    from concurrent.futures import ProcessPoolExecutor

    with ProcessPoolExecutor(max_workers=workers) as pool:
        futures = [pool.submit(_run_instance, text, mode, max_nodes) for text, _ in work]
        return [f.result() for f in futures]


def _write_atomic(path: Path, text: str) -> None:
    tmp = path.with_suffix(path.suffix + ".tmp")
    tmp.write_text(text)
    tmp.replace(path)


# ---------------------------------------------------------------------------
# counterexample


def cmd_counterexample(args: argparse.Namespace) -> int:
    k = args.k
    v = k * (k - 1) + 1
    family = None
    for fam in enumerate_cdfs(v, k, 1, EnumerationBudget(max_solutions=1)):
        family = fam
    if family is None:
        return _fail_input(f"no perfect difference set found for k={k}")
    design = superimpose(family, args.copies)
    text = format_design(design)
    if args.out:
        Path(args.out).write_text(text)
        print(f"wrote {args.out}", file=sys.stderr)
    else:
        sys.stdout.write(text)
    return EXIT_PASS


# ---------------------------------------------------------------------------


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="cycdesign",
        description="Verifiable toolkit for cyclic block designs and disjoint difference families",
    )
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("verify", help="check a design/family file or re-verify a certificate")
    p.add_argument("path")
    p.add_argument(
        "--kind",
        required=True,
        choices=["design", "cdf", "ddf", "symmetric-ddf", "representatives", "infeasible", "pipeline", "certificate"],
    )
    p.set_defaults(func=cmd_verify)

    p = sub.add_parser("enumerate", help="stream all difference families for (v,k,lambda)")
    p.add_argument("--v", type=int, required=True)
    p.add_argument("--k", type=int, required=True)
    p.add_argument("--lambda", dest="lam", type=int, required=True)
    p.add_argument("--max-solutions", type=int, default=None)
    p.add_argument("--max-nodes", type=int, default=None)
    p.add_argument("--canonical", action="store_true", help="dedup by canonical orbit representatives")
    p.set_defaults(func=cmd_enumerate)

    p = sub.add_parser("search", help="search for pairwise disjoint orbit representatives")
    p.add_argument("--design", dest="path", required=True)
    p.add_argument("--mode", choices=["plain", "symmetric"], default="plain")
    p.add_argument("--max-nodes", type=int, default=None)
    p.add_argument("--prime-driver", action="store_true", help="use the prime-order translate condition route")
    p.set_defaults(func=cmd_search)

    p = sub.add_parser("pipeline", help="run the partial-parallel-class pipeline")
    p.add_argument("--design", dest="path", required=True)
    p.add_argument("--epsilon", type=float, required=True)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--eta", type=float, default=0.2)
    p.add_argument("--batch-fraction", type=float, default=0.1)
    p.add_argument("--retry-cap", type=int, default=20)
    p.set_defaults(func=cmd_pipeline)

    p = sub.add_parser("campaign", help="enumerate designs over a v range and search each one")
    p.add_argument("--v-start", type=int, required=True)
    p.add_argument("--v-end", type=int, required=True)
    p.add_argument("--k", type=int, default=3)
    p.add_argument("--lambda", dest="lam", type=int, default=1)
    p.add_argument("--mode", choices=["plain", "symmetric"], default="plain")
    p.add_argument("--out", default=None, help="output directory (default $CYCDESIGN_OUTDIR or ./campaign-out)")
    p.add_argument("--max-nodes", type=int, default=None, help="enumeration node budget per v")
    p.add_argument("--max-search-nodes", type=int, default=None, help="search node budget per design")
    p.add_argument("--workers", type=int, default=1)
    p.add_argument("--inject", action="append", help="extra design file to include (repeatable)")
    p.set_defaults(func=cmd_campaign)

    p = sub.add_parser("counterexample", help="emit a superimposed symmetric design (always infeasible)")
    p.add_argument("--k", type=int, required=True)
    p.add_argument("--copies", type=int, default=2)
    p.add_argument("--out", default=None)
    p.set_defaults(func=cmd_counterexample)

    return parser


def main(argv: list[str] | None = None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    return args.func(args)


if __name__ == "__main__":
    raise SystemExit(main())
