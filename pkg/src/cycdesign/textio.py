"""Text formats and certificates.

Blocks are written as comma-separated residues in braces, e.g. ``{0,1,3}``.
A design file is a ``v k lambda`` header followed by one ``<block> <length>``
line per orbit; a family file is the same header followed by one block per
line.  Certificates are single JSON documents embedding their subject, so a
verifier needs nothing but the certificate file.
"""

from __future__ import annotations

import hashlib
import json
import re
from dataclasses import dataclass
from typing import Sequence

from . import __version__
from .blocks import Block
from .designs import CyclicDesign, Orbit
from .families import DifferenceFamily


class ParseError(ValueError):
    """Input text rejected; carries 1-based line and column."""

    def __init__(self, message: str, line: int, column: int = 1):
        self.line = line
        self.column = column
        super().__init__(f"line {line}, column {column}: {message}")


_BLOCK_RE = re.compile(r"\{\s*(-?\d+(?:\s*,\s*-?\d+)*)\s*\}")


def format_block(block: Sequence[int]) -> str:
    return "{" + ",".join(str(x) for x in block) + "}"


def parse_block(text: str, line: int = 1, column: int = 1) -> Block:
    m = _BLOCK_RE.fullmatch(text.strip())
    if not m:
        raise ParseError(f"malformed block {text.strip()!r}", line, column)
    return tuple(sorted(int(x) for x in m.group(1).split(",")))


def _parse_header(line_text: str, line_no: int) -> tuple[int, int, int]:
    parts = line_text.split()
    if len(parts) != 3:
        raise ParseError("header must be 'v k lambda'", line_no)
    try:
        v, k, lam = (int(p) for p in parts)
    except ValueError:
        raise ParseError("header fields must be integers", line_no) from None
    return v, k, lam


def format_design(design: CyclicDesign) -> str:
    lines = [f"{design.v} {design.k} {design.lam}"]
    for orb in design.orbits:
        lines.append(f"{format_block(orb.base)} {orb.length}")
    return "\n".join(lines) + "\n"


def parse_design(text: str) -> CyclicDesign:
    lines = [ln for ln in text.splitlines()]
    body = [(i + 1, ln.strip()) for i, ln in enumerate(lines) if ln.strip()]
    if not body:
        raise ParseError("empty design file", 1)
    (hdr_no, hdr), rest = body[0], body[1:]
    v, k, lam = _parse_header(hdr, hdr_no)
    orbits = []
    for line_no, ln in rest:
        parts = ln.rsplit(None, 1)
        if len(parts) != 2:
            raise ParseError("orbit line must be '<block> <length>'", line_no)
        block = parse_block(parts[0], line_no)
        try:
            length = int(parts[1])
        except ValueError:
            raise ParseError(f"bad orbit length {parts[1]!r}", line_no) from None
        orbits.append(Orbit(block, length))
    try:
        return CyclicDesign(v, k, lam, tuple(orbits))
    except ValueError as exc:
        raise ParseError(str(exc), hdr_no) from None


def format_family(family: DifferenceFamily) -> str:
    lines = [f"{family.v} {family.k} {family.lam}"]
    lines += [format_block(b) for b in family.base_blocks]
    return "\n".join(lines) + "\n"


def parse_family(text: str) -> DifferenceFamily:
    body = [(i + 1, ln.strip()) for i, ln in enumerate(text.splitlines()) if ln.strip()]
    if not body:
        raise ParseError("empty family file", 1)
    (hdr_no, hdr), rest = body[0], body[1:]
    v, k, lam = _parse_header(hdr, hdr_no)
    blocks = [parse_block(ln, line_no) for line_no, ln in rest]
    try:
        return DifferenceFamily(v, k, lam, tuple(blocks))
    except ValueError as exc:
        raise ParseError(str(exc), hdr_no) from None


# ---------------------------------------------------------------------------
# Certificates

CERT_KINDS = (
    "design-valid",
    "cdf",
    "ddf",
    "symmetric-ddf",
    "representatives",
    "infeasible",
    "pipeline",
)


def subject_hash(subject: dict) -> str:
    canon = json.dumps(subject, sort_keys=True, separators=(",", ":"))
    return hashlib.sha256(canon.encode()).hexdigest()


@dataclass(frozen=True)
class Certificate:
    kind: str
    subject: dict
    payload: dict
    config: dict

    def to_dict(self) -> dict:
        return {
            "kind": self.kind,
            "subject": self.subject,
            "subject_hash": subject_hash(self.subject),
            "payload": self.payload,
            "version": __version__,
            "config": self.config,
        }

    def to_json(self) -> str:
        return json.dumps(self.to_dict(), sort_keys=True, indent=1)


def make_certificate(kind: str, subject: dict, payload: dict, config: dict | None = None) -> Certificate:
    if kind not in CERT_KINDS:
        raise ValueError(f"unknown certificate kind {kind!r}")
    return Certificate(kind, subject, payload, config or {})


def load_certificate(text: str) -> dict:
    try:
        doc = json.loads(text)
    except json.JSONDecodeError as exc:
        raise ParseError(f"not valid JSON: {exc.msg}", exc.lineno, exc.colno) from None
    for field in ("kind", "subject", "payload", "subject_hash"):
        if field not in doc:
            raise ParseError(f"certificate missing field {field!r}", 1)
    if doc["kind"] not in CERT_KINDS:
        raise ParseError(f"unknown certificate kind {doc['kind']!r}", 1)
    if subject_hash(doc["subject"]) != doc["subject_hash"]:
        raise ParseError("subject hash does not match subject", 1)
    return doc


def design_subject(design: CyclicDesign) -> dict:
    return {"design": format_design(design)}


def family_subject(family: DifferenceFamily) -> dict:
    return {"family": format_family(family)}


def verify_certificate(doc: dict) -> tuple[bool, dict]:
    """Recompute a certificate's claim from its embedded subject.

    Returns (ok, detail).  Search-based kinds (infeasible) re-run the
    deterministic search and require the same exhaustion statistics.
    """
    from .families import is_cdf, is_ddf, is_symmetric_ddf
    from .designs import validate_design
    from .search import find_disjoint_representatives, verify_representatives

    kind = doc["kind"]
    payload = doc["payload"]
    if kind in ("cdf", "ddf", "symmetric-ddf"):
        family = parse_family(doc["subject"]["family"])
        checker = {"cdf": is_cdf, "ddf": is_ddf, "symmetric-ddf": is_symmetric_ddf}[kind]
        got = checker(family).to_dict()
        return got == payload.get("result"), {"recomputed": got}
    if kind == "design-valid":
        design = parse_design(doc["subject"]["design"])
        got = validate_design(design).to_dict()
        return got == payload.get("result"), {"recomputed": got}
    if kind == "representatives":
        design = parse_design(doc["subject"]["design"])
        chosen = [(int(i), int(t)) for i, t in payload["chosen"]]
        mode = doc.get("config", {}).get("mode", "plain")
        ok = verify_representatives(design, chosen, mode)
        return ok, {"checked": "witness"}
    if kind == "infeasible":
        design = parse_design(doc["subject"]["design"])
        mode = doc.get("config", {}).get("mode", "plain")
        outcome = find_disjoint_representatives(design, mode)
        ok = (
            outcome.status == "infeasible"
            and outcome.stats.nodes == payload.get("nodes")
        )
        return ok, {"recomputed_status": outcome.status, "nodes": outcome.stats.nodes}
    if kind == "pipeline":
        design = parse_design(doc["subject"]["design"])
        chosen = payload.get("class", {})
        taken: set[int] = set()
        counts: dict[int, int] = {}
        from .blocks import translate

        for key, translates in chosen.items():
            i = int(key)
            orb = design.orbits[i]
            for t in translates:
                block = translate(orb.base, int(t), design.v)
                if taken & set(block):
                    return False, {"error": f"orbit {i} block overlaps"}
                taken |= set(block)
            counts[i] = len(translates)
        s = (design.k - 1) // design.lam
        tau_prev = sum(1 for c in counts.values() if c == s - 1)
        if tau_prev != payload.get("final_tau_s_minus_1"):
            return False, {"error": "tau count mismatch", "recomputed": tau_prev}
        if tau_prev > payload.get("certified_bound", -1):
            return False, {"error": "certified bound violated"}
        return True, {"checked": "class disjointness, tau, bound"}
    raise ValueError(f"unknown certificate kind {kind!r}")
