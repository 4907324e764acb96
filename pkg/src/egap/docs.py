"""Documentation helpers: cost audit, variant table rendering and ledger lint.

The variant matrix in ``data/variants.toml`` is the single source for both
the CLI validation and ``docs/variants.md``; :func:`render_variant_table`
produces the table that page embeds, and a test keeps the two in sync.
Design decisions in the source carry a ``# decision: <slug>`` marker and
each slug must appear exactly once in ``docs/ledger.md`` as
``<!-- decision: <slug> -->``.
"""

from __future__ import annotations

import re
from collections import Counter
from dataclasses import dataclass
from pathlib import Path

from .errors import SolverError
from .schemes import VARIANTS

CODE_MARKER = re.compile(r"#\s*decision:\s*([a-z0-9-]+)")
DOC_MARKER = re.compile(r"<!--\s*decision:\s*([a-z0-9-]+)\s*-->")


@dataclass(frozen=True)
class CostRow:
    scheme: str
    prox: int
    A: int
    At: int
    uniform: bool = True

    def as_tuple(self) -> tuple[int, int, int]:
        return self.prox, self.A, self.At


def cost_audit(trace) -> CostRow:
    """Per-iteration ``(prox, A, A^T)`` counts of a trace.

    The count is the most common increment between consecutive records;
    ``uniform`` says whether every iteration cost the same.  Raises
    ``no-counters`` when the trace carries no counter columns.
    """
    recs = trace.records
    if "counters" not in trace.header or any(r.n_prox is None for r in recs):
        raise SolverError("no-counters", "the trace was recorded without operation counters")
    if len(recs) < 2:
        raise SolverError("no-counters", "at least one iteration is needed for a cost audit")
    steps = [(b.n_prox - a.n_prox, b.n_A - a.n_A, b.n_At - a.n_At) for a, b in zip(recs, recs[1:])]
    counts = Counter(steps)
    (row, _), = counts.most_common(1)
    return CostRow(trace.header["scheme"], *row, uniform=len(counts) == 1)


def documented_cost(scheme: str) -> tuple[int, int, int]:
    return tuple(VARIANTS[scheme]["cost"])


def render_variant_table(matrix: dict | None = None) -> str:
    """Markdown table of schemes, smoothers, requirements, bound family and cost."""
    matrix = VARIANTS if matrix is None else matrix
    lines = ["| scheme | smoothers | requires | default c | certificate | prox, A, A^T |",
             "|---|---|---|---|---|---|"]
    for name, row in matrix.items():
        req = list(row["requires"])
        for key, vals in row.items():
            if key.startswith("requires_for_"):
                req += [f"{v} ({key.removeprefix('requires_for_')})" for v in vals]
        cert = ", ".join(f"{k}: {v}" if v else f"{k}: none" for k, v in row["bound"].items())
        lines.append(f"| {name} | {', '.join(row['smoothers'])} | {', '.join(req) or '-'} | "
                     f"{row['default_c']:g} | {cert} | {', '.join(map(str, row['cost']))} |")
    return "\n".join(lines) + "\n"


def code_markers(src: Path) -> Counter:
    found: Counter = Counter()
    for path in sorted(Path(src).rglob("*.py")):
        found.update(CODE_MARKER.findall(path.read_text()))
    return found


def lint_ledger(src: Path, ledger: Path) -> list[str]:
    """Problems with the ledger page; an empty list means it is in sync with the source."""
    code = code_markers(src)
    doc = Counter(DOC_MARKER.findall(Path(ledger).read_text()))
    issues = [f"{slug}: marked {n} times in the source" for slug, n in code.items() if n > 1]
    issues += [f"{slug}: missing from the ledger" for slug in code if doc[slug] == 0]
    issues += [f"{slug}: listed {n} times in the ledger" for slug, n in doc.items() if n > 1]
    issues += [f"{slug}: no marker in the source" for slug in doc if slug not in code]
    return issues
