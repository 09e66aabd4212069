"""
Edit-Reduction Report
Per-operation change in TER edit counts between raw MT and post-edited output
"""

import logging
from dataclasses import dataclass, field
from pathlib import Path
from typing import Dict, List, Optional, Sequence, Union

import pandas as pd

import config
from src.evaluation.metrics import TerBreakdown, Tokens, ter_corpus

logger = logging.getLogger(__name__)


@dataclass
class EditReduction:
    """One system's row: counts against pe for raw MT and for the system"""
    system: str
    baseline: TerBreakdown
    system_counts: TerBreakdown
    reductions: Dict[str, Optional[float]] = field(default_factory=dict)

    def as_row(self) -> Dict[str, object]:
        row: Dict[str, object] = {"system": self.system}
        for op in config.EDIT_OPERATIONS:
            row[f"%{op}"] = self.reductions[op]
        return row


def edit_reduction(baseline: TerBreakdown, system_counts: TerBreakdown,
                   system: str = "APE") -> EditReduction:
    """
    100 * (baseline - system) / baseline per operation.

    An operation the baseline never needs has no defined reduction and is
    reported as None. Negative values mean the system adds that error type.
    """
    reductions: Dict[str, Optional[float]] = {}
    for op in config.EDIT_OPERATIONS:
        before = baseline.count(op)
        after = system_counts.count(op)
        reductions[op] = None if before == 0 else 100.0 * (before - after) / before
    return EditReduction(system, baseline, system_counts, reductions)


def edit_reduction_report(mt: Sequence[Tokens], pe: Sequence[Tokens],
                          systems: Dict[str, Sequence[Tokens]],
                          lowercase: bool = False) -> List[EditReduction]:
    """
    Args:
        mt: raw machine translations
        pe: post-edited references
        systems: system name -> hypotheses aligned with ``pe``

    Returns:
        One EditReduction per system, in the given order
    """
    if len(mt) != len(pe):
        raise ValueError(f"{len(mt)} mt sentences for {len(pe)} pe sentences")
    baseline = ter_corpus(mt, pe, lowercase=lowercase)
    rows = []
    for name, hyps in systems.items():
        if len(hyps) != len(pe):
            raise ValueError(f"system {name!r} has {len(hyps)} hypotheses for {len(pe)} references")
        rows.append(edit_reduction(baseline, ter_corpus(hyps, pe, lowercase=lowercase), name))
    return rows


def report_frame(rows: Sequence[EditReduction]) -> pd.DataFrame:
    columns = ["system"] + [f"%{op}" for op in config.EDIT_OPERATIONS]
    return pd.DataFrame([row.as_row() for row in rows], columns=columns)


def _format(value) -> str:
    if value is None or (isinstance(value, float) and pd.isna(value)):
        return "n/a"
    if isinstance(value, float):
        return f"{value:.2f}"
    return str(value)


def render_text(rows: Sequence[EditReduction]) -> str:
    """Aligned plain-text table: system, %In, %De, %Su, %Sh"""
    frame = report_frame(rows)
    cells = [list(frame.columns)] + [[_format(v) for v in record] for record in
                                     frame.astype(object).itertuples(index=False)]
    widths = [max(len(row[i]) for row in cells) for i in range(len(cells[0]))]
    lines = []
    for n, row in enumerate(cells):
        parts = [row[0].ljust(widths[0])] + [c.rjust(w) for c, w in zip(row[1:], widths[1:])]
        lines.append("  ".join(parts).rstrip())
        if n == 0:
            lines.append("  ".join("-" * w for w in widths))
    return "\n".join(lines) + "\n"


def write_report(rows: Sequence[EditReduction], output_path: Union[str, Path]) -> Dict[str, Path]:
    """Write ``<name>.tsv`` and ``<name>.txt`` next to each other"""
    output_path = Path(output_path)
    output_path.parent.mkdir(parents=True, exist_ok=True)
    tsv = output_path.with_suffix(".tsv")
    txt = output_path.with_suffix(".txt")
    report_frame(rows).to_csv(tsv, sep="\t", index=False, float_format="%.2f", na_rep="n/a")
    txt.write_text(render_text(rows), encoding="utf-8")
    logger.info("Edit-reduction report written to %s and %s", tsv, txt)
    return {"tsv": tsv, "txt": txt}
