"""Result tables: plain text and CSV.

Conventions: one row per method, one column per task plus the aggregate
relative-gain column. Cells show "mean±se", an asterisk when the method
differs significantly from the baseline, and the relative change in
parentheses. The best value per column is wrapped in ** **.
"""

from __future__ import annotations

import io
import csv

from cdforge.evalstat import HIGHER


def _best_method(summary: dict, task: str) -> str:
    direction = summary["task_info"][task].direction
    cells = summary["cells"]
    methods = summary["methods"]
    key = (lambda m: cells[(m, task)].mean)
    return max(methods, key=key) if direction == HIGHER else min(methods, key=key)


def _best_aggregate(summary: dict) -> str | None:
    gains = {m: g for m, g in summary["mu_delta_rel"].items() if g is not None}
    if not gains:
        return None
    return max(gains, key=lambda m: gains[m])


def _format_cell(summary: dict, method: str, task: str, bold: bool) -> str:
    cell = summary["cells"][(method, task)]
    core = f"{cell.mean:.2f}±{cell.se:.2f}"
    if bold:
        core = f"**{core}**"
    if cell.significant:
        core += "*"
    if cell.rel_delta_pct is not None:
        core += f" ({cell.rel_delta_pct:.2f}%)"
    return core


def _format_aggregate(summary: dict, method: str, bold: bool) -> str:
    gain = summary["mu_delta_rel"][method]
    if gain is None:
        return "-"
    core = f"{gain:.2f}%"
    return f"**{core}**" if bold else core


def render_rows(summary: dict) -> list[list[str]]:
    tasks = summary["tasks"]
    header = ["method", "mu_delta_rel"] + list(tasks)
    best_by_task = {t: _best_method(summary, t) for t in tasks}
    best_agg = _best_aggregate(summary)
    rows = [header]
    for method in summary["methods"]:
        row = [method, _format_aggregate(summary, method, method == best_agg)]
        for task in tasks:
            row.append(_format_cell(summary, method, task, best_by_task[task] == method))
        rows.append(row)
    return rows


def render_text(summary: dict) -> str:
    rows = render_rows(summary)
    widths = [max(len(r[i]) for r in rows) for i in range(len(rows[0]))]
    lines = []
    for idx, row in enumerate(rows):
        lines.append(" | ".join(cell.ljust(widths[i]) for i, cell in enumerate(row)).rstrip())
        if idx == 0:
            lines.append("-+-".join("-" * w for w in widths))
    return "\n".join(lines) + "\n"


def render_csv(summary: dict) -> str:
    buf = io.StringIO()
    writer = csv.writer(buf, lineterminator="\n")
    tasks = summary["tasks"]
    header = ["method", "mu_delta_rel"]
    for task in tasks:
        header += [f"{task}_mean", f"{task}_se", f"{task}_rel_pct",
                   f"{task}_significant", f"{task}_best"]
    writer.writerow(header)
    best_by_task = {t: _best_method(summary, t) for t in tasks}
    for method in summary["methods"]:
        gain = summary["mu_delta_rel"][method]
        row = [method, "" if gain is None else f"{gain:.4f}"]
        for task in tasks:
            cell = summary["cells"][(method, task)]
            row += [
                f"{cell.mean:.6f}",
                f"{cell.se:.6f}",
                "" if cell.rel_delta_pct is None else f"{cell.rel_delta_pct:.4f}",
                "1" if cell.significant else "0",
                "1" if best_by_task[task] == method else "0",
            ]
        writer.writerow(row)
    return buf.getvalue()
