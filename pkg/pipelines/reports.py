"""
Reports - CSV, tableau texte aligne, script gnuplot
====================================================

Author: Motion Cluster System
Date: 2025-11-24
"""

import csv
import io
from pathlib import Path
from typing import List, Sequence as Seq, Union

Rows = Seq[Seq[str]]


def render_csv(rows: Rows) -> str:
    buffer = io.StringIO()
    writer = csv.writer(buffer, lineterminator="\n")
    for row in rows:
        writer.writerow(list(row))
    return buffer.getvalue()


def render_table(rows: Rows) -> str:
    """Colonnes alignees a gauche; une ligne vide separe les blocs"""
    blocks: List[List[Seq[str]]] = [[]]
    for row in rows:
        if row:
            blocks[-1].append(row)
        elif blocks[-1]:
            blocks.append([])
    out = []
    for block in blocks:
        if not block:
            continue
        widths = [0] * max(len(r) for r in block)
        for row in block:
            for i, cell in enumerate(row):
                widths[i] = max(widths[i], len(cell))
        for row in block:
            out.append("  ".join(cell.ljust(widths[i]) for i, cell in enumerate(row)).rstrip())
        out.append("")
    return "\n".join(out)


def write_text(path: Union[str, Path], text: str) -> Path:
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    path.write_text(text, encoding="utf-8")
    return path


def gnuplot_script(title: str, csv_name: str, label_column: int, value_columns: Seq[int],
                   column_names: Seq[str], last_row: int = 0) -> str:
    """Histogramme groupe des colonnes value_columns (indices 1-based), lignes 1..last_row du CSV (0 = toutes)"""
    every = f"every ::1::{last_row}" if last_row else "every ::1"
    lines = [
        f'set title "{title}"',
        "set datafile separator ','",
        "set style data histograms",
        "set style histogram clustered",
        "set style fill solid 0.8",
        "set yrange [0:1]",
        "set xtics rotate by -45",
        "set terminal pngcairo size 1200,600",
        f'set output "{Path(csv_name).stem}.png"',
    ]
    plots = [
        f'"{csv_name}" {every} using {col}:xtic({label_column}) title "{name}"'
        for col, name in zip(value_columns, column_names)
    ]
    lines.append("plot " + ", \\\n     ".join(plots))
    return "\n".join(lines) + "\n"
