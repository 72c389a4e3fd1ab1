"""Static SVG rendering of sweep results.

Figures are re-derived from the emitted CSV rather than from in-memory
solutions, so a rendered file is a pure function of the delimited output
(plus the axis label chosen by the caller): re-rendering from the same
CSV reproduces it byte for byte.  The id-hash salt is pinned and the
date metadata scrubbed to keep the bytes run-independent.
"""

from __future__ import annotations

import csv
from pathlib import Path

import matplotlib

matplotlib.use("Agg")
import matplotlib.pyplot as plt

from .errors import SchemaError

_HASHSALT = "cbdc-portfolio"

_HOLDINGS = (
    ("a", "risky", "tab:red"),
    ("d", "deposits", "tab:blue"),
    ("m", "CBDC", "tab:green"),
)

#: Line styles by economy: the convention is dashed before CBDC
#: introduction, solid after.
_STYLES = {"pre_cbdc": ("--", "pre"), "with_cbdc": ("-", "with")}

_REQUIRED_COLUMNS = {"sweep_parameter", "agent", "economy", "a", "d", "m"}


def render_sweep_svg(csv_path, svg_path, xlabel: str = "sweep parameter") -> None:
    """Render holdings versus the sweep parameter, one panel per agent."""
    rows = _read_rows(csv_path)
    agents = [agent for agent in ("HFL", "LFL") if any(r["agent"] == agent for r in rows)]
    if not agents:
        raise SchemaError(f"no agent rows found in {csv_path}")

    with plt.rc_context({"svg.hashsalt": _HASHSALT}):
        fig, axes = plt.subplots(1, len(agents), figsize=(4.5 * len(agents), 3.6))
        axes = [axes] if len(agents) == 1 else list(axes)
        for axis, agent in zip(axes, agents):
            for economy, (style, tag) in _STYLES.items():
                series = [r for r in rows if r["agent"] == agent and r["economy"] == economy]
                for column, label, color in _HOLDINGS:
                    points = [
                        (float(r["sweep_parameter"]), float(r[column]))
                        for r in series
                        if r[column] != ""
                    ]
                    if not points or all(value == 0.0 for _, value in points):
                        continue
                    axis.plot(
                        [x for x, _ in points],
                        [y for _, y in points],
                        style,
                        color=color,
                        label=f"{label} ({tag})",
                    )
            axis.set_title(agent)
            axis.set_xlabel(xlabel)
            axis.set_ylabel("holding per endowment")
            axis.legend(fontsize="small")
        fig.tight_layout()
        fig.savefig(Path(svg_path), format="svg", metadata={"Date": None})
        plt.close(fig)


def _read_rows(csv_path) -> list[dict[str, str]]:
    with open(csv_path, newline="") as handle:
        reader = csv.DictReader(handle)
        header = set(reader.fieldnames or ())
        missing = _REQUIRED_COLUMNS - header
        if missing:
            raise SchemaError(
                f"{csv_path} is not a sweep CSV; missing columns: {', '.join(sorted(missing))}"
            )
        return list(reader)
