"""Markdown + CSV accuracy summaries over run directories, with a companion notebook.

Runs are grouped by protocol, one section each. Within a protocol the mean and the standard
deviation over runs (seeds) are reported per target and for the average; the std is the sample
std (ddof=1) by default and is left empty for a single run.
"""

import os
import logging
from typing import Optional, Sequence

import pandas as pd

from clfa.common import names as N
from clfa.common.errors import argument_error, data_error, io_error
from clfa.common.logger import fmsg
from clfa.common.utils import atomic_write, normpath
from clfa.evaluation.notebook_templates import report_notebook, save_notebook, write_notebook_template
from clfa.runs import RUNS
from clfa.runs.run_schema import MetricsRecord

logger = logging.getLogger(__name__)

STD_MODES = { "sample": 1, "population": 0 }

SUMMARY_CSV = "summary.csv"
SUMMARY_MD = "summary.md"
REPORT_NOTEBOOK = "report.ipynb"
LOSS_CURVES = "loss_curves.png"


def collect_records(run_dirs: Sequence[str]) -> pd.DataFrame:
    """
    One row per MetricsRecord: run, protocol, seed, selection, target, accuracy.

    Raises:
        ClfaError: DATA error listing every run directory without metrics records.
    """
    rows, missing = [], []
    for run_dir in run_dirs:
        records = RUNS.records(run_dir, MetricsRecord)
        if len(records) == 0:
            missing.append(normpath(run_dir))
            continue
        for record in records:
            base = { "run": normpath(run_dir), "protocol": record.protocol, "seed": record.seed, "selection": record.selection }
            rows.extend({ **base, "target": target, "accuracy": acc } for target, acc in record.per_target.items())
            rows.append({ **base, "target": "average", "accuracy": record.average })
    if missing:
        raise data_error(f"No metrics records in: {missing}", missing=missing)
    return pd.DataFrame(rows)


def summarize(records: pd.DataFrame, std_mode: str = "sample") -> pd.DataFrame:
    """Mean, std and run count per (protocol, target). std is NaN for a single run."""
    if std_mode not in STD_MODES:
        raise argument_error(f"Unknown std mode '{std_mode}', expected one of {list(STD_MODES)}.")
    grouped = records.groupby(["protocol", "target"], sort=False)["accuracy"]
    summary = grouped.agg(mean="mean", n_runs="count").reset_index()
    std = grouped.std(ddof=STD_MODES[std_mode]).reset_index(drop=True)
    summary["std"] = std.where(summary["n_runs"] > 1)
    return summary[["protocol", "target", "mean", "std", "n_runs"]]


def _markdown(summary: pd.DataFrame, std_mode: str, selections: dict[str, str]) -> str:
    lines = ["# Accuracy summary", "", f"Std over runs: {std_mode}.", ""]
    for protocol, section in summary.groupby("protocol", sort=False):
        lines += [f"## {protocol}", ""]
        if selections.get(protocol):
            lines += [f"Model selection: {selections[protocol]}.", ""]
        lines += ["| target | mean | std | runs |", "|---|---|---|---|"]
        for _, row in section.iterrows():
            std = "" if pd.isna(row["std"]) else f"{row['std']:.4f}"
            lines.append(f"| {row['target']} | {row['mean']:.4f} | {std} | {int(row['n_runs'])} |")
        lines.append("")
    return "\n".join(lines)


def _write_text(path: str, text: str) -> str:
    def write(tmp):
        with open(tmp, "w", encoding="utf-8") as f:
            f.write(text)
    return atomic_write(path, write)


def plot_loss_curves(run_dirs: Sequence[str], out_png: str) -> Optional[str]:
    import matplotlib
    matplotlib.use("Agg")
    import matplotlib.pyplot as plt

    terms = [N.LOSS_CLS, N.LOSS_IND, N.LOSS_AUG, N.LOSS_INT, N.LOSS_TOTAL]
    fig, axes = plt.subplots(1, len(terms), figsize=(4 * len(terms), 3.5))
    plotted = False
    for run_dir in run_dirs:
        curve = pd.DataFrame(RUNS.loss_curve(run_dir))
        if curve.empty:
            continue
        plotted = True
        for ax, term in zip(axes, terms):
            ax.plot(curve["iter"], curve[term], label=os.path.basename(normpath(run_dir)))
            ax.set_title(term)
            ax.set_xlabel("iteration")
    if not plotted:
        plt.close(fig)
        return None
    axes[-1].legend(fontsize="small")
    fig.tight_layout()
    try:
        atomic_write(out_png, lambda tmp: fig.savefig(tmp, format="png", dpi=120))
    finally:
        plt.close(fig)
    return normpath(out_png)


def report(run_dirs: Sequence[str], out: str, std_mode: str = "sample", plot: bool = False) -> dict[str, str]:
    """
    Write summary.csv, summary.md and report.ipynb (plus loss_curves.png when plot is set) into out.

    Returns:
        dict: artifact name -> path.
    """
    if len(run_dirs) == 0:
        raise argument_error("No run directories given.")
    records = collect_records(run_dirs)
    summary = summarize(records, std_mode)
    selections = {
        protocol: ", ".join(sorted({ s for s in group["selection"].dropna() }))
        for protocol, group in records.groupby("protocol", sort=False)
    }

    out = normpath(out)
    try:
        os.makedirs(out, exist_ok=True)
    except OSError as e:
        raise io_error(f"Cannot create report directory {out}: {e}", path=out)
    artifacts = {
        "csv": atomic_write(os.path.join(out, SUMMARY_CSV), lambda tmp: summary.to_csv(tmp, index=False, lineterminator="\n")),
        "markdown": _write_text(os.path.join(out, SUMMARY_MD), _markdown(summary, std_mode, selections)),
    }
    if plot:
        png = plot_loss_curves(run_dirs, os.path.join(out, LOSS_CURVES))
        if png is not None:
            artifacts["plot"] = png

    notebook = write_notebook_template(
        report_notebook,
        values = {
            "title": "Accuracy report",
            "n_runs": len(run_dirs),
            "selection": "; ".join(f"{p}: {s}" for p, s in selections.items() if s) or "final checkpoint",
            "std_mode": std_mode,
            "summary_csv": os.path.abspath(artifacts["csv"]).replace("\\", "/"),
            "run_dirs": [os.path.abspath(r).replace("\\", "/") for r in run_dirs],
        },
        mode = "curves" if plot else None
    )
    artifacts["notebook"] = save_notebook(notebook, os.path.join(out, REPORT_NOTEBOOK))
    logger.info(fmsg("Report written", out=out, runs=len(run_dirs), protocols=summary["protocol"].nunique()))
    return artifacts
