"""Trace CSV, SVG plots and PI-vs-PID comparison reports."""

from __future__ import annotations

import csv
import io
import math
from dataclasses import dataclass, field
from typing import List, Optional, Sequence

import numpy as np

from .metrics import MetricComparison, StepMetrics, compare
from .simloop import SimTrace

CSV_HEADER = ",".join(SimTrace.COLUMNS)


def emit_csv(trace: SimTrace) -> str:
    """Six-decimal CSV of a trace, one row per sample, ``\\n`` line endings."""
    buf = io.StringIO()
    writer = csv.writer(buf, lineterminator="\n")
    writer.writerow(SimTrace.COLUMNS)
    cols = [np.asarray(c, dtype=float) for c in trace.columns().values()]
    for row in zip(*cols):
        writer.writerow([f"{v:.6f}" for v in row])
    return buf.getvalue()


def parse_csv(text: str, ts: Optional[float] = None, name: str = "trace") -> SimTrace:
    """Inverse of :func:`emit_csv` up to the formatting quantum."""
    rows = list(csv.reader(io.StringIO(text)))
    if not rows or tuple(rows[0]) != SimTrace.COLUMNS:
        raise ValueError(f"expected header {CSV_HEADER!r}")
    data = np.array(rows[1:], dtype=float).reshape(-1, len(SimTrace.COLUMNS))
    cols = dict(zip(SimTrace.COLUMNS, data.T))
    if ts is None:
        ts = float(cols["t"][1] - cols["t"][0]) if len(data) > 1 else 0.0
    return SimTrace(ts=ts, name=name, **cols)


# --------------------------------------------------------------------------
# plots

_COLOURS = ("tab:blue", "tab:red", "tab:green", "tab:purple")


def emit_plot(traces: Sequence[SimTrace], labels: Optional[Sequence[str]] = None,
              title: Optional[str] = None) -> str:
    """Two-panel SVG (PV over setpoint, controller output) of one or more traces.

    Output is byte-identical for identical input: the SVG id salt is fixed and
    no creation date is written.  Trace ``i`` is drawn as ``<g id="pv-i">``
    and ``<g id="u-i">``.
    """
    import matplotlib
    from matplotlib.figure import Figure

    if not traces:
        raise ValueError("emit_plot needs at least one trace")
    labels = list(labels) if labels is not None else [tr.name for tr in traces]
    if len(labels) != len(traces):
        raise ValueError("one label per trace")

    with matplotlib.rc_context({"svg.hashsalt": "coupledpid", "svg.fonttype": "path"}):
        fig = Figure(figsize=(8.0, 6.0))
        ax_pv, ax_u = fig.subplots(2, 1, sharex=True, gridspec_kw={"height_ratios": (3, 2)})
        ax_pv.step(traces[0].t, traces[0].setpoint, where="post", color="black",
                   linestyle="--", linewidth=1.0, label="setpoint", gid="setpoint")
        for i, (tr, label) in enumerate(zip(traces, labels)):
            colour = _COLOURS[i % len(_COLOURS)]
            ax_pv.plot(tr.t, tr.pv_clean, color=colour, linewidth=1.2, label=label, gid=f"pv-{i}")
            ax_u.step(tr.t, tr.u, where="post", color=colour, linewidth=1.0, label=label, gid=f"u-{i}")
        ax_pv.set_ylabel("PV [% of span]")
        ax_u.set_ylabel("controller output u [%]")
        ax_u.set_xlabel("time [s]")
        ax_pv.legend(loc="lower right")
        ax_u.legend(loc="upper right")
        for ax in (ax_pv, ax_u):
            ax.grid(True, linewidth=0.3)
        if title:
            ax_pv.set_title(title)
        fig.tight_layout()
        buf = io.StringIO()
        fig.savefig(buf, format="svg", metadata={"Date": None, "Creator": "coupledpid"})
    return buf.getvalue()


# --------------------------------------------------------------------------
# comparison report

_UNITS = {"overshoot": "%", "rise_time": "s", "settling_time": "s", "steady_state_error": "%",
          "iae": "%.s", "ise": "%^2.s", "itae": "%.s^2", "control_variance": "%^2"}


@dataclass
class ComparisonReport:
    pi_name: str
    pid_name: str
    rows: List[MetricComparison]
    verdicts: List[str] = field(default_factory=list)

    @classmethod
    def from_metrics(cls, pi_name: str, pid_name: str, m_pi: StepMetrics, m_pid: StepMetrics):
        rows = compare(m_pi, m_pid)
        verdicts = []
        for r in rows:
            if r.winner == "tie":
                verdicts.append(f"{r.metric}: tie")
                continue
            won, lost = (r.pi, r.pid) if r.winner == "PI" else (r.pid, r.pi)
            lost_text = "undefined" if lost is None else f"{lost:.6g}"
            verdicts.append(f"{r.metric}: {r.winner} better ({won:.6g} vs {lost_text})")
        return cls(pi_name=pi_name, pid_name=pid_name, rows=rows, verdicts=verdicts)

    def row(self, metric: str) -> MetricComparison:
        for r in self.rows:
            if r.metric == metric:
                return r
        raise KeyError(metric)

    def render(self) -> str:
        def fmt(v):
            return "n/a" if v is None else f"{v:.6g}"

        head = f"PI: {self.pi_name}    PID: {self.pid_name}"
        table = [f"{'metric':<20}{'unit':<8}{'PI':>14}{'PID':>14}{'winner':>8}{'PID/PI':>12}"]
        for r in self.rows:
            ratio = "n/a" if math.isnan(r.ratio) else f"{r.ratio:.4g}"
            table.append(f"{r.metric:<20}{_UNITS[r.metric]:<8}{fmt(r.pi):>14}{fmt(r.pid):>14}"
                         f"{r.winner:>8}{ratio:>12}")
        return "\n".join([head, ""] + table + [""] + self.verdicts) + "\n"

