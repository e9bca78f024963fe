"""Tables and figures from the evaluation results."""
import csv
import io

import numpy as np

from ..exceptions import RomkitError
from .online import load_predictions, load_reports

REPORT_COLUMNS = (
    "method",
    "train_relative_error",
    "test_relative_error",
    "speedup",
    "test_max_relative_error",
    "fom_seconds",
    "rom_seconds",
    "regression_train_error",
    "n_rb",
)
# timing-free columns; this file is reproducible bit for bit
ERROR_COLUMNS = ("method", "train_relative_error", "test_relative_error", "test_max_relative_error")


def _fmt(value, digits=12):
    if value is None:
        return "n/a"
    if isinstance(value, str):
        return value
    if isinstance(value, (int, np.integer)):
        return str(int(value))
    return f"{float(value):.{digits}e}"


def _csv(rows, columns):
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(columns)
    for r in rows:
        w.writerow([_fmt(getattr(r, c)) for c in columns])
    return buf.getvalue()


def markdown_table(reports):
    if not reports:
        raise RomkitError("no test rows to report")
    lines = ["| method | train err | test err | speedup |", "|---|---|---|---|"]
    for r in reports:
        speed = "n/a" if r.speedup is None else f"{r.speedup:.1f}x"
        lines.append(f"| {r.method} | {r.train_relative_error:.3e} | {r.test_relative_error:.3e} | {speed} |")
    return "\n".join(lines) + "\n"


def run_report(ws, force=False):
    ws.require("evaluate")
    if ws.is_current("report") and not force:
        return False
    with ws.stage("report"):
        reports = load_reports(ws)
        table = markdown_table(reports)
        ws.path("report.csv").write_text(_csv(reports, REPORT_COLUMNS))
        ws.path("errors.csv").write_text(_csv(reports, ERROR_COLUMNS))
        ws.path("report.md").write_text(table)
        curves = [r for r in reports if r.error_vs_nrb]
        if curves:
            buf = io.StringIO()
            w = csv.writer(buf, lineterminator="\n")
            w.writerow(("n_rb", "mean_test_relative_error", "mean_test_energy_error"))
            for n, e, en in curves[0].error_vs_nrb:
                w.writerow((n, _fmt(e), _fmt(en)))
            ws.path("error_vs_nrb.csv").write_text(buf.getvalue())
    return True


# ---------------------------------------------------------------------------
# plots


def _field_axes(ax, bench, values, title, vmin, vmax):
    geo = bench.geometry()
    ax.set_title(title, fontsize=9)
    ax.set_aspect("equal")
    if "grid_shape" in geo:
        n = int(geo["grid_shape"][0])
        u, v = values[: n * n].reshape(n, n), values[n * n :].reshape(n, n)
        im = ax.imshow(np.hypot(u, v).T, origin="lower", extent=(0, 1, 0, 1), vmin=vmin, vmax=vmax, cmap="viridis")
    elif "triangles" in geo:
        im = ax.tripcolor(*geo["points"].T, geo["triangles"], values, vmin=vmin, vmax=vmax, shading="gouraud")
    elif "points" in geo:
        im = ax.tricontourf(*geo["points"].T, values, levels=20, vmin=vmin, vmax=vmax)
    else:
        ax.set_aspect("auto")
        ax.plot(values)
        return None
    return im


def _magnitude(bench, values):
    geo = bench.geometry()
    if "grid_shape" in geo:
        n = int(geo["grid_shape"][0])
        return np.hypot(values[: n * n], values[n * n :])
    return values


def run_plot(ws, force=False):
    ws.require("evaluate")
    if ws.is_current("plot") and not force:
        return False
    with ws.stage("plot"):
        _plot(ws)
    return True


def _plot(ws):
    import matplotlib

    matplotlib.use("Agg")
    import matplotlib.pyplot as plt

    reports = load_reports(ws)
    bench = ws.bench()
    out = ws.path("plots")
    out.mkdir(exist_ok=True)
    for r in reports:
        if r.error_vs_nrb:
            n, e, en = np.array(r.error_vs_nrb).T
            fig, ax = plt.subplots(figsize=(5, 3.5))
            ax.semilogy(n, e, "o-", label="l2")
            ax.semilogy(n, en, "s--", label="energy norm")
            ax.legend()
            ax.set_xlabel("reduced basis size")
            ax.set_ylabel("mean relative test error")
            ax.grid(True, which="both", alpha=0.3)
            fig.tight_layout()
            fig.savefig(out / "error_vs_nrb.svg")
            plt.close(fig)
        _, truth, pred = load_predictions(ws, r.method)
        # first test parameter, last stored time
        u, uh = truth[0][:, -1], pred[0][:, -1]
        mag = np.concatenate([_magnitude(bench, u), _magnitude(bench, uh)])
        vmin, vmax = float(mag.min()), float(mag.max())
        fig, axes = plt.subplots(1, 2, figsize=(8, 3.8))
        im = _field_axes(axes[0], bench, u, "full order", vmin, vmax)
        _field_axes(axes[1], bench, uh, r.method, vmin, vmax)
        if im is not None:
            fig.colorbar(im, ax=axes, shrink=0.8)
        fig.savefig(out / f"{r.method.replace('+', '_')}_field.svg")
        plt.close(fig)
