"""Plain-text and delimited serialization of results.

Key-value blocks use ``key=value`` lines with repeatable deterministic
ordering so identical runs produce byte-identical files.  CSV exports use
the stdlib csv writer with Unix newlines.
"""

from __future__ import annotations

import csv
import io
import os
import tempfile


def _fmt(v) -> str:
    if isinstance(v, bool):
        return "true" if v else "false"
    if isinstance(v, float):
        return repr(v)
    if v is None:
        return ""
    return str(v)


def atomic_write_text(path: str, text: str) -> None:
    """Write via a sibling temp file and rename so readers never see a
    partial file."""
    directory = os.path.dirname(os.path.abspath(path))
    fd, tmp = tempfile.mkstemp(dir=directory, prefix=".tmp-")
    try:
        with os.fdopen(fd, "w", newline="\n") as fh:
            fh.write(text)
        os.replace(tmp, path)
    except BaseException:
        if os.path.exists(tmp):
            os.unlink(tmp)
        raise


def key_value_block(pairs) -> str:
    return "".join(f"{k}={_fmt(v)}\n" for k, v in pairs)


def estimate_block(result) -> str:
    pairs = [
        ("estimand", result.estimand),
        ("estimate", result.estimate),
        ("std_error", result.std_error),
        ("variance", result.variance),
        ("ci_level", result.ci_level),
        ("ci_low", result.ci_low),
        ("ci_high", result.ci_high),
        ("n_used", result.n_used),
    ]
    for s in result.fold_summaries:
        f = s["fold"]
        pairs += [
            (f"fold{f}_n_scored", s["n_scored"]),
            (f"fold{f}_val_loss", s["val_loss"]),
            (f"fold{f}_epochs", s["epochs"]),
            (f"fold{f}_net_warnings", s["net_warnings"]),
        ]
    return key_value_block(pairs)


def scores_csv(result) -> str:
    buf = io.StringIO(newline="")
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(["row", "score"])
    for i, s in enumerate(result.scores):
        w.writerow([i, repr(float(s))])
    return buf.getvalue()


def diagnostics_block(report) -> str:
    pairs = [
        ("n", report.n_treated + report.n_control),
        ("n_treated", report.n_treated),
        ("n_control", report.n_control),
        ("extreme_fraction", report.extreme_fraction),
        ("ioss", report.ioss),
    ]
    for i, note in enumerate(report.notes):
        pairs.append((f"note{i}", note))
    return key_value_block(pairs)


def propensity_histogram_csv(report) -> str:
    buf = io.StringIO(newline="")
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(["bin_low", "bin_high", "treated_count", "control_count"])
    edges = report.bin_edges
    for i in range(len(edges) - 1):
        w.writerow([repr(float(edges[i])), repr(float(edges[i + 1])),
                    int(report.treated_counts[i]), int(report.control_counts[i])])
    return buf.getvalue()


def mc_summary_block(report) -> str:
    sc, est = report.scenario, report.estimator
    pairs = [
        ("method", est.method),
        ("estimand", est.estimand),
        ("n", sc.n),
        ("d_R", sc.d_R),
        ("alpha1", sc.alpha1),
        ("alpha2", sc.alpha2),
        ("alpha3", sc.alpha3),
        ("alpha4", sc.alpha4),
        ("separability", sc.separability),
        ("seed", sc.seed),
        ("trials", len(report.trials)),
        ("failures", report.n_failures),
        ("true_value", report.true_value),
        ("bias", report.bias),
        ("rmse", report.rmse),
        ("coverage", report.coverage),
        ("avg_ci_length", report.avg_ci_length),
    ]
    return key_value_block(pairs)


def mc_trials_csv(report) -> str:
    buf = io.StringIO(newline="")
    w = csv.writer(buf, lineterminator="\n")
    # wall-clock timings are deliberately omitted so re-runs are
    # byte-identical
    w.writerow(["trial", "estimate", "std_error", "ci_low", "ci_high",
                "covered", "error"])
    for r in report.trials:
        w.writerow([
            r.trial, _fmt(r.estimate), _fmt(r.std_error), _fmt(r.ci_low),
            _fmt(r.ci_high), _fmt(r.covered), r.error or "",
        ])
    return buf.getvalue()
