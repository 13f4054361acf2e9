"""CSV interchange for time series, spectra and estimate tables."""

from __future__ import annotations

import csv
import math
from pathlib import Path

import numpy as np

from .errors import ChannelError, TimeSeriesFormatError
from .inertia import InertiaEstimate
from .kmd import KoopmanSpectrum
from .series import POWER_CHANNEL, TimeSeriesSet

TIME_COLUMN = "t_s"
UNIFORM_TOL = 1e-9  # s


def fmt(x: float) -> str:
    """17 significant digits, enough to round-trip any double."""
    return format(float(x), ".17g")


def _write_rows(path: str | Path, header, rows) -> None:
    path = Path(path)
    with path.open("w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(header)
        w.writerows(rows)


def write_timeseries_csv(data: TimeSeriesSet, path: str | Path) -> None:
    header = [TIME_COLUMN, *data.labels]
    rows = ([fmt(t), *map(fmt, row)] for t, row in zip(data.times, data.values))
    _write_rows(path, header, rows)


def read_timeseries_csv(path: str | Path, require_power: bool = False) -> TimeSeriesSet:
    """Load a uniformly sampled series; the sample period is inferred from ``t_s``."""
    path = Path(path)
    with path.open(newline="") as fh:
        reader = csv.reader(fh)
        try:
            header = [h.strip() for h in next(reader)]
        except StopIteration:
            raise TimeSeriesFormatError(f"{path}: file is empty") from None
        if not header or header[0] != TIME_COLUMN:
            raise TimeSeriesFormatError(f"{path}: first column must be {TIME_COLUMN!r}")
        labels = tuple(header[1:])
        if not labels:
            raise TimeSeriesFormatError(f"{path}: no data columns")
        rows = []
        for line_no, row in enumerate(reader, start=2):
            if not row:
                continue
            if len(row) != len(header):
                raise TimeSeriesFormatError(
                    f"{path}: row {line_no} has {len(row)} cells, expected {len(header)}")
            vals = []
            for col, cell in zip(header, row):
                try:
                    v = float(cell)
                except ValueError:
                    raise TimeSeriesFormatError(
                        f"{path}: row {line_no}, column {col!r}: non-numeric cell {cell!r}"
                    ) from None
                if not math.isfinite(v):
                    raise TimeSeriesFormatError(
                        f"{path}: row {line_no}, column {col!r}: non-finite value")
                vals.append(v)
            rows.append(vals)
    if require_power and POWER_CHANNEL not in labels:
        raise ChannelError(f"{path}: missing {POWER_CHANNEL!r} column")
    if len(rows) < 2:
        raise TimeSeriesFormatError(f"{path}: at least two rows are needed to infer the period")
    table = np.array(rows)
    t = table[:, 0]
    gaps = np.diff(t)
    if np.any(gaps <= 0):
        raise TimeSeriesFormatError(f"{path}: timestamps are not strictly increasing")
    period = (t[-1] - t[0]) / (len(t) - 1)
    drift = np.abs(t - (t[0] + period * np.arange(len(t))))
    if np.any(np.abs(gaps - period) > UNIFORM_TOL) or np.any(drift > UNIFORM_TOL):
        raise TimeSeriesFormatError(f"{path}: timestamps are not uniform to {UNIFORM_TOL:g} s")
    return TimeSeriesSet(float(period), labels, table[:, 1:], float(t[0]))


def write_spectrum_csv(spec: KoopmanSpectrum, path: str | Path) -> None:
    header = ["j", "re_z", "im_z", "re_lambda", "im_lambda", "frequency_hz", "damping_per_s"]
    for lab in spec.labels:
        header += [f"re_{lab}", f"im_{lab}"]
    lam = spec.continuous
    rows = []
    for j in range(spec.order):
        row = [str(j + 1), fmt(spec.discrete[j].real), fmt(spec.discrete[j].imag),
               fmt(lam[j].real), fmt(lam[j].imag), fmt(spec.frequency_hz[j]), fmt(lam[j].real)]
        for v in spec.modes[j]:
            row += [fmt(v.real), fmt(v.imag)]
        rows.append(row)
    _write_rows(path, header, rows)


def write_estimate_csv(est: InertiaEstimate, path: str | Path, truth=None) -> None:
    """One row per generator plus a system-wide row; ``truth`` maps label to M."""
    header = ["channel", "M_hat"] + (["M_true"] if truth else [])
    rows = []
    for lab, m in zip(est.labels, est.M):
        rows.append([lab, fmt(m)] + ([fmt(truth[lab])] if truth else []))
    total = [fmt(sum(truth[lab] for lab in est.labels))] if truth else []
    rows.append(["system_wide", fmt(est.system_wide)] + total)
    _write_rows(path, header, rows)


def _inertia_column(label: str) -> str:
    return "M_" + label.split("_", 1)[1] if label.startswith("omega_") else f"M[{label}]"


def _generator_order(label: str):
    suffix = label.split("_", 1)[-1]
    return (0, int(suffix)) if label.startswith("omega_") and suffix.isdigit() else (1, 0)


def _estimate_table(path, key_name: str, keyed) -> None:
    keyed = list(keyed)
    labels: list[str] = []
    for _, e in keyed:
        labels += [lab for lab in e.labels if lab not in labels]
    labels.sort(key=_generator_order)
    header = [key_name, *map(_inertia_column, labels),
              "system_wide", "residual", "solver", "condition"]
    rows = []
    for key, e in keyed:
        got = e.as_dict()
        rows.append([key, *(fmt(got[lab]) if lab in got else "" for lab in labels),
                     fmt(e.system_wide), fmt(e.residual), e.solver, fmt(e.condition)])
    _write_rows(path, header, rows)


def write_sweep_csv(results, path: str | Path) -> None:
    """Rows of (window, estimate) as produced by ``window_sweep``."""
    _estimate_table(path, "window_s", ((fmt(w), e) for w, e in results))


def write_leave_one_out_csv(results, path: str | Path) -> None:
    """Rows of (dropped label, estimate); the dropped machine's column is blank."""
    _estimate_table(path, "dropped_id",
                    ((lab.split("_", 1)[1] if lab.startswith("omega_") else lab, e)
                     for lab, e in results))
