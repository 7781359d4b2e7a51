"""
Reader, validator and writer for the panel CSV contract

Header ``subject_id,group_id,time_index,ch_1,...,ch_k``; rows sorted by
(subject_id, time_index); time_index 1-based and contiguous per subject;
group_id a nonnegative integer forming 0..G-1.
"""

import logging
from dataclasses import dataclass, field
from pathlib import Path
from typing import Optional, List, Union

import numpy as np
import pandas as pd

from mxfar.core.types import Panel
from mxfar.exceptions import IngestionError

logger = logging.getLogger(__name__)

KEY_COLUMNS = ["subject_id", "group_id", "time_index"]
PANEL_FLOAT_FORMAT = "%.17g"

PathLike = Union[str, Path]


@dataclass
class PanelReport:
    """Outcome of validating a panel file"""
    path: str
    panel: Optional[Panel] = None
    violations: List[str] = field(default_factory=list)

    @property
    def ok(self) -> bool:
        return self.panel is not None and not self.violations

    def summary(self) -> str:
        if self.ok:
            return (f"{self.path}: N={self.panel.n_subjects}, k={self.panel.n_channels}, "
                    f"T={self.panel.n_time}, G={self.panel.n_groups}")
        return f"{self.path}: {len(self.violations)} violation(s)"


def _subject_sort_key(ids: List[str]):
    # numeric ids sort numerically, anything else lexicographically
    if all(s.lstrip("-").isdigit() for s in ids):
        return [int(s) for s in ids]
    return ids


def _line(row_index: int) -> int:
    """File line number of a data row (header is line 1)"""
    return int(row_index) + 2


def validate_panel(path: PathLike) -> PanelReport:
    """
    Check a panel CSV against the contract, collecting every violation.

    Args:
        path: CSV file to read

    Returns:
        PanelReport holding the Panel when the file is valid, otherwise the
        list of violations with file/line context

    Raises:
        OSError: if the file cannot be read
    """
    path = str(path)
    report = PanelReport(path=path)
    try:
        frame = pd.read_csv(path, dtype={"subject_id": str}, keep_default_na=True)
    except pd.errors.EmptyDataError:
        report.violations.append(f"{path}: file is empty")
        return report
    except pd.errors.ParserError as e:
        report.violations.append(f"{path}: malformed CSV ({e})")
        return report

    columns = list(frame.columns)
    channel_columns = columns[3:]
    expected = [f"ch_{i}" for i in range(1, len(channel_columns) + 1)]
    if columns[:3] != KEY_COLUMNS or not channel_columns or channel_columns != expected:
        report.violations.append(
            f"{path}:1: header must be {','.join(KEY_COLUMNS)},ch_1,...,ch_k; got {','.join(map(str, columns))}")
        return report
    if frame.empty:
        report.violations.append(f"{path}: no data rows")
        return report

    violations = report.violations

    if frame["subject_id"].isna().any():
        for row in np.flatnonzero(frame["subject_id"].isna().to_numpy()):
            violations.append(f"{path}:{_line(row)}: missing subject_id")
        return report

    numeric = {}
    for column in ["group_id", "time_index"]:
        parsed = pd.to_numeric(frame[column], errors="coerce")
        bad = parsed.isna() | (parsed != np.round(parsed))
        for row in np.flatnonzero(bad.to_numpy()):
            violations.append(f"{path}:{_line(row)}: {column} must be an integer, got {frame[column].iloc[row]!r}")
        numeric[column] = parsed

    for column in channel_columns:
        parsed = pd.to_numeric(frame[column], errors="coerce").to_numpy(dtype=float)
        for row in np.flatnonzero(~np.isfinite(parsed)):
            subject = frame["subject_id"].iloc[row]
            violations.append(
                f"{path}:{_line(row)}: non-finite value in {column} (subject {subject}, "
                f"time_index {frame['time_index'].iloc[row]})")
    if violations:
        return report

    frame = frame.assign(group_id=numeric["group_id"].astype(int), time_index=numeric["time_index"].astype(int))

    # subject blocks must be contiguous and ordered
    subject_column = frame["subject_id"].to_numpy()
    block_starts = np.flatnonzero(np.r_[True, subject_column[1:] != subject_column[:-1]])
    block_ids = [subject_column[i] for i in block_starts]
    seen = set()
    for start, subject in zip(block_starts, block_ids):
        if subject in seen:
            violations.append(f"{path}:{_line(start)}: rows of subject {subject} are not contiguous")
        seen.add(subject)
    ordered_ids = list(dict.fromkeys(block_ids))
    if not violations and _subject_sort_key(ordered_ids) != sorted(_subject_sort_key(ordered_ids)):
        violations.append(f"{path}: rows are not sorted by subject_id")

    lengths = {}
    for subject, rows in frame.groupby("subject_id", sort=False):
        times = rows["time_index"].to_numpy()
        first_line = _line(rows.index[0])
        if np.any(np.diff(times) <= 0):
            position = int(np.flatnonzero(np.diff(times) <= 0)[0]) + 1
            violations.append(f"{path}:{_line(rows.index[position])}: time_index not increasing for subject {subject}")
            continue
        expected_times = np.arange(1, times.max() + 1)
        missing = np.setdiff1d(expected_times, times)
        if times.min() != 1 or missing.size:
            shown = ", ".join(map(str, missing[:10])) + (" ..." if missing.size > 10 else "")
            violations.append(
                f"{path}:{first_line}: time_index of subject {subject} must run 1..T without gaps; missing {shown or 'leading indices'}")
            continue
        groups = rows["group_id"].unique()
        if groups.size != 1:
            violations.append(f"{path}:{first_line}: subject {subject} has several group_id values {sorted(groups.tolist())}")
        elif groups[0] < 0:
            violations.append(f"{path}:{first_line}: subject {subject} has negative group_id {groups[0]}")
        lengths[subject] = times.size

    if violations:
        return report

    if len(set(lengths.values())) != 1:
        detail = ", ".join(f"{s}={n}" for s, n in lengths.items())
        violations.append(f"{path}: all subjects must share one series length; got {detail}")
        return report

    group_labels = frame.groupby("subject_id", sort=False)["group_id"].first()
    present = np.unique(group_labels.to_numpy())
    if not np.array_equal(present, np.arange(present.size)):
        violations.append(f"{path}: group_id values must form 0..G-1, got {present.tolist()}")
        return report

    n_subjects = len(ordered_ids)
    n_time = next(iter(lengths.values()))
    values = frame[channel_columns].to_numpy(dtype=float).reshape(n_subjects, n_time, len(channel_columns))
    report.panel = Panel(values=values.transpose(0, 2, 1), group_of=group_labels.loc[ordered_ids].to_numpy(),
                         subject_ids=tuple(ordered_ids))
    logger.info(report.summary())
    return report


def load_exogenous(path: PathLike, panel: Panel) -> Panel:
    """
    Attach an exogenous reference series (``subject_id,time_index,value``) to a panel.

    Raises:
        IngestionError: unknown subjects, wrong lengths or non-finite values
    """
    frame = pd.read_csv(path, dtype={"subject_id": str})
    if list(frame.columns) != ["subject_id", "time_index", "value"]:
        raise IngestionError(f"{path}:1: exogenous header must be subject_id,time_index,value")
    series = np.full((panel.n_subjects, panel.n_time), np.nan)
    positions = {subject: n for n, subject in enumerate(panel.subject_ids)}
    violations = []
    for row, (subject, time_index, value) in enumerate(frame.itertuples(index=False)):
        n = positions.get(subject)
        if n is None or not 1 <= int(time_index) <= panel.n_time:
            violations.append(f"{path}:{_line(row)}: no panel cell for subject {subject}, time_index {time_index}")
            continue
        series[n, int(time_index) - 1] = value
    if np.isnan(series).any():
        n, t = np.argwhere(np.isnan(series))[0]
        violations.append(f"{path}: missing exogenous value for subject {panel.subject_ids[n]}, time_index {t + 1}")
    if violations:
        raise IngestionError(f"{path}: exogenous series rejected", violations)
    return Panel(values=panel.values, group_of=panel.group_of, subject_ids=panel.subject_ids, exogenous=series)


def load_panel(path: PathLike, exogenous_path: Optional[PathLike] = None) -> Panel:
    """
    Read a panel file, raising on any contract violation.

    Raises:
        IngestionError: carrying the full violation list
    """
    report = validate_panel(path)
    if not report.ok:
        raise IngestionError(f"{path}: panel rejected ({len(report.violations)} violation(s))", report.violations)
    panel = report.panel
    if exogenous_path is not None:
        panel = load_exogenous(exogenous_path, panel)
    return panel


def panel_to_frame(panel: Panel) -> pd.DataFrame:
    n_subjects, n_channels, n_time = panel.values.shape
    frame = pd.DataFrame(panel.values.transpose(0, 2, 1).reshape(n_subjects * n_time, n_channels),
                         columns=[f"ch_{j}" for j in range(1, n_channels + 1)])
    frame.insert(0, "time_index", np.tile(np.arange(1, n_time + 1), n_subjects))
    frame.insert(0, "group_id", np.repeat(panel.group_of, n_time))
    frame.insert(0, "subject_id", np.repeat(np.asarray(panel.subject_ids, dtype=object), n_time))
    return frame


def write_panel(panel: Panel, path: PathLike) -> None:
    """Write a panel in the CSV contract with round-trip float precision"""
    panel_to_frame(panel).to_csv(path, index=False, float_format=PANEL_FLOAT_FORMAT, lineterminator="\n")
