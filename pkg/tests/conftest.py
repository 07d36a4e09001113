"""Shared test helpers plus the acceptance-criteria summary hook."""

import datetime as dt

import numpy as np

from causalcast import Frequency, TimeSeriesDataset

# Filled by tests/test_acceptance.py; printed after the run so each
# criterion gets exactly one visible pass/fail line.
ACCEPTANCE_LINES: list[str] = []


def pytest_terminal_summary(terminalreporter):
    if not ACCEPTANCE_LINES:
        return
    terminalreporter.section("acceptance criteria")
    for line in ACCEPTANCE_LINES:
        terminalreporter.write_line(line)


def monthly_dates(n: int, start: dt.date = dt.date(2000, 1, 1)):
    out = []
    year, month = start.year, start.month
    for _ in range(n):
        out.append(dt.date(year, month, 1))
        month += 1
        if month > 12:
            month, year = 1, year + 1
    return tuple(out)


def daily_dates(n: int, start: dt.date = dt.date(2000, 1, 1)):
    return tuple(start + dt.timedelta(days=k) for k in range(n))


def make_dataset(
    values,
    target=None,
    names=None,
    frequency=Frequency.MONTHLY,
    start=dt.date(2000, 1, 1),
):
    values = np.asarray(values, dtype=np.float64)
    if values.ndim == 1:
        values = values[:, None]
    n_rows, n_cols = values.shape
    if names is None:
        names = tuple(f"v{i}" for i in range(n_cols))
    if target is None:
        target = names[0]
    dates = (
        daily_dates(n_rows, start)
        if frequency is Frequency.DAILY
        else monthly_dates(n_rows, start)
    )
    return TimeSeriesDataset(
        variable_names=tuple(names),
        timestamps=dates,
        values=values,
        frequency=frequency,
        target_name=target,
    )


def noise_dataset(seed: int, T: int = 500, N: int = 5, frequency=Frequency.MONTHLY):
    rng = np.random.default_rng(seed)
    return make_dataset(
        rng.standard_normal((T, N)),
        frequency=frequency,
        start=dt.date(1979, 1, 1),
    )
