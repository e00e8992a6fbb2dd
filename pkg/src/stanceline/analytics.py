"""Daily opinion timelines from a classified corpus, plus export to data file and figure.

Days are bucketed in Europe/Brussels local time. All aggregates are pure
functions of the classified records, so recomputation is bit-identical.
"""

from __future__ import annotations

import csv
import math
from dataclasses import dataclass
from datetime import date, datetime
from pathlib import Path
from typing import Mapping, Sequence
from zoneinfo import ZoneInfo

from .codebook import AXIS_MEASURE, AXIS_TOPIC, Codebook, default_codebook
from .corpus import parse_timestamp
from .sieve import ClassifiedPost

DEFAULT_TZ = "Europe/Brussels"
FIGURE_FORMATS = ("png", "svg", "pdf")


class AnalyticsError(ValueError):
    pass


@dataclass(frozen=True)
class TimeSeries:
    name: str
    points: tuple[tuple[date, float], ...]
    unit: str = ""

    def __post_init__(self):
        days = [day for day, _ in self.points]
        if any(b <= a for a, b in zip(days, days[1:])):
            raise AnalyticsError(f"series {self.name}: days must be strictly increasing")
        if any(not math.isfinite(value) for _, value in self.points):
            raise AnalyticsError(f"series {self.name}: values must be finite")

    @property
    def days(self) -> tuple[date, ...]:
        return tuple(day for day, _ in self.points)

    @property
    def values(self) -> tuple[float, ...]:
        return tuple(value for _, value in self.points)

    def to_payload(self) -> dict:
        return {
            "name": self.name,
            "unit": self.unit,
            "points": [[day.isoformat(), value] for day, value in self.points],
        }


@dataclass(frozen=True)
class CaseCounts:
    points: tuple[tuple[date, int], ...]

    def __post_init__(self):
        days = [day for day, _ in self.points]
        if any(b <= a for a, b in zip(days, days[1:])):
            raise AnalyticsError("case counts: days must be strictly increasing")
        if any(count < 0 for _, count in self.points):
            raise AnalyticsError("case counts must be nonnegative")

    def as_series(self) -> TimeSeries:
        return TimeSeries(
            name="cases",
            points=tuple((day, float(count)) for day, count in self.points),
            unit="cases/day",
        )


@dataclass(frozen=True)
class EventMarker:
    day: date
    caption: str

    def __post_init__(self):
        if not self.caption:
            raise AnalyticsError("marker caption must be nonempty")


def bucket_day(created_at: str | datetime, tz: str = DEFAULT_TZ) -> date:
    """Local calendar day of a UTC instant."""
    instant = parse_timestamp(created_at) if isinstance(created_at, str) else created_at
    return instant.astimezone(ZoneInfo(tz)).date()


def topic_rate_series(
    classified: Sequence[ClassifiedPost],
    topic: str,
    tz: str = DEFAULT_TZ,
    codebook: Codebook | None = None,
) -> TimeSeries:
    """Per day: relevant posts on the topic divided by all relevant posts that day.

    Days without any relevant post are omitted.
    """
    if not classified:
        raise AnalyticsError("classified corpus is empty")
    codebook = codebook or default_codebook()
    if topic not in codebook.values(AXIS_TOPIC):
        raise AnalyticsError(f"unknown topic {topic!r}")
    relevant: dict[date, int] = {}
    matching: dict[date, int] = {}
    for record in classified:
        if not record.relevant:
            continue
        day = bucket_day(record.created_at, tz)
        relevant[day] = relevant.get(day, 0) + 1
        if record.topic == topic:
            matching[day] = matching.get(day, 0) + 1
    points = tuple(
        (day, matching.get(day, 0) / relevant[day]) for day in sorted(relevant)
    )
    return TimeSeries(name=f"topic_rate:{topic}", points=points, unit="share of relevant posts")


def stance_fraction_series(
    classified: Sequence[ClassifiedPost],
    topic: str,
    tz: str = DEFAULT_TZ,
    codebook: Codebook | None = None,
    drop_no_opinion: bool = False,
) -> dict[str, TimeSeries]:
    """Per day, the fraction of the topic's posts carrying each measure-support value.

    The emitted fractions sum to 1 on every day. By default not-applicable is
    its own band; with drop_no_opinion the fractions cover only posts that
    express an opinion, and days with none are omitted.
    """
    codebook = codebook or default_codebook()
    if topic not in codebook.values(AXIS_TOPIC):
        raise AnalyticsError(f"unknown topic {topic!r}")
    values = codebook.values(AXIS_MEASURE)
    if drop_no_opinion:
        values = tuple(v for v in values if v != "not-applicable")
    totals: dict[date, int] = {}
    counts: dict[str, dict[date, int]] = {value: {} for value in values}
    for record in classified:
        if record.topic != topic or record.measure_support not in counts:
            continue
        day = bucket_day(record.created_at, tz)
        totals[day] = totals.get(day, 0) + 1
        per_value = counts[record.measure_support]
        per_value[day] = per_value.get(day, 0) + 1
    if not totals:
        raise AnalyticsError(f"no support labels found for topic {topic!r}")
    days = sorted(totals)
    unit = "fraction of opinionated posts" if drop_no_opinion else "fraction of topic posts"
    return {
        value: TimeSeries(
            name=f"stance:{value}",
            points=tuple((day, counts[value].get(day, 0) / totals[day]) for day in days),
            unit=unit,
        )
        for value in values
    }


def smooth(series: TimeSeries, window: int) -> TimeSeries:
    """Centered rolling mean over the present days; edges average what is available."""
    if window < 1 or window % 2 == 0:
        raise AnalyticsError(f"smoothing window must be an odd positive integer, got {window}")
    if window == 1:
        return series
    half = window // 2
    values = series.values
    smoothed = []
    for i, (day, _) in enumerate(series.points):
        lo = max(0, i - half)
        hi = min(len(values), i + half + 1)
        smoothed.append((day, sum(values[lo:hi]) / (hi - lo)))
    return TimeSeries(name=series.name, points=tuple(smoothed), unit=series.unit)


def load_case_counts(path: str | Path) -> CaseCounts:
    """Read a DATE,CASES file, summing rows that share a day (regional breakdowns)."""
    path = Path(path)
    totals: dict[date, int] = {}
    with open(path, encoding="utf-8") as fh:
        reader = csv.reader(fh)
        header = next(reader, None)
        if header is None:
            return CaseCounts(points=())
        if [h.strip().upper() for h in header] != ["DATE", "CASES"]:
            raise AnalyticsError(f"{path}:1: expected header DATE,CASES, got {header}")
        for lineno, row in enumerate(reader, 2):
            if not row or (len(row) == 1 and not row[0].strip()):
                continue
            if len(row) != 2:
                raise AnalyticsError(f"{path}:{lineno}: expected 2 columns, got {len(row)}")
            try:
                day = date.fromisoformat(row[0].strip())
                count = int(row[1].strip())
            except ValueError as exc:
                raise AnalyticsError(f"{path}:{lineno}: {exc}") from None
            if count < 0:
                raise AnalyticsError(f"{path}:{lineno}: negative case count")
            totals[day] = totals.get(day, 0) + count
    return CaseCounts(points=tuple((day, totals[day]) for day in sorted(totals)))


@dataclass
class TimelinePanels:
    """The three-panel layout: cases on top, topic rate in the middle, stances below."""

    topic_rate: TimeSeries
    stance: Mapping[str, TimeSeries]
    cases: CaseCounts | None = None

    def all_series(self) -> list[TimeSeries]:
        series = []
        if self.cases is not None:
            series.append(self.cases.as_series())
        series.append(self.topic_rate)
        series.extend(self.stance[value] for value in self.stance)
        return series


def write_timeline_data(
    path: str | Path, series: Sequence[TimeSeries], markers: Sequence[EventMarker] = ()
) -> None:
    """Columnar text: one (series, unit, day, value) row per point, then a markers section.

    Values are written with repr so a re-import reproduces them exactly.
    """
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    with open(path, "w", encoding="utf-8", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(["series", "unit", "day", "value"])
        for ts in series:
            for day, value in ts.points:
                writer.writerow([ts.name, ts.unit, day.isoformat(), repr(value)])
        writer.writerow([])
        writer.writerow(["marker_day", "caption"])
        for marker in markers:
            writer.writerow([marker.day.isoformat(), marker.caption])


def read_timeline_data(path: str | Path) -> tuple[dict[str, TimeSeries], list[EventMarker]]:
    path = Path(path)
    collected: dict[str, dict] = {}
    markers: list[EventMarker] = []
    with open(path, encoding="utf-8", newline="") as fh:
        reader = csv.reader(fh)
        header = next(reader)
        if header != ["series", "unit", "day", "value"]:
            raise AnalyticsError(f"{path}: not a timeline data file")
        in_markers = False
        for row in reader:
            if not row or row == [""]:
                continue
            if row == ["marker_day", "caption"]:
                in_markers = True
                continue
            if in_markers:
                markers.append(EventMarker(day=date.fromisoformat(row[0]), caption=row[1]))
            else:
                name, unit, day, value = row
                entry = collected.setdefault(name, {"unit": unit, "points": []})
                entry["points"].append((date.fromisoformat(day), float(value)))
    series = {
        name: TimeSeries(name=name, points=tuple(entry["points"]), unit=entry["unit"])
        for name, entry in collected.items()
    }
    return series, markers


def render_figure(
    panels: TimelinePanels,
    markers: Sequence[EventMarker],
    path: str | Path,
) -> None:
    """Three stacked panels: daily cases, topic rate, stacked stance fractions."""
    import matplotlib

    matplotlib.use("Agg", force=False)
    import matplotlib.pyplot as plt

    fig, (ax_cases, ax_rate, ax_stance) = plt.subplots(
        3, 1, figsize=(10, 8), sharex=True, constrained_layout=True
    )
    if panels.cases is not None and panels.cases.points:
        cases = panels.cases.as_series()
        ax_cases.plot(cases.days, cases.values, color="tab:gray")
    ax_cases.set_ylabel("daily cases")
    ax_rate.plot(panels.topic_rate.days, panels.topic_rate.values, color="tab:blue")
    ax_rate.set_ylabel(panels.topic_rate.name)
    stance_names = list(panels.stance)
    if stance_names:
        days = panels.stance[stance_names[0]].days
        ax_stance.stackplot(
            days,
            [panels.stance[name].values for name in stance_names],
            labels=stance_names,
        )
        ax_stance.legend(loc="upper left", fontsize="small")
    ax_stance.set_ylabel("stance fraction")
    ax_stance.set_ylim(0, 1)
    for marker in markers:
        for ax in (ax_cases, ax_rate, ax_stance):
            ax.axvline(marker.day, color="black", linestyle=":", linewidth=0.8)
        ax_cases.annotate(
            marker.caption,
            xy=(marker.day, 1.0),
            xycoords=("data", "axes fraction"),
            fontsize="x-small",
            rotation=90,
            va="top",
        )
    fig.savefig(path)
    plt.close(fig)


@dataclass
class TimelineExport:
    data_path: Path
    figure_path: Path


def export_timeline(
    panels: TimelinePanels,
    markers: Sequence[EventMarker],
    fmt: str,
    out_base: str | Path,
) -> TimelineExport:
    """Write the data file and the rendered three-panel figure next to each other."""
    if fmt not in FIGURE_FORMATS:
        raise AnalyticsError(
            f"unsupported figure format {fmt!r}; supported: {', '.join(FIGURE_FORMATS)}"
        )
    series = panels.all_series()
    if not series:
        raise AnalyticsError("nothing to export")
    out_base = Path(out_base)
    data_path = out_base.with_suffix(".csv")
    figure_path = out_base.with_suffix(f".{fmt}")
    write_timeline_data(data_path, series, markers)
    render_figure(panels, markers, figure_path)
    return TimelineExport(data_path=data_path, figure_path=figure_path)


def timeline_payload(
    classified: Sequence[ClassifiedPost],
    topic: str,
    smoothing: int = 1,
    window: tuple[date | None, date | None] = (None, None),
    tz: str = DEFAULT_TZ,
    cases: CaseCounts | None = None,
    markers: Sequence[EventMarker] = (),
    codebook: Codebook | None = None,
    drop_no_opinion: bool = False,
) -> dict:
    """The shared timeline structure served over HTTP and written by the CLI."""

    def clip(series: TimeSeries) -> TimeSeries:
        start, end = window
        points = tuple(
            (day, value)
            for day, value in series.points
            if (start is None or day >= start) and (end is None or day <= end)
        )
        return TimeSeries(name=series.name, points=points, unit=series.unit)

    rate = smooth(clip(topic_rate_series(classified, topic, tz, codebook)), smoothing)
    stances = {
        value: smooth(clip(series), smoothing)
        for value, series in stance_fraction_series(
            classified, topic, tz, codebook, drop_no_opinion=drop_no_opinion
        ).items()
    }
    payload = {
        "topic": topic,
        "smoothing": smoothing,
        "timezone": tz,
        "topic_rate": rate.to_payload(),
        "stance": {value: series.to_payload() for value, series in stances.items()},
        "cases": clip(cases.as_series()).to_payload() if cases is not None else None,
        "markers": [
            {"day": marker.day.isoformat(), "caption": marker.caption} for marker in markers
        ],
    }
    return payload
