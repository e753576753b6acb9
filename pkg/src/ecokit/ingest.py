"""Event-log ingestion: population selection, weekly panels, user frequencies.

Events are ``(user, group, ts)`` triples read from CSV (header
``user,group,ts``) or NDJSON.  An optional ``kind`` column/field tags an event
as ``comment`` (the default) or ``submission``; ranking and group size both
count comments only unless configured otherwise.
"""
from __future__ import annotations

import csv
import json
import logging
import math
from collections import Counter, defaultdict
from dataclasses import dataclass, field
from datetime import datetime, timezone
from pathlib import Path
from typing import Iterable, Iterator, NamedTuple

import numpy as np
import scipy.sparse as sp

logger = logging.getLogger(__name__)

WEEK_SECONDS = 7 * 24 * 3600
WEEKDAYS = ("monday", "tuesday", "wednesday", "thursday", "friday", "saturday", "sunday")
MALFORMED_TOLERANCE = 0.01


class IngestError(ValueError):
    """Raised when an event log cannot be ingested."""


class EventRecord(NamedTuple):
    user: str
    group: str
    timestamp: float
    kind: str = "comment"


@dataclass
class CorpusConfig:
    """Population selection and week-bucketing parameters.

    ``window_start``/``window_end`` bound the corpus (``[start, end)``, epoch
    seconds); ``None`` means "take it from the data".  Weeks start at 00:00 UTC
    on ``week_anchor``.
    """

    top_n: int = 10_000
    exclusion_list: frozenset[str] = frozenset()
    window_start: float | None = None
    window_end: float | None = None
    week_anchor: str = "monday"
    rank_kinds: frozenset[str] = frozenset({"comment"})
    size_kinds: frozenset[str] = frozenset({"comment"})

    def __post_init__(self):
        if self.top_n < 1:
            raise ValueError("top_n must be >= 1")
        if self.week_anchor.lower() not in WEEKDAYS:
            raise ValueError(f"unknown week anchor {self.week_anchor!r}")
        self.week_anchor = self.week_anchor.lower()
        self.exclusion_list = frozenset(self.exclusion_list)
        self.rank_kinds = frozenset(self.rank_kinds)
        self.size_kinds = frozenset(self.size_kinds)
        if (
            self.window_start is not None
            and self.window_end is not None
            and not self.window_start < self.window_end
        ):
            raise ValueError("window_start must precede window_end")

    def in_window(self, ts: float) -> bool:
        if self.window_start is not None and ts < self.window_start:
            return False
        if self.window_end is not None and ts >= self.window_end:
            return False
        return True


@dataclass
class GroupPanel:
    """Weekly ``log(1 + distinct users)`` per group.

    ``sizes`` has one row per group and one column per week; week 0 is the
    week containing the window start.  ``creation_week[g]`` is the first week
    with a nonzero size.
    """

    groups: list[str]
    sizes: np.ndarray
    creation_week: np.ndarray
    week0: float = 0.0

    @property
    def n_weeks(self) -> int:
        return self.sizes.shape[1]

    @property
    def weeks(self) -> np.ndarray:
        return np.arange(self.n_weeks)

    def index(self, group: str) -> int:
        return self.groups.index(group)

    def subset(self, groups: Iterable[str]) -> GroupPanel:
        idx = [self.groups.index(g) for g in groups]
        return GroupPanel(
            [self.groups[i] for i in idx],
            self.sizes[idx].copy(),
            self.creation_week[idx].copy(),
            self.week0,
        )

    def to_csv(self, path) -> None:
        with open(path, "w", newline="") as fh:
            w = csv.writer(fh, lineterminator="\n")
            w.writerow(["group", "creation_week"] + [f"w{t}" for t in range(self.n_weeks)])
            for g, c, row in zip(self.groups, self.creation_week, self.sizes):
                w.writerow([g, int(c)] + [repr(float(v)) for v in row])

    @classmethod
    def from_csv(cls, path) -> GroupPanel:
        groups, created, rows = [], [], []
        with open(path, newline="") as fh:
            reader = csv.reader(fh)
            next(reader)
            for rec in reader:
                groups.append(rec[0])
                created.append(int(rec[1]))
                rows.append([float(v) for v in rec[2:]])
        return cls(groups, np.array(rows, dtype=float).reshape(len(groups), -1),
                   np.array(created, dtype=int))


@dataclass
class UserFrequencyMatrix:
    """Sparse users x groups comment counts ``n[u, j]``."""

    users: list[str]
    groups: list[str]
    counts: sp.csr_matrix = field(repr=False)

    @property
    def total(self) -> int:
        return int(self.counts.sum())

    def to_coo_csv(self, path) -> None:
        coo = self.counts.tocoo()
        order = np.lexsort((coo.col, coo.row))
        with open(path, "w", newline="") as fh:
            w = csv.writer(fh, lineterminator="\n")
            w.writerow(["user", "group", "count"])
            for k in order:
                w.writerow([self.users[coo.row[k]], self.groups[coo.col[k]], int(coo.data[k])])

    @classmethod
    def from_coo_csv(cls, path, groups: list[str] | None = None) -> UserFrequencyMatrix:
        triples = []
        with open(path, newline="") as fh:
            reader = csv.reader(fh)
            next(reader)
            for u, g, c in reader:
                triples.append((u, g, int(c)))
        users = sorted({t[0] for t in triples})
        if groups is None:
            groups = sorted({t[1] for t in triples})
        uidx = {u: i for i, u in enumerate(users)}
        gidx = {g: j for j, g in enumerate(groups)}
        rows = [uidx[u] for u, _, _ in triples]
        cols = [gidx[g] for _, g, _ in triples]
        data = [c for _, _, c in triples]
        m = sp.csr_matrix((data, (rows, cols)), shape=(len(users), len(groups)), dtype=np.int64)
        return cls(users, list(groups), m)


class EventStream:
    """Iterate over an event file, tallying malformed lines.

    Iteration raises :class:`IngestError` at the end if more than 1% of the
    lines were malformed.
    """

    def __init__(self, path, format: str = "csv", tolerance: float = MALFORMED_TOLERANCE):
        self.path = Path(path)
        if format not in ("csv", "ndjson"):
            raise ValueError(f"unknown format {format!r}")
        if not self.path.is_file():
            raise IngestError(f"cannot read event file {self.path}")
        self.format = format
        self.tolerance = tolerance
        self.n_lines = 0
        self.n_malformed = 0

    def __iter__(self) -> Iterator[EventRecord]:
        self.n_lines = self.n_malformed = 0
        parse = self._csv_rows if self.format == "csv" else self._ndjson_rows
        for rec in parse():
            self.n_lines += 1
            ev = _to_record(rec)
            if ev is None:
                self.n_malformed += 1
                continue
            yield ev
        if self.n_lines and self.n_malformed / self.n_lines > self.tolerance:
            raise IngestError(
                f"{self.path}: {self.n_malformed} of {self.n_lines} lines malformed "
                f"(tolerance {self.tolerance:.0%})"
            )
        if self.n_malformed:
            logger.warning("%s: skipped %d malformed lines", self.path, self.n_malformed)

    def _csv_rows(self):
        with open(self.path, newline="") as fh:
            reader = csv.DictReader(fh)
            missing = {"user", "group", "ts"} - set(reader.fieldnames or ())
            if missing:
                raise IngestError(f"{self.path}: missing CSV columns {sorted(missing)}")
            yield from reader

    def _ndjson_rows(self):
        with open(self.path) as fh:
            for line in fh:
                if not line.strip():
                    continue
                try:
                    obj = json.loads(line)
                except json.JSONDecodeError:
                    obj = None
                yield obj if isinstance(obj, dict) else {}


def _to_record(rec) -> EventRecord | None:
    try:
        user = str(rec.get("user") or "").strip()
        group = str(rec.get("group") or "").strip()
        ts = float(rec["ts"])
    except (KeyError, TypeError, ValueError):
        return None
    if not user or not group or not math.isfinite(ts):
        return None
    kind = str(rec.get("kind") or "comment").strip().lower()
    return EventRecord(user, group, ts, kind)


def load_events(path, format: str = "csv") -> EventStream:
    """Open an event log as a re-iterable stream of :class:`EventRecord`."""
    return EventStream(path, format)


def week_floor(ts: float, anchor: str = "monday") -> float:
    """Start (epoch seconds) of the UTC week containing ``ts``."""
    day = datetime.fromtimestamp(ts, tz=timezone.utc)
    midnight = day.replace(hour=0, minute=0, second=0, microsecond=0).timestamp()
    back = (day.weekday() - WEEKDAYS.index(anchor)) % 7
    return midnight - back * 86400


def select_population(events: Iterable[EventRecord], config: CorpusConfig) -> list[str]:
    """Top ``config.top_n`` groups by event count, excluded groups removed first.

    Ties are broken by group id.  Returns the groups in rank order.
    """
    counts: Counter[str] = Counter()
    seen = False
    for ev in events:
        seen = True
        if ev.kind in config.rank_kinds and config.in_window(ev.timestamp):
            counts[ev.group] += 1
    if not seen:
        raise IngestError("no events")
    ranked = sorted(
        (g for g in counts if g not in config.exclusion_list),
        key=lambda g: (-counts[g], g),
    )
    if len(ranked) < config.top_n:
        logger.warning("only %d groups available, wanted top %d", len(ranked), config.top_n)
    return ranked[: config.top_n]


def build_panel(events: Iterable[EventRecord], groups: Iterable[str], config: CorpusConfig) -> GroupPanel:
    groups = list(groups)
    wanted = set(groups)
    members: dict[tuple[str, int], set[str]] = defaultdict(set)
    kept = []
    lo = hi = None
    for ev in events:
        if ev.group not in wanted or ev.kind not in config.size_kinds:
            continue
        if not config.in_window(ev.timestamp):
            continue
        kept.append(ev)
        lo = ev.timestamp if lo is None else min(lo, ev.timestamp)
        hi = ev.timestamp if hi is None else max(hi, ev.timestamp)
    if not kept:
        raise IngestError("no events for the selected groups inside the window")
    start = config.window_start if config.window_start is not None else lo
    end = config.window_end - 1e-6 if config.window_end is not None else hi
    week0 = week_floor(start, config.week_anchor)
    n_weeks = int((week_floor(end, config.week_anchor) - week0) // WEEK_SECONDS) + 1
    for ev in kept:
        t = int((week_floor(ev.timestamp, config.week_anchor) - week0) // WEEK_SECONDS)
        members[ev.group, t].add(ev.user)

    gidx = {g: i for i, g in enumerate(groups)}
    distinct = np.zeros((len(groups), n_weeks))
    for (g, t), users in members.items():
        distinct[gidx[g], t] = len(users)
    creation = np.full(len(groups), -1, dtype=int)
    for i in range(len(groups)):
        nz = np.flatnonzero(distinct[i])
        if nz.size == 0:
            raise IngestError(f"group {groups[i]!r} has no events in the window")
        creation[i] = nz[0]
    return GroupPanel(groups, np.log1p(distinct), creation, week0)


def build_user_frequency(
    events: Iterable[EventRecord], groups: Iterable[str], config: CorpusConfig | None = None
) -> UserFrequencyMatrix:
    """Count events of each user in each retained group (users sorted by id)."""
    groups = list(groups)
    if not groups:
        raise ValueError("groups must be nonempty")
    config = config or CorpusConfig()
    gidx = {g: j for j, g in enumerate(groups)}
    counts: Counter[tuple[str, int]] = Counter()
    for ev in events:
        j = gidx.get(ev.group)
        if j is None or ev.kind not in config.size_kinds or not config.in_window(ev.timestamp):
            continue
        counts[ev.user, j] += 1
    users = sorted({u for u, _ in counts})
    uidx = {u: i for i, u in enumerate(users)}
    rows = np.fromiter((uidx[u] for u, _ in counts), dtype=np.int64, count=len(counts))
    cols = np.fromiter((j for _, j in counts), dtype=np.int64, count=len(counts))
    data = np.fromiter(counts.values(), dtype=np.int64, count=len(counts))
    m = sp.csr_matrix((data, (rows, cols)), shape=(len(users), len(groups)), dtype=np.int64)
    return UserFrequencyMatrix(users, groups, m)


def ingest(path, format: str, config: CorpusConfig) -> tuple[GroupPanel, UserFrequencyMatrix, dict]:
    """Run the full ingestion: select groups, build the panel and frequency matrix."""
    events = list(load_events(path, format))
    groups = select_population(events, config)
    panel = build_panel(events, groups, config)
    ufm = build_user_frequency(events, groups, config)
    totals = Counter(ev.kind for ev in events)
    stats = {
        "n_events": len(events),
        "n_groups_observed": len({ev.group for ev in events}),
        "n_groups_retained": len(groups),
        "n_users": len(ufm.users),
        "n_weeks": panel.n_weeks,
        "retained_events": ufm.total,
        "events_by_kind": dict(sorted(totals.items())),
    }
    return panel, ufm, stats
