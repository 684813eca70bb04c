"""Match records: CSV parsing/serialization and a seeded synthetic generator."""

from __future__ import annotations

import csv
import datetime as dt
import io
import math
from dataclasses import dataclass, field, replace
from pathlib import Path

import numpy as np

from .errors import (
    ConfigError,
    DuplicateRecordError,
    OrderingError,
    ParseError,
)

COLUMNS = (
    "tournament_id", "year", "date", "round", "player1_id", "player2_id",
    "age1", "age2", "rank1", "rank2", "points1", "points2", "victory",
    "completed",
)
ELO_COLUMNS = ("elo1", "elo2")

GRAND_SLAMS = ("AO", "RG", "WIM", "USO")
_SLAM_START = ((1, 15), (5, 25), (6, 28), (8, 28))


@dataclass(frozen=True)
class MatchRecord:
    """One completed match, seen from player 1.

    ``victory`` is 1 when player 1 won. ``elo1``/``elo2`` are only set when
    the source file carries pre-computed ratings.
    """

    tournament_id: str
    tournament_index: int
    year: int
    date: dt.date
    round: str
    player1_id: str
    player2_id: str
    age1: float
    age2: float
    rank1: int
    rank2: int
    points1: float
    points2: float
    victory: int
    elo1: float | None = None
    elo2: float | None = None

    def swapped(self) -> MatchRecord:
        """The same match with the player order reversed."""
        return replace(
            self,
            player1_id=self.player2_id, player2_id=self.player1_id,
            age1=self.age2, age2=self.age1,
            rank1=self.rank2, rank2=self.rank1,
            points1=self.points2, points2=self.points1,
            victory=1 - self.victory,
            elo1=self.elo2, elo2=self.elo1,
        )


@dataclass(frozen=True)
class Dataset:
    """Chronologically ordered records grouped into contiguous tournaments."""

    records: tuple[MatchRecord, ...]
    tournaments: tuple[tuple[str, int], ...] = field(default=())

    def __len__(self):
        return len(self.records)

    def __iter__(self):
        return iter(self.records)

    @property
    def n_tournaments(self) -> int:
        return len(self.tournaments)

    @property
    def years(self) -> list[int]:
        return sorted({year for _, year in self.tournaments})

    @property
    def has_elo(self) -> bool:
        return bool(self.records) and all(
            r.elo1 is not None and r.elo2 is not None for r in self.records
        )

    def tournament_indices(self, year: int | None = None) -> list[int]:
        return [k for k, (_, y) in enumerate(self.tournaments)
                if year is None or y == year]

    def tournament_of_rows(self) -> np.ndarray:
        return np.array([r.tournament_index for r in self.records], dtype=np.int64)

    @classmethod
    def from_records(cls, records) -> Dataset:
        """Sort by (date, tournament_id), check blocks, assign tournament indices.

        The sort is stable, so rows of one tournament keep their input order.
        """
        ordered = sorted(records, key=lambda r: (r.date, r.tournament_id))
        tournaments: list[tuple[str, int]] = []
        seen: dict[str, int] = {}
        out = []
        for rec in ordered:
            tid = rec.tournament_id
            if tid not in seen:
                seen[tid] = len(tournaments)
                tournaments.append((tid, rec.year))
            elif seen[tid] != len(tournaments) - 1:
                raise OrderingError(
                    f"tournament {tid!r} is interleaved with "
                    f"{tournaments[-1][0]!r}; tournament blocks must be contiguous in time"
                )
            if tournaments[seen[tid]][1] != rec.year:
                raise OrderingError(f"tournament {tid!r} spans more than one year")
            out.append(replace(rec, tournament_index=seen[tid]))
        years = [y for _, y in tournaments]
        if years != sorted(years):
            raise OrderingError("tournament years are not chronological")
        return cls(tuple(out), tuple(tournaments))


def _parse_row(row, header, line):
    if len(row) != len(header):
        raise ParseError(line, f"expected {len(header)} fields, got {len(row)}")
    cells = dict(zip(header, row))
    try:
        date = dt.date.fromisoformat(cells["date"])
    except ValueError:
        raise ParseError(line, f"bad date {cells['date']!r}") from None

    def num(name, conv):
        raw = cells[name].strip()
        try:
            value = conv(raw)
        except ValueError:
            raise ParseError(line, f"bad {name} {raw!r}") from None
        if isinstance(value, float) and not math.isfinite(value):
            raise ParseError(line, f"non-finite {name}")
        return value

    def binary(name):
        value = num(name, int)
        if value not in (0, 1):
            raise ParseError(line, f"{name} must be 0 or 1, got {value}")
        return value

    rec = {
        "tournament_id": cells["tournament_id"].strip(),
        "tournament_index": -1,
        "year": num("year", int),
        "date": date,
        "round": cells["round"].strip(),
        "player1_id": cells["player1_id"].strip(),
        "player2_id": cells["player2_id"].strip(),
        "age1": num("age1", float),
        "age2": num("age2", float),
        "rank1": num("rank1", int),
        "rank2": num("rank2", int),
        "points1": num("points1", float),
        "points2": num("points2", float),
        "victory": binary("victory"),
    }
    completed = binary("completed")
    if "elo1" in cells:
        rec["elo1"] = num("elo1", float)
        rec["elo2"] = num("elo2", float)

    for key in ("tournament_id", "player1_id", "player2_id"):
        if not rec[key]:
            raise ParseError(line, f"empty {key}")
    if rec["player1_id"] == rec["player2_id"]:
        raise ParseError(line, "player1_id equals player2_id")
    for key in ("age1", "age2"):
        if rec[key] <= 0:
            raise ParseError(line, f"{key} must be positive")
    for key in ("rank1", "rank2"):
        if rec[key] < 1:
            raise ParseError(line, f"{key} must be a positive integer")
    for key in ("points1", "points2"):
        if rec[key] < 0:
            raise ParseError(line, f"{key} must be non-negative")
    return MatchRecord(**rec), completed


def parse_matches(csv_text: str) -> Dataset:
    """Parse match CSV text into a chronologically ordered :class:`Dataset`.

    Rows flagged ``completed=0`` (walkovers, retirements) are dropped.

    Raises
    ------
    ParseError
        Header mismatch or a malformed row (carries the line number).
    DuplicateRecordError
        Repeated (tournament_id, player1_id, player2_id, date).
    OrderingError
        Interleaved or non-chronological tournament blocks.
    """
    reader = csv.reader(io.StringIO(csv_text))
    try:
        header = [h.strip() for h in next(reader)]
    except StopIteration:
        raise ParseError(1, "empty input, header required") from None
    if tuple(header) not in (COLUMNS, COLUMNS + ELO_COLUMNS):
        raise ParseError(1, f"header must be {','.join(COLUMNS)}[,elo1,elo2]")

    records = []
    keys: dict[tuple, int] = {}
    for line, row in enumerate(reader, start=2):
        if not row or all(not c.strip() for c in row):
            continue
        rec, completed = _parse_row(row, header, line)
        key = (rec.tournament_id, rec.player1_id, rec.player2_id, rec.date)
        if key in keys:
            raise DuplicateRecordError(
                f"line {line} duplicates line {keys[key]}: {key[:3]} on {key[3]}"
            )
        keys[key] = line
        if completed:
            records.append(rec)
    return Dataset.from_records(records)


def serialize_matches(data: Dataset, include_elo: bool | None = None) -> str:
    """Render ``data`` in the CSV schema read by :func:`parse_matches`."""
    if include_elo is None:
        include_elo = data.has_elo
    buf = io.StringIO()
    writer = csv.writer(buf, lineterminator="\n")
    writer.writerow(COLUMNS + (ELO_COLUMNS if include_elo else ()))
    for r in data.records:
        row = [
            r.tournament_id, r.year, r.date.isoformat(), r.round,
            r.player1_id, r.player2_id, repr(float(r.age1)), repr(float(r.age2)),
            r.rank1, r.rank2, repr(float(r.points1)), repr(float(r.points2)),
            r.victory, 1,
        ]
        if include_elo:
            row += [repr(float(r.elo1)), repr(float(r.elo2))]
        writer.writerow(row)
    return buf.getvalue()


def read_matches(path) -> Dataset:
    return parse_matches(Path(path).read_text(encoding="utf-8"))


def write_matches(data: Dataset, path, include_elo: bool | None = None) -> None:
    Path(path).write_text(serialize_matches(data, include_elo), encoding="utf-8")


def _round_labels(n_matches):
    labels = []
    size = n_matches + 1
    while len(labels) < n_matches and size >= 2:
        name = {2: "F", 4: "SF", 8: "QF"}.get(size, f"R{size}")
        labels += [name] * min(size // 2, n_matches - len(labels))
        size //= 2
    labels += ["RR"] * (n_matches - len(labels))
    return labels


def _tournament_start(year, j, per_year):
    if per_year == len(GRAND_SLAMS):
        month, day = _SLAM_START[j]
        return dt.date(year, month, day)
    return dt.date(year, 1, 1) + dt.timedelta(days=14 + (365 * j) // per_year)


def _tournament_name(year, j, per_year):
    if per_year == len(GRAND_SLAMS):
        return f"{year}-{GRAND_SLAMS[j]}"
    return f"{year}-T{j + 1:02d}"


@dataclass(frozen=True)
class SyntheticTruth:
    """Latent quantities behind a simulated dataset.

    ``win_prob[i]`` is the true probability that player 1 wins record ``i``.
    """

    skill: dict[str, float]
    win_prob: np.ndarray


def generate_synthetic(n_years: int, tournaments_per_year: int = 4,
                       players: int = 128, seed: int = 0, **kwargs) -> Dataset:
    """Seeded synthetic dataset; see :func:`simulate_synthetic`."""
    return simulate_synthetic(n_years, tournaments_per_year, players, seed, **kwargs)[0]


def simulate_synthetic(
    n_years: int,
    tournaments_per_year: int = 4,
    players: int = 128,
    seed: int = 0,
    *,
    start_year: int = 2011,
    skill_coef: float = 2.0,
    age_coef: float = 0.15,
    rank_noise: float = 0.5,
    points_noise: float = 0.5,
    retire_age: float = 38.0,
) -> tuple[Dataset, SyntheticTruth]:
    """Simulate ``n_years`` x ``tournaments_per_year`` tournaments.

    Each player has a latent skill ``s ~ N(0, 1)``. Player 1 wins with
    probability ``sigmoid(skill_coef*(s1 - s2) + g(age1) - g(age2))`` where
    ``g(a) = -age_coef * max(28 - a, 0, a - 32)`` is flat on [28, 32].
    Every tournament has ``players - 1`` matches between distinct random
    pairs. Ranks and points are re-drawn per tournament as noisy monotone
    functions of skill; ages grow by 0.25 per tournament and players older
    than ``retire_age`` are replaced by newcomers.
    """
    if players < 4:
        raise ConfigError("players must be >= 4")
    if n_years < 1 or tournaments_per_year < 1:
        raise ConfigError("n_years and tournaments_per_year must be >= 1")

    rng = np.random.default_rng(seed)
    skill = rng.standard_normal(players)
    age = rng.uniform(18.0, 36.0, players)
    ids = [f"P{k:04d}" for k in range(players)]
    next_id = players
    n_matches = players - 1
    rounds = _round_labels(n_matches)

    def hill(a):
        return -age_coef * max(28.0 - a, 0.0, a - 32.0)

    records = []
    skill_of: dict[str, float] = {ids[k]: float(skill[k]) for k in range(players)}
    win_prob = []
    for year in range(start_year, start_year + n_years):
        for j in range(tournaments_per_year):
            for k in np.flatnonzero(age > retire_age):
                ids[k] = f"P{next_id:04d}"
                next_id += 1
                skill[k] = rng.standard_normal()
                age[k] = rng.uniform(18.0, 21.0)
                skill_of[ids[k]] = float(skill[k])

            form = skill + rank_noise * rng.standard_normal(players)
            rank = np.empty(players, dtype=np.int64)
            rank[np.argsort(-form, kind="stable")] = np.arange(1, players + 1)
            points = np.round(1000.0 * np.exp(skill + points_noise * rng.standard_normal(players)))

            tid = _tournament_name(year, j, tournaments_per_year)
            date = _tournament_start(year, j, tournaments_per_year)
            used = set()
            for m in range(n_matches):
                while True:
                    a, b = (int(v) for v in rng.choice(players, size=2, replace=False))
                    if frozenset((a, b)) not in used:
                        used.add(frozenset((a, b)))
                        break
                eta = skill_coef * (skill[a] - skill[b]) + hill(age[a]) - hill(age[b])
                p1 = 1.0 / (1.0 + math.exp(-eta))
                victory = int(rng.random() < p1)
                win_prob.append(p1)
                records.append(MatchRecord(
                    tournament_id=tid, tournament_index=-1, year=year, date=date,
                    round=rounds[m], player1_id=ids[a], player2_id=ids[b],
                    age1=round(float(age[a]), 2), age2=round(float(age[b]), 2),
                    rank1=int(rank[a]), rank2=int(rank[b]),
                    points1=float(points[a]), points2=float(points[b]),
                    victory=victory,
                ))
            age += 0.25
    # generation order is already chronological, so truth stays aligned
    data = Dataset.from_records(records)
    return data, SyntheticTruth(skill_of, np.asarray(win_prob))
