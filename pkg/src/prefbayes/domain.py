"""Decision problems, elicited preference records, and their file formats.

A problem is a set of alternatives scored on gain/cost criteria. Elicited
preference information is a sequence of records, each holding a pairwise
choice together with the response time of the comparison and the attention
spent on every criterion.
"""

from __future__ import annotations

import csv
import json
import math
from dataclasses import dataclass, field
from importlib import resources
from itertools import combinations

# Attention entries below this floor are treated as missing downstream:
# positive-support duration densities are degenerate at zero.
ATTENTION_FLOOR_S = 0.001

GAIN = "gain"
COST = "cost"


class DomainError(ValueError):
    """Invalid problem or dataset structure."""


@dataclass(frozen=True)
class Criterion:
    id: str
    name: str
    direction: str  # "gain" or "cost"
    scale_min: float
    scale_max: float

    def __post_init__(self):
        if self.direction not in (GAIN, COST):
            raise DomainError(f"criterion {self.id}: bad direction {self.direction!r}")
        if not self.scale_min < self.scale_max:
            raise DomainError(f"criterion {self.id}: scale_min must be < scale_max")


@dataclass(frozen=True)
class Alternative:
    id: str
    name: str


@dataclass
class Problem:
    criteria: list[Criterion]
    alternatives: list[Alternative]
    performances: list[list[float]]  # row-major by alternative

    def __post_init__(self):
        n, m = len(self.alternatives), len(self.criteria)
        if n < 2 or m < 1:
            raise DomainError("need at least 2 alternatives and 1 criterion")
        ids = [c.id for c in self.criteria]
        if len(set(ids)) != len(ids):
            raise DomainError("criterion ids not unique")
        alt_ids = [a.id for a in self.alternatives]
        if len(set(alt_ids)) != len(alt_ids):
            raise DomainError("alternative ids not unique")
        if len(self.performances) != n or any(len(r) != m for r in self.performances):
            raise DomainError("performance matrix shape mismatch")
        for row, alt in zip(self.performances, self.alternatives):
            for x, c in zip(row, self.criteria):
                if not (c.scale_min <= x <= c.scale_max):
                    raise DomainError(
                        f"performance {x} of {alt.id} outside scale of {c.id}"
                    )
        self._alt_index = {a.id: i for i, a in enumerate(self.alternatives)}
        self._crit_index = {c.id: i for i, c in enumerate(self.criteria)}

    @property
    def n_alternatives(self) -> int:
        return len(self.alternatives)

    @property
    def n_criteria(self) -> int:
        return len(self.criteria)

    def alt_index(self, alt_id: str) -> int:
        try:
            return self._alt_index[alt_id]
        except KeyError:
            raise DomainError(f"unknown alternative id {alt_id!r}") from None

    def performance(self, alt_id: str, crit_id: str) -> float:
        return self.performances[self.alt_index(alt_id)][self._crit_index[crit_id]]


@dataclass
class PreferenceRecord:
    pair: tuple[str, str]
    choice: str
    response_time_s: float
    attention_s: dict[str, float]
    recorded_at: str = ""  # RFC3339; informational only

    def to_json(self) -> dict:
        return {
            "pair": list(self.pair),
            "choice": self.choice,
            "response_time_s": self.response_time_s,
            "attention_s": dict(self.attention_s),
            "recorded_at": self.recorded_at,
        }

    @classmethod
    def from_json(cls, obj: dict) -> "PreferenceRecord":
        return cls(
            pair=(obj["pair"][0], obj["pair"][1]),
            choice=obj["choice"],
            response_time_s=float(obj["response_time_s"]),
            attention_s={k: float(v) for k, v in obj["attention_s"].items()},
            recorded_at=obj.get("recorded_at", ""),
        )


@dataclass
class Dataset:
    problem_ref: str
    records: list[PreferenceRecord] = field(default_factory=list)


def dominates(a: str, b: str, problem: Problem) -> bool:
    """True iff a is at least as good as b on every criterion and strictly
    better on at least one, respecting gain/cost directions."""
    ia, ib = problem.alt_index(a), problem.alt_index(b)
    if ia == ib:
        return False
    at_least = True
    strictly = False
    for j, c in enumerate(problem.criteria):
        xa, xb = problem.performances[ia][j], problem.performances[ib][j]
        if c.direction == COST:
            xa, xb = -xa, -xb
        if xa < xb:
            at_least = False
            break
        if xa > xb:
            strictly = True
    return at_least and strictly


def candidate_pairs(problem: Problem) -> list[tuple[str, str]]:
    """All unordered non-dominated pairs, lexicographic by alternative id."""
    ids = sorted(a.id for a in problem.alternatives)
    out = []
    for a, b in combinations(ids, 2):
        if not dominates(a, b, problem) and not dominates(b, a, problem):
            out.append((a, b))
    return out


def validate_dataset(dataset: Dataset, problem: Problem) -> list[str]:
    """Return a list of violation messages; empty iff the dataset is clean.

    Violations are data, not faults: unknown ids, malformed pairs,
    non-positive response times, and incomplete attention maps are all
    reported with the record index and the offending field.
    """
    violations = []
    alt_ids = {a.id for a in problem.alternatives}
    crit_ids = {c.id for c in problem.criteria}
    for i, rec in enumerate(dataset.records):
        a, b = rec.pair
        if a == b:
            violations.append(f"record {i}: pair: members not distinct")
        for alt in (a, b):
            if alt not in alt_ids:
                violations.append(f"record {i}: pair: unknown alternative {alt!r}")
        if rec.choice not in (a, b):
            violations.append(f"record {i}: choice: {rec.choice!r} not in pair")
        if not (rec.response_time_s > 0) or not math.isfinite(rec.response_time_s):
            violations.append(
                f"record {i}: response_time_s: must be a positive finite number"
            )
        missing = crit_ids - set(rec.attention_s)
        for cid in sorted(missing):
            violations.append(f"record {i}: attention_s: missing criterion {cid!r}")
        for cid in sorted(set(rec.attention_s) - crit_ids):
            violations.append(f"record {i}: attention_s: unknown criterion {cid!r}")
        for cid, t in rec.attention_s.items():
            if t < 0 or not math.isfinite(t):
                violations.append(
                    f"record {i}: attention_s[{cid}]: must be non-negative and finite"
                )
    return violations


# ---------------------------------------------------------------------------
# Serialization


def problem_to_json(problem: Problem) -> dict:
    return {
        "criteria": [
            {
                "id": c.id,
                "name": c.name,
                "direction": c.direction,
                "min": c.scale_min,
                "max": c.scale_max,
            }
            for c in problem.criteria
        ],
        "alternatives": [{"id": a.id, "name": a.name} for a in problem.alternatives],
        "performances": [list(row) for row in problem.performances],
    }


def problem_from_json(obj: dict) -> Problem:
    perf = [list(map(float, row)) for row in obj["performances"]]
    criteria = []
    for j, c in enumerate(obj["criteria"]):
        cmin, cmax = c.get("min"), c.get("max")
        if cmin is None or cmax is None:
            # Default scale bounds to observed per-criterion min/max.
            col = [row[j] for row in perf]
            cmin = min(col) if cmin is None else cmin
            cmax = max(col) if cmax is None else cmax
        criteria.append(
            Criterion(
                id=c["id"],
                name=c.get("name", c["id"]),
                direction=c["direction"],
                scale_min=float(cmin),
                scale_max=float(cmax),
            )
        )
    alternatives = [Alternative(a["id"], a.get("name", a["id"])) for a in obj["alternatives"]]
    return Problem(criteria=criteria, alternatives=alternatives, performances=perf)


def load_problem(path: str) -> Problem:
    with open(path, encoding="utf-8") as fh:
        return problem_from_json(json.load(fh))


def save_problem(problem: Problem, path: str) -> None:
    with open(path, "w", encoding="utf-8") as fh:
        json.dump(problem_to_json(problem), fh, indent=2)
        fh.write("\n")


def load_dataset(path: str, problem_ref: str = "") -> Dataset:
    records = []
    with open(path, encoding="utf-8") as fh:
        for line in fh:
            line = line.strip()
            if line:
                records.append(PreferenceRecord.from_json(json.loads(line)))
    return Dataset(problem_ref=problem_ref, records=records)


def save_dataset(dataset: Dataset, path: str) -> None:
    with open(path, "w", encoding="utf-8") as fh:
        for rec in dataset.records:
            fh.write(json.dumps(rec.to_json()) + "\n")


def export_dataset_csv(dataset: Dataset, problem: Problem, path: str) -> None:
    """Human-readable CSV: one row per comparison with the chosen relation,
    response time, and one attention column per criterion."""
    crit_ids = [c.id for c in problem.criteria]
    with open(path, "w", newline="", encoding="utf-8") as fh:
        writer = csv.writer(fh)
        writer.writerow(
            ["index", "pair", "preference", "response_time_s"]
            + [f"attention_{cid}_s" for cid in crit_ids]
        )
        for i, rec in enumerate(dataset.records, start=1):
            a, b = rec.pair
            loser = b if rec.choice == a else a
            writer.writerow(
                [i, f"{a} vs {b}", f"{rec.choice} > {loser}", rec.response_time_s]
                + [rec.attention_s.get(cid, "") for cid in crit_ids]
            )


def load_bundled_problem(name: str = "phone_contracts") -> Problem:
    """Load a problem shipped with the package (the ten phone contracts)."""
    text = resources.files("prefbayes.data").joinpath(f"{name}.json").read_text()
    return problem_from_json(json.loads(text))
