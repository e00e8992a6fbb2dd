"""The labeling codebook: axes, allowed values, definitions, and validity constraints.

Constraint rules are data, not code, so the codebook document can be refined
between labeling rounds without touching the package.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from pathlib import Path
from typing import Mapping

import yaml

AXIS_TOPIC = "topic"
AXIS_MEASURE = "measure_support"
AXIS_GOVERNMENT = "government_support"
AXIS_RELEVANCE = "relevance"

# The axis/value grid is fixed for this study; definitions and constraints are
# the parts that evolve between rounds.
REQUIRED_AXES: dict[str, tuple[str, ...]] = {
    AXIS_TOPIC: (
        "masks",
        "curfew",
        "quarantine",
        "lockdown",
        "schools",
        "testing",
        "closing-horeca",
        "vaccine",
        "other-measure",
    ),
    AXIS_MEASURE: ("too-strict", "ok", "too-loose", "not-applicable"),
    AXIS_GOVERNMENT: ("supportive", "unsupportive", "not-applicable"),
    AXIS_RELEVANCE: ("relevant", "irrelevant"),
}


class CodebookError(ValueError):
    pass


@dataclass(frozen=True)
class Axis:
    name: str
    values: tuple[str, ...]
    definitions: Mapping[str, str] = field(default_factory=dict)

    def __post_init__(self):
        if not self.values:
            raise CodebookError(f"axis {self.name}: empty value set")


@dataclass(frozen=True)
class Constraint:
    """When `axis` has `value`, every axis in `require` must hold its given value.

    A required value of None means the axis must be absent.
    """

    axis: str
    value: str
    require: Mapping[str, str | None]


@dataclass(frozen=True)
class Violation:
    axis: str
    message: str

    def to_dict(self) -> dict:
        return {"axis": self.axis, "message": self.message}


@dataclass(frozen=True)
class Codebook:
    version: str
    axes: tuple[Axis, ...]
    constraints: tuple[Constraint, ...] = ()

    def __post_init__(self):
        grid = {axis.name: axis.values for axis in self.axes}
        if [(a.name, a.values) for a in self.axes] != list(REQUIRED_AXES.items()):
            raise CodebookError(
                f"codebook axes must be exactly {list(REQUIRED_AXES)} with their fixed values"
            )
        for rule in self.constraints:
            if rule.axis not in grid or rule.value not in grid[rule.axis]:
                raise CodebookError(f"constraint refers to unknown {rule.axis}={rule.value}")
            for name, value in rule.require.items():
                if name not in grid:
                    raise CodebookError(f"constraint requires unknown axis {name}")
                if value is not None and value not in grid[name]:
                    raise CodebookError(f"constraint requires unknown value {name}={value}")

    def axis(self, name: str) -> Axis:
        for axis in self.axes:
            if axis.name == name:
                return axis
        raise KeyError(name)

    def values(self, name: str) -> tuple[str, ...]:
        return self.axis(name).values

    def validate_values(self, values: Mapping[str, str | None]) -> list[Violation]:
        """Check one label assignment (axis -> value, None = absent) against the codebook."""
        violations: list[Violation] = []
        for axis in self.axes:
            value = values.get(axis.name)
            if value is not None and value not in axis.values:
                violations.append(Violation(axis.name, f"unknown value {value!r}"))
        absent_allowed: set[str] = set()
        for rule in self.constraints:
            if values.get(rule.axis) != rule.value:
                continue
            for name, required in rule.require.items():
                if required is None:
                    absent_allowed.add(name)
                actual = values.get(name)
                if actual != required:
                    what = "be absent" if required is None else f"be {required!r}"
                    violations.append(
                        Violation(
                            name,
                            f"must {what} when {rule.axis}={rule.value} (got {actual!r})",
                        )
                    )
        for axis in self.axes:
            if values.get(axis.name) is None and axis.name not in absent_allowed:
                violations.append(Violation(axis.name, "missing value"))
        return violations


def default_codebook(version: str = "1.0") -> Codebook:
    """The shipped codebook: fixed axis grid plus the irrelevance constraint."""
    definitions = {
        AXIS_TOPIC: {
            "masks": "Mask mandates or mask wearing in general.",
            "curfew": "The nightly curfew: its hours, enforcement, extension or abolition.",
            "quarantine": "Quarantine or self-isolation rules after travel or contact.",
            "lockdown": "General stay-at-home orders and non-essential closures.",
            "schools": "Opening, closing or in-school rules for schools and universities.",
            "testing": "Test availability, strategy or obligations.",
            "closing-horeca": "Closure or reopening of bars, cafes and restaurants.",
            "vaccine": "Vaccines, the vaccination campaign and priority groups.",
            "other-measure": "Any concrete measure not covered by another topic.",
        },
        AXIS_MEASURE: {
            "too-strict": "The author finds the measure too strict or wants it relaxed.",
            "ok": "The author finds the measure acceptable as it stands.",
            "too-loose": "The author finds the measure too loose or wants it tightened.",
            "not-applicable": "No opinion on strictness is expressed.",
        },
        AXIS_GOVERNMENT: {
            "supportive": "Expresses support for the government's handling overall.",
            "unsupportive": "Criticizes the government's handling overall.",
            "not-applicable": "No stance on the government is expressed.",
        },
        AXIS_RELEVANCE: {
            "relevant": "Carries labelable opinion content about a measure.",
            "irrelevant": "No labelable opinion content (news feeds, case counts, spam).",
        },
    }
    axes = tuple(
        Axis(name, values, definitions[name]) for name, values in REQUIRED_AXES.items()
    )
    constraints = (
        Constraint(
            axis=AXIS_RELEVANCE,
            value="irrelevant",
            require={
                AXIS_TOPIC: None,
                AXIS_MEASURE: "not-applicable",
                AXIS_GOVERNMENT: "not-applicable",
            },
        ),
    )
    return Codebook(version=version, axes=axes, constraints=constraints)


def load_codebook(path: str | Path) -> Codebook:
    with open(path, encoding="utf-8") as fh:
        raw = yaml.safe_load(fh)
    if not isinstance(raw, dict) or "version" not in raw:
        raise CodebookError(f"{path}: codebook document needs a version header")
    axes = tuple(
        Axis(
            name=str(a["name"]),
            values=tuple(str(v) for v in a["values"]),
            definitions={str(k): str(v) for k, v in (a.get("definitions") or {}).items()},
        )
        for a in raw.get("axes", [])
    )
    constraints = tuple(
        Constraint(
            axis=str(c["when"]["axis"]),
            value=str(c["when"]["value"]),
            require={str(k): (None if v is None else str(v)) for k, v in c["require"].items()},
        )
        for c in raw.get("constraints", [])
    )
    return Codebook(version=str(raw["version"]), axes=axes, constraints=constraints)


def save_codebook(codebook: Codebook, path: str | Path) -> None:
    doc = {
        "version": codebook.version,
        "axes": [
            {"name": a.name, "values": list(a.values), "definitions": dict(a.definitions)}
            for a in codebook.axes
        ],
        "constraints": [
            {"when": {"axis": c.axis, "value": c.value}, "require": dict(c.require)}
            for c in codebook.constraints
        ],
    }
    with open(path, "w", encoding="utf-8") as fh:
        yaml.safe_dump(doc, fh, sort_keys=False, allow_unicode=True)
