"""Arm-level trial data: ingestion, validation, harmonization, covariates.

Input format (UTF-8 CSV, dot decimal separator):

    study_id, agent, dose, events, n [, covariate columns...]

The placebo agent is the reserved id ``placebo`` (matched case-insensitively)
and is the only agent allowed — and required — to have dose 0.  Covariate
columns are study-level: every arm of a study must repeat the same value.

A ``var_logor`` covariate (variance of the log odds ratio of the study's
highest-dose active arm against its reference arm, 0.5 added to all four
cells when any cell is zero) is computed for every study at ingestion; it is
the small-study-effect covariate used by preset M4.

All containers are immutable after construction and safe to share across
concurrently running samplers.
"""

from __future__ import annotations

import csv
import math
import warnings
from dataclasses import dataclass, field, replace

import numpy as np

from .errors import (
    DuplicateArm,
    EventsExceedN,
    InvalidValue,
    MissingColumn,
    MissingCovariate,
    MissingEquivalence,
    NonNumericDose,
    ParseError,
)

PLACEBO = "placebo"

REQUIRED_COLUMNS = ("study_id", "agent", "dose", "events", "n")
VAR_LOGOR = "var_logor"


@dataclass(frozen=True)
class StudyArm:
    study_id: str
    agent_id: str
    dose: float
    events: int
    sample_size: int
    native_dose: float | None = None  # set when doses were harmonized

    @property
    def is_placebo(self) -> bool:
        return self.agent_id == PLACEBO


@dataclass(frozen=True)
class Study:
    study_id: str
    arms: tuple[StudyArm, ...]
    covariates: dict[str, float] = field(default_factory=dict)

    def __post_init__(self):
        if len(self.arms) < 2:
            raise InvalidValue("?", f"study {self.study_id!r} has fewer than 2 arms")

    @property
    def has_placebo(self) -> bool:
        return any(a.is_placebo for a in self.arms)


@dataclass(frozen=True)
class AgentInfo:
    agent_id: str
    name: str = ""
    class_id: str | None = None
    equiv_factor: float | None = None


@dataclass(frozen=True)
class Dataset:
    studies: tuple[Study, ...]
    agents: tuple[AgentInfo, ...] = ()
    classes: tuple[str, ...] = ()
    covariate_names: tuple[str, ...] = ()

    @property
    def active_agents(self) -> tuple[str, ...]:
        return tuple(a.agent_id for a in self.agents if a.agent_id != PLACEBO)

    def arms(self):
        for study in self.studies:
            yield from study.arms

    @property
    def n_arms(self) -> int:
        return sum(len(s.arms) for s in self.studies)


@dataclass(frozen=True)
class EquivalenceTable:
    """Multipliers converting native agent doses to the reference-agent scale."""

    factors: dict[str, float]

    def __post_init__(self):
        for agent, f in self.factors.items():
            if not (f > 0):
                raise ValueError(f"equivalence factor for {agent!r} must be positive, got {f}")
        if self.factors and not any(f == 1.0 for f in self.factors.values()):
            raise ValueError("equivalence table has no reference agent (no factor equal to 1)")

    def factor(self, agent_id: str) -> float:
        if agent_id == PLACEBO:
            return 1.0
        if agent_id not in self.factors:
            raise MissingEquivalence(agent_id)
        return self.factors[agent_id]

    @classmethod
    def from_csv(cls, path) -> "EquivalenceTable":
        factors = {}
        with open(path, newline="", encoding="utf-8") as fh:
            reader = csv.DictReader(fh)
            cols = [c.strip() for c in (reader.fieldnames or [])]
            for col in ("agent", "factor"):
                if col not in cols:
                    raise MissingColumn(col)
            for i, row in enumerate(reader, start=2):
                agent = row["agent"].strip()
                try:
                    factors[agent] = float(row["factor"])
                except (TypeError, ValueError):
                    raise InvalidValue(i, f"factor {row['factor']!r} is not numeric") from None
        return cls(factors=factors)

    def to_csv(self, path) -> None:
        with open(path, "w", encoding="utf-8") as fh:
            fh.write("agent,factor\n")
            for agent in sorted(self.factors):
                fh.write(f"{agent},{self.factors[agent]!r}\n")


def _parse_float(value, row, what):
    try:
        return float(value)
    except (TypeError, ValueError):
        raise InvalidValue(row, f"{what} {value!r} is not numeric") from None


def _parse_count(value, row, what):
    v = _parse_float(value, row, what)
    if v != int(v) or v < 0:
        raise InvalidValue(row, f"{what} {value!r} is not a non-negative integer")
    return int(v)


def parse_dataset(path) -> Dataset:
    """Read a trial CSV, enforcing all arm/study invariants.

    Arms are grouped by study_id in order of first appearance, file order
    preserved within a study.  Extra numeric columns become study covariates.
    """
    with open(path, newline="", encoding="utf-8") as fh:
        reader = csv.DictReader(fh)
        header = [c.strip() for c in (reader.fieldnames or [])]
        for col in REQUIRED_COLUMNS:
            if col not in header:
                raise MissingColumn(col)
        covariate_cols = [c for c in header if c not in REQUIRED_COLUMNS and c]
        if VAR_LOGOR in covariate_cols:
            warnings.warn(
                f"input column {VAR_LOGOR!r} is ignored; that covariate is computed from counts",
                stacklevel=2,
            )
            covariate_cols.remove(VAR_LOGOR)

        order: list[str] = []
        arms_by_study: dict[str, list[StudyArm]] = {}
        cov_by_study: dict[str, dict[str, float]] = {}
        for lineno, row in enumerate(reader, start=2):
            study_id = (row["study_id"] or "").strip()
            agent = (row["agent"] or "").strip()
            if not study_id or not agent:
                raise InvalidValue(lineno, "empty study_id or agent")
            if agent.lower() == PLACEBO:
                agent = PLACEBO
            try:
                dose = float(row["dose"])
            except (TypeError, ValueError):
                raise NonNumericDose(lineno, row["dose"]) from None
            if not math.isfinite(dose) or dose < 0:
                raise NonNumericDose(lineno, row["dose"])
            events = _parse_count(row["events"], lineno, "events")
            size = _parse_count(row["n"], lineno, "n")
            if size <= 0:
                raise InvalidValue(lineno, f"sample size must be positive, got {size}")
            if events > size:
                raise EventsExceedN(lineno, study_id, events, size)
            if (dose == 0) != (agent == PLACEBO):
                raise InvalidValue(
                    lineno,
                    f"dose 0 is reserved for placebo (agent {agent!r}, dose {dose:g})",
                )

            if study_id not in arms_by_study:
                order.append(study_id)
                arms_by_study[study_id] = []
                cov_by_study[study_id] = {}
            for (a) in arms_by_study[study_id]:
                if a.agent_id == agent and a.dose == dose:
                    raise DuplicateArm(lineno, study_id, agent, dose)
            arms_by_study[study_id].append(
                StudyArm(study_id=study_id, agent_id=agent, dose=dose, events=events, sample_size=size)
            )
            for col in covariate_cols:
                raw = (row.get(col) or "").strip()
                if raw == "":
                    continue
                val = _parse_float(raw, lineno, f"covariate {col!r}")
                prev = cov_by_study[study_id].get(col)
                if prev is not None and prev != val:
                    raise InvalidValue(
                        lineno,
                        f"covariate {col!r} differs within study {study_id!r} ({prev} vs {val})",
                    )
                cov_by_study[study_id][col] = val

    if not order:
        raise ParseError(f"{path}: no data rows")
    studies = [
        Study(study_id=sid, arms=tuple(arms_by_study[sid]), covariates=cov_by_study[sid])
        for sid in order
    ]
    return assemble(studies, covariate_names=covariate_cols)


def assemble(studies, covariate_names=()) -> Dataset:
    """Build a Dataset from Study objects: attaches the computed var_logor
    covariate and the agent table.  Used by the parser and the generator so
    both construct identical objects."""
    finished = []
    for study in studies:
        cov = dict(study.covariates)
        cov[VAR_LOGOR] = _var_logor(study)
        finished.append(replace(study, covariates=cov))
    seen = sorted({arm.agent_id for s in finished for arm in s.arms})
    agents = tuple(AgentInfo(agent_id=a, name=a) for a in seen)
    return Dataset(
        studies=tuple(finished),
        agents=agents,
        covariate_names=tuple(covariate_names) + (VAR_LOGOR,),
    )


def emit_dataset(dataset: Dataset, path) -> None:
    """Write a dataset back out in the exact ingestion format.

    Floats are written with shortest round-trip repr so parse(emit(d)) == d.
    The computed var_logor covariate is not emitted (it is re-derived on parse).
    """
    cov_names = [c for c in dataset.covariate_names if c != VAR_LOGOR]
    with open(path, "w", encoding="utf-8") as fh:
        fh.write(",".join(REQUIRED_COLUMNS + tuple(cov_names)) + "\n")
        for study in dataset.studies:
            for arm in study.arms:
                cells = [
                    study.study_id,
                    arm.agent_id,
                    repr(arm.dose),
                    str(arm.events),
                    str(arm.sample_size),
                ]
                cells += [repr(study.covariates[c]) if c in study.covariates else "" for c in cov_names]
                fh.write(",".join(cells) + "\n")


def select_reference_arm(study: Study, equivalence: EquivalenceTable | None = None) -> int:
    """Index of the study's reference arm.

    Placebo when present; otherwise the minimum-dose arm (on the equivalence
    scale when a table is supplied, native dose otherwise).  Ties break to the
    smallest agent_id, then file order, so the choice is deterministic.
    """
    for i, arm in enumerate(study.arms):
        if arm.is_placebo:
            return i
    best = 0
    best_key = None
    for i, arm in enumerate(study.arms):
        dose = arm.dose * (equivalence.factor(arm.agent_id) if equivalence else 1.0)
        key = (dose, arm.agent_id, i)
        if best_key is None or key < best_key:
            best, best_key = i, key
    return best


def harmonize_doses(dataset: Dataset, table: EquivalenceTable) -> Dataset:
    """Rescale every active arm dose by its agent's equivalence factor.

    Placebo doses stay 0; events, sample sizes and study structure are
    untouched; original doses are retained on each arm for reporting.
    """
    studies = []
    for study in dataset.studies:
        arms = []
        for arm in study.arms:
            if arm.is_placebo:
                arms.append(replace(arm, native_dose=arm.dose))
            else:
                arms.append(
                    replace(arm, dose=arm.dose * table.factor(arm.agent_id), native_dose=arm.dose)
                )
        studies.append(replace(study, arms=tuple(arms)))
    agents = tuple(
        replace(a, equiv_factor=table.factors.get(a.agent_id, 1.0 if a.agent_id == PLACEBO else None))
        for a in dataset.agents
    )
    return replace(dataset, studies=tuple(studies), agents=agents)


def center_covariate(dataset: Dataset, name: str, center: float = 0.0) -> np.ndarray:
    """Per-study covariate values minus ``center`` (no imputation)."""
    values = []
    for study in dataset.studies:
        if name not in study.covariates:
            raise MissingCovariate(study.study_id, name)
        values.append(study.covariates[name] - center)
    return np.asarray(values, dtype=float)


def _var_logor(study: Study) -> float:
    """Variance of the log odds ratio: highest-dose active arm vs reference arm."""
    ref_idx = select_reference_arm(study)
    ref = study.arms[ref_idx]
    candidates = [(a, i) for i, a in enumerate(study.arms) if i != ref_idx]
    active, _ = max(candidates, key=lambda pair: (pair[0].dose, pair[0].sample_size, -pair[1]))
    cells = [
        float(active.events),
        float(active.sample_size - active.events),
        float(ref.events),
        float(ref.sample_size - ref.events),
    ]
    if any(c == 0 for c in cells):
        cells = [c + 0.5 for c in cells]
    return sum(1.0 / c for c in cells)


@dataclass(frozen=True)
class NetworkReport:
    components: tuple[tuple[str, ...], ...]  # agent ids, placebo included
    dose_counts: dict[str, int]  # distinct non-zero doses per active agent
    flagged_agents: tuple[str, ...]  # agents with < 2 distinct non-zero doses

    @property
    def connected(self) -> bool:
        return len(self.components) <= 1

    def lines(self):
        yield f"components: {len(self.components)}"
        for comp in self.components:
            yield "  - " + ", ".join(comp)
        yield "distinct non-zero doses per agent:"
        for agent in sorted(self.dose_counts):
            flag = "  [flagged: <2 distinct doses]" if agent in self.flagged_agents else ""
            yield f"  {agent}: {self.dose_counts[agent]}{flag}"
        if not self.flagged_agents:
            yield "no flagged agents"


def validate_network(dataset: Dataset) -> NetworkReport:
    """Connectivity components and per-agent dose support (report only)."""
    parent: dict[str, str] = {}

    def find(x):
        while parent[x] != x:
            parent[x] = parent[parent[x]]
            x = parent[x]
        return x

    def union(a, b):
        parent.setdefault(a, a)
        parent.setdefault(b, b)
        ra, rb = find(a), find(b)
        if ra != rb:
            parent[max(ra, rb)] = min(ra, rb)

    for arm in dataset.arms():
        parent.setdefault(arm.agent_id, arm.agent_id)
    for study in dataset.studies:
        ids = [a.agent_id for a in study.arms]
        for other in ids[1:]:
            union(ids[0], other)

    groups: dict[str, list[str]] = {}
    for node in parent:
        groups.setdefault(find(node), []).append(node)
    components = tuple(tuple(sorted(g)) for g in sorted(groups.values()))

    doses: dict[str, set] = {}
    for arm in dataset.arms():
        if not arm.is_placebo:
            doses.setdefault(arm.agent_id, set()).add(arm.dose)
    counts = {agent: len(ds) for agent, ds in doses.items()}
    flagged = tuple(sorted(a for a, c in counts.items() if c < 2))
    return NetworkReport(components=components, dose_counts=counts, flagged_agents=flagged)
