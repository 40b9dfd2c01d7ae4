"""Patient data model, temporal eligibility filtering, stratified splitting,
and synthetic corpus generation with controllable leakage injection.

Outcome definition: next-day discharge (los_days == 1 -> label 1). Temporal
eligibility keeps day-of-surgery notes for next-day discharges and, for
longer stays of D days, only notes authored on or before day D-2.

All randomness flows through numpy PCG64 generators keyed by explicit
SeedSequence streams, so repeat runs are byte-identical and per-patient
generation is order-independent: patient i uses SeedSequence([seed, 1, i]).
"""

from __future__ import annotations

import json
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from .errors import ConfigError, DataError, InvalidRecordError
from .io_utils import read_json, write_json
from .textprep import ProxyLexicon, data_path, default_proxy_lexicon

SPLIT_PRNG = "pcg64"


@dataclass(frozen=True)
class Note:
    day_offset: int
    text: str

    def __post_init__(self):
        if self.day_offset < 0:
            raise InvalidRecordError(f"note day_offset must be >= 0, got {self.day_offset}")


@dataclass
class PatientRecord:
    patient_id: str
    los_days: int
    notes: list[Note]
    structured: dict[str, float | None]

    def validate(self) -> None:
        if self.los_days < 1:
            raise InvalidRecordError(
                f"patient {self.patient_id}: los_days must be >= 1, got {self.los_days}"
            )
        for note in self.notes:
            if note.day_offset > self.los_days:
                raise InvalidRecordError(
                    f"patient {self.patient_id}: note day {note.day_offset} exceeds los {self.los_days}"
                )


def derive_outcome(record: PatientRecord) -> int:
    """1 iff the patient left on the calendar day after surgery."""
    if record.los_days < 1:
        raise InvalidRecordError(
            f"patient {record.patient_id}: los_days must be >= 1, got {record.los_days}"
        )
    return 1 if record.los_days == 1 else 0


def eligible_notes(record: PatientRecord) -> list[Note]:
    """Temporally valid notes: day 0 only when D == 1, else day <= D - 2."""
    outcome = derive_outcome(record)  # enforces the precondition
    if outcome == 1:
        return [n for n in record.notes if n.day_offset == 0]
    horizon = record.los_days - 2
    return [n for n in record.notes if n.day_offset <= horizon]


@dataclass(frozen=True)
class CohortSplit:
    train_ids: tuple[str, ...]
    val_ids: tuple[str, ...]
    test_ids: tuple[str, ...]
    fractions: tuple[float, float, float]
    seed: int

    def to_dict(self) -> dict:
        return {
            "train_ids": list(self.train_ids),
            "val_ids": list(self.val_ids),
            "test_ids": list(self.test_ids),
            "fractions": list(self.fractions),
            "seed": self.seed,
            "prng": SPLIT_PRNG,
        }

    @classmethod
    def from_dict(cls, raw: dict) -> "CohortSplit":
        return cls(
            train_ids=tuple(raw["train_ids"]),
            val_ids=tuple(raw["val_ids"]),
            test_ids=tuple(raw["test_ids"]),
            fractions=tuple(raw["fractions"]),
            seed=int(raw["seed"]),
        )

    def save(self, path: str | Path) -> None:
        write_json(path, self.to_dict())

    @classmethod
    def load(cls, path: str | Path) -> "CohortSplit":
        return cls.from_dict(read_json(path))


def largest_remainder_allocation(count: int, fractions: tuple[float, float, float]) -> tuple[int, int, int]:
    """Seat counts for (train, val, test); leftover seats go to the largest
    fractional remainders, ties broken by split order."""
    quotas = [f * count for f in fractions]
    base = [int(np.floor(q)) for q in quotas]
    leftover = count - sum(base)
    order = sorted(range(3), key=lambda i: (-(quotas[i] - base[i]), i))
    for i in range(leftover):
        base[order[i]] += 1
    return tuple(base)


def stratified_split(
    records: list[PatientRecord],
    fractions: tuple[float, float, float],
    seed: int,
) -> CohortSplit:
    """Class-stratified patient-level partition, deterministic under seed."""
    if len(fractions) != 3 or any(f < 0 for f in fractions):
        raise ConfigError(f"need three non-negative fractions, got {fractions}")
    if abs(sum(fractions) - 1.0) > 1e-9:
        raise ConfigError(f"fractions must sum to 1, got {sum(fractions)!r}")
    by_class: dict[int, list[str]] = {0: [], 1: []}
    for record in records:
        by_class[derive_outcome(record)].append(record.patient_id)
    for label, ids in sorted(by_class.items()):
        if not ids:
            raise DataError(f"class {label} has no members; stratification impossible")
    rng = np.random.Generator(np.random.PCG64(np.random.SeedSequence([seed])))
    buckets: list[list[str]] = [[], [], []]
    for label in sorted(by_class):
        ids = sorted(by_class[label])
        order = rng.permutation(len(ids))
        shuffled = [ids[i] for i in order]
        n_train, n_val, _ = largest_remainder_allocation(len(ids), tuple(fractions))
        buckets[0].extend(shuffled[:n_train])
        buckets[1].extend(shuffled[n_train : n_train + n_val])
        buckets[2].extend(shuffled[n_train + n_val :])
    return CohortSplit(
        train_ids=tuple(sorted(buckets[0])),
        val_ids=tuple(sorted(buckets[1])),
        test_ids=tuple(sorted(buckets[2])),
        fractions=tuple(fractions),
        seed=seed,
    )


@dataclass(frozen=True)
class SyntheticConfig:
    n_patients: int = 2000
    positive_rate: float = 0.22
    n_numeric: int = 16
    n_boolean: int = 8
    missing_rate: float = 0.05
    leak_rate: float = 0.8
    signal_strength: float = 1.0
    max_los: int = 8
    seed: int = 42

    def validate(self) -> None:
        if self.n_patients < 10:
            raise ConfigError("n_patients must be >= 10")
        if not 0.0 < self.positive_rate < 1.0:
            raise ConfigError("positive_rate must lie in (0, 1)")
        if not 0.0 <= self.missing_rate < 1.0:
            raise ConfigError("missing_rate must lie in [0, 1)")
        if not 0.0 <= self.leak_rate <= 1.0:
            raise ConfigError("leak_rate must lie in [0, 1]")
        if self.signal_strength < 0:
            raise ConfigError("signal_strength must be >= 0")
        if self.max_los < 2:
            raise ConfigError("max_los must be >= 2")
        if self.n_numeric < 0 or self.n_boolean < 0:
            raise ConfigError("column counts must be >= 0")

    def to_dict(self) -> dict:
        return {
            "n_patients": self.n_patients,
            "positive_rate": self.positive_rate,
            "n_numeric": self.n_numeric,
            "n_boolean": self.n_boolean,
            "missing_rate": self.missing_rate,
            "leak_rate": self.leak_rate,
            "signal_strength": self.signal_strength,
            "max_los": self.max_los,
            "seed": self.seed,
        }


@dataclass(frozen=True)
class NoteTemplates:
    day_intro: tuple[str, ...]
    recovery: tuple[str, ...]
    pain: tuple[str, ...]
    neutral: tuple[str, ...]

    @classmethod
    def from_file(cls, path: str | Path) -> "NoteTemplates":
        raw = read_json(path)
        return cls(
            day_intro=tuple(raw["day_intro"]),
            recovery=tuple(raw["recovery"]),
            pain=tuple(raw["pain"]),
            neutral=tuple(raw["neutral"]),
        )


def default_note_templates() -> NoteTemplates:
    return NoteTemplates.from_file(data_path("note_templates.json"))


def _column_schema(config: SyntheticConfig):
    """Per-column class-conditional parameters, fixed by (seed, stream 0)."""
    rng = np.random.Generator(np.random.PCG64(np.random.SeedSequence([config.seed, 0])))
    numeric = []
    for j in range(config.n_numeric):
        mu = rng.uniform(-1.0, 1.0)
        effect = rng.uniform(0.2, 0.8) * (1 if rng.random() < 0.5 else -1)
        numeric.append((f"num_{j:02d}", mu, effect))
    boolean = []
    for j in range(config.n_boolean):
        p_base = rng.uniform(0.3, 0.7)
        delta = rng.uniform(0.05, 0.2) * (1 if rng.random() < 0.5 else -1)
        boolean.append((f"flag_{j:02d}", p_base, delta))
    return numeric, boolean


def _pool_probs(positive: bool, signal_strength: float) -> np.ndarray:
    shift = 0.15 * min(signal_strength, 2.0)
    if positive:
        probs = np.array([0.3 + shift, max(0.3 - shift, 0.0), 0.4])
    else:
        probs = np.array([max(0.3 - shift, 0.0), 0.3 + shift, 0.4])
    return probs / probs.sum()


def _compose_note(
    rng: np.random.Generator,
    day: int,
    positive: bool,
    templates: NoteTemplates,
    signal_strength: float,
) -> str:
    pools = (templates.recovery, templates.pain, templates.neutral)
    probs = _pool_probs(positive, signal_strength)
    intro = templates.day_intro[rng.integers(len(templates.day_intro))].format(day=day)
    sentences = [intro]
    for _ in range(int(rng.integers(2, 5))):
        pool = pools[rng.choice(3, p=probs)]
        sentences.append(pool[rng.integers(len(pool))])
    return " ".join(sentences)


def generate_corpus(
    config: SyntheticConfig,
    templates: NoteTemplates | None = None,
    lexicon: ProxyLexicon | None = None,
) -> list[PatientRecord]:
    """Deterministic synthetic cohort with leakage injection.

    Positives (los 1) expose a single eligible note on day 0; negatives draw
    los uniformly from [2, max_los]. Notes run through the eligibility
    horizon plus one extra day, so the temporal filter always has something
    to drop. Leaked patients get proxy phrases appended to one eligible
    note: positives with probability leak_rate, negatives at one tenth of
    that background rate.
    """
    config.validate()
    if templates is None:
        templates = default_note_templates()
    if lexicon is None:
        lexicon = default_proxy_lexicon()
    if not lexicon.inject_phrases:
        raise ConfigError("proxy lexicon has no inject_phrases to draw from")
    numeric_schema, boolean_schema = _column_schema(config)
    records = []
    for i in range(config.n_patients):
        rng = np.random.Generator(np.random.PCG64(np.random.SeedSequence([config.seed, 1, i])))
        positive = rng.random() < config.positive_rate
        los = 1 if positive else int(rng.integers(2, config.max_los + 1))
        sign = 1.0 if positive else -1.0

        structured: dict[str, float | None] = {}
        for name, mu, effect in numeric_schema:
            value = rng.normal(mu + sign * effect * config.signal_strength / 2.0, 1.0)
            structured[name] = None if rng.random() < config.missing_rate else float(value)
        for name, p_base, delta in boolean_schema:
            p = float(np.clip(p_base + sign * delta * config.signal_strength / 2.0, 0.02, 0.98))
            value = 1.0 if rng.random() < p else 0.0
            structured[name] = None if rng.random() < config.missing_rate else value

        horizon = 0 if los == 1 else los - 2
        last_day = min(los, horizon + 1)
        texts = [
            _compose_note(rng, day, positive, templates, config.signal_strength)
            for day in range(last_day + 1)
        ]

        background = config.leak_rate / 10.0
        leaked = rng.random() < (config.leak_rate if positive else background)
        if leaked:
            eligible_days = list(range(horizon + 1))
            target = int(eligible_days[rng.integers(len(eligible_days))])
            n_phrases = 1 + int(rng.random() < 0.5)
            picks = rng.choice(len(lexicon.inject_phrases), size=n_phrases, replace=False)
            extra = " ".join(lexicon.inject_phrases[int(p)] for p in picks)
            texts[target] = f"{texts[target]} {extra}"

        notes = [Note(day_offset=day, text=text) for day, text in enumerate(texts)]
        records.append(
            PatientRecord(
                patient_id=f"p{i:05d}",
                los_days=los,
                notes=notes,
                structured=structured,
            )
        )
    return records


def record_to_dict(record: PatientRecord) -> dict:
    return {
        "patient_id": record.patient_id,
        "los_days": record.los_days,
        "notes": [{"day_offset": n.day_offset, "text": n.text} for n in record.notes],
        "structured": record.structured,
    }


def record_from_dict(raw: dict) -> PatientRecord:
    try:
        structured = {}
        for name, value in raw.get("structured", {}).items():
            if value is None:
                structured[name] = None
            elif isinstance(value, bool):
                structured[name] = float(value)
            else:
                structured[name] = float(value)
        record = PatientRecord(
            patient_id=str(raw["patient_id"]),
            los_days=int(raw["los_days"]),
            notes=[Note(int(n["day_offset"]), str(n["text"])) for n in raw["notes"]],
            structured=structured,
        )
    except (KeyError, TypeError, ValueError) as exc:
        raise DataError(f"malformed corpus record: {exc}") from exc
    record.validate()
    return record


def save_corpus(records: list[PatientRecord], path: str | Path) -> None:
    """One JSON record per line; outcomes are derived, never stored."""
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    with open(path, "w", encoding="utf-8") as fh:
        for record in records:
            fh.write(json.dumps(record_to_dict(record), sort_keys=True) + "\n")


def load_corpus(path: str | Path) -> list[PatientRecord]:
    records = []
    seen: set[str] = set()
    with open(path, "r", encoding="utf-8") as fh:
        for line_no, line in enumerate(fh, start=1):
            line = line.strip()
            if not line:
                continue
            try:
                raw = json.loads(line)
            except json.JSONDecodeError as exc:
                raise DataError(f"{path}:{line_no}: invalid JSON: {exc}") from exc
            record = record_from_dict(raw)
            if record.patient_id in seen:
                raise DataError(f"{path}:{line_no}: duplicate patient_id {record.patient_id}")
            seen.add(record.patient_id)
            records.append(record)
    return records
