"""Deterministic synthetic tables for experiments and tests.

Columns are built from exact value compositions (value, count) so aggregate
probabilities sit at known analytic values; the seed only shuffles cell
order within each column, never the composition itself.
"""

from __future__ import annotations

import csv

import numpy as np

from .ingest import NUL, Column, DataSource

Composition = list[tuple[str, int]]


def composition_column(name: str, comp: Composition, rng: np.random.Generator) -> Column:
    """Column holding exactly the given multiset of values, order shuffled."""
    cells: list[str] = []
    for value, count in comp:
        cells.extend([value] * count)
    order = rng.permutation(len(cells))
    return Column(name, tuple(cells[i] for i in order))


def uniformish(values: list[str], total: int) -> Composition:
    """Spread `total` cells over the values as evenly as integers allow."""
    base, extra = divmod(total, len(values))
    return [(v, base + (1 if i < extra else 0)) for i, v in enumerate(values)]


# Closed per-column vocabularies. Both halves of the experiment draw from
# these same values, only the mixing proportions drift between halves.
TARGET_VOCAB = [
    "Vehicle", "Residence", "Office", "Checkpoint", "Market",
    "Bridge", "Pipeline", "School", "Convoy", "Depot",
]
SECONDARY_VOCAB = TARGET_VOCAB[:4]
CITIES = [
    "Springfield", "Riverton", "Lakewood", "Fairview", "Greenville",
    "Bristol", "Clinton", "Ashland", "Dayton", "Florence",
    "Georgetown", "Hudson", "Jackson", "Kingston", "Lebanon",
    "Madison", "Newport", "Oxford", "Princeton", "Quincy",
    "Salem", "Troy", "Union", "Vernon", "Winchester",
]
STATES = [
    "AL", "AZ", "CA", "CO", "FL", "GA", "IL", "KS", "MA",
    "MI", "NC", "NJ", "NY", "OH", "OR", "TX", "VA", "WA",
]
COUNTRIES = [
    "Argentina", "Brazil", "Canada", "Denmark", "Egypt", "France",
    "Ghana", "Hungary", "India", "Japan", "Kenya", "Mexico",
]
NOTE_PHRASES = [
    "routine-check", "follow-up-visit", "site-inspection", "phone-interview",
    "document-review", "field-survey", "initial-report", "status-update",
    "final-assessment", "witness-statement", "damage-estimate", "patrol-log",
    "incident-recap", "evidence-intake", "case-transfer", "court-referral",
    "lab-analysis", "background-check", "records-request", "safety-audit",
    "press-inquiry", "community-meeting", "training-session", "equipment-check",
    "archive-pull", "permit-review", "license-renewal", "complaint-intake",
    "tip-line-note", "closure-memo",
]
REPORT_DATES = [f"2016-{month:02d}-{day:02d}" for month in (5, 6, 7, 8) for day in range(3, 13)]
INCIDENT_IDS = [f"INC-{100000 + 7 * i}" for i in range(60)]
AMOUNTS = [f"{137 * (i + 3)}.{(29 * i) % 100:02d}" for i in range(50)]
DIGITS = [str(d) for d in range(10)]

EXPERIMENT_COLUMNS = [
    "incident_id", "event_date", "city", "state", "country",
    "approved_flag", "pending_flag", "target_type", "secondary_target",
    "injuries", "amount", "notes",
]


def _half_compositions(half: str) -> dict[str, Composition]:
    """Exact 200-cell compositions for one half ("march" or "april").

    Stable columns reuse the same composition in both halves. The drifting
    columns move the flag ratios and the empty-cell shares; in particular
    secondary_target collapses to 92% empty in April, which rewards
    aggregation methods that punish impossible cells over ones that average
    them away.
    """
    is_march = half == "march"
    comps: dict[str, Composition] = {
        "incident_id": uniformish(INCIDENT_IDS, 200),
        "event_date": uniformish(REPORT_DATES, 200),
        "city": uniformish(CITIES, 200),
        "state": uniformish(STATES, 200),
        "country": uniformish(COUNTRIES, 200),
        "amount": uniformish(AMOUNTS, 200),
        "notes": uniformish(NOTE_PHRASES, 200),
        "target_type": [(NUL, 90)] + [(v, 11) for v in TARGET_VOCAB],
    }
    if is_march:
        comps["approved_flag"] = [("Yes", 160), ("No", 40)]
        comps["pending_flag"] = [("Yes", 40), ("No", 160)]
        comps["secondary_target"] = [(NUL, 100)] + [(v, 25) for v in SECONDARY_VOCAB]
        comps["injuries"] = [(NUL, 140)] + [(d, 6) for d in DIGITS]
    else:
        comps["approved_flag"] = [("Yes", 150), ("No", 50)]
        comps["pending_flag"] = [("Yes", 56), ("No", 144)]
        comps["secondary_target"] = [(NUL, 184)] + [(v, 4) for v in SECONDARY_VOCAB]
        comps["injuries"] = [(NUL, 150)] + [(d, 5) for d in DIGITS]
    return comps


def experiment_half(half: str, seed: int = 7) -> DataSource:
    """One 12-column, 200-row half of the synthetic incident table."""
    if half not in ("march", "april"):
        raise ValueError(f"half must be 'march' or 'april', not {half!r}")
    rng = np.random.default_rng(seed if half == "march" else seed + 1)
    comps = _half_compositions(half)
    columns = tuple(
        composition_column(name, comps[name], rng) for name in EXPERIMENT_COLUMNS
    )
    return DataSource(half, columns)


def experiment_truth() -> list[tuple[str, str]]:
    """Identity correspondence for the synthetic experiment columns."""
    return [(name, name) for name in EXPERIMENT_COLUMNS]


def assumption1_source(name: str = "a1", seed: int = 11) -> DataSource:
    """8 columns x 200 single-token cells with controlled cross-column overlap.

    Column i holds 80 cells of its own unique token, 60 of a token shared
    with column i+1, 40 of the token shared with column i-1, and 20 empties,
    so the per-value class fractions are known small rationals.
    """
    rng = np.random.default_rng(seed)
    n_cols = 8
    columns = []
    for i in range(n_cols):
        comp: Composition = [
            (f"uniq{i}", 80),
            (f"pair{i}", 60),
            (f"pair{(i - 1) % n_cols}", 40),
            (NUL, 20),
        ]
        columns.append(composition_column(f"col{i}", comp, rng))
    return DataSource(name, tuple(columns))


def sym_demo_source(name: str = "sym6", seed: int = 23) -> DataSource:
    """6 columns x 40 cells with partial vocabulary overlap between columns."""
    rng = np.random.default_rng(seed)
    colors = ["red", "green", "blue", "amber", "violet", "teal", "gray", "pink"]
    animals = ["owl", "fox", "lynx", "hare", "crow", "deer", "mole", "wolf"]
    comps: dict[str, Composition] = {
        "code": uniformish([f"Q{n:02d}" for n in range(10)], 40),
        "color": uniformish(colors, 40),
        "animal": uniformish(animals, 40),
        "active": [("Yes", 28), ("No", 12)],
        "shade": uniformish(colors[:3] + ["ivory", "onyx"], 40),
        "count": uniformish(DIGITS, 40),
    }
    columns = tuple(composition_column(n, comps[n], rng) for n in comps)
    return DataSource(name, columns)


def write_csv(ds: DataSource, path, nul_as_empty: bool = True) -> None:
    """Write a DataSource as a CSV table, one row per record.

    All columns must have equal length. NUL cells become empty fields so a
    reload under the empty_is_nul policy round-trips.
    """
    lengths = {len(col.cells) for col in ds.columns}
    if len(lengths) != 1:
        raise ValueError("write_csv needs equal-length columns")
    with open(path, "w", encoding="utf-8", newline="") as handle:
        writer = csv.writer(handle, lineterminator="\n")
        writer.writerow([col.name for col in ds.columns])
        for row in zip(*(col.cells for col in ds.columns)):
            writer.writerow(["" if (nul_as_empty and cell == NUL) else cell for cell in row])
