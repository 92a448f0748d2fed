"""Dataset schema, columnar storage, CSV ingestion, and splits.

A dataset is stored column-wise: an expanded characteristics matrix ``Z``
(one-hot categoricals, scaled), per-alternative attribute matrices (scaled),
an availability mask and chosen indices. Raw (unscaled, unexpanded) columns
are kept alongside so a dataset can be written back to CSV and reloaded
bit-for-bit.

Datasets are immutable after construction and safe to share across workers.
"""
from __future__ import annotations

import csv
from dataclasses import dataclass, field

import numpy as np

from .errors import DataError, ParseError, SchemaError


@dataclass(frozen=True)
class CategoricalRule:
    """One-hot encoding rule: declared levels, reference level dropped."""

    levels: tuple[int, ...]
    reference: int

    def __post_init__(self):
        object.__setattr__(self, "levels", tuple(int(v) for v in self.levels))
        if self.reference not in self.levels:
            raise SchemaError(f"reference level {self.reference} not among levels {self.levels}")
        if len(set(self.levels)) != len(self.levels):
            raise SchemaError("categorical levels must be unique")

    @property
    def encoded_levels(self) -> tuple[int, ...]:
        return tuple(v for v in self.levels if v != self.reference)


@dataclass(frozen=True)
class FeatureSchema:
    """Column layout of a choice dataset.

    ``characteristics`` are raw person/trip column names; columns listed in
    ``categorical`` are one-hot expanded (reference level dropped, so each
    block sums to 1 for non-reference rows and 0 for reference rows).
    ``attributes`` maps an alternative to (role, column) pairs; roles (e.g.
    "time", "cost") are what utility specifications refer to, columns are
    CSV headers. ``scaling`` multiplies a raw column before estimation.
    """

    characteristics: tuple[str, ...]
    alternatives: tuple[str, ...]
    attributes: dict[str, tuple[tuple[str, str], ...]]
    choice_column: str
    categorical: dict[str, CategoricalRule] = field(default_factory=dict)
    availability: dict[str, str] = field(default_factory=dict)
    choice_values: tuple[int, ...] | None = None
    scaling: dict[str, float] = field(default_factory=dict)

    def __post_init__(self):
        object.__setattr__(self, "characteristics", tuple(self.characteristics))
        object.__setattr__(self, "alternatives", tuple(self.alternatives))
        object.__setattr__(
            self,
            "attributes",
            {a: tuple((str(r), str(c)) for r, c in pairs) for a, pairs in self.attributes.items()},
        )
        if len(set(self.characteristics)) != len(self.characteristics):
            raise SchemaError("characteristic names must be unique")
        if len(set(self.alternatives)) < 2:
            raise SchemaError("need at least two distinct alternatives")
        for alt in self.alternatives:
            pairs = self.attributes.get(alt, ())
            if not pairs:
                raise SchemaError(f"alternative {alt!r} has no attributes")
            roles = [r for r, _ in pairs]
            if len(set(roles)) != len(roles):
                raise SchemaError(f"duplicate attribute roles for alternative {alt!r}")
        for col in self.categorical:
            if col not in self.characteristics:
                raise SchemaError(f"categorical rule for unknown characteristic {col!r}")
            if self.scaling.get(col, 1.0) != 1.0:
                raise SchemaError(f"categorical column {col!r} cannot be scaled")
        for col, s in self.scaling.items():
            if not s > 0:
                raise SchemaError(f"scaling factor for {col!r} must be strictly positive")
        if self.choice_values is not None and len(self.choice_values) != len(self.alternatives):
            raise SchemaError("choice_values must list one raw value per alternative")

    # -- derived layout ----------------------------------------------------

    @property
    def n_alts(self) -> int:
        return len(self.alternatives)

    def characteristic_names(self) -> tuple[str, ...]:
        """Characteristic labels after one-hot expansion, Z column order."""
        names = []
        for col in self.characteristics:
            rule = self.categorical.get(col)
            if rule is None:
                names.append(col)
            else:
                names.extend(f"{col}_{lvl}" for lvl in rule.encoded_levels)
        return tuple(names)

    def attr_roles(self, alt: str) -> tuple[str, ...]:
        return tuple(r for r, _ in self.attributes[alt])

    def attr_column(self, alt: str, role: str) -> str:
        for r, c in self.attributes[alt]:
            if r == role:
                return c
        raise SchemaError(f"alternative {alt!r} has no attribute role {role!r}")

    def alt_index(self, alt: str) -> int:
        try:
            return self.alternatives.index(alt)
        except ValueError:
            raise SchemaError(f"unknown alternative {alt!r}") from None

    def raw_columns(self) -> list[str]:
        """All raw CSV columns, in canonical write order."""
        cols = list(self.characteristics)
        for alt in self.alternatives:
            cols.extend(c for _, c in self.attributes[alt])
        cols.extend(self.availability[a] for a in self.alternatives if a in self.availability)
        cols.append(self.choice_column)
        return cols

    def scale_of(self, col: str) -> float:
        return float(self.scaling.get(col, 1.0))


@dataclass
class Observation:
    """One person's choice situation (scaled, expanded values)."""

    z: np.ndarray
    x: dict[str, np.ndarray]
    available: np.ndarray
    chosen: int


class Dataset:
    """Immutable columnar choice dataset conforming to a FeatureSchema."""

    def __init__(self, schema: FeatureSchema, raw_columns: dict[str, np.ndarray],
                 split_tag: str = "train", validate: bool = True):
        self.schema = schema
        self.split_tag = split_tag
        sizes = {len(v) for v in raw_columns.values()}
        if len(sizes) != 1:
            raise DataError("raw columns have inconsistent lengths")
        self.n = sizes.pop()  # zero rows allowed: degenerate splits produce them
        self._raw = {k: np.asarray(v, dtype=np.float64) for k, v in raw_columns.items()}
        for col in schema.raw_columns():
            if col not in self._raw:
                raise SchemaError(f"missing column {col!r}")

        self.z = self._expand_characteristics()
        self.x = {
            alt: np.column_stack(
                [self._raw[c] * schema.scale_of(c) for _, c in schema.attributes[alt]]
            )
            for alt in schema.alternatives
        }
        self.avail = self._availability_mask()
        self.chosen = self._chosen_indices()
        if validate:
            self._validate()
        for arr in (self.z, self.avail, self.chosen, *self.x.values(), *self._raw.values()):
            arr.setflags(write=False)

    # -- construction helpers ----------------------------------------------

    def _expand_characteristics(self) -> np.ndarray:
        cols = []
        for col in self.schema.characteristics:
            raw = self._raw[col]
            rule = self.schema.categorical.get(col)
            if rule is None:
                cols.append(raw * self.schema.scale_of(col))
            else:
                as_int = raw.astype(np.int64)
                if not np.all(as_int == raw):
                    raise ParseError(f"categorical column {col!r} has non-integer values")
                bad = ~np.isin(as_int, rule.levels)
                if bad.any():
                    raise ParseError(
                        f"categorical column {col!r} has undeclared level "
                        f"{as_int[bad][0]} (row {int(np.flatnonzero(bad)[0])})",
                        row=int(np.flatnonzero(bad)[0]),
                    )
                for lvl in rule.encoded_levels:
                    cols.append((as_int == lvl).astype(np.float64))
        if not cols:
            return np.zeros((self.n, 0))
        return np.column_stack(cols)

    def _availability_mask(self) -> np.ndarray:
        mask = np.ones((self.n, self.schema.n_alts), dtype=bool)
        for j, alt in enumerate(self.schema.alternatives):
            col = self.schema.availability.get(alt)
            if col is not None:
                mask[:, j] = self._raw[col] != 0
        return mask

    def _chosen_indices(self) -> np.ndarray:
        raw = self._raw[self.schema.choice_column]
        values = self.schema.choice_values
        if values is None:
            idx = raw.astype(np.int64)
            if not np.all(idx == raw):
                raise ParseError(f"choice column {self.schema.choice_column!r} has non-integer values")
            bad = (idx < 0) | (idx >= self.schema.n_alts)
        else:
            idx = np.full(self.n, -1, dtype=np.int64)
            for j, v in enumerate(values):
                idx[raw == v] = j
            bad = idx < 0
        if bad.any():
            r = int(np.flatnonzero(bad)[0])
            raise ParseError(f"unrecognized choice value {raw[bad][0]!r} (row {r})", row=r)
        return idx

    def _validate(self) -> None:
        if (self.avail.sum(axis=1) < 2).any():
            r = int(np.flatnonzero(self.avail.sum(axis=1) < 2)[0])
            raise DataError(f"observation {r} has fewer than two available alternatives")
        rows = np.arange(self.n)
        if not self.avail[rows, self.chosen].all():
            r = int(np.flatnonzero(~self.avail[rows, self.chosen])[0])
            raise DataError(f"observation {r} chose an unavailable alternative")

    # -- access --------------------------------------------------------------

    def __len__(self) -> int:
        return self.n

    @property
    def n_alts(self) -> int:
        return self.schema.n_alts

    def raw_column(self, name: str) -> np.ndarray:
        return self._raw[name]

    def characteristic(self, name: str) -> np.ndarray:
        """Expanded characteristic column by expanded name."""
        names = self.schema.characteristic_names()
        try:
            return self.z[:, names.index(name)]
        except ValueError:
            raise SchemaError(f"unknown characteristic {name!r}") from None

    def observation(self, i: int) -> Observation:
        return Observation(
            z=self.z[i],
            x={alt: self.x[alt][i] for alt in self.schema.alternatives},
            available=self.avail[i],
            chosen=int(self.chosen[i]),
        )

    def observations(self):
        return [self.observation(i) for i in range(self.n)]

    def subset(self, indices: np.ndarray, split_tag: str) -> "Dataset":
        raw = {k: v[indices].copy() for k, v in self._raw.items()}
        return Dataset(self.schema, raw, split_tag=split_tag, validate=False)

    def content_hash(self) -> str:
        """sha256 over the raw columns in canonical order; identifies the data."""
        import hashlib

        h = hashlib.sha256()
        for col in self.schema.raw_columns():
            h.update(col.encode())
            h.update(np.ascontiguousarray(self._raw[col]).tobytes())
        return h.hexdigest()


# -- CSV ---------------------------------------------------------------------


def _parse_cell(text: str, col: str, line_no: int) -> float:
    try:
        return float(text)
    except ValueError:
        raise ParseError(f"non-numeric value {text!r} in column {col!r} (line {line_no})",
                         row=line_no) from None


def read_csv_columns(path, columns: list[str], delimiter: str = ",") -> dict[str, np.ndarray]:
    """Read the named columns, erroring with the column name or line number."""
    with open(path, newline="", encoding="utf-8") as fh:
        reader = csv.reader(fh, delimiter=delimiter)
        try:
            header = next(reader)
        except StopIteration:
            raise DataError(f"{path}: file is empty") from None
        header = [h.strip() for h in header]
        missing = [c for c in columns if c not in header]
        if missing:
            raise SchemaError(f"{path}: missing column {missing[0]!r}")
        pos = {c: header.index(c) for c in columns}
        data: dict[str, list[float]] = {c: [] for c in columns}
        width = max(pos.values()) + 1
        for line_no, row in enumerate(reader, start=2):
            if not row:
                continue
            if len(row) < width:
                raise ParseError(f"row has {len(row)} cells, need {width} (line {line_no})",
                                 row=line_no)
            for c in columns:
                data[c].append(_parse_cell(row[pos[c]], c, line_no))
    if not data[columns[0]]:
        raise DataError(f"{path}: no data rows")
    return {c: np.asarray(v, dtype=np.float64) for c, v in data.items()}


def load_csv(path, schema: FeatureSchema, split_tag: str = "train",
             delimiter: str = ",") -> Dataset:
    """Load a CSV laid out per ``schema`` into a Dataset.

    Scaling factors and one-hot expansion are applied on top of the raw
    values; the raw values are retained for lossless write-back.
    """
    raw = read_csv_columns(path, schema.raw_columns(), delimiter=delimiter)
    return Dataset(schema, raw, split_tag=split_tag)


def _format_value(v: float) -> str:
    v = float(v)
    if v == int(v) and abs(v) < 2**53:
        return str(int(v))
    return repr(v)  # shortest decimal that round-trips the exact double


def write_csv(dataset: Dataset, path) -> None:
    """Write the dataset's raw (unscaled) columns; round-trips bit-for-bit."""
    cols = dataset.schema.raw_columns()
    with open(path, "w", newline="", encoding="utf-8") as fh:
        writer = csv.writer(fh)
        writer.writerow(cols)
        mats = [dataset.raw_column(c) for c in cols]
        for i in range(len(dataset)):
            writer.writerow([_format_value(m[i]) for m in mats])


# -- splitting -----------------------------------------------------------------


def split_sizes(n: int, fractions) -> list[int]:
    """Largest-remainder apportionment; each size within 1 of n*fraction."""
    fr = [float(f) for f in fractions]
    if len(fr) != 3 or any(f < 0 for f in fr) or abs(sum(fr) - 1.0) > 1e-9:
        raise ValueError(f"fractions must be three nonnegative values summing to 1, got {fractions}")
    exact = [n * f for f in fr]
    sizes = [int(np.floor(e)) for e in exact]
    remainders = [e - s for e, s in zip(exact, sizes)]
    for _ in range(n - sum(sizes)):
        i = int(np.argmax(remainders))
        sizes[i] += 1
        remainders[i] = -1.0
    return sizes


def split_dataset(dataset: Dataset, fractions, seed: int):
    """Random disjoint, exhaustive train/dev/test partition. Deterministic in seed."""
    sizes = split_sizes(len(dataset), fractions)
    perm = np.random.default_rng(seed).permutation(len(dataset))
    tags = ("train", "dev", "test")
    out, start = [], 0
    for size, tag in zip(sizes, tags):
        idx = np.sort(perm[start:start + size])
        out.append(dataset.subset(idx, tag))
        start += size
    return tuple(out)


# -- Swissmetro ----------------------------------------------------------------
#
# Raw survey coding -> the 0-based coding used by the benchmarks:
#   AGE      1..5 kept (6 = unknown dropped), shifted to 0..4
#   PURPOSE  outbound/return trips folded (1&5 commute, 2&6 shopping,
#            3&7 business, 4&8 leisure -> 0..3); 9 = "other" dropped
#   WHO      0 (unknown) folded into self; 1 self, 2 employer, 3 half-half -> 0..2
#   INCOME   0/1 under 50 -> 0; 2 -> 1; 3 -> 2; 4 unknown kept as level 3
#   LUGGAGE  0 none, 1 one piece, 3 several -> 0..2
#   CHOICE   0 = unknown dropped; 1 train, 2 SM, 3 car
# Time, headway, and cost columns are divided by 100 for estimation; reported
# coefficients are per scaled unit, and money-per-time ratios are unaffected
# because time and cost share the factor.

SWISSMETRO_PURPOSE_MAP = {1: 0, 5: 0, 2: 1, 6: 1, 3: 2, 7: 2, 4: 3, 8: 3}
SWISSMETRO_WHO_MAP = {0: 0, 1: 0, 2: 1, 3: 2}
SWISSMETRO_INCOME_MAP = {0: 0, 1: 0, 2: 1, 3: 2, 4: 3}
SWISSMETRO_LUGGAGE_MAP = {0: 0, 1: 1, 3: 2}
SWISSMETRO_SCALE = 0.01


def swissmetro_schema() -> FeatureSchema:
    scaling = {c: SWISSMETRO_SCALE for c in
               ("TRAIN_TT", "TRAIN_HE", "TRAIN_CO", "SM_TT", "SM_HE", "SM_CO",
                "CAR_TT", "CAR_CO")}
    return FeatureSchema(
        characteristics=("MALE", "AGE", "INCOME", "FIRST", "WHO", "PURPOSE", "LUGGAGE", "GA"),
        categorical={
            "AGE": CategoricalRule(levels=(0, 1, 2, 3, 4), reference=0),
            "INCOME": CategoricalRule(levels=(0, 1, 2, 3), reference=0),
            "WHO": CategoricalRule(levels=(0, 1, 2), reference=0),
            "PURPOSE": CategoricalRule(levels=(0, 1, 2, 3), reference=0),
            "LUGGAGE": CategoricalRule(levels=(0, 1, 2), reference=0),
        },
        alternatives=("train", "sm", "car"),
        attributes={
            "train": (("time", "TRAIN_TT"), ("headway", "TRAIN_HE"), ("cost", "TRAIN_CO")),
            "sm": (("time", "SM_TT"), ("headway", "SM_HE"), ("seats", "SM_SEATS"), ("cost", "SM_CO")),
            "car": (("time", "CAR_TT"), ("cost", "CAR_CO")),
        },
        availability={"train": "TRAIN_AV", "sm": "SM_AV", "car": "CAR_AV"},
        choice_column="CHOICE",
        choice_values=(0, 1, 2),
        scaling=scaling,
    )


def load_swissmetro(path, split_tag: str = "train") -> Dataset:
    """Load the raw Swissmetro survey file and apply the standard filters.

    Rows with unknown age, "other" trip purpose, or unknown choice are
    dropped; categorical codes are folded as documented above.
    """
    raw_cols = ["MALE", "AGE", "INCOME", "FIRST", "WHO", "PURPOSE", "LUGGAGE", "GA",
                "TRAIN_TT", "TRAIN_HE", "TRAIN_CO", "SM_TT", "SM_HE", "SM_SEATS", "SM_CO",
                "CAR_TT", "CAR_CO", "TRAIN_AV", "SM_AV", "CAR_AV", "CHOICE"]
    with open(path, encoding="utf-8") as fh:
        first = fh.readline()
    delimiter = "\t" if "\t" in first else ","
    cols = read_csv_columns(path, raw_cols, delimiter=delimiter)

    keep = (cols["AGE"] != 6) & (cols["PURPOSE"] != 9) & (cols["CHOICE"] != 0)
    if not keep.any():
        raise DataError("no rows left after the age/purpose/choice filters")
    cols = {k: v[keep] for k, v in cols.items()}

    def remap(values, table, name):
        out = np.full(len(values), -1.0)
        for src, dst in table.items():
            out[values == src] = dst
        if (out < 0).any():
            bad = values[out < 0][0]
            raise ParseError(f"unexpected {name} code {bad!r} in Swissmetro file")
        return out

    cols["AGE"] = cols["AGE"] - 1
    cols["PURPOSE"] = remap(cols["PURPOSE"], SWISSMETRO_PURPOSE_MAP, "PURPOSE")
    cols["WHO"] = remap(cols["WHO"], SWISSMETRO_WHO_MAP, "WHO")
    cols["INCOME"] = remap(cols["INCOME"], SWISSMETRO_INCOME_MAP, "INCOME")
    cols["LUGGAGE"] = remap(cols["LUGGAGE"], SWISSMETRO_LUGGAGE_MAP, "LUGGAGE")
    cols["CHOICE"] = cols["CHOICE"] - 1
    return Dataset(swissmetro_schema(), cols, split_tag=split_tag)


# -- schema (de)serialization --------------------------------------------------


def schema_to_dict(schema: FeatureSchema) -> dict:
    return {
        "characteristics": list(schema.characteristics),
        "categorical": {
            c: {"levels": list(r.levels), "reference": r.reference}
            for c, r in schema.categorical.items()
        },
        "alternatives": list(schema.alternatives),
        "attributes": {a: [[r, c] for r, c in pairs] for a, pairs in schema.attributes.items()},
        "availability": dict(schema.availability),
        "choice_column": schema.choice_column,
        "choice_values": None if schema.choice_values is None else list(schema.choice_values),
        "scaling": dict(schema.scaling),
    }


def schema_from_dict(d: dict) -> FeatureSchema:
    try:
        return FeatureSchema(
            characteristics=tuple(d["characteristics"]),
            categorical={
                c: CategoricalRule(levels=tuple(r["levels"]), reference=int(r["reference"]))
                for c, r in d.get("categorical", {}).items()
            },
            alternatives=tuple(d["alternatives"]),
            attributes={a: tuple((r, c) for r, c in pairs) for a, pairs in d["attributes"].items()},
            availability=dict(d.get("availability", {})),
            choice_column=d["choice_column"],
            choice_values=None if d.get("choice_values") is None else tuple(d["choice_values"]),
            scaling={k: float(v) for k, v in d.get("scaling", {}).items()},
        )
    except KeyError as e:
        raise SchemaError(f"schema config missing key {e.args[0]!r}") from None
