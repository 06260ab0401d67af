"""Binary encoding of structured clinical records.

A declarative schema maps each field to a fixed bit region: booleans take
one bit, categorical fields one-hot over their declared values, numeric
fields one-hot over declared half-open bins (lo, hi]. Encoded vectors are
compared with the Hamming distance (XOR then population count).
"""

from __future__ import annotations

import hashlib
import json
from dataclasses import dataclass, field
from typing import Mapping, Sequence

import numpy as np

from .errors import (
    MissingFieldError,
    SchemaMismatchError,
    UndeclaredValueError,
    ValidationError,
    ValueOutOfRangeError,
)

BOOLEAN = "boolean"
CATEGORICAL = "categorical"
NUMERIC = "numeric"

UNKNOWN = "unknown"

_TRUTHY = {"yes", "true", "1", "y"}
_FALSY = {"no", "false", "0", "n"}


@dataclass(frozen=True)
class FieldSpec:
    """Declares one clinical field and its bit encoding.

    allow_unknown appends an extra one-hot slot selected by a missing or
    explicitly "unknown" value; without it, missing values are hard errors.
    """

    name: str
    kind: str
    values: tuple = ()
    bins: tuple = ()
    allow_unknown: bool = False

    def __post_init__(self):
        if not self.name:
            raise ValidationError("field name must be non-empty")
        object.__setattr__(self, "values", tuple(str(v) for v in self.values))
        object.__setattr__(self, "bins", tuple(float(b) for b in self.bins))
        if self.kind == BOOLEAN:
            if self.values or self.bins:
                raise ValidationError(
                    f"boolean field {self.name!r} declares values or bins"
                )
        elif self.kind == CATEGORICAL:
            if not self.values:
                raise ValidationError(
                    f"categorical field {self.name!r} declares no values"
                )
            if len(set(self.values)) != len(self.values):
                raise ValidationError(
                    f"categorical field {self.name!r} has duplicate values"
                )
        elif self.kind == NUMERIC:
            if len(self.bins) < 2:
                raise ValidationError(
                    f"numeric field {self.name!r} needs at least two bin edges"
                )
            if any(a >= b for a, b in zip(self.bins, self.bins[1:])):
                raise ValidationError(
                    f"numeric field {self.name!r} bin edges must strictly increase"
                )
        else:
            raise ValidationError(f"unknown field kind {self.kind!r}")

    @property
    def width(self) -> int:
        """Number of bits this field occupies."""
        if self.kind == BOOLEAN:
            base = 1
        elif self.kind == CATEGORICAL:
            base = len(self.values)
        else:
            base = len(self.bins) - 1
        return base + (1 if self.allow_unknown else 0)

    def slot_labels(self) -> list:
        """Human-readable label for each bit slot, in bit order."""
        if self.kind == BOOLEAN:
            labels = [self.name]
        elif self.kind == CATEGORICAL:
            labels = list(self.values)
        else:
            labels = [
                f"({lo:g}, {hi:g}]" for lo, hi in zip(self.bins, self.bins[1:])
            ]
        if self.allow_unknown:
            labels.append(UNKNOWN)
        return labels

    def to_dict(self) -> dict:
        out = {"name": self.name, "kind": self.kind}
        if self.kind == CATEGORICAL:
            out["values"] = list(self.values)
        if self.kind == NUMERIC:
            out["bins"] = list(self.bins)
        if self.allow_unknown:
            out["allow_unknown"] = True
        return out

    @classmethod
    def from_dict(cls, data: Mapping) -> "FieldSpec":
        return cls(
            name=data["name"],
            kind=data["kind"],
            values=tuple(data.get("values", ())),
            bins=tuple(data.get("bins", ())),
            allow_unknown=bool(data.get("allow_unknown", False)),
        )


@dataclass(frozen=True)
class ClinicalSchema:
    """Ordered field specs with contiguous, non-overlapping bit offsets."""

    fields: tuple
    schema_id: str = field(init=False)

    def __post_init__(self):
        specs = tuple(self.fields)
        if not specs:
            raise ValidationError("schema must declare at least one field")
        names = [f.name for f in specs]
        if len(set(names)) != len(names):
            raise ValidationError(f"schema has duplicate field names: {names}")
        object.__setattr__(self, "fields", specs)
        canon = json.dumps([f.to_dict() for f in specs], sort_keys=True)
        digest = hashlib.sha256(canon.encode("utf-8")).hexdigest()[:12]
        object.__setattr__(self, "schema_id", digest)

    @property
    def total_bits(self) -> int:
        return sum(f.width for f in self.fields)

    def offset_of(self, name: str) -> int:
        """Bit offset of a field's region, counted from field 0."""
        offset = 0
        for f in self.fields:
            if f.name == name:
                return offset
            offset += f.width
        raise ValidationError(f"schema has no field named {name!r}")

    def to_dict(self) -> dict:
        return {"fields": [f.to_dict() for f in self.fields]}

    @classmethod
    def from_dict(cls, data: Mapping) -> "ClinicalSchema":
        return cls(fields=tuple(FieldSpec.from_dict(f) for f in data["fields"]))


@dataclass(frozen=True)
class ClinicalBits:
    """Fixed-width binary clinical vector, most-significant-field-first.

    Bit j of the vector (j=0 is the first bit of the first field) is stored
    at integer bit position width-1-j, so field order reads left to right
    in the binary and hex renderings.
    """

    value: int
    width: int
    schema_id: str

    def __post_init__(self):
        if self.width < 1:
            raise ValidationError("bit vector width must be positive")
        if not 0 <= self.value < (1 << self.width):
            raise ValidationError(
                f"bit value does not fit in {self.width} bits"
            )

    @classmethod
    def from_bits(cls, bits: Sequence[int], schema_id: str) -> "ClinicalBits":
        value = 0
        for b in bits:
            if b not in (0, 1):
                raise ValidationError(f"bits must be 0 or 1, got {b!r}")
            value = (value << 1) | b
        return cls(value=value, width=len(bits), schema_id=schema_id)

    def bits(self) -> tuple:
        return tuple(
            (self.value >> (self.width - 1 - j)) & 1 for j in range(self.width)
        )

    def to_hex(self) -> str:
        """Hex rendering, left-aligned: pad bits sit at the right end."""
        nibbles = (self.width + 3) // 4
        return format(self.value << (4 * nibbles - self.width), f"0{nibbles}x")

    @classmethod
    def from_hex(cls, text: str, width: int, schema_id: str) -> "ClinicalBits":
        nibbles = (width + 3) // 4
        if len(text) != nibbles:
            raise ValidationError(
                f"hex string {text!r} has {len(text)} nibbles, expected {nibbles}"
            )
        raw = int(text, 16)
        pad = 4 * nibbles - width
        if raw & ((1 << pad) - 1):
            raise ValidationError(f"hex string {text!r} has nonzero pad bits")
        return cls(value=raw >> pad, width=width, schema_id=schema_id)


def _parse_boolean(name: str, value) -> int:
    if isinstance(value, bool):
        return int(value)
    if isinstance(value, (int, np.integer)) and value in (0, 1):
        return int(value)
    text = str(value).strip().lower()
    if text in _TRUTHY:
        return 1
    if text in _FALSY:
        return 0
    raise UndeclaredValueError(
        f"field {name!r}: cannot interpret {value!r} as boolean"
    )


def _is_unknown(value) -> bool:
    return value is None or str(value).strip().lower() in ("", UNKNOWN)


def encode(raw_record: Mapping, schema: ClinicalSchema) -> ClinicalBits:
    """Encode a field-name -> value mapping under the schema.

    Deterministic; every one-hot region of the result has exactly one set
    bit. Missing fields, undeclared categorical values, and numeric values
    outside all bins raise distinct errors naming the field.
    """
    bits = []
    for spec in schema.fields:
        if spec.name not in raw_record:
            raise MissingFieldError(f"record is missing field {spec.name!r}")
        value = raw_record[spec.name]

        if spec.allow_unknown and _is_unknown(value):
            region = [0] * (spec.width - 1) + [1]
        elif spec.kind == BOOLEAN:
            region = [_parse_boolean(spec.name, value)]
            if spec.allow_unknown:
                region.append(0)
        elif spec.kind == CATEGORICAL:
            text = str(value)
            if text not in spec.values:
                raise UndeclaredValueError(
                    f"field {spec.name!r}: value {value!r} not among "
                    f"declared values {list(spec.values)}"
                )
            region = [1 if v == text else 0 for v in spec.values]
            if spec.allow_unknown:
                region.append(0)
        else:
            try:
                number = float(value)
            except (TypeError, ValueError):
                raise ValueOutOfRangeError(
                    f"field {spec.name!r}: value {value!r} is not numeric"
                ) from None
            edges = spec.bins
            region = [0] * (spec.width - (1 if spec.allow_unknown else 0))
            for i, (lo, hi) in enumerate(zip(edges, edges[1:])):
                if lo < number <= hi:
                    region[i] = 1
                    break
            else:
                raise ValueOutOfRangeError(
                    f"field {spec.name!r}: value {number:g} outside bins "
                    f"({edges[0]:g}, {edges[-1]:g}]"
                )
            if spec.allow_unknown:
                region.append(0)
        bits.extend(region)

    return ClinicalBits.from_bits(bits, schema_id=schema.schema_id)


def decode(bits: ClinicalBits, schema: ClinicalSchema) -> dict:
    """Recover a readable field-name -> value mapping from encoded bits.

    Booleans decode to yes/no, categoricals to the declared value, numeric
    fields to their bin label. Inverse of encode up to numeric binning.
    """
    if bits.schema_id != schema.schema_id:
        raise SchemaMismatchError(
            f"bits were encoded under schema {bits.schema_id}, "
            f"not {schema.schema_id}"
        )
    flat = bits.bits()
    out = {}
    offset = 0
    for spec in schema.fields:
        region = flat[offset:offset + spec.width]
        offset += spec.width
        if spec.allow_unknown and region[-1] == 1:
            out[spec.name] = UNKNOWN
            continue
        if spec.kind == BOOLEAN:
            out[spec.name] = "yes" if region[0] else "no"
        else:
            labels = spec.slot_labels()
            hot = [i for i, b in enumerate(region) if b]
            if len(hot) != 1:
                raise ValidationError(
                    f"field {spec.name!r}: region is not one-hot: {region}"
                )
            out[spec.name] = labels[hot[0]]
    return out


def validate_bits(bits: ClinicalBits, schema: ClinicalSchema) -> None:
    """Reject bit vectors whose one-hot regions are malformed.

    Boolean regions are unconstrained; categorical and numeric regions must
    have exactly one set bit. Used by loaders on deserialized vectors.
    """
    if bits.schema_id != schema.schema_id:
        raise SchemaMismatchError(
            f"bits carry schema {bits.schema_id}, expected {schema.schema_id}"
        )
    if bits.width != schema.total_bits:
        raise SchemaMismatchError(
            f"bit width {bits.width} does not match schema width "
            f"{schema.total_bits}"
        )
    flat = bits.bits()
    offset = 0
    for spec in schema.fields:
        region = flat[offset:offset + spec.width]
        offset += spec.width
        if spec.kind == BOOLEAN:
            if spec.allow_unknown and region[0] == 1 and region[1] == 1:
                raise ValidationError(
                    f"field {spec.name!r}: both value and unknown bits set"
                )
            continue
        if sum(region) != 1:
            raise ValidationError(
                f"field {spec.name!r}: one-hot region violated: {region}"
            )


def hamming(a: ClinicalBits, b: ClinicalBits) -> int:
    """Count of differing bit positions, via XOR and population count."""
    if a.schema_id != b.schema_id:
        raise SchemaMismatchError(
            f"cannot compare bits from schema {a.schema_id} with {b.schema_id}"
        )
    if a.width != b.width:
        raise SchemaMismatchError(
            f"bit widths differ: {a.width} vs {b.width}"
        )
    return (a.value ^ b.value).bit_count()


def all_hamming(db_bits: Sequence[ClinicalBits], query: ClinicalBits) -> np.ndarray:
    """Hamming distance from the query to every database vector.

    Returns an int64 vector aligned to the database order (ascending id
    when the caller stores bits id-aligned).
    """
    return np.array([hamming(b, query) for b in db_bits], dtype=np.int64)
