"""Dataset and database persistence, plus a synthetic dataset generator.

Embeddings travel in two formats: a human-auditable text table and a
packed binary layout with a trailing content checksum. Clinical records
travel as raw CSV values and are encoded against a schema on load. A
bundle directory ties the three sources together through a manifest whose
checksums are verified before anything is parsed.
"""

from __future__ import annotations

import csv
import hashlib
import io
import json
import struct
from dataclasses import dataclass, field
from pathlib import Path
from typing import Mapping, Optional, Sequence, Tuple

import numpy as np

from .clinical import BOOLEAN, ClinicalBits, ClinicalSchema, FieldSpec, encode
from .core_index import EmbeddingRecord
from .errors import (
    ChecksumError,
    DuplicateIdError,
    FormatError,
    RankfuseError,
    ValidationError,
    VersionError,
)
from .retrieval import DescriptorDatabase, build_database

TEXT_TABULAR = "text-tabular"
PACKED_BINARY = "packed-binary"

EMBEDDINGS_MAGIC = b"RFEM"
DATABASE_MAGIC = b"RFDB"
FORMAT_VERSION = 1

EMBEDDINGS_TEXT_NAME = "embeddings.csv"
EMBEDDINGS_BINARY_NAME = "embeddings.bin"
CLINICAL_NAME = "clinical.csv"
SCHEMA_NAME = "schema.json"
MANIFEST_NAME = "manifest.json"


def _sha256_hex(data: bytes) -> str:
    return hashlib.sha256(data).hexdigest()


def _content_checksum(data: bytes) -> bytes:
    """First 8 bytes of the sha256 digest; appended to binary files."""
    return hashlib.sha256(data).digest()[:8]


def _sort_and_check_ids(pairs, what: str):
    """Sort (id, payload) pairs ascending by id, rejecting duplicates."""
    ordered = sorted(pairs, key=lambda p: p[0])
    dupes = sorted({a for (a, _), (b, _) in zip(ordered, ordered[1:]) if a == b})
    if dupes:
        raise DuplicateIdError(f"duplicate {what} ids: {dupes[:5]}")
    return ordered


# ---------------------------------------------------------------------------
# embeddings: text-tabular


def save_embeddings_text(records: Sequence[EmbeddingRecord], path) -> None:
    if not records:
        raise ValidationError("cannot save an empty record sequence")
    dim = records[0].vector.shape[0]
    lines = [f"id,label,{dim}"]
    for rec in records:
        values = ",".join(repr(float(v)) for v in rec.vector)
        lines.append(f"{rec.id},{rec.label},{values}")
    Path(path).write_text("\n".join(lines) + "\n", encoding="utf-8")


def load_embeddings_text(path) -> list:
    text = Path(path).read_text(encoding="utf-8")
    lines = text.splitlines()
    if not lines:
        raise FormatError(f"{path}: empty file")
    header = lines[0].split(",")
    if len(header) != 3 or header[0] != "id" or header[1] != "label":
        raise FormatError(f"{path}: line 1: header must be 'id,label,<dim>'")
    try:
        dim = int(header[2])
    except ValueError:
        raise FormatError(
            f"{path}: line 1: dim {header[2]!r} is not an integer"
        ) from None
    if dim < 1:
        raise FormatError(f"{path}: line 1: dim must be positive, got {dim}")

    pairs = []
    for lineno, line in enumerate(lines[1:], start=2):
        if not line.strip():
            continue
        parts = line.split(",")
        if len(parts) != 2 + dim:
            raise FormatError(
                f"{path}: line {lineno}: expected {2 + dim} fields "
                f"(id, label, {dim} values), got {len(parts)}"
            )
        try:
            rid = int(parts[0])
            vector = np.array([float(p) for p in parts[2:]], dtype=np.float32)
        except ValueError as exc:
            raise FormatError(f"{path}: line {lineno}: {exc}") from None
        pairs.append((rid, EmbeddingRecord(id=rid, label=parts[1], vector=vector)))
    if not pairs:
        raise FormatError(f"{path}: no data rows")
    return [rec for _, rec in _sort_and_check_ids(pairs, "embedding")]


# ---------------------------------------------------------------------------
# embeddings: packed-binary
#
# magic | version u32 | m u32 | dim u32 | label table | ids i64*m |
# label index u32*m | vectors f32*m*dim row-major | sha256[:8]
# All integers and floats little-endian.


def _pack_label_table(labels: Sequence[str]) -> bytes:
    out = [struct.pack("<I", len(labels))]
    for lab in labels:
        raw = lab.encode("utf-8")
        out.append(struct.pack("<H", len(raw)))
        out.append(raw)
    return b"".join(out)


class _Reader:
    """Cursor over a byte buffer; every read is bounds-checked."""

    def __init__(self, data: bytes, path):
        self.data = data
        self.pos = 0
        self.path = path

    def take(self, n: int) -> bytes:
        if self.pos + n > len(self.data):
            raise FormatError(
                f"{self.path}: offset {self.pos}: need {n} bytes, "
                f"{len(self.data) - self.pos} remain"
            )
        chunk = self.data[self.pos:self.pos + n]
        self.pos += n
        return chunk

    def u32(self) -> int:
        return struct.unpack("<I", self.take(4))[0]

    def u16(self) -> int:
        return struct.unpack("<H", self.take(2))[0]

    def done(self) -> bool:
        return self.pos == len(self.data)


def _read_label_table(reader: _Reader) -> list:
    count = reader.u32()
    return [reader.take(reader.u16()).decode("utf-8") for _ in range(count)]


def _check_envelope(data: bytes, magic: bytes, path) -> bytes:
    """Validate magic, version, and trailing checksum; return the payload.

    Order matters: magic first, then version, then checksum, so a reader
    can distinguish wrong file kind from future version from corruption.
    """
    if len(data) < len(magic) + 4 + 8:
        raise FormatError(f"{path}: file too short to carry a header")
    if data[:len(magic)] != magic:
        raise FormatError(
            f"{path}: bad magic {data[:len(magic)]!r}, expected {magic!r}"
        )
    version = struct.unpack_from("<I", data, len(magic))[0]
    if version != FORMAT_VERSION:
        raise VersionError(
            f"{path}: format version {version}, this reader understands "
            f"{FORMAT_VERSION}"
        )
    body, stored = data[:-8], data[-8:]
    if _content_checksum(body) != stored:
        raise ChecksumError(f"{path}: content checksum mismatch")
    return body[len(magic) + 4:]


def save_embeddings_binary(records: Sequence[EmbeddingRecord], path) -> None:
    if not records:
        raise ValidationError("cannot save an empty record sequence")
    dim = records[0].vector.shape[0]
    labels = sorted({rec.label for rec in records})
    label_idx = {lab: i for i, lab in enumerate(labels)}

    out = io.BytesIO()
    out.write(EMBEDDINGS_MAGIC)
    out.write(struct.pack("<III", FORMAT_VERSION, len(records), dim))
    out.write(_pack_label_table(labels))
    out.write(np.array([rec.id for rec in records], dtype="<i8").tobytes())
    out.write(
        np.array([label_idx[rec.label] for rec in records], dtype="<u4").tobytes()
    )
    matrix = np.stack([rec.vector for rec in records]).astype("<f4")
    out.write(matrix.tobytes(order="C"))
    body = out.getvalue()
    Path(path).write_bytes(body + _content_checksum(body))


def load_embeddings_binary(path) -> list:
    data = Path(path).read_bytes()
    payload = _check_envelope(data, EMBEDDINGS_MAGIC, path)
    reader = _Reader(payload, path)
    m = reader.u32()
    dim = reader.u32()
    if m < 1 or dim < 1:
        raise FormatError(f"{path}: nonpositive record count or dim")
    labels = _read_label_table(reader)
    ids = np.frombuffer(reader.take(8 * m), dtype="<i8")
    label_idx = np.frombuffer(reader.take(4 * m), dtype="<u4")
    if label_idx.size and int(label_idx.max()) >= len(labels):
        raise FormatError(f"{path}: label index out of table range")
    vectors = np.frombuffer(reader.take(4 * m * dim), dtype="<f4")
    if not reader.done():
        raise FormatError(
            f"{path}: {len(payload) - reader.pos} trailing bytes after payload"
        )
    matrix = vectors.reshape(m, dim)
    pairs = [
        (int(ids[i]),
         EmbeddingRecord(id=int(ids[i]), label=labels[int(label_idx[i])],
                         vector=matrix[i].copy()))
        for i in range(m)
    ]
    return [rec for _, rec in _sort_and_check_ids(pairs, "embedding")]


def save_embeddings(records, path, format: str = TEXT_TABULAR) -> None:
    if format == TEXT_TABULAR:
        save_embeddings_text(records, path)
    elif format == PACKED_BINARY:
        save_embeddings_binary(records, path)
    else:
        raise ValidationError(f"unknown embedding format {format!r}")


def load_embeddings(path, format: str = TEXT_TABULAR) -> list:
    if format == TEXT_TABULAR:
        return load_embeddings_text(path)
    if format == PACKED_BINARY:
        return load_embeddings_binary(path)
    raise ValidationError(f"unknown embedding format {format!r}")


# ---------------------------------------------------------------------------
# clinical records and schemas


def save_schema(schema: ClinicalSchema, path) -> None:
    Path(path).write_text(
        json.dumps(schema.to_dict(), indent=2) + "\n", encoding="utf-8"
    )


def load_schema(path) -> ClinicalSchema:
    try:
        data = json.loads(Path(path).read_text(encoding="utf-8"))
    except json.JSONDecodeError as exc:
        raise FormatError(f"{path}: not valid JSON: {exc}") from None
    try:
        return ClinicalSchema.from_dict(data)
    except (KeyError, TypeError) as exc:
        raise FormatError(f"{path}: malformed schema document: {exc}") from None


def save_clinical_rows(rows: Sequence[Tuple[int, Mapping]], schema,
                       path) -> None:
    names = [f.name for f in schema.fields]
    with open(path, "w", encoding="utf-8", newline="") as handle:
        writer = csv.writer(handle)
        writer.writerow(["id"] + names)
        for rid, row in rows:
            writer.writerow([rid] + [row[name] for name in names])


def load_clinical_rows(path, schema: ClinicalSchema) -> list:
    """Raw (id, field -> value) rows, ascending ids, header checked."""
    names = [f.name for f in schema.fields]
    with open(path, encoding="utf-8", newline="") as handle:
        reader = csv.reader(handle)
        try:
            header = next(reader)
        except StopIteration:
            raise FormatError(f"{path}: empty file") from None
        if header != ["id"] + names:
            raise FormatError(
                f"{path}: line 1: header {header!r} does not match "
                f"schema fields {['id'] + names!r}"
            )
        pairs = []
        for lineno, parts in enumerate(reader, start=2):
            if not parts:
                continue
            if len(parts) != 1 + len(names):
                raise FormatError(
                    f"{path}: line {lineno}: expected {1 + len(names)} "
                    f"fields, got {len(parts)}"
                )
            try:
                rid = int(parts[0])
            except ValueError:
                raise FormatError(
                    f"{path}: line {lineno}: id {parts[0]!r} is not an integer"
                ) from None
            pairs.append((rid, dict(zip(names, parts[1:])), lineno))
    if not pairs:
        raise FormatError(f"{path}: no data rows")
    ordered = _sort_and_check_ids([(r, (row, ln)) for r, row, ln in pairs],
                                  "clinical")
    return [(rid, row, ln) for rid, (row, ln) in ordered]


def load_clinical(path, schema: ClinicalSchema) -> list:
    """Encoded (id, ClinicalBits) pairs, ascending ids."""
    out = []
    for rid, row, lineno in load_clinical_rows(path, schema):
        try:
            out.append((rid, encode(row, schema)))
        except RankfuseError as exc:
            raise type(exc)(f"{path}: line {lineno}: {exc}") from None
    return out


# ---------------------------------------------------------------------------
# bundles


@dataclass(frozen=True)
class DatasetBundle:
    """In-memory dataset: embeddings, raw clinical rows, schema, manifest.

    Embedding and clinical ids must match exactly; the manifest mirrors
    what a bundle directory's manifest file records (per-class counts,
    dim, bit width, and - once saved or loaded - content checksums).
    """

    records: tuple
    clinical_rows: tuple
    schema: ClinicalSchema
    manifest: dict = field(default_factory=dict)

    def __post_init__(self):
        emb_ids = [rec.id for rec in self.records]
        cli_ids = [rid for rid, _ in self.clinical_rows]
        if emb_ids != cli_ids:
            raise ValidationError(
                "embedding and clinical ids do not match "
                f"({len(emb_ids)} vs {len(cli_ids)} records)"
            )
        object.__setattr__(self, "records", tuple(self.records))
        object.__setattr__(
            self, "clinical_rows",
            tuple((rid, dict(row)) for rid, row in self.clinical_rows),
        )
        manifest = dict(self.manifest) if self.manifest else {}
        manifest.setdefault("per_class", _per_class_counts(self.records))
        manifest.setdefault("dim", int(self.records[0].vector.shape[0]))
        manifest.setdefault("bit_width", self.schema.total_bits)
        manifest.setdefault("checksums", {})
        object.__setattr__(self, "manifest", manifest)

    @property
    def size(self) -> int:
        return len(self.records)

    def encoded_clinical(self) -> list:
        return [(rid, encode(row, self.schema))
                for rid, row in self.clinical_rows]

    def to_database(self) -> DescriptorDatabase:
        return build_database(self.records, self.encoded_clinical(),
                              self.schema)


def _per_class_counts(records) -> dict:
    counts = {}
    for rec in records:
        counts[rec.label] = counts.get(rec.label, 0) + 1
    return dict(sorted(counts.items()))


def save_bundle(bundle: DatasetBundle, directory,
                format: str = TEXT_TABULAR) -> Path:
    """Write a bundle directory, returning its path.

    The manifest is written last, with a sha256 checksum of every other
    file, so a loader can verify content before parsing it.
    """
    directory = Path(directory)
    directory.mkdir(parents=True, exist_ok=True)
    emb_name = (EMBEDDINGS_TEXT_NAME if format == TEXT_TABULAR
                else EMBEDDINGS_BINARY_NAME)
    save_embeddings(bundle.records, directory / emb_name, format)
    save_clinical_rows(bundle.clinical_rows, bundle.schema,
                       directory / CLINICAL_NAME)
    save_schema(bundle.schema, directory / SCHEMA_NAME)

    checksums = {
        name: _sha256_hex((directory / name).read_bytes())
        for name in (emb_name, CLINICAL_NAME, SCHEMA_NAME)
    }
    manifest = {
        "per_class": bundle.manifest["per_class"],
        "dim": bundle.manifest["dim"],
        "bit_width": bundle.manifest["bit_width"],
        "checksums": checksums,
    }
    (directory / MANIFEST_NAME).write_text(
        json.dumps(manifest, indent=2) + "\n", encoding="utf-8"
    )
    return directory


def load_bundle(directory) -> DatasetBundle:
    directory = Path(directory)
    manifest_path = directory / MANIFEST_NAME
    if not manifest_path.is_file():
        raise FormatError(f"{directory}: no {MANIFEST_NAME}")
    try:
        manifest = json.loads(manifest_path.read_text(encoding="utf-8"))
    except json.JSONDecodeError as exc:
        raise FormatError(f"{manifest_path}: not valid JSON: {exc}") from None
    checksums = manifest.get("checksums")
    if not isinstance(checksums, dict) or not checksums:
        raise FormatError(f"{manifest_path}: missing content checksums")

    for name, expected in checksums.items():
        target = directory / name
        if not target.is_file():
            raise FormatError(f"{directory}: manifest names missing file {name}")
        if _sha256_hex(target.read_bytes()) != expected:
            raise ChecksumError(f"{target}: checksum does not match manifest")

    schema = load_schema(directory / SCHEMA_NAME)
    if EMBEDDINGS_TEXT_NAME in checksums:
        records = load_embeddings_text(directory / EMBEDDINGS_TEXT_NAME)
    elif EMBEDDINGS_BINARY_NAME in checksums:
        records = load_embeddings_binary(directory / EMBEDDINGS_BINARY_NAME)
    else:
        raise FormatError(f"{directory}: manifest lists no embeddings file")
    rows = [(rid, row) for rid, row, _ in
            load_clinical_rows(directory / CLINICAL_NAME, schema)]

    bundle = DatasetBundle(
        records=tuple(records),
        clinical_rows=tuple(rows),
        schema=schema,
        manifest={
            "per_class": manifest.get("per_class",
                                      _per_class_counts(records)),
            "dim": manifest.get("dim", int(records[0].vector.shape[0])),
            "bit_width": manifest.get("bit_width", schema.total_bits),
            "checksums": checksums,
        },
    )
    if bundle.manifest["dim"] != int(records[0].vector.shape[0]):
        raise FormatError(
            f"{directory}: manifest dim {bundle.manifest['dim']} does not "
            f"match embeddings dim {int(records[0].vector.shape[0])}"
        )
    if bundle.manifest["bit_width"] != schema.total_bits:
        raise FormatError(
            f"{directory}: manifest bit width {bundle.manifest['bit_width']} "
            f"does not match schema width {schema.total_bits}"
        )
    return bundle


# ---------------------------------------------------------------------------
# database container
#
# magic | version u32 | schema JSON (u32 length + bytes) | m u32 | dim u32 |
# label table | ids i64*m | label index u32*m | vectors f32*m*dim |
# clinical values, each schema-width bits packed big-endian into
# ceil(width/8) bytes | sha256[:8]


def save_database(db: DescriptorDatabase, path) -> None:
    schema_json = json.dumps(db.schema.to_dict(), sort_keys=True).encode("utf-8")
    labels = sorted(set(db.index.labels))
    label_idx = {lab: i for i, lab in enumerate(labels)}
    nbytes = (db.schema.total_bits + 7) // 8

    out = io.BytesIO()
    out.write(DATABASE_MAGIC)
    out.write(struct.pack("<I", FORMAT_VERSION))
    out.write(struct.pack("<I", len(schema_json)))
    out.write(schema_json)
    out.write(struct.pack("<II", db.index.size, db.index.dim))
    out.write(_pack_label_table(labels))
    out.write(db.index.ids.astype("<i8").tobytes())
    out.write(
        np.array([label_idx[lab] for lab in db.index.labels],
                 dtype="<u4").tobytes()
    )
    out.write(db.index.vectors.astype("<f4").tobytes(order="C"))
    for bits in db.clinical:
        out.write(bits.value.to_bytes(nbytes, "big"))
    body = out.getvalue()
    Path(path).write_bytes(body + _content_checksum(body))


def load_database(path) -> DescriptorDatabase:
    data = Path(path).read_bytes()
    payload = _check_envelope(data, DATABASE_MAGIC, path)
    reader = _Reader(payload, path)

    schema_len = reader.u32()
    try:
        schema = ClinicalSchema.from_dict(
            json.loads(reader.take(schema_len).decode("utf-8"))
        )
    except (json.JSONDecodeError, KeyError, TypeError) as exc:
        raise FormatError(f"{path}: malformed embedded schema: {exc}") from None

    m = reader.u32()
    dim = reader.u32()
    labels = _read_label_table(reader)
    ids = np.frombuffer(reader.take(8 * m), dtype="<i8")
    label_idx = np.frombuffer(reader.take(4 * m), dtype="<u4")
    if label_idx.size and int(label_idx.max()) >= len(labels):
        raise FormatError(f"{path}: label index out of table range")
    vectors = np.frombuffer(reader.take(4 * m * dim), dtype="<f4").reshape(m, dim)
    nbytes = (schema.total_bits + 7) // 8
    clinical = []
    for i in range(m):
        value = int.from_bytes(reader.take(nbytes), "big")
        clinical.append(
            ClinicalBits(value=value, width=schema.total_bits,
                         schema_id=schema.schema_id)
        )
    if not reader.done():
        raise FormatError(
            f"{path}: {len(payload) - reader.pos} trailing bytes after payload"
        )

    records = [
        EmbeddingRecord(id=int(ids[i]), label=labels[int(label_idx[i])],
                        vector=vectors[i].copy())
        for i in range(m)
    ]
    return build_database(records, list(zip((int(i) for i in ids), clinical)),
                          schema)


# ---------------------------------------------------------------------------
# synthetic data


def marker_schema(classes: int) -> ClinicalSchema:
    """One boolean marker field per class; width equals the class count."""
    return ClinicalSchema(fields=tuple(
        FieldSpec(name=f"marker_{c}", kind=BOOLEAN) for c in range(classes)
    ))


def gen_synthetic(classes: int, per_class: int, dim: int,
                  cluster_sep: float, clinical_noise: float,
                  seed: int) -> DatasetBundle:
    """Clustered embeddings plus noisy one-hot clinical signatures.

    Class c's embeddings are unit-variance Gaussians around a center
    placed cluster_sep away from the origin along a random direction, so
    cluster_sep directly controls image-channel separability. Its clinical
    row answers yes to marker_c and no to the others, with each answer
    independently flipped with probability clinical_noise. The same seed
    always reproduces the same bundle.
    """
    if classes < 1 or per_class < 1 or dim < 1:
        raise ValidationError("classes, per_class, and dim must be at least 1")
    if not 0.0 <= clinical_noise <= 0.5:
        raise ValidationError(
            f"clinical_noise must lie in [0, 0.5], got {clinical_noise}"
        )
    if cluster_sep < 0.0:
        raise ValidationError(f"cluster_sep must be nonnegative, got {cluster_sep}")

    rng = np.random.default_rng(seed)
    directions = rng.normal(size=(classes, dim))
    norms = np.linalg.norm(directions, axis=1, keepdims=True)
    norms[norms == 0.0] = 1.0
    centers = cluster_sep * directions / norms

    schema = marker_schema(classes)
    records = []
    rows = []
    next_id = 0
    for c in range(classes):
        points = centers[c] + rng.normal(size=(per_class, dim))
        flips = rng.random(size=(per_class, classes)) < clinical_noise
        for i in range(per_class):
            records.append(EmbeddingRecord(
                id=next_id, label=f"c{c}",
                vector=points[i].astype(np.float32),
            ))
            row = {}
            for j in range(classes):
                value = (j == c) ^ bool(flips[i, j])
                row[f"marker_{j}"] = "yes" if value else "no"
            rows.append((next_id, row))
            next_id += 1
    return DatasetBundle(records=tuple(records), clinical_rows=tuple(rows),
                         schema=schema)
