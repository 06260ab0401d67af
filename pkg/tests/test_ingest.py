import json
import struct

import numpy as np
import pytest

from rankfuse.clinical import ClinicalSchema, FieldSpec
from rankfuse.core_index import EmbeddingRecord
from rankfuse.errors import (
    ChecksumError,
    DuplicateIdError,
    FormatError,
    UndeclaredValueError,
    VersionError,
)
from rankfuse.evaluation import split_bundle, evaluate
from rankfuse.ingest import (
    PACKED_BINARY,
    TEXT_TABULAR,
    DatasetBundle,
    gen_synthetic,
    load_bundle,
    load_clinical,
    load_database,
    load_embeddings,
    load_schema,
    save_bundle,
    save_database,
    save_embeddings,
    save_schema,
)


def random_records(rng, m, dim, labels=("a", "b")):
    return [
        EmbeddingRecord(
            id=i,
            label=labels[int(rng.integers(0, len(labels)))],
            vector=rng.normal(size=dim).astype(np.float32) * 10,
        )
        for i in range(m)
    ]


def assert_records_equal(got, want):
    assert len(got) == len(want)
    for g, w in zip(got, want):
        assert g.id == w.id
        assert g.label == w.label
        np.testing.assert_array_equal(g.vector, w.vector)


class TestTextFormat:
    def test_round_trip_bit_identical(self, tmp_path):
        rng = np.random.default_rng(61)
        records = random_records(rng, 20, 7)
        path = tmp_path / "e.csv"
        save_embeddings(records, path, TEXT_TABULAR)
        assert_records_equal(load_embeddings(path, TEXT_TABULAR), records)

    def test_three_rows(self, tmp_path):
        path = tmp_path / "e.csv"
        path.write_text(
            "id,label,4\n"
            "0,a,1.0,2.0,3.0,4.0\n"
            "1,b,0.5,0.5,0.5,0.5\n"
            "2,a,-1.0,0.0,1.0,2.0\n"
        )
        records = load_embeddings(path, TEXT_TABULAR)
        assert len(records) == 3
        assert records[1].label == "b"

    def test_short_row_names_line(self, tmp_path):
        path = tmp_path / "e.csv"
        path.write_text("id,label,4\n0,a,1.0,2.0,3.0,4.0\n1,b,1.0,2.0,3.0\n")
        with pytest.raises(FormatError, match="line 3"):
            load_embeddings(path, TEXT_TABULAR)

    def test_bad_header(self, tmp_path):
        path = tmp_path / "e.csv"
        path.write_text("id,name,4\n")
        with pytest.raises(FormatError, match="line 1"):
            load_embeddings(path, TEXT_TABULAR)

    def test_non_numeric_value_names_line(self, tmp_path):
        path = tmp_path / "e.csv"
        path.write_text("id,label,2\n0,a,1.0,oops\n")
        with pytest.raises(FormatError, match="line 2"):
            load_embeddings(path, TEXT_TABULAR)

    def test_duplicate_ids(self, tmp_path):
        path = tmp_path / "e.csv"
        path.write_text("id,label,1\n3,a,1.0\n3,b,2.0\n")
        with pytest.raises(DuplicateIdError):
            load_embeddings(path, TEXT_TABULAR)

    def test_loads_ascending_ids(self, tmp_path):
        path = tmp_path / "e.csv"
        path.write_text("id,label,1\n5,a,1.0\n2,b,2.0\n")
        records = load_embeddings(path, TEXT_TABULAR)
        assert [r.id for r in records] == [2, 5]


class TestBinaryFormat:
    def test_round_trip_bit_identical(self, tmp_path):
        rng = np.random.default_rng(62)
        records = random_records(rng, 33, 5, labels=("x", "y", "z"))
        path = tmp_path / "e.bin"
        save_embeddings(records, path, PACKED_BINARY)
        assert_records_equal(load_embeddings(path, PACKED_BINARY), records)

    def test_truncated_file_fails_checksum(self, tmp_path):
        rng = np.random.default_rng(63)
        path = tmp_path / "e.bin"
        save_embeddings(random_records(rng, 10, 4), path, PACKED_BINARY)
        data = path.read_bytes()
        path.write_bytes(data[: len(data) - 12])
        with pytest.raises(ChecksumError):
            load_embeddings(path, PACKED_BINARY)

    def test_flipped_byte_fails_checksum(self, tmp_path):
        rng = np.random.default_rng(64)
        path = tmp_path / "e.bin"
        save_embeddings(random_records(rng, 10, 4), path, PACKED_BINARY)
        data = bytearray(path.read_bytes())
        data[30] ^= 0xFF
        path.write_bytes(bytes(data))
        with pytest.raises(ChecksumError):
            load_embeddings(path, PACKED_BINARY)

    def test_wrong_magic(self, tmp_path):
        rng = np.random.default_rng(65)
        path = tmp_path / "e.bin"
        save_embeddings(random_records(rng, 4, 2), path, PACKED_BINARY)
        data = bytearray(path.read_bytes())
        data[0] = ord("X")
        path.write_bytes(bytes(data))
        with pytest.raises(FormatError, match="magic"):
            load_embeddings(path, PACKED_BINARY)

    def test_newer_version_rejected(self, tmp_path):
        rng = np.random.default_rng(66)
        path = tmp_path / "e.bin"
        save_embeddings(random_records(rng, 4, 2), path, PACKED_BINARY)
        data = bytearray(path.read_bytes())
        struct.pack_into("<I", data, 4, 99)
        path.write_bytes(bytes(data))
        with pytest.raises(VersionError):
            load_embeddings(path, PACKED_BINARY)


class TestClinicalFile:
    def test_load_and_encode(self, tmp_path, demo_schema):
        path = tmp_path / "c.csv"
        path.write_text(
            "id,gender,smoker,age\n0,M,yes,35\n1,F,no,55\n"
        )
        pairs = load_clinical(path, demo_schema)
        assert [rid for rid, _ in pairs] == [0, 1]
        assert pairs[0][1].bits() == (1, 0, 1, 1, 0, 0)

    def test_header_mismatch(self, tmp_path, demo_schema):
        path = tmp_path / "c.csv"
        path.write_text("id,sex,smoker,age\n0,M,yes,35\n")
        with pytest.raises(FormatError, match="header"):
            load_clinical(path, demo_schema)

    def test_bad_value_names_field_and_line(self, tmp_path, demo_schema):
        path = tmp_path / "c.csv"
        path.write_text(
            "id,gender,smoker,age\n0,M,yes,35\n1,F,maybe,55\n"
        )
        with pytest.raises(UndeclaredValueError, match="line 3") as info:
            load_clinical(path, demo_schema)
        assert "smoker" in str(info.value)

    def test_duplicate_ids(self, tmp_path, demo_schema):
        path = tmp_path / "c.csv"
        path.write_text("id,gender,smoker,age\n0,M,yes,35\n0,F,no,55\n")
        with pytest.raises(DuplicateIdError):
            load_clinical(path, demo_schema)


class TestSchemaFile:
    def test_round_trip(self, tmp_path, demo_schema):
        path = tmp_path / "schema.json"
        save_schema(demo_schema, path)
        loaded = load_schema(path)
        assert loaded == demo_schema
        assert loaded.schema_id == demo_schema.schema_id

    def test_invalid_json(self, tmp_path):
        path = tmp_path / "schema.json"
        path.write_text("{nope")
        with pytest.raises(FormatError):
            load_schema(path)

    def test_missing_keys(self, tmp_path):
        path = tmp_path / "schema.json"
        path.write_text('{"something": []}')
        with pytest.raises(FormatError):
            load_schema(path)


class TestBundle:
    @pytest.mark.parametrize("fmt", [TEXT_TABULAR, PACKED_BINARY])
    def test_round_trip(self, tmp_path, fmt):
        bundle = gen_synthetic(classes=2, per_class=8, dim=5,
                               cluster_sep=3.0, clinical_noise=0.1, seed=3)
        save_bundle(bundle, tmp_path / "b", format=fmt)
        loaded = load_bundle(tmp_path / "b")
        assert_records_equal(loaded.records, bundle.records)
        assert loaded.clinical_rows == bundle.clinical_rows
        assert loaded.schema == bundle.schema
        assert loaded.manifest["per_class"] == {"c0": 8, "c1": 8}
        assert loaded.manifest["dim"] == 5
        assert loaded.manifest["bit_width"] == 2

    def test_tampered_file_fails_checksum(self, tmp_path):
        bundle = gen_synthetic(classes=2, per_class=4, dim=3,
                               cluster_sep=1.0, clinical_noise=0.0, seed=4)
        directory = save_bundle(bundle, tmp_path / "b")
        target = directory / "clinical.csv"
        target.write_text(target.read_text().replace("yes", "no", 1))
        with pytest.raises(ChecksumError):
            load_bundle(directory)

    def test_missing_manifest(self, tmp_path):
        with pytest.raises(FormatError, match="manifest"):
            load_bundle(tmp_path)

    def test_manifest_dim_mismatch(self, tmp_path):
        bundle = gen_synthetic(classes=2, per_class=4, dim=3,
                               cluster_sep=1.0, clinical_noise=0.0, seed=5)
        directory = save_bundle(bundle, tmp_path / "b")
        manifest_path = directory / "manifest.json"
        manifest = json.loads(manifest_path.read_text())
        manifest["dim"] = 99
        manifest_path.write_text(json.dumps(manifest))
        with pytest.raises(FormatError, match="dim"):
            load_bundle(directory)

    def test_mismatched_ids_rejected(self, demo_schema):
        records = (EmbeddingRecord(id=0, label="a", vector=[1.0]),)
        rows = ((1, {"gender": "M", "smoker": "no", "age": 30}),)
        with pytest.raises(Exception):
            DatasetBundle(records=records, clinical_rows=rows,
                          schema=demo_schema)


class TestDatabaseFile:
    def test_round_trip_deep_equality(self, tmp_path, demo_database):
        path = tmp_path / "x.db"
        save_database(demo_database, path)
        loaded = load_database(path)
        np.testing.assert_array_equal(loaded.index.ids,
                                      demo_database.index.ids)
        assert loaded.index.labels == demo_database.index.labels
        np.testing.assert_array_equal(loaded.index.vectors,
                                      demo_database.index.vectors)
        assert loaded.schema == demo_database.schema
        assert [c.value for c in loaded.clinical] == \
            [c.value for c in demo_database.clinical]
        assert loaded.schema.schema_id == demo_database.schema.schema_id

    def test_truncated_is_checksum_error(self, tmp_path, demo_database):
        path = tmp_path / "x.db"
        save_database(demo_database, path)
        data = path.read_bytes()
        path.write_bytes(data[: len(data) // 2])
        with pytest.raises(ChecksumError):
            load_database(path)

    def test_newer_version_rejected(self, tmp_path, demo_database):
        path = tmp_path / "x.db"
        save_database(demo_database, path)
        data = bytearray(path.read_bytes())
        struct.pack_into("<I", data, 4, 2)
        path.write_bytes(bytes(data))
        with pytest.raises(VersionError):
            load_database(path)

    def test_wrong_magic(self, tmp_path, demo_database):
        path = tmp_path / "x.db"
        save_database(demo_database, path)
        data = bytearray(path.read_bytes())
        data[:4] = b"ZZZZ"
        path.write_bytes(bytes(data))
        with pytest.raises(FormatError, match="magic"):
            load_database(path)


class TestGenSynthetic:
    def test_same_seed_identical(self):
        a = gen_synthetic(classes=3, per_class=5, dim=4, cluster_sep=2.0,
                          clinical_noise=0.2, seed=9)
        b = gen_synthetic(classes=3, per_class=5, dim=4, cluster_sep=2.0,
                          clinical_noise=0.2, seed=9)
        assert_records_equal(a.records, b.records)
        assert a.clinical_rows == b.clinical_rows
        assert a.schema == b.schema

    def test_different_seed_differs(self):
        a = gen_synthetic(classes=2, per_class=5, dim=4, cluster_sep=2.0,
                          clinical_noise=0.0, seed=1)
        b = gen_synthetic(classes=2, per_class=5, dim=4, cluster_sep=2.0,
                          clinical_noise=0.0, seed=2)
        assert not np.array_equal(a.records[0].vector, b.records[0].vector)

    def test_invalid_parameters(self):
        with pytest.raises(Exception):
            gen_synthetic(classes=0, per_class=5, dim=4, cluster_sep=1.0,
                          clinical_noise=0.0, seed=1)
        with pytest.raises(Exception):
            gen_synthetic(classes=2, per_class=5, dim=4, cluster_sep=1.0,
                          clinical_noise=0.6, seed=1)
        with pytest.raises(Exception):
            gen_synthetic(classes=2, per_class=5, dim=4, cluster_sep=-1.0,
                          clinical_noise=0.1, seed=1)

    def test_noise_free_bits_are_class_signatures(self):
        bundle = gen_synthetic(classes=3, per_class=4, dim=2,
                               cluster_sep=1.0, clinical_noise=0.0, seed=6)
        for rec, (rid, row) in zip(bundle.records, bundle.clinical_rows):
            assert rec.id == rid
            c = int(rec.label[1:])
            for j in range(3):
                expected = "yes" if j == c else "no"
                assert row[f"marker_{j}"] == expected

    def test_passes_database_invariants(self):
        bundle = gen_synthetic(classes=2, per_class=6, dim=3,
                               cluster_sep=2.0, clinical_noise=0.3, seed=7)
        db = bundle.to_database()
        assert db.size == 12

    def test_wide_separation_perfect_accuracy(self):
        bundle = gen_synthetic(classes=3, per_class=30, dim=16,
                               cluster_sep=50.0, clinical_noise=0.0, seed=8)
        db, cases = split_bundle(bundle, seed=1)
        assert evaluate(db, cases, "cbir").top1 == 1.0
        assert evaluate(db, cases, "cbidr", weights=(0.5, 0.5)).top1 == 1.0

    def test_uninformative_image_channel(self):
        # centers coincide, so embeddings say nothing; clean clinical bits
        # still pin the class exactly
        bundle = gen_synthetic(classes=3, per_class=60, dim=16,
                               cluster_sep=0.0, clinical_noise=0.0, seed=9)
        db, cases = split_bundle(bundle, seed=2)
        image_only = evaluate(db, cases, "cbir")
        fused = evaluate(db, cases, "cbidr", weights=(0.5, 0.5))
        assert fused.top1 == 1.0
        assert 0.1 < image_only.top1 < 0.6
