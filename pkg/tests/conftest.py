import numpy as np
import pytest

from rankfuse.clinical import ClinicalSchema, FieldSpec, encode
from rankfuse.core_index import EmbeddingRecord
from rankfuse.retrieval import build_database


@pytest.fixture
def demo_schema():
    """Three mixed-kind fields: 2 + 1 + 3 = 6 bits."""
    return ClinicalSchema(fields=(
        FieldSpec(name="gender", kind="categorical", values=("M", "F")),
        FieldSpec(name="smoker", kind="boolean"),
        FieldSpec(name="age", kind="numeric", bins=(0, 40, 60, 120)),
    ))


def make_database(schema, rows, vectors, labels):
    """Build a database from parallel lists; ids are positional."""
    records = [
        EmbeddingRecord(id=i, label=labels[i],
                        vector=np.asarray(vectors[i], dtype=np.float32))
        for i in range(len(vectors))
    ]
    pairs = [(i, encode(rows[i], schema)) for i in range(len(rows))]
    return build_database(records, pairs, schema)


@pytest.fixture
def demo_database(demo_schema):
    rows = [
        {"gender": "M", "smoker": "yes", "age": 35},
        {"gender": "F", "smoker": "no", "age": 55},
        {"gender": "M", "smoker": "no", "age": 70},
        {"gender": "F", "smoker": "yes", "age": 20},
        {"gender": "M", "smoker": "yes", "age": 61},
    ]
    vectors = [
        (0.0, 0.0), (3.0, 4.0), (6.0, 8.0), (1.0, 1.0), (-2.0, 5.0),
    ]
    labels = ["a", "b", "b", "a", "c"]
    return make_database(demo_schema, rows, vectors, labels)
