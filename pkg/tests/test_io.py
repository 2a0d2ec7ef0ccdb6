import json

import numpy as np
import pytest
from hypothesis import given, strategies as st

from aprank.io import (
    FormatError, dumps, load, load_decomposition, load_tensor, loads, save,
)
from aprank.tensor import Decomposition, SymmetricTensor, materialize

from conftest import random_decomposition, random_tensor


@given(st.integers(1, 5), st.integers(0, 5), st.integers(0, 2 ** 32 - 1))
def test_tensor_roundtrip_bit_exact(n, d, seed):
    f = random_tensor(np.random.default_rng(seed), n, d)
    g = loads(dumps(f))
    assert isinstance(g, SymmetricTensor)
    np.testing.assert_array_equal(f.coeffs, g.coeffs)


@given(st.integers(1, 5), st.integers(0, 5), st.integers(0, 8), st.integers(0, 2 ** 32 - 1))
def test_decomposition_roundtrip_bit_exact(n, d, m, seed):
    D = random_decomposition(np.random.default_rng(seed), n, d, m)
    E = loads(dumps(D))
    assert isinstance(E, Decomposition)
    np.testing.assert_array_equal(D.coeffs, E.coeffs)
    np.testing.assert_array_equal(D.vectors, E.vectors)
    assert dumps(E) == dumps(D)


def test_sparse_tensor_file(tmp_path):
    f = SymmetricTensor.from_dict(3, 2, {(2, 0, 0): 1.0, (0, 1, 1): -2.0})
    save(f, tmp_path / "f.json")
    data = json.loads((tmp_path / "f.json").read_text())
    assert data["kind"] == "tensor" and len(data["coeffs"]) == 2
    np.testing.assert_array_equal(load(tmp_path / "f.json").coeffs, f.coeffs)


def test_load_tensor_materializes(tmp_path, rng):
    D = random_decomposition(rng, 3, 3, 4)
    save(D, tmp_path / "d.json")
    np.testing.assert_allclose(load_tensor(tmp_path / "d.json").coeffs, materialize(D).coeffs)
    save(materialize(D), tmp_path / "t.json")
    with pytest.raises(FormatError, match="expected a decomposition"):
        load_decomposition(tmp_path / "t.json")


def test_kind_inferred():
    assert isinstance(loads('{"n": 2, "d": 1, "terms": []}'), Decomposition)
    assert isinstance(loads('{"n": 2, "d": 1, "coeffs": []}'), SymmetricTensor)


@pytest.mark.parametrize("text,match", [
    ("{not json", "malformed JSON"),
    ("[1, 2]", "top level"),
    ('{"kind": "matrix", "n": 2, "d": 2}', "unknown kind"),
    ('{"kind": "tensor", "d": 2, "coeffs": []}', "missing field 'n'"),
    ('{"kind": "tensor", "n": 0, "d": 2, "coeffs": []}', "positive integer"),
    ('{"kind": "tensor", "n": 2, "d": 2, "coeffs": {}}', "must be a list"),
    ('{"kind": "tensor", "n": 2, "d": 2, "coeffs": [{"alpha": [1, 0], "value": 1}]}', "degree-2"),
    ('{"kind": "tensor", "n": 2, "d": 2, "coeffs": [{"alpha": [2, 0], "value": "x"}]}', "finite number"),
    ('{"kind": "tensor", "n": 2, "d": 2, "coeffs": [{"alpha": [2, 0], "value": NaN}]}', "finite number"),
    ('{"kind": "tensor", "n": 2, "d": 2, "coeffs": [{"alpha": [2, 0], "value": 1},'
     ' {"alpha": [2, 0], "value": 2}]}', "twice"),
    ('{"kind": "tensor", "n": 2, "d": 2, "coeffs": [{"value": 1}]}', "needs 'alpha'"),
    ('{"kind": "decomposition", "n": 2, "d": 2, "terms": [{"coeff": 1, "vector": [1]}]}', "length n=2"),
    ('{"kind": "decomposition", "n": 2, "d": 2, "terms": [{"coeff": 1, "vector": [0, 0]}]}', "zero vector"),
    ('{"kind": "decomposition", "n": 2, "d": 2, "terms": [{"coeff": true, "vector": [1, 0]}]}',
     "finite number"),
])
def test_malformed_inputs(text, match):
    with pytest.raises(FormatError, match=match):
        loads(text)


def test_missing_file(tmp_path):
    with pytest.raises(FormatError, match="cannot read"):
        load(tmp_path / "nope.json")
