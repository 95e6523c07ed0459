import json

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st
from hypothesis.extra.numpy import arrays

from conftest import random_model
from vargplvm.bound import lower_bound
from vargplvm.errors import DataFileError
from vargplvm.io import (decode_array, encode_array, load_model, model_from_dict,
                         model_to_dict, read_csv, save_model, write_csv)


def _params_equal(a, b):
    np.testing.assert_array_equal(a.get_params(), b.get_params())
    np.testing.assert_array_equal(a.fixed_mask(), b.fixed_mask())


@pytest.mark.parametrize("variant", ["standard", "dynamical", "uncertain"])
@pytest.mark.parametrize("precision", ["decimal", "base64"])
def test_model_round_trip_is_bit_exact(tmp_path, variant, precision):
    model = random_model(variant, seed=3)
    path = tmp_path / "m.json"
    save_model(path, model, precision)
    back = load_model(path)
    _params_equal(model, back)
    assert lower_bound(back) == lower_bound(model)
    assert back.variant == model.variant


def test_format_version_checked():
    d = model_to_dict(random_model("standard", seed=0))
    d["format_version"] = 99
    with pytest.raises(DataFileError):
        model_from_dict(d)


def test_load_errors(tmp_path):
    with pytest.raises(DataFileError):
        load_model(tmp_path / "absent.json")
    bad = tmp_path / "bad.json"
    bad.write_text("{not json")
    with pytest.raises(DataFileError, match="line 1"):
        load_model(bad)
    bad.write_text(json.dumps({"format_version": 1}))
    with pytest.raises(DataFileError):
        load_model(bad)


@settings(max_examples=30, deadline=None)
@given(arrays(np.float64, st.tuples(st.integers(0, 4), st.integers(1, 4)),
              elements=st.floats(allow_nan=False, allow_infinity=False, width=64)),
       st.sampled_from(["decimal", "base64"]))
def test_array_codec_round_trip(a, precision):
    d = json.loads(json.dumps(encode_array(a, precision)))
    np.testing.assert_array_equal(decode_array(d), a)


def test_csv_missing_values_and_header(tmp_path):
    path = tmp_path / "d.csv"
    path.write_text("a,b,c\n1,,3\n\n4,5.5,\n")
    X, names = read_csv(path, header=True)
    assert names == ["a", "b", "c"]
    np.testing.assert_array_equal(np.isnan(X), [[False, True, False], [False, False, True]])
    assert X[1, 1] == 5.5


def test_csv_round_trip(tmp_path):
    X = np.array([[0.1, np.nan], [1e-300, -2.5]])
    path = tmp_path / "x.csv"
    write_csv(path, X, header=["u", "v"])
    Y, names = read_csv(path, header=True)
    assert names == ["u", "v"]
    np.testing.assert_array_equal(Y, X)


def test_csv_malformed_line_is_named(tmp_path):
    path = tmp_path / "d.csv"
    path.write_text("1,2\n3,4\n5\n")
    with pytest.raises(DataFileError, match="line 3"):
        read_csv(path)
    path.write_text("1,2\nx,4\n")
    with pytest.raises(DataFileError, match="line 2"):
        read_csv(path)
