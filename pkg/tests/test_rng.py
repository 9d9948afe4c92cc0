from fractions import Fraction

import numpy as np

from condexit._util import content_hash, frac_str, number_record, parse_frac
from condexit.rng import RNG_ALGORITHM, make_rng, stream_key


def test_streams_replay():
    a = make_rng(5, "paths", 3).random(100)
    b = make_rng(5, "paths", 3).random(100)
    assert np.array_equal(a, b)


def test_labels_separate_streams():
    a = make_rng(5, "paths", 3).random(100)
    assert not np.array_equal(a, make_rng(5, "paths", 4).random(100))
    assert not np.array_equal(a, make_rng(6, "paths", 3).random(100))
    assert stream_key(1, "a") != stream_key(1, "a", "")


def test_algorithm_identifier():
    assert RNG_ALGORITHM.startswith("philox")
    assert isinstance(make_rng(0).bit_generator, np.random.Philox)


def test_number_formatting():
    assert frac_str(Fraction(3, 6)) == "1/2"
    assert frac_str(2) == "2/1"
    assert parse_frac("1/2") == Fraction(1, 2)
    assert parse_frac("0.25") == 0.25
    assert number_record(Fraction(1, 3))["den"] == "3"
    assert content_hash({"a": 1, "b": 2}) == content_hash({"b": 2, "a": 1})
