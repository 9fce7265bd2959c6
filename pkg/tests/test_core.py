import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from kernel_cblb.core import (
    BINARY,
    SIGN,
    BadTreatmentCode,
    CBLBConfig,
    ConfigInfeasible,
    Contribution,
    Dataset,
    IntervalResult,
    LengthMismatch,
    NonFiniteValue,
    to_binary_coding,
    to_sign_coding,
    validate_dataset,
)


def test_well_formed_dataset_validates():
    d = Dataset([1.0, 2.0, 3.0], [0, 1, 0], [[0.1], [0.2], [0.3]])
    validate_dataset(d, BINARY)
    assert d.n == 3 and d.p == 1


def test_bad_treatment_code_names_row():
    d = Dataset([1.0, 2.0, 3.0], [0, 2, 1], np.zeros((3, 1)))
    with pytest.raises(BadTreatmentCode) as info:
        validate_dataset(d, BINARY)
    assert info.value.row == 1


def test_nan_outcome_names_column_and_row():
    d = Dataset([np.nan, 2.0, 3.0], [0, 1, 0], np.zeros((3, 1)))
    with pytest.raises(NonFiniteValue) as info:
        validate_dataset(d, BINARY)
    assert info.value.column == "outcomes" and info.value.row == 0


def test_infinite_covariate_detected():
    X = np.zeros((4, 2))
    X[2, 1] = np.inf
    with pytest.raises(NonFiniteValue) as info:
        validate_dataset(Dataset(np.zeros(4), [0, 1, 0, 1], X), BINARY)
    assert info.value.column == "covariates" and info.value.row == 2


def test_length_mismatch():
    d = Dataset(np.zeros(3), [0, 1], np.zeros((3, 1)))
    with pytest.raises(LengthMismatch):
        validate_dataset(d, BINARY)


def test_mixed_codings_rejected():
    d = Dataset(np.zeros(3), [-1, 0, 1], np.zeros((3, 1)))
    for coding in (BINARY, SIGN):
        with pytest.raises(BadTreatmentCode):
            validate_dataset(d, coding)
    with pytest.raises(BadTreatmentCode):
        d.coding()


def test_sign_coding_rejects_zero():
    d = Dataset(np.zeros(2), [1, 0], np.zeros((2, 1)))
    with pytest.raises(BadTreatmentCode):
        validate_dataset(d, SIGN)


def test_coding_round_trip():
    d = Dataset(np.arange(4.0), [0, 1, 1, 0], np.eye(4))
    s = to_sign_coding(d)
    assert s.treatments.tolist() == [-1, 1, 1, -1]
    assert to_binary_coding(s).treatments.tolist() == [0, 1, 1, 0]
    with pytest.raises(BadTreatmentCode):
        to_sign_coding(s)


def test_dataset_is_read_only_copy():
    y = np.arange(3.0)
    d = Dataset(y, [0, 1, 0], np.zeros((3, 1)))
    y[0] = 99.0
    assert d.outcomes[0] == 0.0
    with pytest.raises(ValueError):
        d.outcomes[0] = 1.0


def test_contribution_rejects_nonfinite_and_empty():
    with pytest.raises(NonFiniteValue):
        Contribution([1.0, np.nan])
    with pytest.raises(ValueError):
        Contribution([])
    assert Contribution([1.0, 3.0]).mean() == 2.0


@pytest.mark.parametrize("kwargs", [
    dict(n_total=10, bag_size=11, n_bags=1, n_replicates=10),
    dict(n_total=10, bag_size=4, n_bags=3, n_replicates=10),
    dict(n_total=10, bag_size=2, n_bags=2, n_replicates=1),
    dict(n_total=10, bag_size=2, n_bags=2, n_replicates=100, alpha=1.0),
    dict(n_total=10, bag_size=2, n_bags=2, n_replicates=100, seed=-1),
])
def test_infeasible_configs(kwargs):
    with pytest.raises(ConfigInfeasible):
        CBLBConfig(**kwargs)


def test_small_r_warns():
    with pytest.warns(UserWarning):
        CBLBConfig(100, 10, 10, 20)


@settings(max_examples=200, deadline=None)
@given(n=st.integers(2, 10**6), gamma=st.floats(0.05, 0.95))
def test_from_gamma_bag_plan(n, gamma):
    cfg = CBLBConfig.from_gamma(n, gamma, 100)
    assert cfg.bag_size == max(1, int(np.floor(n**gamma + 0.5)))
    assert cfg.n_bags == n // cfg.bag_size
    assert 0 <= cfg.n_unused < cfg.bag_size


def test_interval_result_helpers():
    res = IntervalResult(1.0, 0.5, 1.5, 0.2, np.array([[0.5, 1.5]]), 0.0)
    assert res.covers(0.5) and res.covers(1.5) and not res.covers(1.6)
    assert res.width == 1.0
