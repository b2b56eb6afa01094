import numpy as np
import pytest

from fredf.metrics import MetricReport, mae, mase, mse, owa, seasonal_naive, smape


def test_pointwise_metrics(rng):
    a, b = rng.standard_normal((10, 3)), rng.standard_normal((10, 3))
    assert mse(a, b) == pytest.approx(sum((x - y) ** 2 for x, y in zip(a.ravel(), b.ravel())) / 30)
    assert mae(a, b) == pytest.approx(sum(abs(x - y) for x, y in zip(a.ravel(), b.ravel())) / 30)
    with pytest.raises(ValueError):
        mse(a, b[:5])


def test_smape_hand_values():
    assert smape([1.0, 2.0], [1.0, 2.0]) == 0.0
    assert smape([0.0], [5.0]) == pytest.approx(200.0)
    assert smape([3.0], [1.0]) == pytest.approx(100.0)  # 200 * 2 / 4
    assert smape([0.0, 1.0], [0.0, 1.0]) == 0.0  # 0/0 term counted as zero


def test_mase_hand_value():
    insample = np.array([1.0, 3.0, 2.0, 4.0])  # lag-1 naive errors 2, 1, 2 -> 5/3
    assert mase([5.0, 5.0], [4.0, 6.0], insample) == pytest.approx(1.0 / (5 / 3))


def test_mase_seasonal_and_multi_series():
    ins = np.column_stack([np.tile([1.0, 2.0], 4), np.arange(8.0)])
    f = np.zeros((2, 2))
    y = np.ones((2, 2))
    # series 0 seasonal lag-2 error is zero -> undefined
    with pytest.raises(ValueError):
        mase(f, y, ins, m=2)
    ins[:, 0] += np.arange(8)
    # both series now have lag-2 naive error 2
    assert mase(f, y, ins, m=2) == pytest.approx(0.5)


def test_seasonal_naive_repeats_last_season():
    ins = np.array([1, 2, 3, 4, 5, 6.0])
    np.testing.assert_array_equal(seasonal_naive(ins, 5, 3), [4, 5, 6, 4, 5])
    np.testing.assert_array_equal(seasonal_naive(ins, 2, 1), [6, 6])


def test_owa_of_reference_is_one():
    assert owa(12.0, 1.3, 12.0, 1.3) == 1.0
    assert owa(6.0, 1.3, 12.0, 1.3) == pytest.approx(0.75)
    with pytest.raises(ValueError):
        owa(1.0, 1.0, 0.0, 1.0)


def test_report_dict():
    d = MetricReport(mse=1.0, mae=0.5, n_windows=3).to_dict()
    assert d == {"mse": 1.0, "mae": 0.5, "n_windows": 3, "smape": None, "mase": None, "owa": None}
