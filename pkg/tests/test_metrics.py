import numpy as np
import pytest

from oracles import confusion_counts
from vnhgcn.errors import EvalError
from vnhgcn.metrics import f1_scores


def test_perfect():
    r = f1_scores([0, 1, 2, 1], [0, 1, 2, 1])
    assert r.micro_f1 == 1.0 and r.macro_f1 == 1.0


def test_binary_all_zero():
    r = f1_scores([0, 0, 0, 0], [0, 0, 1, 1])
    assert r.micro_f1 == 0.5
    assert abs(r.macro_f1 - 1 / 3) < 1e-15


def test_absent_class_counts_as_zero():
    r = f1_scores([0, 1], [0, 1], num_classes=3)
    assert abs(r.macro_f1 - 2 / 3) < 1e-15


def test_random_matches_oracle(rng):
    for _ in range(20):
        gold = rng.integers(0, 4, size=100)
        pred = rng.integers(0, 4, size=100)
        r = f1_scores(pred, gold, num_classes=4)
        micro, macro = confusion_counts(pred.tolist(), gold.tolist(), 4)
        assert r.micro_f1 == pytest.approx(micro, abs=1e-15)
        assert r.macro_f1 == pytest.approx(macro, abs=1e-15)
        assert r.micro_f1 == np.trace(r.confusion) / r.confusion.sum()
        np.testing.assert_array_equal(r.support, np.bincount(gold, minlength=4))


def test_mask_and_errors():
    r = f1_scores([0, 1, 1], [0, 0, 1], mask=[0, 2])
    assert r.micro_f1 == 1.0
    with pytest.raises(EvalError):
        f1_scores([0], [0], mask=np.array([], dtype=int))
    with pytest.raises(EvalError):
        f1_scores([0, 1], [0])


def test_text_report():
    txt = f1_scores([0, 1], [0, 1]).to_text("demo")
    assert "demo" in txt and "micro" in txt.lower()
