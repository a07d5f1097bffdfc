import numpy as np
import pytest
from hypothesis import given, strategies as st
from hypothesis.extra.numpy import arrays

from caraprune.errors import BothZero, TargetUnreachable, UnalignableSupports, ValidationError
from caraprune.measure import (
    DiscreteMeasure,
    SupportAlignment,
    append_nodes,
    perturb_weights,
    total_mass,
    tv_distance,
)

pos_weights = arrays(np.float64, st.integers(2, 30), elements=st.floats(1e-3, 1e3))


def test_total_mass_examples():
    assert total_mass(DiscreteMeasure([0, 0.5, 1], [1 / 3, 1 / 3, 1 / 3])) == pytest.approx(1.0, abs=1e-15)
    assert total_mass(DiscreteMeasure(np.zeros((0, 1)), [])) == 0.0
    assert total_mass(DiscreteMeasure([0, 1], [0.5, 2.5])) == 3.0


def test_construction_validates():
    with pytest.raises(ValidationError):
        DiscreteMeasure([0, 1], [1.0])
    with pytest.raises(ValidationError):
        DiscreteMeasure([0, 1], [1.0, -1.0])
    with pytest.raises(ValidationError):
        DiscreteMeasure([0, 1], [1.0, 0.0], strict=True)
    m = DiscreteMeasure([0, 1], [1.0, 0.0])
    with pytest.raises(ValueError):
        m.weights[0] = 2.0
    assert DiscreteMeasure([[0, 1], [2, 3]], [1, 1]).dim == 2


def test_tv_examples():
    a = DiscreteMeasure([0.3], [3.0])
    assert tv_distance(a, a) == 0.0
    assert tv_distance(a, DiscreteMeasure([0.3], [1.0])) == 0.5
    assert tv_distance(DiscreteMeasure([0, 1], [1, 0]), DiscreteMeasure([0, 1], [0, 1])) == 1.0


def test_tv_alignment_errors():
    with pytest.raises(UnalignableSupports):
        tv_distance(DiscreteMeasure([0, 1], [1, 1]), DiscreteMeasure([0, 2], [1, 1]))
    with pytest.raises(BothZero):
        tv_distance(DiscreteMeasure([0], [0.0]), DiscreteMeasure([0], [0.0]))


def test_tv_tail_and_coordinate_alignment():
    a = DiscreteMeasure([0, 1], [1, 1])
    b = DiscreteMeasure([0, 1, 2], [1, 1, 2])
    assert tv_distance(a, b) == pytest.approx(2 / 6)
    c = DiscreteMeasure([1, 0], [1, 1])
    assert tv_distance(a, c, SupportAlignment.BY_COORDINATE_EXACT) == 0.0


@given(pos_weights, st.data())
def test_tv_metric_properties(w, data):
    v = data.draw(arrays(np.float64, w.shape, elements=st.floats(0, 1e3)))
    x = np.arange(len(w), dtype=float)
    a, b = DiscreteMeasure(x, w), DiscreteMeasure(x, v)
    d = tv_distance(a, b)
    assert 0.0 <= d <= 1.0 + 1e-15
    assert d == tv_distance(b, a)
    assert tv_distance(a, a) == 0.0


def test_perturb_zero_is_identity():
    m = DiscreteMeasure([0, 1, 2], [1, 2, 3])
    out = perturb_weights(m, 0.0, 1)
    assert np.array_equal(out.weights, m.weights)


def test_perturb_two_weights():
    m = DiscreteMeasure([0, 1], [1.0, 1.0])
    out = perturb_weights(m, 0.25, 3)
    assert sorted(out.weights) == pytest.approx([0.5, 1.5])
    assert tv_distance(m, out) == pytest.approx(0.25)


@pytest.mark.parametrize("delta", [1e-12, 1e-9, 1e-6, 1e-3])
def test_perturb_hits_target_uniform(delta):
    M = 1000
    m = DiscreteMeasure(np.linspace(0, 1, M), np.full(M, 1 / M))
    out = perturb_weights(m, delta, 11)
    assert abs(tv_distance(m, out) - delta) <= 0.01 * delta
    assert np.all(out.weights > 0)
    assert np.array_equal(out.nodes, m.nodes)
    assert out.weights.sum() == pytest.approx(1.0, abs=1e-14)


def test_perturb_deterministic_and_unreachable():
    m = DiscreteMeasure(np.arange(10.0), np.ones(10))
    assert np.array_equal(perturb_weights(m, 0.01, 5).weights, perturb_weights(m, 0.01, 5).weights)
    with pytest.raises(TargetUnreachable):
        perturb_weights(m, 0.9, 5)


def test_append_examples():
    m = DiscreteMeasure([0.0], [1.0])
    out = append_nodes(m, [0.5], 1e-9)
    assert out.weights[1] == pytest.approx(2e-9 / (1 - 1e-9), rel=1e-15)
    m = DiscreteMeasure([0.0, 1.0], [0.5, 0.5])
    out = append_nodes(m, np.linspace(0, 1, 10), 0.2)
    assert np.allclose(out.weights[2:], 0.05)
    assert tv_distance(m, out) == pytest.approx(0.2)
    tiny = append_nodes(m, [0.3], 1e-300)
    assert tiny.weights[-1] < 1e-299


@pytest.mark.parametrize("delta", [10.0**-e for e in range(2, 13)])
def test_append_round_trip(delta):
    m = DiscreteMeasure(np.arange(5.0), [1, 2, 3, 4, 5])
    out = append_nodes(m, [7.0, 8.0, 9.0], delta)
    assert abs(tv_distance(m, out) - delta) <= 0.01 * delta
    assert np.array_equal(out.nodes[:5], m.nodes)
    assert np.array_equal(out.weights[:5], m.weights)
