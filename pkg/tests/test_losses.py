import numpy as np
import pytest

from uodkit.errors import DataError, DegenerateEmbeddingError
from uodkit.losses import (
    LossConfig,
    LossValue,
    NormalizedRect,
    ViewGeometry,
    align_loss,
    graph_loss,
    info_nce,
    numeric_gradient,
    overlap_region,
    resample_region,
    sup_contrastive,
    total_loss,
)
from uodkit.types import EmbeddingBatch, FeatureMap
from uodkit.weak_labels import WeakLabelMatrix


def rel_err(got, want):
    return np.linalg.norm(got - want) / max(np.linalg.norm(want), 1e-12)


def random_labels(rng, n):
    y = np.zeros((n, n), dtype=np.uint8)
    upper = np.triu_indices(n, 1)
    y[upper] = rng.integers(0, 2, size=len(upper[0]))
    y = y + y.T
    return WeakLabelMatrix(n, y)


# -- info_nce ---------------------------------------------------------------

def test_info_nce_single_pair_is_zero():
    rng = np.random.Generator(np.random.PCG64(0))
    for _ in range(10):
        a = EmbeddingBatch.from_array(rng.standard_normal((1, 5)))
        b = EmbeddingBatch.from_array(rng.standard_normal((1, 5)))
        lv = info_nce(a, b, LossConfig(tau=float(rng.uniform(0.05, 2.0))))
        assert lv.value == pytest.approx(0.0, abs=1e-12)
        assert np.allclose(lv.gradients["views_a"], 0.0, atol=1e-12)


def test_info_nce_worked_example():
    rows = np.array([[1.0, 0.0], [0.0, 1.0]])
    batch = EmbeddingBatch.from_array(rows)
    lv = info_nce(batch, batch, LossConfig(tau=1.0))
    assert lv.value == pytest.approx(np.log((np.e + 2) / np.e), rel=1e-12)


def test_info_nce_non_negative():
    rng = np.random.Generator(np.random.PCG64(1))
    for _ in range(50):
        n, d = int(rng.integers(1, 9)), int(rng.integers(2, 17))
        a = EmbeddingBatch.from_array(rng.standard_normal((n, d)))
        b = EmbeddingBatch.from_array(rng.standard_normal((n, d)))
        assert info_nce(a, b, LossConfig()).value >= 0.0


def test_info_nce_scale_invariance():
    rng = np.random.Generator(np.random.PCG64(2))
    a = rng.standard_normal((4, 6))
    b = rng.standard_normal((4, 6))
    base = info_nce(EmbeddingBatch.from_array(a), EmbeddingBatch.from_array(b), LossConfig())
    a2 = a.copy()
    a2[1] *= 7.5
    scaled = info_nce(EmbeddingBatch.from_array(a2), EmbeddingBatch.from_array(b), LossConfig())
    assert scaled.value == pytest.approx(base.value, rel=1e-12)


def test_info_nce_zero_norm_rejected():
    a = EmbeddingBatch.from_array(np.array([[0.0, 0.0], [1.0, 0.0]]))
    b = EmbeddingBatch.from_array(np.ones((2, 2)))
    with pytest.raises(DegenerateEmbeddingError):
        info_nce(a, b, LossConfig())


# -- sup_contrastive -----------------------------------------------------------

def test_sup_contrastive_no_positives():
    rng = np.random.Generator(np.random.PCG64(3))
    v = EmbeddingBatch.from_array(rng.standard_normal((4, 5)))
    y = WeakLabelMatrix(4, np.zeros((4, 4), dtype=np.uint8))
    lv = sup_contrastive(v, y, LossConfig())
    assert lv.value == 0.0
    assert np.allclose(lv.gradients["v"], 0.0)


def test_sup_contrastive_worked_example():
    v = EmbeddingBatch.from_array(np.array([[1.0, 0.0], [1.0, 0.0], [0.0, 1.0]]))
    y = np.zeros((3, 3), dtype=np.uint8)
    y[0, 1] = y[1, 0] = 1
    lv = sup_contrastive(v, WeakLabelMatrix(3, y), LossConfig(tau=1.0))
    expected = 2 * np.log((np.e + 1) / np.e) / 3
    assert lv.value == pytest.approx(expected, rel=1e-12)


def test_sup_contrastive_identical_pair_zero():
    v = EmbeddingBatch.from_array(np.array([[0.5, 0.5], [0.5, 0.5]]))
    y = np.array([[0, 1], [1, 0]], dtype=np.uint8)
    lv = sup_contrastive(v, WeakLabelMatrix(2, y), LossConfig(tau=0.7))
    assert lv.value == pytest.approx(0.0, abs=1e-12)


# -- graph_loss --------------------------------------------------------------------

def test_graph_loss_zero_labels():
    rng = np.random.Generator(np.random.PCG64(4))
    v1 = EmbeddingBatch.from_array(rng.standard_normal((3, 4)))
    v2 = EmbeddingBatch.from_array(rng.standard_normal((3, 4)))
    zero = WeakLabelMatrix(3, np.zeros((3, 3), dtype=np.uint8))
    assert graph_loss(v1, v2, zero, zero, LossConfig()).value == 0.0


def test_graph_loss_exchange_symmetry():
    rng = np.random.Generator(np.random.PCG64(5))
    v1 = EmbeddingBatch.from_array(rng.standard_normal((5, 4)))
    v2 = EmbeddingBatch.from_array(rng.standard_normal((5, 4)))
    y1 = random_labels(rng, 5)
    y2 = random_labels(rng, 5)
    cfg = LossConfig()
    a = graph_loss(v1, v2, y1, y2, cfg)
    b = graph_loss(v2, v1, y2, y1, cfg)
    assert a.value == pytest.approx(b.value, rel=1e-15)
    assert np.array_equal(a.gradients["v1"], b.gradients["v2"])


def test_graph_loss_reduces_to_sup_when_one_side_empty():
    v = EmbeddingBatch.from_array(np.array([[1.0, 0.0], [1.0, 0.0], [0.0, 1.0]]))
    y = np.zeros((3, 3), dtype=np.uint8)
    y[0, 1] = y[1, 0] = 1
    ym = WeakLabelMatrix(3, y)
    zero = WeakLabelMatrix(3, np.zeros((3, 3), dtype=np.uint8))
    cfg = LossConfig(tau=1.0)
    # y2 = zero kills the first term; the second is sup(v2, y1)
    lv = graph_loss(v, v, zero, ym, cfg)
    assert lv.value == pytest.approx(2 * np.log((np.e + 1) / np.e) / 3, rel=1e-12)


# -- overlap_region -------------------------------------------------------------------

def test_overlap_identical_geometries():
    g = ViewGeometry(4.0, 2.0, 30.0, 20.0)
    rect_i, rect_j = overlap_region(g, g)
    for rect in (rect_i, rect_j):
        assert rect == NormalizedRect(0.0, 0.0, 1.0, 1.0)


def test_overlap_disjoint_crops():
    a = ViewGeometry(0.0, 0.0, 10.0, 10.0)
    b = ViewGeometry(20.0, 0.0, 10.0, 10.0)
    assert overlap_region(a, b) is None


def test_overlap_half_crops():
    # A is the left half, B is the middle half: overlap is the second quarter
    a = ViewGeometry(0.0, 0.0, 32.0, 64.0)
    b = ViewGeometry(16.0, 0.0, 32.0, 64.0)
    rect_a, rect_b = overlap_region(a, b)
    assert rect_a == NormalizedRect(0.5, 0.0, 0.5, 1.0)
    assert rect_b == NormalizedRect(0.0, 0.0, 0.5, 1.0)


def test_overlap_flip_mirrors_x():
    a = ViewGeometry(0.0, 0.0, 32.0, 64.0)
    b = ViewGeometry(16.0, 0.0, 32.0, 64.0, flip_h=True)
    rect_a, rect_b = overlap_region(a, b)
    assert rect_a == NormalizedRect(0.5, 0.0, 0.5, 1.0)
    assert rect_b == NormalizedRect(0.5, 0.0, 0.5, 1.0)


def test_overlap_swap_symmetry():
    rng = np.random.Generator(np.random.PCG64(6))
    for _ in range(50):
        def random_geom():
            w = float(rng.uniform(5, 40))
            h = float(rng.uniform(5, 40))
            return ViewGeometry(
                float(rng.uniform(0, 64 - w)), float(rng.uniform(0, 64 - h)),
                w, h, bool(rng.random() < 0.5),
            )
        a, b = random_geom(), random_geom()
        fwd = overlap_region(a, b)
        rev = overlap_region(b, a)
        if fwd is None:
            assert rev is None
            continue
        assert fwd[0] == rev[1]
        assert fwd[1] == rev[0]


# -- resample_region -------------------------------------------------------------------

def test_resample_identity():
    rng = np.random.Generator(np.random.PCG64(7))
    fm = FeatureMap.from_array(rng.standard_normal((3, 5, 6)))
    out = resample_region(fm, NormalizedRect(0.0, 0.0, 1.0, 1.0), 5, 6)
    assert np.allclose(out.data, fm.data, atol=1e-6)


def test_resample_constant():
    fm = FeatureMap.from_array(np.full((2, 4, 4), 3.25))
    out = resample_region(fm, NormalizedRect(0.1, 0.2, 0.5, 0.6), 3, 3)
    assert np.allclose(out.data, 3.25)


def test_resample_two_cell_average():
    fm = FeatureMap(1, 1, 2, np.array([1.0, 3.0]))
    out = resample_region(fm, NormalizedRect(0.0, 0.0, 1.0, 1.0), 1, 1)
    assert out.data[0, 0, 0] == pytest.approx(2.0, abs=1e-12)


def test_resample_region_validation():
    fm = FeatureMap.from_array(np.zeros((1, 2, 2)))
    with pytest.raises(DataError):
        resample_region(fm, NormalizedRect(0.5, 0.0, 0.8, 1.0), 2, 2)
    with pytest.raises(DataError):
        resample_region(fm, NormalizedRect(0.0, 0.0, 1.0, 1.0), 0, 2)


# -- align_loss ------------------------------------------------------------------------

def test_align_equal_uniform_channels():
    fm = FeatureMap.from_array(np.full((4, 3, 2), 0.7))
    lv = align_loss(fm, fm)
    assert lv.value == pytest.approx(2 * np.log(4) / 4, rel=1e-12)


def test_align_single_channel_zero():
    rng = np.random.Generator(np.random.PCG64(8))
    a = FeatureMap.from_array(rng.standard_normal((1, 3, 3)))
    b = FeatureMap.from_array(rng.standard_normal((1, 3, 3)))
    lv = align_loss(a, b)
    assert lv.value == pytest.approx(0.0, abs=1e-12)
    assert np.allclose(lv.gradients["s_i"], 0.0, atol=1e-12)


def test_align_two_channel_worked_example():
    s_i = FeatureMap.from_array(np.array([[[1.0]], [[0.0]]]))
    s_j = FeatureMap.from_array(np.array([[[0.0]], [[1.0]]]))
    lv = align_loss(s_i, s_j)
    # CE(softmax(1,0), softmax(0,1)) evaluated in closed form
    p = np.exp(1) / (1 + np.exp(1))
    ce = -(p * np.log(1 - p) + (1 - p) * np.log(p))
    assert lv.value == pytest.approx(ce, rel=1e-12)
    assert lv.value == pytest.approx(1.0445, abs=2e-4)


def test_align_symmetry_exact():
    rng = np.random.Generator(np.random.PCG64(9))
    for _ in range(20):
        shape = (int(rng.integers(1, 7)), int(rng.integers(1, 5)), int(rng.integers(1, 5)))
        a = FeatureMap.from_array(rng.standard_normal(shape))
        b = FeatureMap.from_array(rng.standard_normal(shape))
        assert align_loss(a, b).value == align_loss(b, a).value


def test_align_non_negative():
    rng = np.random.Generator(np.random.PCG64(10))
    for _ in range(30):
        shape = (int(rng.integers(1, 9)), int(rng.integers(1, 6)), int(rng.integers(1, 6)))
        a = FeatureMap.from_array(rng.standard_normal(shape) * 3)
        b = FeatureMap.from_array(rng.standard_normal(shape) * 3)
        assert align_loss(a, b).value >= 0.0


# -- total_loss --------------------------------------------------------------------------

def test_total_loss_arithmetic():
    t = total_loss(LossValue(0.5, {}), LossValue(0.1, {}), LossValue(0.2, {}), LossConfig())
    assert t.value == pytest.approx(1.2, rel=1e-15)
    z = total_loss(LossValue(0.0, {}), LossValue(0.0, {}), LossValue(0.0, {}), LossConfig())
    assert z.value == 0.0
    nce_only = total_loss(
        LossValue(0.37, {}), LossValue(9.0, {}), LossValue(4.0, {}),
        LossConfig(alpha=0.0, beta=0.0),
    )
    assert nce_only.value == pytest.approx(0.37, rel=1e-15)


def test_total_loss_scales_gradients():
    g1 = {"views_a": np.ones((2, 2))}
    g2 = {"v1": np.full((2, 2), 2.0)}
    g3 = {"s_i": np.full((1, 1, 1), 3.0)}
    t = total_loss(LossValue(1.0, g1), LossValue(1.0, g2), LossValue(1.0, g3), LossConfig())
    assert np.allclose(t.gradients["nce.views_a"], 1.0)
    assert np.allclose(t.gradients["graph.v1"], 10.0)
    assert np.allclose(t.gradients["align.s_i"], 3.0)


# -- numeric_gradient ----------------------------------------------------------------------

def test_numeric_gradient_quadratic():
    grad = numeric_gradient(lambda x: float(np.sum(x * x)), np.array([1.0, 2.0]), 1e-4)
    assert np.allclose(grad, [2.0, 4.0], atol=1e-6)


def test_numeric_gradient_constant():
    grad = numeric_gradient(lambda x: 5.0, np.array([1.0, -1.0, 0.5]), 1e-4)
    assert np.allclose(grad, 0.0)


def test_numeric_gradient_rejects_nonfinite():
    with pytest.raises(DataError):
        numeric_gradient(lambda x: float("nan"), np.array([0.0]), 1e-4)


# -- gradient fidelity over randomized configurations ----------------------------------------

def test_gradient_fidelity_all_losses():
    rng = np.random.Generator(np.random.PCG64(123))
    for _ in range(25):
        n = int(rng.integers(2, 9))
        d = int(rng.integers(2, 17))
        cfg = LossConfig(tau=float(rng.uniform(0.1, 1.5)))
        a = rng.standard_normal((n, d))
        b = rng.standard_normal((n, d))

        lv = info_nce(EmbeddingBatch.from_array(a), EmbeddingBatch.from_array(b), cfg)
        num = numeric_gradient(
            lambda x: info_nce(
                EmbeddingBatch.from_array(x.reshape(n, d)), EmbeddingBatch.from_array(b), cfg
            ).value,
            a.ravel(),
        ).reshape(n, d)
        assert rel_err(lv.gradients["views_a"], num) < 1e-3

        y = random_labels(rng, n)
        lv = sup_contrastive(EmbeddingBatch.from_array(a), y, cfg)
        num = numeric_gradient(
            lambda x: sup_contrastive(EmbeddingBatch.from_array(x.reshape(n, d)), y, cfg).value,
            a.ravel(),
        ).reshape(n, d)
        assert rel_err(lv.gradients["v"], num) < 1e-3

        c, hh, ww = int(rng.integers(2, 9)), int(rng.integers(1, 7)), int(rng.integers(1, 7))
        u = rng.standard_normal((c, hh, ww))
        v = rng.standard_normal((c, hh, ww))
        lv = align_loss(FeatureMap.from_array(u), FeatureMap.from_array(v))
        num = numeric_gradient(
            lambda x: align_loss(
                FeatureMap.from_array(x.reshape(c, hh, ww)), FeatureMap.from_array(v)
            ).value,
            u.ravel(),
        ).reshape(c, hh, ww)
        assert rel_err(lv.gradients["s_i"], num) < 1e-3
