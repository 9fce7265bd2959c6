import numpy as np
import pytest

from kernel_cblb.kernels import (
    DimensionMismatch,
    KernelSpec,
    add_intercept_column,
    gram,
    gram_cross,
    kernel_eval,
)

SPECS = [
    KernelSpec(),
    KernelSpec("polynomial", scale=2.0, degree=2, sigma2=0.3),
    KernelSpec("polynomial", scale=1.5, degree=1),
    KernelSpec("gaussian", bandwidth=0.7),
]


def test_linear_dot_product():
    assert kernel_eval(KernelSpec(), [1, 2], [3, 4]) == 11.0


def test_polynomial_with_nugget_same_point():
    spec = KernelSpec("polynomial", scale=2.0, degree=1, sigma2=0.5)
    assert kernel_eval(spec, [1, 0], [1, 0], same_point=True) == 2.5
    assert kernel_eval(spec, [1, 0], [1, 0], same_point=False) == 2.0


def test_gaussian_self_similarity():
    for bw in (0.1, 1.0, 30.0):
        assert kernel_eval(KernelSpec("gaussian", bandwidth=bw), [3, -1], [3, -1]) == 1.0


def test_dimension_mismatch():
    with pytest.raises(DimensionMismatch):
        kernel_eval(KernelSpec(), [1, 2], [1, 2, 3])
    with pytest.raises(DimensionMismatch):
        gram_cross(KernelSpec(), np.ones((2, 2)), np.ones((2, 3)))


@pytest.mark.parametrize("kwargs", [
    dict(family="cosine"),
    dict(family="polynomial", scale=0.0),
    dict(family="polynomial", degree=0),
    dict(family="gaussian", bandwidth=-1.0),
    dict(sigma2=-0.1),
])
def test_invalid_specs(kwargs):
    with pytest.raises(ValueError):
        KernelSpec(**kwargs)


def test_small_grams():
    assert gram(KernelSpec(), [[2.0]]).tolist() == [[4.0]]
    assert gram(KernelSpec(), np.eye(2)).tolist() == [[1.0, 0.0], [0.0, 1.0]]
    assert gram_cross(KernelSpec(), [[1.0, 1.0]], np.eye(2)).tolist() == [[1.0, 1.0]]


@pytest.mark.parametrize("spec", SPECS)
def test_gram_matches_double_loop(spec, gen):
    X = gen.normal(size=(20, 3))
    G = gram(spec, X)
    naive = np.array([[kernel_eval(spec, X[i], X[j], i == j) for j in range(20)]
                      for i in range(20)])
    np.testing.assert_allclose(G, naive, rtol=0, atol=1e-12 * max(1.0, np.abs(naive).max()))


@pytest.mark.parametrize("spec", SPECS)
def test_cross_gram_matches_double_loop(spec, gen):
    A = gen.normal(size=(7, 3))
    B = gen.normal(size=(11, 3))
    G = gram_cross(spec, A, B)
    naive = np.array([[kernel_eval(spec, a, b) for b in B] for a in A])
    np.testing.assert_allclose(G, naive, rtol=0, atol=1e-12 * max(1.0, np.abs(naive).max()))


@pytest.mark.parametrize("spec", SPECS)
def test_gram_symmetric_and_psd(spec, gen):
    for n in (5, 40, 100):
        G = gram(spec, gen.normal(size=(n, 4)))
        assert np.array_equal(G, G.T)
        ev = np.linalg.eigvalsh(G)
        assert ev[0] >= -1e-8 * ev[-1]


def test_cross_gram_equals_gram_without_nugget(gen):
    X = gen.normal(size=(9, 2))
    spec = KernelSpec("polynomial", scale=1.0, degree=2)
    np.testing.assert_allclose(gram_cross(spec, X, X), gram(spec, X), atol=1e-12)


def test_nugget_adds_identity(gen):
    X = gen.normal(size=(12, 3))
    base = KernelSpec("polynomial", scale=1.3, degree=1)
    noisy = KernelSpec("polynomial", scale=1.3, degree=1, sigma2=0.4)
    np.testing.assert_allclose(gram(noisy, X), gram(base, X) + 0.4 * np.eye(12), atol=1e-14)
    np.testing.assert_array_equal(gram(noisy, X, nugget=False), gram(base, X))


def test_spec_dict_round_trip():
    spec = KernelSpec("gaussian", bandwidth=2.5)
    assert KernelSpec.from_dict(spec.to_dict()) == spec


def test_intercept_column():
    X = add_intercept_column([[2.0], [3.0]])
    assert X.tolist() == [[1.0, 2.0], [1.0, 3.0]]
