"""Kernel functions and Gram matrices.

The polynomial family is ``C (x'y)^d + sigma2 * [same observation]``.  The
nugget term is an identity-of-index indicator, so it only ever lands on the
diagonal of a Gram matrix built from a single sample; cross-Gram matrices
between distinct samples never carry it.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

FAMILIES = ("linear", "polynomial", "gaussian")


class DimensionMismatch(ValueError):
    pass


@dataclass(frozen=True)
class KernelSpec:
    family: str = "linear"
    scale: float = 1.0
    degree: int = 1
    bandwidth: float = 1.0
    sigma2: float = 0.0

    def __post_init__(self):
        if self.family not in FAMILIES:
            raise ValueError(f"unknown kernel family {self.family!r}; expected one of {FAMILIES}")
        if self.family == "polynomial":
            if not self.scale > 0:
                raise ValueError("polynomial kernel needs scale C > 0")
            if int(self.degree) != self.degree or self.degree < 1:
                raise ValueError("polynomial kernel needs an integer degree >= 1")
        if self.family == "gaussian" and not self.bandwidth > 0:
            raise ValueError("gaussian kernel needs bandwidth > 0")
        if not self.sigma2 >= 0:
            raise ValueError("nugget sigma2 must be nonnegative")

    @classmethod
    def from_dict(cls, d: dict) -> "KernelSpec":
        return cls(**d)

    def to_dict(self) -> dict:
        return {
            "family": self.family,
            "scale": self.scale,
            "degree": self.degree,
            "bandwidth": self.bandwidth,
            "sigma2": self.sigma2,
        }


def kernel_eval(spec: KernelSpec, x, y, same_point: bool = False) -> float:
    """Evaluate ``k(x, y)``; ``same_point`` adds the nugget."""
    x = np.asarray(x, dtype=float).reshape(-1)
    y = np.asarray(y, dtype=float).reshape(-1)
    if x.shape != y.shape:
        raise DimensionMismatch(f"kernel arguments have lengths {x.size} and {y.size}")
    if spec.family == "linear":
        value = float(np.dot(x, y))
    elif spec.family == "polynomial":
        value = spec.scale * float(np.dot(x, y)) ** spec.degree
    else:
        d = x - y
        value = float(np.exp(-np.dot(d, d) / (2.0 * spec.bandwidth**2)))
    if same_point:
        value += spec.sigma2
    return value


def _check_matrix(X) -> np.ndarray:
    X = np.asarray(X, dtype=float)
    if X.ndim == 1:
        X = X.reshape(-1, 1)
    if X.ndim != 2:
        raise DimensionMismatch("expected a 2-d covariate matrix")
    return X


def _base(spec: KernelSpec, A: np.ndarray, B: np.ndarray, symmetric: bool) -> np.ndarray:
    if spec.family == "gaussian":
        sa = np.einsum("ij,ij->i", A, A)
        sb = sa if symmetric else np.einsum("ij,ij->i", B, B)
        d2 = sa[:, None] + sb[None, :] - 2.0 * (A @ B.T)
        np.maximum(d2, 0.0, out=d2)
        if symmetric:
            np.fill_diagonal(d2, 0.0)
        return np.exp(-d2 / (2.0 * spec.bandwidth**2))
    G = A @ B.T
    if spec.family == "polynomial":
        if spec.degree != 1:
            G = G ** spec.degree
        if spec.scale != 1.0:
            G = spec.scale * G
    return G


def gram(spec: KernelSpec, X, nugget: bool = True) -> np.ndarray:
    """Gram matrix of one sample, exactly symmetric; ``nugget=False`` leaves
    the noise term off the diagonal."""
    X = _check_matrix(X)
    if X.shape[0] < 1:
        raise DimensionMismatch("gram needs at least one row")
    G = _base(spec, X, X, symmetric=True)
    iu = np.triu_indices(G.shape[0], 1)
    G[(iu[1], iu[0])] = G[iu]
    if nugget and spec.sigma2:
        G[np.diag_indices_from(G)] += spec.sigma2
    return G


def gram_cross(spec: KernelSpec, A, B) -> np.ndarray:
    """Kernel matrix between two samples (no nugget)."""
    A = _check_matrix(A)
    B = _check_matrix(B)
    if A.shape[1] != B.shape[1]:
        raise DimensionMismatch(f"column counts differ: {A.shape[1]} vs {B.shape[1]}")
    return _base(spec, A, B, symmetric=False)


def add_intercept_column(X) -> np.ndarray:
    """Prepend a column of ones so dot-product kernels span constants."""
    X = _check_matrix(X)
    return np.hstack([np.ones((X.shape[0], 1)), X])
