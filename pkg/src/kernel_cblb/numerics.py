"""Deterministic random streams, an SPD solver and an L-BFGS minimizer."""

from __future__ import annotations

from dataclasses import dataclass
from typing import Callable

import numpy as np
from scipy import linalg
from scipy import optimize

MASK64 = 2**64 - 1


@dataclass(frozen=True)
class RngStream:
    """A reproducible random stream keyed by ``(seed, stream_id)``.

    ``stream_id`` is a tuple of unsigned integers (for example
    ``(purpose, bag, replicate)``).  The generator is Philox, a counter-based
    bit generator, seeded through :class:`numpy.random.SeedSequence` with the
    stream id as spawn key, so a stream's draws do not depend on which other
    streams were used before it or on which worker runs it.
    """

    seed: int
    stream_id: tuple = ()

    def __post_init__(self):
        if not 0 <= int(self.seed) <= MASK64:
            raise ValueError("seed must be an unsigned 64-bit integer")
        ids = tuple(int(i) for i in self.stream_id)
        if any(not 0 <= i <= MASK64 for i in ids):
            raise ValueError("stream ids must be unsigned 64-bit integers")
        object.__setattr__(self, "seed", int(self.seed))
        object.__setattr__(self, "stream_id", ids)

    def child(self, *ids: int) -> "RngStream":
        return RngStream(self.seed, self.stream_id + tuple(ids))

    def generator(self) -> np.random.Generator:
        ss = np.random.SeedSequence(self.seed, spawn_key=self.stream_id)
        return np.random.Generator(np.random.Philox(ss))

    def derive_seed(self) -> int:
        """A 64-bit seed for a nested run, fixed by this stream's key."""
        ss = np.random.SeedSequence(self.seed, spawn_key=self.stream_id)
        return int(ss.generate_state(1, dtype=np.uint64)[0])


def multinomial_draw(rng: RngStream | np.random.Generator, n: int, b: int) -> np.ndarray:
    """One ``Multinomial(n; 1/b, ..., 1/b)`` count vector of length ``b``."""
    return multinomial_counts(rng, n, b, 1)[0]


def multinomial_counts(
    rng: RngStream | np.random.Generator, n: int, b: int, size: int
) -> np.ndarray:
    """``size`` independent equal-probability multinomial count vectors.

    Returns an integer array of shape ``(size, b)``; every row sums to ``n``.
    Sampling is numpy's conditional-binomial method.
    """
    if b < 1:
        raise ValueError("need at least one category")
    if n < 0:
        raise ValueError("number of trials must be nonnegative")
    gen = rng.generator() if isinstance(rng, RngStream) else rng
    if b == 1:
        return np.full((size, 1), n, dtype=np.int64)
    pvals = np.full(b, 1.0 / b)
    return gen.multinomial(n, pvals, size=size).astype(np.int64)


class NotPositiveDefinite(np.linalg.LinAlgError):
    pass


def spd_solve(M, rhs, jitter: float = 0.0) -> np.ndarray:
    """Solve ``(M + jitter I) X = rhs`` by Cholesky.

    If the factorization fails the jitter is raised tenfold (starting from
    ``1e-12 * trace(M) / m`` when zero) until it would exceed
    ``1e-4 * trace(M) / m``.
    """
    M = np.asarray(M, dtype=float)
    rhs = np.asarray(rhs, dtype=float)
    m = M.shape[0]
    if M.ndim != 2 or M.shape[1] != m:
        raise ValueError("M must be square")
    if rhs.shape[0] != m:
        raise ValueError(f"rhs has {rhs.shape[0]} rows, M has {m}")
    if jitter < 0:
        raise ValueError("jitter must be nonnegative")
    scale = float(np.trace(M)) / m if m else 0.0
    cap = 1e-4 * scale
    current = float(jitter)
    eye = np.eye(m)
    while True:
        try:
            factor = linalg.cho_factor(M + current * eye if current else M, lower=True,
                                       check_finite=True)
            return linalg.cho_solve(factor, rhs)
        except linalg.LinAlgError:
            pass
        if scale <= 0:
            break
        nxt = current * 10.0 if current > 0 else 1e-12 * scale
        if nxt > cap:
            break
        current = nxt
    raise NotPositiveDefinite(
        f"matrix of order {m} not positive definite after jitter {current:.3g}"
    )


class NonFiniteObjective(FloatingPointError):
    pass


@dataclass
class LBFGSResult:
    x: np.ndarray
    fun: float
    converged: bool
    n_iter: int
    grad: np.ndarray

    def __iter__(self):
        return iter((self.x, self.fun, self.converged))


def lbfgs_minimize(
    fun: Callable[[np.ndarray], tuple[float, np.ndarray]],
    x0,
    tol: float = 1e-6,
    max_iter: int = 500,
    memory: int = 10,
) -> LBFGSResult:
    """Minimize a smooth function with scipy's L-BFGS-B and no bounds.

    ``fun`` returns ``(value, gradient)``.  Converged means the gradient's
    max-norm fell to ``tol``; a run that stops short still returns its last
    iterate, flagged as not converged.
    """
    if tol <= 0:
        raise ValueError("tol must be positive")

    def checked(x):
        value, grad = fun(x)
        value = float(value)
        grad = np.asarray(grad, dtype=float)
        if not np.isfinite(value) or not np.all(np.isfinite(grad)):
            raise NonFiniteObjective("objective returned a non-finite value or gradient")
        return value, grad

    x0 = np.array(x0, dtype=float).reshape(-1)
    # ftol=0 leaves the gradient test as the only convergence criterion
    res = optimize.minimize(checked, x0, jac=True, method="L-BFGS-B",
                            options={"gtol": tol, "ftol": 0.0, "maxiter": max_iter,
                                     "maxcor": memory})
    x = np.asarray(res.x, dtype=float)
    f, g = checked(x)
    return LBFGSResult(x, f, bool(np.max(np.abs(g)) <= tol), int(res.nit), g)
