"""Deterministic numeric kernel.

Matrices are plain float64 numpy arrays, 2-D and C-ordered (row-major); the
helpers here add the shape/finiteness checking the rest of the package relies
on. The RNG wraps numpy's counter-based Philox generator so that independent,
reproducible streams can be derived by name regardless of call order.
"""

from __future__ import annotations

import numpy as np

from .errors import ShapeError

__all__ = [
    "as_matrix",
    "check_finite",
    "matmul",
    "softplus",
    "sigmoid",
    "norm2",
    "Rng",
]


def as_matrix(data) -> np.ndarray:
    """Coerce to a 2-D float64 C-contiguous array, validating finiteness."""
    a = np.ascontiguousarray(data, dtype=np.float64)
    if a.ndim != 2:
        raise ShapeError(f"expected a 2-D matrix, got ndim={a.ndim}")
    check_finite(a, "matrix")
    return a


def check_finite(a: np.ndarray, what: str = "array") -> np.ndarray:
    if not np.isfinite(a).all():
        raise FloatingPointError(f"{what} contains NaN or Inf")
    return a


def matmul(a, b) -> np.ndarray:
    """Matrix product with explicit shape checking.

    Raises ShapeError when a.cols != b.rows; the result is checked finite.
    """
    a = as_matrix(a)
    b = as_matrix(b)
    if a.shape[1] != b.shape[0]:
        raise ShapeError(f"matmul shape mismatch: {a.shape} x {b.shape}")
    return check_finite(a @ b, "matmul result")


# Branch points for the stable softplus evaluation: above 30 the log1p term is
# below float64 resolution, below -30 log1p(x) == x to the same resolution.
_SOFTPLUS_CUT = 30.0


def softplus(t):
    """log(1 + exp(t)), stable for large |t|; accepts scalars or arrays."""
    t_arr = np.asarray(t, dtype=np.float64)
    clipped = np.clip(t_arr, -_SOFTPLUS_CUT, _SOFTPLUS_CUT)
    out = np.where(
        t_arr > _SOFTPLUS_CUT,
        t_arr,
        np.where(t_arr < -_SOFTPLUS_CUT, np.exp(clipped), np.log1p(np.exp(clipped))),
    )
    if np.isscalar(t) or t_arr.ndim == 0:
        return float(out)
    return out


def sigmoid(t):
    """1 / (1 + exp(-t)) without overflow; accepts scalars or arrays."""
    t_arr = np.asarray(t, dtype=np.float64)
    pos = t_arr >= 0
    # Evaluate each branch on clamped input so exp never overflows.
    ep = np.exp(-np.where(pos, t_arr, 0.0))
    en = np.exp(np.where(pos, 0.0, t_arr))
    out = np.where(pos, 1.0 / (1.0 + ep), en / (1.0 + en))
    if np.isscalar(t) or t_arr.ndim == 0:
        return float(out)
    return out


def norm2(v) -> float:
    """Euclidean norm of a non-empty vector."""
    v = np.asarray(v, dtype=np.float64)
    if v.size == 0:
        raise ShapeError("norm2 of an empty vector")
    return float(np.linalg.norm(v))


class Rng:
    """Seeded counter-based random stream with deterministic substreams.

    ``Rng(seed)`` always yields the same draw sequence. ``stream(i)`` (or
    ``stream('name')``) derives an independent child stream that depends only
    on the seed and the path of stream keys, never on how many draws were
    taken elsewhere, so data generation, weight init and shuffling cannot
    perturb each other.
    """

    def __init__(self, seed: int, _path: tuple = ()):
        self.seed = int(seed)
        self._path = _path
        # The path length disambiguates trailing zero keys (SeedSequence
        # zero-pads its entropy, so [s] and [s, 0] would otherwise collide).
        entropy = [self.seed & 0xFFFFFFFFFFFFFFFF, len(_path)]
        entropy += [_key_to_int(k) for k in _path]
        self.gen = np.random.Generator(np.random.Philox(np.random.SeedSequence(entropy)))

    def stream(self, key) -> "Rng":
        """Derive the independent child stream identified by ``key``."""
        return Rng(self.seed, self._path + (key,))

    # Conveniences forwarded to the underlying numpy Generator.
    def normal(self, size=None, loc=0.0, scale=1.0):
        return self.gen.normal(loc=loc, scale=scale, size=size)

    def uniform(self, low=0.0, high=1.0, size=None):
        return self.gen.uniform(low, high, size=size)

    def integers(self, low, high=None, size=None):
        return self.gen.integers(low, high, size=size)

    def permutation(self, n):
        return self.gen.permutation(n)


def _key_to_int(key) -> int:
    if isinstance(key, (int, np.integer)):
        return int(key) & 0xFFFFFFFFFFFFFFFF
    # Stable string hashing (not Python's randomized hash()).
    h = 1469598103934665603
    for byte in str(key).encode():
        h = ((h ^ byte) * 1099511628211) & 0xFFFFFFFFFFFFFFFF
    return h
