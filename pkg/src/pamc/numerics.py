"""Dense linear algebra helpers, error types and seeded randomness.

Every matrix in the package is a C-contiguous float64 ``numpy.ndarray``.
Randomness always comes from :func:`make_rng`, a PCG64 generator, whose
streams are identical on every platform for a given seed.
"""
import numpy as np


class DimensionError(ValueError):
    """Operand shapes are incompatible."""


class ParameterError(ValueError):
    """A hyperparameter or argument is outside its allowed range."""


class NumericalError(ArithmeticError):
    """A loss or intermediate value became NaN or infinite."""


class DegenerateClusterError(NumericalError):
    """A cluster has zero soft frequency."""


def as_matrix(x, name="matrix"):
    """Return ``x`` as a finite, C-contiguous float64 2-D array."""
    a = np.ascontiguousarray(x, dtype=np.float64)
    if a.ndim == 1:
        a = a.reshape(-1, 1)
    if a.ndim != 2:
        raise DimensionError(f"{name} must be 2-D, got shape {a.shape}")
    if not np.all(np.isfinite(a)):
        raise NumericalError(f"{name} contains NaN or Inf")
    return a


def matmul(a, b):
    a = np.asarray(a, dtype=np.float64)
    b = np.asarray(b, dtype=np.float64)
    if a.ndim != 2 or b.ndim != 2 or a.shape[1] != b.shape[0]:
        raise DimensionError(f"cannot multiply {a.shape} by {b.shape}")
    return a @ b


def make_rng(seed):
    """PCG64-backed generator; the only source of randomness in the package."""
    if isinstance(seed, np.random.Generator):
        return seed
    return np.random.Generator(np.random.PCG64(int(seed)))


def derive_seed(seed, *keys):
    """Deterministic child seed from a master seed and integer keys."""
    ss = np.random.SeedSequence([int(seed), *[int(k) for k in keys]])
    return int(ss.generate_state(1, dtype=np.uint64)[0])
