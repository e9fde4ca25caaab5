"""Dense linear algebra and deterministic random generation.

Matrices are plain float64 ``numpy.ndarray`` objects; this module adds
the operations the rest of the toolkit needs (symmetric
eigendecomposition, SPD solves, spectral-radius estimation) plus a
self-contained random generator whose bitstream is identical on every
platform.

Reproducibility contract
------------------------
``Rng`` implements xoshiro256** with its 256-bit state seeded from the
64-bit seed via SplitMix64.  Floats in [0, 1) take the top 53 bits of
the next 64-bit word.  Gaussians use the Marsaglia polar method (pairs
of uniforms, rejection on the unit disk, second value cached).  Integer
ranges use rejection sampling, shuffles are Fisher-Yates.  All state
transitions are pure 64-bit integer arithmetic, so identical seeds give
identical streams regardless of OS or numpy version.

``derive_seed`` folds integer tags into a base seed with the SplitMix64
finalizer, giving cheap independent substreams for named purposes
(weight matrices, probe vectors, sweep cells).
"""

import math

import numpy as np
import scipy.linalg
from dataclasses import dataclass

from .errors import (
    NonFiniteError,
    NonSquareError,
    NotPositiveDefiniteError,
    ParseError,
    ZeroDimensionError,
)

_M64 = (1 << 64) - 1
_GOLDEN = 0x9E3779B97F4A7C15


def _mix64(z: int) -> int:
    """SplitMix64 finalizer: bijective avalanche on 64-bit words."""
    z = (z ^ (z >> 30)) * 0xBF58476D1CE4E5B9 & _M64
    z = (z ^ (z >> 27)) * 0x94D049BB133111EB & _M64
    return z ^ (z >> 31)


def derive_seed(base: int, *parts: int) -> int:
    """Hash integer tags into a new seed, deterministically.

    Each part advances the state by the SplitMix64 increment and is
    mixed in with the finalizer, so (base, parts) tuples that differ in
    any position give unrelated streams.
    """
    h = base & _M64
    for p in parts:
        h = (h + _GOLDEN) & _M64
        h = _mix64(h ^ (p & _M64))
    return h


def _rotl(x: int, k: int) -> int:
    return ((x << k) | (x >> (64 - k))) & _M64


class Rng:
    """xoshiro256** generator with a documented, platform-stable stream."""

    def __init__(self, seed: int):
        sm = seed & _M64
        state = []
        for _ in range(4):
            sm = (sm + _GOLDEN) & _M64
            state.append(_mix64(sm))
        if not any(state):
            state[0] = _GOLDEN
        self._s = state
        self._gauss: float | None = None

    def next_uint64(self) -> int:
        s = self._s
        result = _rotl((s[1] * 5) & _M64, 7) * 9 & _M64
        t = (s[1] << 17) & _M64
        s[2] ^= s[0]
        s[3] ^= s[1]
        s[1] ^= s[2]
        s[0] ^= s[3]
        s[2] ^= t
        s[3] = _rotl(s[3], 45)
        return result

    def random(self) -> float:
        """Uniform float in [0, 1) from the top 53 bits."""
        return (self.next_uint64() >> 11) * (2.0 ** -53)

    def uniform_pm1(self) -> float:
        """Uniform float in [-1, 1]."""
        return 2.0 * self.random() - 1.0

    def normal(self) -> float:
        """Standard Gaussian via the Marsaglia polar method."""
        if self._gauss is not None:
            g = self._gauss
            self._gauss = None
            return g
        while True:
            u = 2.0 * self.random() - 1.0
            v = 2.0 * self.random() - 1.0
            s = u * u + v * v
            if 0.0 < s < 1.0:
                f = math.sqrt(-2.0 * math.log(s) / s)
                self._gauss = v * f
                return u * f

    def normals(self, n: int) -> np.ndarray:
        return np.array([self.normal() for _ in range(n)], dtype=np.float64)

    def randrange(self, n: int) -> int:
        """Unbiased integer in [0, n) via rejection sampling."""
        if n <= 0:
            raise ValueError("randrange needs n >= 1")
        limit = (1 << 64) - ((1 << 64) % n)
        while True:
            r = self.next_uint64()
            if r < limit:
                return r % n

    def shuffle(self, items: list) -> None:
        """In-place Fisher-Yates shuffle."""
        for i in range(len(items) - 1, 0, -1):
            j = self.randrange(i + 1)
            items[i], items[j] = items[j], items[i]


def _require_matrix(a: np.ndarray, name: str = "matrix") -> np.ndarray:
    a = np.asarray(a, dtype=np.float64)
    if a.ndim != 2:
        raise NonSquareError(f"{name} must be 2-dimensional, got ndim={a.ndim}")
    return a


def _require_square(a: np.ndarray, name: str = "matrix") -> np.ndarray:
    a = _require_matrix(a, name)
    if a.shape[0] != a.shape[1]:
        raise NonSquareError(f"{name} must be square, got shape {a.shape}")
    return a


def _require_finite(a: np.ndarray, name: str = "matrix") -> None:
    if not np.all(np.isfinite(a)):
        raise NonFiniteError(f"{name} contains NaN or Inf")


@dataclass(frozen=True)
class SymEig:
    """Eigendecomposition of a symmetric matrix.

    ``eigenvalues`` sorted descending; ``eigenvectors`` holds the
    matching orthonormal eigenvectors as columns.
    """

    eigenvalues: np.ndarray
    eigenvectors: np.ndarray


def sym_eig(a: np.ndarray) -> SymEig:
    """Full eigendecomposition of a (nearly) symmetric matrix.

    The input is symmetrized as (A + A') / 2 before decomposition, so
    callers may pass results of floating-point products directly.
    """
    a = _require_square(a)
    _require_finite(a)
    sym = (a + a.T) / 2.0
    vals, vecs = np.linalg.eigh(sym)
    order = np.argsort(vals)[::-1]
    return SymEig(eigenvalues=vals[order], eigenvectors=vecs[:, order])


def solve_spd(a: np.ndarray, b: np.ndarray) -> np.ndarray:
    """Solve A X = B for symmetric positive definite A via Cholesky."""
    a = _require_square(a, "lhs")
    _require_finite(a, "lhs")
    b = np.asarray(b, dtype=np.float64)
    _require_finite(b, "rhs")
    try:
        factor = scipy.linalg.cho_factor(a, lower=True, check_finite=False)
    except scipy.linalg.LinAlgError as exc:
        raise NotPositiveDefiniteError(str(exc)) from exc
    return scipy.linalg.cho_solve(factor, b, check_finite=False)


def spectral_radius(w: np.ndarray, rng: Rng, max_iter: int = 500,
                    tol: float = 1e-10) -> float:
    """Largest eigenvalue magnitude, |lambda_max|.

    Estimated as the geometric growth rate of ||W^k v|| for a random
    start vector v, averaging step norms over the trailing half of the
    iteration history.  Unlike raw power iteration this stays stable
    when the dominant eigenvalues form a complex pair (step norms then
    oscillate, but their geometric mean converges).  Stops early once
    two consecutive estimates agree to ``tol`` relative; a vector that
    collapses to exactly zero is retried with a fresh probe, and if
    every retry collapses the radius is reported as 0 (nilpotent case).
    """
    w = _require_square(w)
    _require_finite(w)
    n = w.shape[0]
    for _attempt in range(4):
        v = rng.normals(n)
        nv = float(np.linalg.norm(v))
        if nv == 0.0:
            continue
        v = v / nv
        log_norms: list[float] = []
        prev = None
        collapsed = False
        for _ in range(max_iter):
            v = w @ v
            nv = float(np.linalg.norm(v))
            if nv == 0.0 or not math.isfinite(nv):
                collapsed = nv == 0.0
                if not collapsed:
                    raise NonFiniteError("spectral radius iteration overflowed")
                break
            v = v / nv
            log_norms.append(math.log(nv))
            if len(log_norms) >= 10:
                window = log_norms[len(log_norms) // 2:]
                est = math.exp(sum(window) / len(window))
                if prev is not None and abs(est - prev) <= tol * max(est, 1e-300):
                    return est
                prev = est
        if collapsed:
            continue
        if prev is not None:
            return prev
        # max_iter < 10: fall back to the plain mean of what we have
        if log_norms:
            return math.exp(sum(log_norms) / len(log_norms))
    return 0.0


def random_matrix(rows: int, cols: int, distribution: str, rng: Rng) -> np.ndarray:
    """Matrix of i.i.d. draws, filled row by row from the stream.

    ``distribution`` is ``standard_normal`` or ``uniform_pm1``.
    """
    if rows < 1 or cols < 1:
        raise ZeroDimensionError(f"dimensions must be >= 1, got {rows}x{cols}")
    if distribution == "standard_normal":
        draw = rng.normal
    elif distribution == "uniform_pm1":
        draw = rng.uniform_pm1
    else:
        raise ValueError(f"unknown distribution {distribution!r}")
    out = np.empty((rows, cols), dtype=np.float64)
    for i in range(rows):
        for j in range(cols):
            out[i, j] = draw()
    return out


def matrix_to_text(a: np.ndarray) -> str:
    """Serialize to the toolkit's text format.

    Header ``matrix <rows> <cols>``, then one line per row with 17
    significant digits per value, which round-trips float64 exactly.
    """
    a = _require_matrix(a)
    _require_finite(a)
    lines = [f"matrix {a.shape[0]} {a.shape[1]}"]
    for row in a:
        lines.append(" ".join(f"{v:.17g}" for v in row))
    return "\n".join(lines) + "\n"


def matrix_from_text(text: str) -> np.ndarray:
    """Parse the text format produced by ``matrix_to_text``."""
    tokens = text.split()
    if len(tokens) < 3 or tokens[0] != "matrix":
        raise ParseError("expected 'matrix <rows> <cols>' header")
    try:
        rows, cols = int(tokens[1]), int(tokens[2])
    except ValueError as exc:
        raise ParseError(f"bad matrix dimensions: {exc}") from exc
    if rows < 1 or cols < 1:
        raise ZeroDimensionError(f"dimensions must be >= 1, got {rows}x{cols}")
    values = tokens[3:]
    if len(values) != rows * cols:
        raise ParseError(
            f"expected {rows * cols} values, found {len(values)}")
    try:
        data = np.array([float(v) for v in values], dtype=np.float64)
    except ValueError as exc:
        raise ParseError(f"bad matrix value: {exc}") from exc
    if not np.all(np.isfinite(data)):
        raise NonFiniteError("matrix file contains NaN or Inf")
    return data.reshape(rows, cols)


def save_matrix(path: str, a: np.ndarray) -> None:
    with open(path, "w", encoding="ascii") as fh:
        fh.write(matrix_to_text(a))


def load_matrix(path: str) -> np.ndarray:
    with open(path, "r", encoding="ascii") as fh:
        return matrix_from_text(fh.read())
