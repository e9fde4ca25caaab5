"""Conceptor matrices: correlation fitting, Boolean algebra, evidence.

A conceptor is a symmetric matrix with eigenvalues in [0, 1) that
captures the ellipsoid occupied by reservoir states under one input
class.  It solves

    min E||x - Cx||^2 + aperture^-2 ||C||_fro^2

whose closed form is C = R (R + aperture^-2 I)^-1 for the state
correlation R.  Along each eigendirection of R with eigenvalue sigma,
C has eigenvalue sigma / (sigma + aperture^-2): directions the states
occupy are passed through, unused directions are damped, so C acts as a
soft projector onto the class subspace.
"""

from dataclasses import dataclass

import numpy as np

from .errors import (
    DimensionMismatchError,
    EmptyStatesError,
    NonPositiveApertureError,
    ParseError,
)
from .numerics import matrix_from_text, matrix_to_text, solve_spd, sym_eig

# Ridge added to each operand before the inversions inside AND, so that
# conceptors with zero eigenvalues stay invertible.
AND_RIDGE = 1e-10


@dataclass(frozen=True)
class Conceptor:
    """Symmetric soft-projector matrix with its generating aperture.

    ``aperture`` is None for results of Boolean combinations, which no
    longer correspond to a single (R, aperture) pair.
    """

    c: np.ndarray
    aperture: float | None = None

    @property
    def dim(self) -> int:
        return self.c.shape[0]


@dataclass(frozen=True)
class Correlation:
    """State correlation estimate R = X X' / L with its sample count."""

    r: np.ndarray
    sample_count: int


def correlation(states) -> Correlation:
    """Correlation of a state sequence (or raw states-by-steps array)."""
    x = np.asarray(getattr(states, "states", states), dtype=np.float64)
    if x.ndim != 2 or x.shape[1] < 1:
        raise EmptyStatesError("need at least one state column")
    r = x @ x.T / x.shape[1]
    return Correlation(r=(r + r.T) / 2.0, sample_count=x.shape[1])


def from_correlation(corr: Correlation, aperture: float) -> Conceptor:
    """Closed-form conceptor C = R (R + aperture^-2 I)^-1."""
    if aperture <= 0.0:
        raise NonPositiveApertureError(f"aperture must be > 0, got {aperture}")
    r = corr.r
    shifted = r + aperture ** -2 * np.eye(r.shape[0])
    # R and the shifted matrix share an eigenbasis, so the solution is
    # symmetric up to rounding; symmetrize to keep the invariant tight.
    c = solve_spd(shifted, r).T
    return Conceptor(c=(c + c.T) / 2.0, aperture=aperture)


def not_(c: Conceptor) -> Conceptor:
    """Boolean negation I - C: evidence for everything outside C."""
    return Conceptor(c=np.eye(c.dim) - c.c)


def and_(c1: Conceptor, c2: Conceptor) -> Conceptor:
    """Boolean conjunction (C1^-1 + C2^-1 - I)^-1.

    Each operand gets a tiny ridge before inversion and the result's
    eigenvalues are clipped back into [0, 1], so the operation is total
    on the conceptors that arise in practice.
    """
    if c1.dim != c2.dim:
        raise DimensionMismatchError(
            f"conceptor dims differ: {c1.dim} vs {c2.dim}")
    eye = np.eye(c1.dim)
    inv1 = solve_spd(c1.c + AND_RIDGE * eye, eye)
    inv2 = solve_spd(c2.c + AND_RIDGE * eye, eye)
    middle = inv1 + inv2 - eye
    combined = solve_spd((middle + middle.T) / 2.0, eye)
    eig = sym_eig(combined)
    clipped = np.clip(eig.eigenvalues, 0.0, 1.0)
    result = eig.eigenvectors @ np.diag(clipped) @ eig.eigenvectors.T
    return Conceptor(c=(result + result.T) / 2.0)


def or_(c1: Conceptor, c2: Conceptor) -> Conceptor:
    """Boolean disjunction, defined through de Morgan: not(not a and not b)."""
    return not_(and_(not_(c1), not_(c2)))


def evidence(c: Conceptor, states, mode: str = "mean",
             normalize: bool = True) -> float:
    """Quadratic-form evidence of states under a conceptor.

    Each state x contributes x' C x, with x scaled to unit norm first
    when ``normalize`` is set (zero states contribute 0).  ``mode``
    selects the aggregation over time: ``mean`` (default) or ``sum``.
    """
    x = np.asarray(getattr(states, "states", states), dtype=np.float64)
    if x.ndim == 1:
        x = x[:, np.newaxis]
    if x.shape[1] < 1:
        raise EmptyStatesError("need at least one state column")
    if x.shape[0] != c.dim:
        raise DimensionMismatchError(
            f"states have dim {x.shape[0]}, conceptor has dim {c.dim}")
    if mode not in ("mean", "sum"):
        raise ValueError(f"mode must be 'mean' or 'sum', got {mode!r}")
    if normalize:
        norms = np.linalg.norm(x, axis=0)
        safe = np.where(norms > 0.0, norms, 1.0)
        x = x / safe
    per_step = np.einsum("ij,ik,kj->j", x, c.c, x)
    total = float(per_step.sum())
    if mode == "mean":
        total /= x.shape[1]
    return max(total, 0.0)


def conceptor_to_text(c: Conceptor) -> str:
    """Text serialization: aperture metadata line plus the matrix block."""
    aperture = "none" if c.aperture is None else f"{c.aperture:.17g}"
    return (f"conceptor v1\naperture={aperture}\n"
            + matrix_to_text(c.c))


def conceptor_from_text(text: str) -> Conceptor:
    lines = text.splitlines()
    if not lines or lines[0] != "conceptor v1":
        raise ParseError("expected 'conceptor v1' header")
    if len(lines) < 2 or not lines[1].startswith("aperture="):
        raise ParseError("expected aperture line")
    raw = lines[1].partition("=")[2]
    aperture = None if raw == "none" else float(raw)
    return Conceptor(c=matrix_from_text("\n".join(lines[2:])),
                     aperture=aperture)
