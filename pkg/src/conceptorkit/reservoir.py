"""Echo state network generation, state harvesting and linear readout.

A reservoir is generated in four steps: draw a dense random matrix,
estimate its spectral radius, rescale to unit radius, then scale down to
the target radius below 1 so driven states forget their initial
condition.  Input weights and biases are independent substreams of the
same seed, which makes a reservoir a pure function of its parameters.
"""

from dataclasses import dataclass

import numpy as np

from .errors import (
    DegenerateWeightsError,
    DimensionMismatchError,
    ParseError,
    SingularGramError,
    NotPositiveDefiniteError,
    TooShortError,
)
from .numerics import (
    Rng,
    derive_seed,
    matrix_from_text,
    matrix_to_text,
    random_matrix,
    solve_spd,
    spectral_radius,
)

_SUB_W0 = 0
_SUB_WIN = 1
_SUB_BIAS = 2
_SUB_PROBE = 3

ACTIVATIONS = ("tanh", "identity")


@dataclass(frozen=True)
class ReservoirParams:
    """Generation and driving parameters for one echo state network."""

    n_neurons: int
    spectral_radius_target: float = 0.9
    input_scaling: float = 1.0
    bias_scaling: float = 0.2
    activation: str = "tanh"
    washout: int = 0
    seed: int = 0

    def __post_init__(self):
        if self.n_neurons < 1:
            raise ValueError("n_neurons must be >= 1")
        if not 0.0 < self.spectral_radius_target < 1.0:
            raise ValueError("spectral_radius_target must lie in (0, 1)")
        if self.input_scaling <= 0.0:
            raise ValueError("input_scaling must be > 0")
        if self.bias_scaling < 0.0:
            raise ValueError("bias_scaling must be >= 0")
        if self.activation not in ACTIVATIONS:
            raise ValueError(f"activation must be one of {ACTIVATIONS}")
        if self.washout < 0:
            raise ValueError("washout must be >= 0")


@dataclass(frozen=True)
class Reservoir:
    """Fixed random network: recurrent weights, input weights, bias.

    ``probe_seed`` records the substream that measured the spectral
    radius during generation; re-running the estimator with the same
    probe stream reproduces the target radius to near machine
    precision.
    """

    w_res: np.ndarray
    w_in: np.ndarray
    bias: np.ndarray
    params: ReservoirParams
    input_dim: int
    probe_seed: int


@dataclass(frozen=True)
class StateSequence:
    """Harvested reservoir states, one column per retained time step."""

    states: np.ndarray
    washout_dropped: int = 0


def generate(params: ReservoirParams, input_dim: int) -> Reservoir:
    """Build a reservoir from its parameters.

    Retries with the next weight substream if the raw recurrent matrix
    has numerically zero spectral radius (possible only for degenerate
    draws); gives up after 5 retries.
    """
    if input_dim < 1:
        raise DimensionMismatchError("input_dim must be >= 1")
    n = params.n_neurons
    for attempt in range(6):
        w0 = random_matrix(n, n, "standard_normal",
                           Rng(derive_seed(params.seed, _SUB_W0, attempt)))
        probe_seed = derive_seed(params.seed, _SUB_PROBE, attempt)
        rho = spectral_radius(w0, Rng(probe_seed))
        if rho >= 1e-12:
            break
    else:
        raise DegenerateWeightsError(
            f"recurrent weights degenerate after 6 draws (seed={params.seed})")
    w_res = w0 * (params.spectral_radius_target / rho)
    w_in = random_matrix(n, input_dim, "standard_normal",
                         Rng(derive_seed(params.seed, _SUB_WIN))) \
        * params.input_scaling
    bias = Rng(derive_seed(params.seed, _SUB_BIAS)).normals(n) \
        * params.bias_scaling
    return Reservoir(w_res=w_res, w_in=w_in, bias=bias, params=params,
                     input_dim=input_dim, probe_seed=probe_seed)


def drive(res: Reservoir, series) -> StateSequence:
    """Run the update x(n+1) = f(W_res x(n) + W_in p(n+1) + b) from x(0) = 0.

    ``series`` is a LabeledSeries or a raw channels-by-steps array.
    The first ``washout`` states are dropped.
    """
    values = getattr(series, "values", series)
    values = np.asarray(values, dtype=np.float64)
    if values.ndim != 2 or values.shape[0] != res.input_dim:
        raise DimensionMismatchError(
            f"input has {values.shape[0] if values.ndim == 2 else '?'} channels,"
            f" reservoir expects {res.input_dim}")
    length = values.shape[1]
    washout = res.params.washout
    if length <= washout:
        raise TooShortError(
            f"series length {length} does not exceed washout {washout}")
    tanh = res.params.activation == "tanh"
    x = np.zeros(res.params.n_neurons)
    states = np.empty((res.params.n_neurons, length))
    for n in range(length):
        pre = res.w_res @ x + res.w_in @ values[:, n] + res.bias
        x = np.tanh(pre) if tanh else pre
        states[:, n] = x
    return StateSequence(states=states[:, washout:], washout_dropped=washout)


def fit_readout(states: StateSequence, targets: np.ndarray,
                ridge: float = 0.0) -> np.ndarray:
    """Ridge-regression readout: argmin ||W X - Y||^2 + ridge ||W||^2."""
    if ridge < 0.0:
        raise ValueError("ridge must be >= 0")
    x = states.states
    y = np.asarray(targets, dtype=np.float64)
    if y.ndim == 1:
        y = y[np.newaxis, :]
    if y.shape[1] != x.shape[1]:
        raise DimensionMismatchError(
            f"targets have {y.shape[1]} columns, states have {x.shape[1]}")
    gram = x @ x.T + ridge * np.eye(x.shape[0])
    try:
        solution = solve_spd(gram, x @ y.T)
    except NotPositiveDefiniteError as exc:
        raise SingularGramError(
            "state Gram matrix is singular; use ridge > 0") from exc
    return solution.T


def reservoir_to_text(res: Reservoir) -> str:
    """Versioned text container: params as key=value lines, then matrices."""
    p = res.params
    lines = [
        "reservoir v1",
        f"n_neurons={p.n_neurons}",
        f"spectral_radius_target={p.spectral_radius_target:.17g}",
        f"input_scaling={p.input_scaling:.17g}",
        f"bias_scaling={p.bias_scaling:.17g}",
        f"activation={p.activation}",
        f"washout={p.washout}",
        f"seed={p.seed}",
        f"input_dim={res.input_dim}",
        f"probe_seed={res.probe_seed}",
        matrix_to_text(res.w_res).rstrip("\n"),
        matrix_to_text(res.w_in).rstrip("\n"),
        matrix_to_text(res.bias.reshape(-1, 1)).rstrip("\n"),
    ]
    return "\n".join(lines) + "\n"


def _split_fields(lines: list[str], count: int) -> dict[str, str]:
    fields = {}
    for line in lines[:count]:
        key, sep, value = line.partition("=")
        if not sep:
            raise ParseError(f"expected key=value line, got {line!r}")
        fields[key] = value
    return fields


def _take_matrix_block(lines: list[str], start: int) -> tuple[np.ndarray, int]:
    if start >= len(lines):
        raise ParseError("truncated container: missing matrix block")
    header = lines[start].split()
    if len(header) != 3 or header[0] != "matrix":
        raise ParseError(f"expected matrix header at line {start + 1}")
    rows = int(header[1])
    block = lines[start:start + 1 + rows]
    return matrix_from_text("\n".join(block)), start + 1 + rows


def reservoir_from_text(text: str) -> Reservoir:
    lines = text.splitlines()
    if not lines or lines[0] != "reservoir v1":
        raise ParseError("expected 'reservoir v1' header")
    fields = _split_fields(lines[1:], 9)
    try:
        params = ReservoirParams(
            n_neurons=int(fields["n_neurons"]),
            spectral_radius_target=float(fields["spectral_radius_target"]),
            input_scaling=float(fields["input_scaling"]),
            bias_scaling=float(fields["bias_scaling"]),
            activation=fields["activation"],
            washout=int(fields["washout"]),
            seed=int(fields["seed"]),
        )
        input_dim = int(fields["input_dim"])
        probe_seed = int(fields["probe_seed"])
    except (KeyError, ValueError) as exc:
        raise ParseError(f"bad reservoir field: {exc}") from exc
    pos = 10
    w_res, pos = _take_matrix_block(lines, pos)
    w_in, pos = _take_matrix_block(lines, pos)
    bias, pos = _take_matrix_block(lines, pos)
    return Reservoir(w_res=w_res, w_in=w_in, bias=bias.ravel(), params=params,
                     input_dim=input_dim, probe_seed=probe_seed)
