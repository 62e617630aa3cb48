"""The trainable half of the surrogate: dense head, loss, optimizers.

A leaky-ReLU MLP maps parameters mu in R^p to a packed coefficient row in
R^{4m+2}; the frozen decoder (the synthesis network collapsed to one matrix)
turns that row into nodal values. Only the MLP is ever optimized, so
backpropagation is written out by hand against the decoder held constant.

The primary optimizer is L-BFGS (two-loop recursion, strong Wolfe line
search, unit initial step); a plain Adam loop is kept as the fallback for
runs where the line search gives up on the piecewise-linear landscape.
Everything is full-batch and deterministic given the seed.
"""

from __future__ import annotations

from dataclasses import dataclass, field, replace

import numpy as np

from fouriernet.layers import materialize_linear_map
from fouriernet.synthesis import DyadicGrid, build_Psi, build_coefficient_adapter

__all__ = [
    "MLPParams",
    "TrainConfig",
    "FrozenDecoder",
    "OptimizeResult",
    "mlp_dims",
    "init_he",
    "mlp_forward",
    "model_forward",
    "loss",
    "grad",
    "loss_and_grad",
    "pack_params",
    "unpack_params",
    "optimize_lbfgs",
    "optimize_adam",
    "train_ensemble",
    "test_error",
    "frozen_decoder",
]


@dataclass
class MLPParams:
    """Dense-layer matrices and biases; hidden layers share one leaky slope."""

    weights: list
    biases: list
    slope: float = 0.01

    def __post_init__(self):
        if len(self.weights) != len(self.biases):
            raise ValueError("weights and biases must pair up")
        for w, b in zip(self.weights, self.biases):
            if w.shape[0] != b.shape[0]:
                raise ValueError(f"layer shape mismatch: {w.shape} vs {b.shape}")
        for wa, wb in zip(self.weights, self.weights[1:]):
            if wb.shape[1] != wa.shape[0]:
                raise ValueError(f"consecutive layers disagree: {wa.shape} "
                                 f"feeds {wb.shape}")

    @property
    def dims(self):
        return [self.weights[0].shape[1]] + [w.shape[0] for w in self.weights]


@dataclass(frozen=True)
class TrainConfig:
    optimizer: str = "lbfgs"
    max_iter: int = 500
    history: int = 10
    c1: float = 1e-4
    c2: float = 0.9
    restarts: int = 1
    seed: int = 0
    grad_tol: float = 1e-8
    learning_rate: float = 1e-2
    slope: float = 0.01

    def __post_init__(self):
        if self.optimizer not in ("lbfgs", "adam"):
            raise ValueError(f"unknown optimizer {self.optimizer!r}")
        if self.restarts < 1:
            raise ValueError("restarts must be >= 1")


@dataclass(frozen=True)
class FrozenDecoder:
    """The synthesis network collapsed to a matrix: values = v @ packed row."""

    v: np.ndarray
    grid: DyadicGrid
    m: int


def frozen_decoder(k: int, m: int) -> FrozenDecoder:
    graph = build_coefficient_adapter(m).then(build_Psi(k, m).graph)
    v = materialize_linear_map(graph)
    return FrozenDecoder(v, DyadicGrid(k), m)


def mlp_dims(p: int, width: int, depth: int, m: int):
    """Layer sizes for p inputs, `depth` hidden layers, packed-mode output."""
    if min(p, width, depth, m) < 1:
        raise ValueError("all architecture sizes must be >= 1")
    return [p] + [width] * depth + [4 * m + 2]


def init_he(dims, seed: int, slope: float = 0.01) -> MLPParams:
    """Weights ~ Normal(0, 2/fan_in) per layer, zero biases."""
    rng = np.random.default_rng(seed)
    weights, biases = [], []
    for fan_in, fan_out in zip(dims, dims[1:]):
        weights.append(rng.normal(0.0, np.sqrt(2.0 / fan_in),
                                  size=(fan_out, fan_in)))
        biases.append(np.zeros(fan_out))
    return MLPParams(weights, biases, slope)


def _leaky(a: np.ndarray, slope: float) -> np.ndarray:
    return np.where(a > 0.0, a, slope * a)


def mlp_forward(params: MLPParams, x: np.ndarray, keep: bool = False):
    """Head outputs for a (batch, p) array; keep=True also returns the
    per-layer inputs and preactivations needed by the backward pass."""
    h = np.atleast_2d(np.asarray(x, dtype=float))
    inputs, preacts = [], []
    last = len(params.weights) - 1
    for i, (w, b) in enumerate(zip(params.weights, params.biases)):
        inputs.append(h)
        a = h @ w.T + b
        preacts.append(a)
        h = a if i == last else _leaky(a, params.slope)
    if keep:
        return h, inputs, preacts
    return h


def model_forward(params: MLPParams, decoder: FrozenDecoder,
                  mu: np.ndarray) -> np.ndarray:
    """Nodal values of the surrogate: decoder applied to the head's output."""
    mu = np.asarray(mu, dtype=float)
    single = mu.ndim == 1
    out = mlp_forward(params, np.atleast_2d(mu)) @ decoder.v.T
    return out[0] if single else out


def loss(params: MLPParams, decoder: FrozenDecoder, inputs: np.ndarray,
         targets: np.ndarray) -> float:
    """Mean over samples of h times the summed squared nodal error."""
    pred = model_forward(params, decoder, inputs)
    r = pred - np.asarray(targets, dtype=float)
    return decoder.grid.h * float(np.sum(r * r)) / len(r)


def grad(params: MLPParams, decoder: FrozenDecoder, inputs: np.ndarray,
         targets: np.ndarray) -> MLPParams:
    return loss_and_grad(params, decoder, inputs, targets)[1]


def loss_and_grad(params: MLPParams, decoder: FrozenDecoder,
                  inputs: np.ndarray, targets: np.ndarray):
    """Objective value and its exact gradient, decoder held constant.

    The subgradient of the leaky activation at exactly 0 is taken on the
    positive side.
    """
    x = np.atleast_2d(np.asarray(inputs, dtype=float))
    u = np.atleast_2d(np.asarray(targets, dtype=float))
    out, layer_in, preacts = mlp_forward(params, x, keep=True)
    r = out @ decoder.v.T - u
    value = decoder.grid.h * float(np.sum(r * r)) / len(x)
    delta = (2.0 * decoder.grid.h / len(x)) * (r @ decoder.v)
    gw = [None] * len(params.weights)
    gb = [None] * len(params.biases)
    for i in range(len(params.weights) - 1, -1, -1):
        gw[i] = delta.T @ layer_in[i]
        gb[i] = delta.sum(axis=0)
        if i:
            delta = delta @ params.weights[i]
            delta = np.where(preacts[i - 1] >= 0.0, delta, params.slope * delta)
    return value, MLPParams(gw, gb, params.slope)


def pack_params(params: MLPParams) -> np.ndarray:
    parts = []
    for w, b in zip(params.weights, params.biases):
        parts.append(w.ravel())
        parts.append(b)
    return np.concatenate(parts)


def unpack_params(theta: np.ndarray, template: MLPParams) -> MLPParams:
    weights, biases = [], []
    pos = 0
    for w, b in zip(template.weights, template.biases):
        weights.append(theta[pos: pos + w.size].reshape(w.shape))
        pos += w.size
        biases.append(theta[pos: pos + b.size])
        pos += b.size
    if pos != len(theta):
        raise ValueError(f"vector length {len(theta)}, template needs {pos}")
    return MLPParams(weights, biases, template.slope)


@dataclass
class OptimizeResult:
    x: np.ndarray
    value: float
    trace: list = field(default_factory=list)  # (iteration, value, grad norm)
    converged: bool = False
    line_search_failures: int = 0

    @property
    def iterations(self) -> int:
        return self.trace[-1][0] if self.trace else 0


def _wolfe_search(fn, x, f0, g0, d, c1, c2, max_evals=30):
    """Strong Wolfe step along d from x; returns (alpha, f, g) or None."""
    slope0 = float(g0 @ d)
    if slope0 >= 0.0:
        return None

    def probe(alpha):
        f, g = fn(x + alpha * d)
        return f, g, float(g @ d)

    def zoom(lo, f_lo, hi, budget):
        best = None
        for _ in range(budget):
            alpha = 0.5 * (lo + hi)
            f, g, slope = probe(alpha)
            if f > f0 + c1 * alpha * slope0 or f >= f_lo:
                hi = alpha
            else:
                if abs(slope) <= -c2 * slope0:
                    return alpha, f, g
                best = (alpha, f, g)
                if slope * (hi - lo) >= 0.0:
                    hi = lo
                lo, f_lo = alpha, f
        return best

    alpha_prev, f_prev = 0.0, f0
    alpha = 1.0
    for i in range(max_evals):
        f, g, slope = probe(alpha)
        if f > f0 + c1 * alpha * slope0 or (i > 0 and f >= f_prev):
            return zoom(alpha_prev, f_prev, alpha, max_evals)
        if abs(slope) <= -c2 * slope0:
            return alpha, f, g
        if slope >= 0.0:
            return zoom(alpha, f, alpha_prev, max_evals)
        alpha_prev, f_prev = alpha, f
        alpha *= 2.0
    return None


def optimize_lbfgs(fn, x0: np.ndarray, config: TrainConfig) -> OptimizeResult:
    """Two-loop L-BFGS with strong Wolfe steps, unit initial step length.

    fn maps a parameter vector to (value, gradient). When the line search
    fails along the quasi-Newton direction it is retried along steepest
    descent with the memory cleared; a second failure ends the run.
    """
    x = np.asarray(x0, dtype=float).copy()
    f, g = fn(x)
    mem_s, mem_y, mem_rho = [], [], []
    result = OptimizeResult(x, f, [(0, f, float(np.linalg.norm(g)))])
    for it in range(1, config.max_iter + 1):
        gnorm = float(np.linalg.norm(g))
        if gnorm <= config.grad_tol:
            result.converged = True
            break
        d = -g
        if mem_s:
            alpha_hist = []
            for s, y, rho in zip(reversed(mem_s), reversed(mem_y),
                                 reversed(mem_rho)):
                a = rho * float(s @ d)
                alpha_hist.append(a)
                d = d - a * y
            d *= float(mem_s[-1] @ mem_y[-1]) / float(mem_y[-1] @ mem_y[-1])
            for s, y, rho, a in zip(mem_s, mem_y, mem_rho,
                                    reversed(alpha_hist)):
                d = d + (a - rho * float(y @ d)) * s
        if float(g @ d) >= 0.0:
            d = -g
            mem_s, mem_y, mem_rho = [], [], []
        step = _wolfe_search(fn, x, f, g, d, config.c1, config.c2)
        if step is None and mem_s:
            result.line_search_failures += 1
            d = -g
            mem_s, mem_y, mem_rho = [], [], []
            step = _wolfe_search(fn, x, f, g, d, config.c1, config.c2)
        if step is None:
            result.line_search_failures += 1
            break
        alpha, f_new, g_new = step
        s = alpha * d
        y = g_new - g
        sy = float(s @ y)
        if sy > 1e-10 * float(np.linalg.norm(s)) * float(np.linalg.norm(y)):
            mem_s.append(s)
            mem_y.append(y)
            mem_rho.append(1.0 / sy)
            if len(mem_s) > config.history:
                mem_s.pop(0)
                mem_y.pop(0)
                mem_rho.pop(0)
        x = x + s
        f, g = f_new, g_new
        result.trace.append((it, f, float(np.linalg.norm(g))))
    result.x = x
    result.value = f
    return result


def optimize_adam(fn, x0: np.ndarray, config: TrainConfig,
                  beta1: float = 0.9, beta2: float = 0.999,
                  eps: float = 1e-8) -> OptimizeResult:
    x = np.asarray(x0, dtype=float).copy()
    m = np.zeros_like(x)
    v = np.zeros_like(x)
    f, g = fn(x)
    result = OptimizeResult(x, f, [(0, f, float(np.linalg.norm(g)))])
    for it in range(1, config.max_iter + 1):
        if float(np.linalg.norm(g)) <= config.grad_tol:
            result.converged = True
            break
        m = beta1 * m + (1.0 - beta1) * g
        v = beta2 * v + (1.0 - beta2) * g * g
        mhat = m / (1.0 - beta1 ** it)
        vhat = v / (1.0 - beta2 ** it)
        x = x - config.learning_rate * mhat / (np.sqrt(vhat) + eps)
        f, g = fn(x)
        result.trace.append((it, f, float(np.linalg.norm(g))))
    result.x = x
    result.value = f
    return result


def test_error(params: MLPParams, decoder: FrozenDecoder, inputs: np.ndarray,
               targets: np.ndarray) -> float:
    """Worst absolute nodal error over every sample: the reported E."""
    pred = model_forward(params, decoder, inputs)
    return float(np.abs(pred - np.asarray(targets, dtype=float)).max())


def train_ensemble(dims, decoder: FrozenDecoder, inputs: np.ndarray,
                   targets: np.ndarray, config: TrainConfig):
    """Independently seeded restarts; winner has the lowest final loss.

    Returns (best params, per-restart OptimizeResult list); restart r is
    seeded config.seed + r, so the whole ensemble is one seed away from
    reproducible. Restarts that end on a non-finite loss are kept in the
    result list (their value says what happened) but never win.
    """
    template = init_he(dims, config.seed, config.slope)

    def objective(theta):
        value, g = loss_and_grad(unpack_params(theta, template), decoder,
                                 inputs, targets)
        return value, pack_params(g)

    run = optimize_lbfgs if config.optimizer == "lbfgs" else optimize_adam
    results = []
    best = None
    best_params = None
    for r in range(config.restarts):
        start = init_he(dims, config.seed + r, config.slope)
        res = run(objective, pack_params(start), config)
        results.append(res)
        if not np.isfinite(res.value):
            continue
        if best is None or res.value < best.value:
            best = res
            best_params = unpack_params(res.x, template)
    if best is None:
        raise ArithmeticError(f"all {config.restarts} restarts diverged")
    return best_params, results
