"""Ground-truth generators the surrogates are trained against.

Two sources: a closed-form parametrized family u_mu(x) = mu3 |x-mu1|^3
e^{-mu2 x} on the box [0,1] x [0,1] x [1,2], and a 1D FitzHugh-Nagumo
monodomain system solved with linear finite elements and a first-order
semi-implicit scheme (diffusion implicit, reaction and coupling explicit,
recovery ODE implicit against the fresh u). Both are deterministic: same
configuration, bit-identical output.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
from scipy.linalg import solve_banded

from fouriernet.synthesis import DyadicGrid

__all__ = [
    "BENCHMARK_BOX",
    "FHN_MU_RANGE",
    "FHNConfig",
    "Trajectory",
    "Dataset",
    "benchmark_eval",
    "sample_parameters",
    "fhn_solve",
    "fhn_dataset",
    "save_dataset",
    "load_dataset",
    "save_trajectory",
]

BENCHMARK_BOX = ((0.0, 1.0), (0.0, 1.0), (1.0, 2.0))
FHN_MU_RANGE = (0.005, 0.05)


def benchmark_eval(mu, grid: DyadicGrid, allow_outside: bool = False) -> np.ndarray:
    """mu3 |x - mu1|^3 e^{-mu2 x} at the grid nodes."""
    mu = np.asarray(mu, dtype=float)
    if mu.shape != (3,):
        raise ValueError(f"expected 3 parameters, got shape {mu.shape}")
    if not allow_outside:
        for v, (lo, hi) in zip(mu, BENCHMARK_BOX):
            if not lo <= v <= hi:
                raise ValueError(f"parameter {v} outside [{lo}, {hi}]; pass "
                                 "allow_outside=True to evaluate anyway")
    x = grid.nodes
    return mu[2] * np.abs(x - mu[0]) ** 3 * np.exp(-mu[1] * x)


def sample_parameters(box, n: int, scheme: str = "uniform-random",
                      seed: int = 0) -> np.ndarray:
    """Parameter draws from a product box; (n, ndim) array.

    equispaced and midpoints only make sense per axis, so they are limited
    to one-dimensional boxes; midpoints returns the n-1 midpoints of n
    equispaced values, matching how test parameters sit between training
    ones.
    """
    box = [(float(lo), float(hi)) for lo, hi in box]
    if n < 1:
        raise ValueError("n must be >= 1")
    if scheme == "uniform-random":
        rng = np.random.default_rng(seed)
        cols = [rng.uniform(lo, hi, size=n) for lo, hi in box]
        return np.column_stack(cols)
    if scheme not in ("equispaced", "midpoints"):
        raise ValueError(f"unknown scheme {scheme!r}")
    if len(box) != 1:
        raise ValueError(f"{scheme} sampling needs a 1D box")
    lo, hi = box[0]
    pts = np.linspace(lo, hi, n)
    if scheme == "midpoints":
        pts = 0.5 * (pts[:-1] + pts[1:])
    return pts[:, None]


@dataclass(frozen=True)
class FHNConfig:
    level: int = 7
    final_time: float = 2.0
    dt: float = 5e-3
    forcing_amplitude: float = 50000.0
    forcing_rate: float = 15.0
    recovery_decay: float = 2.0
    recovery_gain: float = 0.5
    lumped_mass: bool = False
    nodal_reaction: bool = True
    blowup_limit: float = 1e3

    def __post_init__(self):
        if self.dt <= 0.0:
            raise ValueError("dt must be positive")
        steps = self.final_time / self.dt
        if abs(steps - round(steps)) > 1e-9:
            raise ValueError(f"final time {self.final_time} is not an integer "
                             f"number of steps of {self.dt}")

    @property
    def steps(self) -> int:
        return int(round(self.final_time / self.dt))

    def forcing(self, t: float) -> float:
        return self.forcing_amplitude * t**3 * np.exp(-self.forcing_rate * t)


def reaction(u: np.ndarray) -> np.ndarray:
    return u * (u - 0.1) * (u - 1.0)


@dataclass(frozen=True)
class Trajectory:
    times: np.ndarray
    u: np.ndarray  # (steps+1, n_nodes)
    w: np.ndarray
    grid: DyadicGrid


def _mass_banded(grid: DyadicGrid, lumped: bool) -> np.ndarray:
    n = grid.n_nodes
    h = grid.h
    ab = np.zeros((3, n))
    if lumped:
        ab[1, :] = h
        ab[1, 0] = ab[1, -1] = h / 2.0
        return ab
    ab[0, 1:] = h / 6.0
    ab[2, :-1] = h / 6.0
    ab[1, :] = 2.0 * h / 3.0
    ab[1, 0] = ab[1, -1] = h / 3.0
    return ab


def _stiffness_banded(grid: DyadicGrid) -> np.ndarray:
    n = grid.n_nodes
    h = grid.h
    ab = np.zeros((3, n))
    ab[0, 1:] = -1.0 / h
    ab[2, :-1] = -1.0 / h
    ab[1, :] = 2.0 / h
    ab[1, 0] = ab[1, -1] = 1.0 / h
    return ab


def _banded_matvec(ab: np.ndarray, x: np.ndarray) -> np.ndarray:
    y = ab[1] * x
    y[:-1] += ab[0, 1:] * x[1:]
    y[1:] += ab[2, :-1] * x[:-1]
    return y


def _reaction_load(u: np.ndarray, grid: DyadicGrid,
                   mass: np.ndarray, nodal: bool) -> np.ndarray:
    """M R(u) for nodal evaluation, or the assembled integral of R of the
    piecewise-linear interpolant (2-point Gauss per element) otherwise."""
    if nodal:
        return _banded_matvec(mass, reaction(u))
    h = grid.h
    q = 0.5 / np.sqrt(3.0)
    out = np.zeros_like(u)
    for xi, wq in ((0.5 - q, 0.5), (0.5 + q, 0.5)):
        r = reaction((1.0 - xi) * u[:-1] + xi * u[1:]) * (wq * h)
        out[:-1] += (1.0 - xi) * r
        out[1:] += xi * r
    return out


def fhn_solve(mu: float, config: FHNConfig,
              allow_outside: bool = False) -> Trajectory:
    """March the excitation/recovery pair from rest under left-edge forcing.

    Per step: (mu/dt M + mu^2 K) u' = M(mu/dt u - R(u) - w) + mu^2 g(t') e_0,
    then w' = (w + gain dt u') / (1 + decay dt). The forcing sign matches
    reading the boundary condition as an outward-normal derivative at x=0.
    """
    mu = float(mu)
    lo, hi = FHN_MU_RANGE
    if not allow_outside and not lo <= mu <= hi:
        raise ValueError(f"mu={mu} outside [{lo}, {hi}]; pass "
                         "allow_outside=True to run anyway")
    grid = DyadicGrid(config.level)
    n = grid.n_nodes
    mass = _mass_banded(grid, config.lumped_mass)
    system = (mu / config.dt) * mass + mu**2 * _stiffness_banded(grid)
    u = np.zeros(n)
    w = np.zeros(n)
    u_hist = np.zeros((config.steps + 1, n))
    w_hist = np.zeros((config.steps + 1, n))
    times = np.arange(config.steps + 1) * config.dt
    for step in range(1, config.steps + 1):
        rhs = _banded_matvec(mass, (mu / config.dt) * u - w) \
            - _reaction_load(u, grid, mass, config.nodal_reaction)
        rhs[0] += mu**2 * config.forcing(times[step])
        u = solve_banded((1, 1), system, rhs)
        peak = float(np.abs(u).max())
        if not np.isfinite(peak) or peak > config.blowup_limit:
            raise ArithmeticError(
                f"solution blew up at t={times[step]:.4f} (step {step}): "
                f"max |u| = {peak:.3e} with mu={mu}")
        w = (w + config.recovery_gain * config.dt * u) \
            / (1.0 + config.recovery_decay * config.dt)
        u_hist[step] = u
        w_hist[step] = w
    return Trajectory(times, u_hist, w_hist, grid)


@dataclass(frozen=True)
class Dataset:
    inputs: np.ndarray   # (n, p)
    targets: np.ndarray  # (n, n_nodes)
    grid: DyadicGrid
    split: str

    def __post_init__(self):
        if len(self.inputs) != len(self.targets):
            raise ValueError("inputs and targets must pair up")
        if self.targets.shape[1] != self.grid.n_nodes:
            raise ValueError(f"targets have {self.targets.shape[1]} columns, "
                             f"grid has {self.grid.n_nodes} nodes")

    def __len__(self) -> int:
        return len(self.inputs)


def fhn_dataset(config: FHNConfig, n_mu_train: int = 20, n_t: int = 25,
                seed: int = 0):
    """Snapshot datasets over (mu, t): equispaced mu for training, their
    midpoints for testing, n_t uniformly-indexed snapshots per trajectory.

    Snapshots are rows of the stored trajectory, never re-solved. The seed
    only matters if a random scheme is swapped in; the default design is
    fully deterministic.
    """
    grid = DyadicGrid(config.level)
    snap = np.round(np.linspace(0, config.steps, n_t)).astype(int)
    splits = {}
    for split, scheme, count in (("train", "equispaced", n_mu_train),
                                 ("test", "midpoints", n_mu_train)):
        mus = sample_parameters([FHN_MU_RANGE], count, scheme, seed)[:, 0]
        inputs = np.zeros((len(mus) * n_t, 2))
        targets = np.zeros((len(mus) * n_t, grid.n_nodes))
        for i, mu in enumerate(mus):
            traj = fhn_solve(mu, config)
            rows = slice(i * n_t, (i + 1) * n_t)
            inputs[rows, 0] = mu
            inputs[rows, 1] = traj.times[snap]
            targets[rows] = traj.u[snap]
        splits[split] = Dataset(inputs, targets, grid, split)
    return splits["train"], splits["test"]


def save_dataset(dataset: Dataset, path) -> None:
    p = dataset.inputs.shape[1]
    n = dataset.grid.n_nodes
    header = ",".join([f"mu_{i + 1}" for i in range(p)]
                      + [f"u_{j + 1}" for j in range(n)])
    with open(path, "w") as fh:
        fh.write(header + "\n")
        for mu, u in zip(dataset.inputs, dataset.targets):
            row = np.concatenate([mu, u])
            fh.write(",".join(f"{v:.17g}" for v in row) + "\n")


def load_dataset(path, split: str = "train") -> Dataset:
    with open(path) as fh:
        lines = fh.read().splitlines()
    if not lines:
        raise ValueError(f"{path}: empty file, expected a header")
    names = lines[0].split(",")
    p = sum(1 for c in names if c.startswith("mu_"))
    n = len(names) - p
    if p == 0 or n == 0:
        raise ValueError(f"{path}: header {lines[0]!r} lacks mu_/u_ columns")
    k = int(np.log2(max(n - 1, 1)))
    if 2**k + 1 != n:
        raise ValueError(f"{path}: {n} value columns do not form a dyadic "
                         "grid (expected 2^k + 1)")
    inputs = np.zeros((len(lines) - 1, p))
    targets = np.zeros((len(lines) - 1, n))
    for idx, line in enumerate(lines[1:], start=2):
        parts = line.split(",")
        if len(parts) != p + n:
            raise ValueError(f"{path}, line {idx}: {len(parts)} columns, "
                             f"expected {p + n}")
        try:
            row = np.array([float(v) for v in parts])
        except ValueError as exc:
            raise ValueError(f"{path}, line {idx}: {exc}") from None
        inputs[idx - 2] = row[:p]
        targets[idx - 2] = row[p:]
    return Dataset(inputs, targets, DyadicGrid(k), split)


def save_trajectory(traj: Trajectory, u_path, w_path) -> None:
    for path, field in ((u_path, traj.u), (w_path, traj.w)):
        header = ",".join(["t"] + [f"x_{j + 1}" for j in range(field.shape[1])])
        with open(path, "w") as fh:
            fh.write(header + "\n")
            for t, row in zip(traj.times, field):
                fh.write(",".join(f"{v:.17g}" for v in np.concatenate([[t], row]))
                         + "\n")
