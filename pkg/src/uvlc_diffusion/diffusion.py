"""
Diffusion LMS over faded, noisy links.

Both orderings are implemented on stacked arrays so that one call advances a
whole batch of independent runs: states are ``(..., N, M)``, regressors
``(..., N, M)``, measurements ``(..., N)`` and link matrices ``(..., N, N)``.
"""

from __future__ import annotations

import csv
import json
import math
from concurrent.futures import ThreadPoolExecutor
from dataclasses import asdict, dataclass
from enum import Enum
from pathlib import Path

import numpy as np

from .network import CombinationMatrix, FadingMap, LinkArrays, Topology, compile_links

#: iterations drawn per random-number call; part of the stream layout, so changing
#: it changes every trace
CHUNK = 100

# spawn-key domains under the master seed
RUN_STREAM = 0
PROFILE_STREAM = 1
TOPOLOGY_STREAM = 2


def substream(seed: int, *key: int) -> np.random.Generator:
    """Independent generator addressed by ``key`` under ``seed``."""
    return np.random.default_rng(np.random.SeedSequence(seed, spawn_key=key))


class Strategy(str, Enum):
    ATC = "atc"
    CTA = "cta"


class DivergenceError(FloatingPointError):
    def __init__(self, run: int, iteration: int):
        super().__init__(f"estimate became non-finite in run {run} at iteration {iteration}")
        self.run = run
        self.iteration = iteration


def default_truth(dim: int = 4) -> np.ndarray:
    return np.ones(dim) / math.sqrt(dim)


@dataclass(frozen=True)
class DataModel:
    """Per-node regressor covariances ``(N, M, M)``, measurement and link noise variances ``(N,)``."""

    R: np.ndarray
    sigma_v2: np.ndarray
    sigma_c2: np.ndarray

    def __post_init__(self):
        R = np.array(self.R, dtype=float)
        if R.ndim != 3 or R.shape[1] != R.shape[2]:
            raise ValueError("R must have shape (N, M, M)")
        N = R.shape[0]
        sv = np.broadcast_to(np.asarray(self.sigma_v2, dtype=float), (N,)).copy()
        sc = np.broadcast_to(np.asarray(self.sigma_c2, dtype=float), (N,)).copy()
        if not np.allclose(R, R.transpose(0, 2, 1)):
            raise ValueError("regressor covariances must be symmetric")
        if np.any(np.linalg.eigvalsh(R) <= 0):
            raise ValueError("regressor covariances must be positive definite")
        if np.any(sv < 0) or np.any(sc < 0):
            raise ValueError("noise variances must be non-negative")
        for a in (R, sv, sc):
            a.setflags(write=False)
        object.__setattr__(self, "R", R)
        object.__setattr__(self, "sigma_v2", sv)
        object.__setattr__(self, "sigma_c2", sc)

    @property
    def n_nodes(self) -> int:
        return self.R.shape[0]

    @property
    def dim(self) -> int:
        return self.R.shape[1]

    @classmethod
    def random_profile(
        cls,
        n_nodes: int,
        dim: int,
        rng: np.random.Generator,
        noise_range=(1e-3, 1e-1),
        trace_range=(1.0, 2.0),
        link_noise=1e-3,
    ) -> "DataModel":
        """Stand-in node profile: white regressors with a random trace, random measurement noise."""
        sigma_v2 = rng.uniform(*noise_range, size=n_nodes)
        traces = rng.uniform(*trace_range, size=n_nodes)
        R = traces[:, None, None] / dim * np.eye(dim)
        return cls(R, sigma_v2, np.full(n_nodes, float(link_noise)))

    def to_dict(self) -> dict:
        return {"R": self.R.tolist(), "sigma_v2": self.sigma_v2.tolist(), "sigma_c2": self.sigma_c2.tolist()}

    @classmethod
    def from_dict(cls, d: dict) -> "DataModel":
        return cls(np.array(d["R"]), np.array(d["sigma_v2"]), np.array(d["sigma_c2"]))


@dataclass(frozen=True)
class RunConfig:
    strategy: Strategy = Strategy.CTA
    step_size: float | tuple[float, ...] = 0.05
    iterations: int = 1000
    ensemble_size: int = 100
    seed: int = 0
    initial: tuple[tuple[float, ...], ...] | None = None

    def __post_init__(self):
        object.__setattr__(self, "strategy", Strategy(self.strategy))
        steps = np.atleast_1d(np.asarray(self.step_size, dtype=float))
        if np.any(steps <= 0):
            raise ValueError("step sizes must be positive")
        if self.iterations < 1:
            raise ValueError("need at least one iteration")
        if self.ensemble_size < 1:
            raise ValueError("need at least one run in the ensemble")

    def steps(self, n_nodes: int) -> np.ndarray:
        return np.broadcast_to(np.asarray(self.step_size, dtype=float), (n_nodes,)).copy()

    def initial_state(self, n_nodes: int, dim: int) -> np.ndarray:
        if self.initial is None:
            return np.zeros((n_nodes, dim))
        return np.broadcast_to(np.asarray(self.initial, dtype=float), (n_nodes, dim)).copy()


# ---------------------------------------------------------------------------
# data and single iterations


def generate_data(model: DataModel, truth, rng: np.random.Generator, iterations: int):
    """Regressors ``(T, N, M)`` and measurements ``(T, N)`` of the linear model."""
    L = np.linalg.cholesky(model.R)
    z = rng.standard_normal((iterations, model.n_nodes, model.dim))
    u = np.einsum("tnj,naj->tna", z, L)
    v = rng.standard_normal((iterations, model.n_nodes)) * np.sqrt(model.sigma_v2)
    d = u @ np.asarray(truth, dtype=float) + v
    return u, d


def corrupt_link(x, gain, noise):
    """What a receiver gets over a faded, noisy link."""
    return gain * np.asarray(x) + noise


def link_noise_scale(C: CombinationMatrix, model: DataModel) -> np.ndarray:
    """Std of the combined link noise ``sum_{l != k} c_kl q_kl`` per node."""
    W = C.weights
    off = (W**2).sum(axis=1) - np.diag(W) ** 2
    return np.sqrt(model.sigma_c2 * off)


def combine(psi, G, q):
    """``G psi + q``; ``q`` is the already-weighted link noise per node."""
    return G @ psi + q


def adapt(psi, u, d, steps):
    err = d - np.einsum("...nm,...nm->...n", u, psi)
    return psi + steps[:, None] * u * err[..., None]


def cta_iteration(psi, u, d, G, q, steps):
    """Combine neighbour estimates over the links, then take an LMS step."""
    return adapt(combine(psi, G, q), u, d, steps)


def atc_iteration(psi, u, d, G, q, steps):
    """Take an LMS step, then combine over the links."""
    return combine(adapt(psi, u, d, steps), G, q)


_ITERATIONS = {Strategy.ATC: atc_iteration, Strategy.CTA: cta_iteration}


# ---------------------------------------------------------------------------
# Monte-Carlo ensembles


@dataclass
class MsdTrace:
    """Ensemble-averaged squared deviation, ``msd[k, i]`` for iterations ``0..T``."""

    msd: np.ndarray
    ensemble_size: int
    strategy: Strategy | None = None

    @property
    def network_msd(self) -> np.ndarray:
        return self.msd.mean(axis=0)

    @property
    def iterations(self) -> int:
        return self.msd.shape[1] - 1


def _draw_chunk(rng, model, truth, links: LinkArrays, n_iter):
    u, d = generate_data(model, truth, rng, n_iter)
    x = rng.standard_normal((n_iter, links.n_links))
    z = rng.standard_normal((n_iter, model.n_nodes, model.dim))
    return u, d, x, z


def _run_batch(run_ids, config, links, model, truth, noise_sd):
    """Squared deviations ``(B, N, T + 1)`` for the listed runs."""
    N, M = model.n_nodes, model.dim
    T = config.iterations
    step = _ITERATIONS[config.strategy]
    steps = config.steps(N)
    truth = np.asarray(truth, dtype=float)
    rngs = [substream(config.seed, RUN_STREAM, r) for r in run_ids]
    B = len(run_ids)
    psi = np.broadcast_to(config.initial_state(N, M), (B, N, M)).copy()
    out = np.empty((B, N, T + 1))
    out[:, :, 0] = ((truth - psi) ** 2).sum(-1)
    i = 0
    with np.errstate(over="ignore", invalid="ignore"):
        while i < T:
            n = min(CHUNK, T - i)
            draws = [_draw_chunk(g, model, truth, links, n) for g in rngs]
            u, d, x, z = (np.stack(a, axis=1) for a in zip(*draws))
            G = links.assemble(links.gains(x))
            q = z * noise_sd[:, None]
            for t in range(n):
                psi = step(psi, u[t], d[t], G[t], q[t], steps)
                out[:, :, i + t + 1] = ((truth - psi) ** 2).sum(-1)
            bad = ~np.isfinite(out[:, :, i + 1 : i + n + 1]).all(axis=1)
            if bad.any():
                b, t = np.argwhere(bad)[0]
                raise DivergenceError(run_ids[b], i + t + 1)
            i += n
    return out


def run_monte_carlo(
    config: RunConfig,
    topo: Topology | None,
    C: CombinationMatrix,
    fading: FadingMap,
    model: DataModel,
    truth,
    batch_size: int = 50,
    workers: int = 1,
) -> MsdTrace:
    """Average ``||w - psi_k(i)||^2`` over ``config.ensemble_size`` independent runs.

    Run ``r`` draws everything from its own stream (``seed``, run index), and the
    per-run results are summed in run order, so the trace does not depend on
    ``batch_size`` or ``workers``.
    """
    if topo is not None and not C.support_of(topo):
        raise ValueError("combination matrix has weight outside the topology")
    if C.n_nodes != model.n_nodes:
        raise ValueError("combination matrix and data model disagree on the node count")
    links = compile_links(C, fading)
    noise_sd = link_noise_scale(C, model)
    runs = list(range(config.ensemble_size))
    batches = [runs[j : j + batch_size] for j in range(0, len(runs), batch_size)]
    total = np.zeros((model.n_nodes, config.iterations + 1))

    def job(ids):
        return _run_batch(ids, config, links, model, truth, noise_sd)

    if workers > 1:
        with ThreadPoolExecutor(workers) as pool:
            results = pool.map(job, batches)
            for res in results:
                for sq in res:
                    total += sq
    else:
        for ids in batches:
            for sq in job(ids):
                total += sq
    return MsdTrace(total / config.ensemble_size, config.ensemble_size, config.strategy)


@dataclass(frozen=True)
class SteadyState:
    node: np.ndarray  # linear
    network: float

    @property
    def node_db(self) -> np.ndarray:
        return 10.0 * np.log10(self.node)

    @property
    def network_db(self) -> float:
        return 10.0 * math.log10(self.network)


def steady_state_msd(trace: MsdTrace, window: int) -> SteadyState:
    """Mean of the last ``window`` iterations, per node and for the network."""
    if not 1 <= window <= trace.iterations:
        raise ValueError(f"window must lie in [1, {trace.iterations}]")
    tail = trace.msd[:, -window:]
    return SteadyState(tail.mean(axis=1), float(tail.mean()))


def global_cost(psi, model: DataModel, truth) -> float:
    """``sum_k E|d_k - u_k psi_k|^2`` in closed form."""
    e = np.asarray(truth, dtype=float) - np.asarray(psi, dtype=float)
    return float(np.einsum("na,nab,nb->", e, model.R, e) + model.sigma_v2.sum())


# ---------------------------------------------------------------------------
# output


def write_trace_csv(trace: MsdTrace, path: str | Path, network_path: str | Path | None = None) -> None:
    """``iteration,node,msd`` (1-based nodes) and optionally ``iteration,network_msd``."""
    with open(path, "w", newline="") as f:
        w = csv.writer(f, lineterminator="\n")
        w.writerow(["iteration", "node", "msd"])
        N, T1 = trace.msd.shape
        for i in range(T1):
            for k in range(N):
                w.writerow([i, k + 1, repr(float(trace.msd[k, i]))])
    if network_path is not None:
        with open(network_path, "w", newline="") as f:
            w = csv.writer(f, lineterminator="\n")
            w.writerow(["iteration", "network_msd"])
            for i, v in enumerate(trace.network_msd):
                w.writerow([i, repr(float(v))])


def read_trace_csv(path: str | Path) -> MsdTrace:
    rows = list(csv.DictReader(open(path, newline="")))
    T1 = max(int(r["iteration"]) for r in rows) + 1
    N = max(int(r["node"]) for r in rows)
    msd = np.zeros((N, T1))
    for r in rows:
        msd[int(r["node"]) - 1, int(r["iteration"])] = float(r["msd"])
    return MsdTrace(msd, ensemble_size=0)


def run_metadata(config: RunConfig, model: DataModel, truth, **extra) -> dict:
    meta = asdict(config)
    meta["strategy"] = config.strategy.value
    return {"run": meta, "data_model": model.to_dict(), "truth": np.asarray(truth).tolist(), **extra}


def write_metadata(meta: dict, path: str | Path) -> None:
    Path(path).write_text(json.dumps(meta, indent=2, sort_keys=True) + "\n")
