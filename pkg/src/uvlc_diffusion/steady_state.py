"""
Steady-state MSD of combine-then-adapt diffusion LMS over random links.

The stacked error ``w~_i = w - psi_i`` obeys

    w~_i = (I - D U_i^T U_i) [G_i w~_{i-1} + (I - G_i) w - q_i] - D U_i^T v_i

with the link matrix, regressors, measurement noise and link noise independent
of each other and across time. Its mean and second moment therefore follow an
exact affine recursion once the first two moments of every link gain are known
and Gaussian fourth moments are factored. The steady state is the fixed point
of that recursion; per-node MSD is the trace of the matching diagonal block.
"""

from __future__ import annotations

import json
import math
from dataclasses import dataclass
from enum import Enum
from pathlib import Path

import numpy as np
from scipy.sparse.linalg import LinearOperator, gmres

from .diffusion import DataModel, RunConfig, link_noise_scale
from .network import CombinationMatrix, FadingMap, Topology, link_gain_moments


#: second moments below this norm count as exactly zero
_ZERO = 1e-280


class Method(str, Enum):
    FIXED_POINT = "fixed_point"
    VECTORIZED = "vectorized"


class ConvergenceError(RuntimeError):
    pass


@dataclass(frozen=True)
class MomentSet:
    """First and second moments entering the CTA error recursion.

    ``C_mean`` is ``E[G]``; ``G_var[k, l]`` is ``Var(G_kl) = c_kl^2 Var(I_kl)``
    (zero on the diagonal, where nothing is faded). ``link_noise[k]`` is the
    variance per component of the combined link noise reaching node k.
    """

    C_mean: np.ndarray
    G_var: np.ndarray
    EI: np.ndarray
    EI2: np.ndarray
    steps: np.ndarray
    R: np.ndarray
    sigma_v2: np.ndarray
    link_noise: np.ndarray
    truth: np.ndarray

    @property
    def n_nodes(self) -> int:
        return self.C_mean.shape[0]

    @property
    def dim(self) -> int:
        return self.R.shape[1]

    def mean_transfer(self) -> np.ndarray:
        """``(I - D R)(E[G] kron I_M)``, the mean error-propagation matrix."""
        N, M = self.n_nodes, self.dim
        A = np.zeros((N * M, N * M))
        for k in range(N):
            A[k * M : (k + 1) * M, k * M : (k + 1) * M] = np.eye(M) - self.steps[k] * self.R[k]
        return A @ np.kron(self.C_mean, np.eye(M))


def error_recursion_moments(
    topo: Topology | None,
    C: CombinationMatrix,
    fading: FadingMap,
    model: DataModel,
    config: RunConfig,
    truth,
) -> MomentSet:
    EI, EI2 = link_gain_moments(C, fading)
    W = C.weights
    off = 1.0 - np.eye(C.n_nodes)
    C_mean = W * EI
    G_var = W**2 * (EI2 - EI**2) * off
    return MomentSet(
        C_mean=C_mean,
        G_var=G_var,
        EI=EI,
        EI2=EI2,
        steps=config.steps(model.n_nodes),
        R=np.array(model.R),
        sigma_v2=np.array(model.sigma_v2),
        link_noise=link_noise_scale(C, model) ** 2,
        truth=np.asarray(truth, dtype=float),
    )


def mean_stability(moments: MomentSet) -> tuple[bool, float]:
    rho = float(np.max(np.abs(np.linalg.eigvals(moments.mean_transfer()))))
    return rho < 1.0, rho


class _Recursion:
    """One step of the (mean, second moment) map, split into linear and constant parts."""

    def __init__(self, ms: MomentSet):
        N, M = ms.n_nodes, ms.dim
        self.N, self.M = N, M
        self.ms = ms
        self.Ck = np.kron(ms.C_mean, np.eye(M))
        self.A = np.zeros((N * M, N * M))
        for k in range(N):
            self.A[k * M : (k + 1) * M, k * M : (k + 1) * M] = np.eye(M) - ms.steps[k] * ms.R[k]
        self.w = np.tile(ms.truth, N)
        # (I - E[G]) w, the mean bias injected by the links
        self.bias = self.w - self.Ck @ self.w

    def mean_step(self, m):
        return self.A @ (self.Ck @ m + self.bias)

    def second_moment_step(self, P, m, homogeneous=False):
        """Second moment of ``w~_i`` given mean ``m`` and second moment ``P`` of ``w~_{i-1}``.

        With ``homogeneous`` only the part linear in ``P`` is returned.
        """
        ms, N, M = self.ms, self.N, self.M
        idx = np.arange(N)
        # eps = G (w~ - w) + w - q = Gbar w~ + b + Delta (w~ - w) - q with zero-mean Delta;
        # keeping Gbar P Gbar' whole avoids cancelling large terms near P = 0
        E = self.Ck @ P @ self.Ck.T
        if homogeneous:
            S = P
        else:
            Gm = self.Ck @ m
            E += np.outer(Gm, self.bias) + np.outer(self.bias, Gm) + np.outer(self.bias, self.bias)
            S = P - np.outer(m, self.w) - np.outer(self.w, m) + np.outer(self.w, self.w)
        Eb = E.reshape(N, M, N, M)
        Sb = S.reshape(N, M, N, M)
        Eb[idx, :, idx, :] += np.einsum("kl,lab->kab", ms.G_var, Sb[idx, :, idx, :])
        if not homogeneous:
            Eb[idx, :, idx, :] += ms.link_noise[:, None, None] * np.eye(M)
        out = self.A @ E @ self.A.T
        # Gaussian fourth moment: E[u'u X u'u] = R (X + X') R + R tr(R X)
        Ekk = Eb[idx, :, idx, :]
        R = ms.R
        RER = R @ Ekk @ R
        extra = RER + R * np.trace(R @ Ekk, axis1=1, axis2=2)[:, None, None]
        if not homogeneous:
            extra = extra + ms.sigma_v2[:, None, None] * R
        ob = out.reshape(N, M, N, M)
        ob[idx, :, idx, :] += (ms.steps**2)[:, None, None] * extra
        return out


@dataclass
class SteadyStatePrediction:
    node: np.ndarray | None
    stable: bool
    spectral_radius: float
    residual: float = math.nan
    iterations: int = 0
    mean_error: np.ndarray | None = None
    method: Method = Method.FIXED_POINT

    @property
    def network(self) -> float:
        return float(np.mean(self.node)) if self.node is not None else math.nan

    @property
    def node_db(self) -> np.ndarray:
        return 10.0 * np.log10(self.node)

    @property
    def network_db(self) -> float:
        return 10.0 * math.log10(self.network)

    def to_dict(self) -> dict:
        d = {
            "method": Method(self.method).value,
            "stable": self.stable,
            "spectral_radius": self.spectral_radius,
            "residual": self.residual,
            "iterations": self.iterations,
        }
        if self.node is not None:
            d["node_msd"] = self.node.tolist()
            d["node_msd_db"] = self.node_db.tolist()
            d["network_msd"] = self.network
            d["network_msd_db"] = self.network_db
        return d


def write_prediction(pred: SteadyStatePrediction, path: str | Path, **extra) -> None:
    Path(path).write_text(json.dumps({**pred.to_dict(), **extra}, indent=2, sort_keys=True) + "\n")


def _node_traces(P, N, M):
    Pb = P.reshape(N, M, N, M)
    idx = np.arange(N)
    return np.trace(Pb[idx, :, idx, :], axis1=1, axis2=2).copy()


def predict_msd(
    moments: MomentSet,
    method: Method | str = Method.FIXED_POINT,
    tol: float = 1e-10,
    max_iter: int = 100_000,
    initial=None,
) -> SteadyStatePrediction:
    """Steady-state per-node MSD.

    ``fixed_point`` runs the moment recursion from ``psi = initial`` (zeros by
    default) until the relative change of the second moment drops below
    ``tol``. ``vectorized`` solves the fixed-point equations directly: the
    mean by a dense solve, the second moment by assembling the linear map
    (small networks) or by GMRES on it.
    """
    method = Method(method)
    stable, rho = mean_stability(moments)
    if not stable:
        return SteadyStatePrediction(None, False, rho, method=method)
    rec = _Recursion(moments)
    N, M = moments.n_nodes, moments.dim
    if method is Method.FIXED_POINT:
        psi0 = np.zeros(N * M) if initial is None else np.broadcast_to(initial, (N, M)).ravel()
        m = rec.w - psi0
        P = np.outer(m, m)
        for it in range(1, max_iter + 1):
            P_new = rec.second_moment_step(P, m)
            m = rec.mean_step(m)
            if not np.all(np.isfinite(P_new)):
                raise ConvergenceError("moment recursion diverged (not mean-square stable)")
            scale = np.linalg.norm(P_new)
            change = np.linalg.norm(P_new - P) / scale if scale > _ZERO else 0.0
            P = P_new
            if change < tol:
                return SteadyStatePrediction(_node_traces(P, N, M), True, rho, change, it, m.reshape(N, M), method)
        raise ConvergenceError(f"no convergence after {max_iter} iterations (last change {change:.3g})")

    n = N * M
    m = np.linalg.solve(np.eye(n) - rec.A @ rec.Ck, rec.A @ rec.bias)
    K = rec.second_moment_step(np.zeros((n, n)), m)

    calls = [0]

    def apply(x):
        calls[0] += 1
        X = x.reshape(n, n)
        return (X - rec.second_moment_step(X, m, homogeneous=True)).ravel()

    if not np.any(K):
        x, iters = np.zeros(n * n), 0
    elif n * n <= 1600:
        F = np.empty((n * n, n * n))
        eye = np.eye(n * n)
        for j in range(n * n):
            F[:, j] = apply(eye[j])
        x = np.linalg.solve(F, K.ravel())
        iters = 1
    else:
        op = LinearOperator((n * n, n * n), matvec=apply, dtype=float)
        x, info = gmres(op, K.ravel(), x0=K.ravel(), rtol=1e-14, atol=0.0, restart=200, maxiter=max_iter)
        if info != 0:
            raise ConvergenceError(f"GMRES did not converge (info={info})")
        iters = calls[0]
    P = x.reshape(n, n)
    P = 0.5 * (P + P.T)
    scale = np.linalg.norm(P)
    residual = float(np.linalg.norm(apply(P.ravel()) - K.ravel()) / scale) if scale > _ZERO else 0.0
    if np.any(_node_traces(P, N, M) < 0):
        raise ConvergenceError("second-moment solution is not positive (not mean-square stable)")
    return SteadyStatePrediction(_node_traces(P, N, M), True, rho, residual, iters, m.reshape(N, M), method)
