"""Sparse reconstruction: orthogonal matching pursuit and a basic LASSO solver.

Both are exposed through :func:`reconstruct`, the map from N measurements
back to an M-dimensional estimate that the analysis-by-synthesis encoders
call in their inner loop and the decoder calls once per frame.
"""

from __future__ import annotations

import enum
import threading
from dataclasses import dataclass

import numpy as np

from ._omp import omp_kernel
from .model import InvalidParameterError, SensingMatrix

RANK_TOL = 1e-10
SUPPORT_TOL = 1e-8


class ReconKind(str, enum.Enum):
    OMP = "omp"
    LASSO = "lasso"


@dataclass(frozen=True)
class ReconConfig:
    """Which reconstruction to run and its parameters.

    ``sparsity_k`` is required for OMP, ``lasso_mu`` for LASSO.
    """

    kind: ReconKind = ReconKind.OMP
    sparsity_k: int | None = None
    lasso_mu: float = 1e-3
    lasso_max_iters: int = 2000
    lasso_tol: float = 1e-9

    def __post_init__(self):
        try:
            object.__setattr__(self, "kind", ReconKind(self.kind))
        except ValueError:
            raise InvalidParameterError(f"unknown reconstruction kind {self.kind!r}") from None
        if self.kind is ReconKind.OMP and (self.sparsity_k is None or self.sparsity_k < 1):
            raise InvalidParameterError("OMP needs a positive sparsity_k")
        if self.kind is ReconKind.LASSO and not self.lasso_mu > 0:
            raise InvalidParameterError("lasso_mu must be positive")

    @classmethod
    def omp(cls, k: int) -> "ReconConfig":
        return cls(ReconKind.OMP, sparsity_k=k)

    @classmethod
    def lasso(cls, mu: float = 1e-3, max_iters: int = 2000, tol: float = 1e-9) -> "ReconConfig":
        return cls(ReconKind.LASSO, lasso_mu=mu, lasso_max_iters=max_iters, lasso_tol=tol)


@dataclass(frozen=True)
class Reconstruction:
    estimate: np.ndarray
    support_estimate: tuple[int, ...]
    residual_norm: float
    iterations_used: int
    converged: bool = True


class CallCounter:
    """Thread-safe tally of reconstruction invocations."""

    def __init__(self):
        self._lock = threading.Lock()
        self._count = 0

    def add(self, n: int = 1):
        with self._lock:
            self._count += n

    @property
    def count(self) -> int:
        return self._count

    def reset(self):
        with self._lock:
            self._count = 0


def _check_y(phi: SensingMatrix, y) -> np.ndarray:
    y = np.ascontiguousarray(y, dtype=float)
    if y.ndim != 1 or y.size != phi.n_rows:
        raise InvalidParameterError(
            f"measurement vector of length {y.size} does not match {phi.n_rows} rows"
        )
    return y


def omp_reconstruct(phi: SensingMatrix, y, k: int) -> Reconstruction:
    """Orthogonal matching pursuit with residual-increase stopping.

    Each iteration picks the atom with the largest ``|phi^T r|`` (smallest
    index on ties), adds it to the support and projects ``y`` onto the span
    of the selected atoms.  The loop stops after ``k`` atoms, or rolls back
    one step if the residual norm grows.  Atoms that fall inside the span of
    the current support (within ``RANK_TOL`` times the largest column norm)
    receive a zero coefficient, i.e. the basic least-squares solution.
    """
    y = _check_y(phi, y)
    if not 0 < k < phi.n_rows:
        raise InvalidParameterError(f"OMP needs 0 < k < N, got k={k}, N={phi.n_rows}")
    col_scale = float(np.sqrt(np.max(np.einsum("ij,ij->j", phi.entries, phi.entries))))
    x, support, used, rnorm = omp_kernel(phi.transposed, y, k, RANK_TOL * col_scale)
    return Reconstruction(
        estimate=x,
        support_estimate=tuple(int(s) for s in support[:used]),
        residual_norm=float(rnorm),
        iterations_used=int(used),
    )


def _soft(v, t):
    return np.sign(v) * np.maximum(np.abs(v) - t, 0.0)


def _power_lipschitz(phi: np.ndarray, steps: int = 20) -> float:
    v = np.full(phi.shape[1], 1.0 / np.sqrt(phi.shape[1]))
    s = 0.0
    for _ in range(steps):
        w = phi.T @ (phi @ v)
        s = float(np.linalg.norm(w))
        if s == 0.0:
            return 0.0
        v = w / s
    return s


def lasso_objective(phi: np.ndarray, y: np.ndarray, x: np.ndarray, mu: float) -> float:
    r = y - phi @ x
    return 0.5 * float(r @ r) + mu * float(np.abs(x).sum())


def lasso_reconstruct(
    phi: SensingMatrix, y, cfg: ReconConfig, objective_trace: list | None = None
) -> Reconstruction:
    """Minimise ``0.5 ||y - phi x||^2 + mu ||x||_1`` by accelerated proximal gradient.

    Monotone FISTA with backtracking: an extrapolated step is only accepted
    when it does not raise the objective, so the recorded objective never
    increases.  Stops once an accepted step moves the iterate by less than
    ``cfg.lasso_tol`` relative to its norm, or after ``cfg.lasso_max_iters``
    iterations; the latter returns the last iterate with ``converged=False``.
    Accepted objective values are appended to ``objective_trace`` when given.
    """
    if cfg.kind is not ReconKind.LASSO:
        raise InvalidParameterError("lasso_reconstruct needs a LASSO config")
    y = _check_y(phi, y)
    a = phi.entries
    mu = cfg.lasso_mu

    def objective(v, r):
        return 0.5 * float(r @ r) + mu * float(np.abs(v).sum())

    lip = _power_lipschitz(a)
    step = 1.0 / lip if lip > 0 else 1.0
    x = np.zeros(a.shape[1])
    r = y.copy()
    obj = objective(x, r)
    w, t = x.copy(), 1.0
    converged = False
    it = 0
    if objective_trace is not None:
        objective_trace.append(obj)
    for it in range(1, cfg.lasso_max_iters + 1):
        r_w = y - a @ w
        f_w = 0.5 * float(r_w @ r_w)
        grad = -(a.T @ r_w)
        while True:
            z = _soft(w - step * grad, step * mu)
            d = z - w
            r_z = y - a @ z
            f_z = 0.5 * float(r_z @ r_z)
            if f_z <= f_w + float(grad @ d) + float(d @ d) / (2 * step) + 1e-15 * abs(f_w):
                break
            step *= 0.5
        obj_z = f_z + mu * float(np.abs(z).sum())
        t_next = 0.5 * (1.0 + np.sqrt(1.0 + 4.0 * t * t))
        if obj_z <= obj:
            moved = float(np.linalg.norm(z - x))
            w = z + ((t - 1.0) / t_next) * (z - x)
            x, r, obj = z, r_z, obj_z
            if objective_trace is not None:
                objective_trace.append(obj)
            if moved <= cfg.lasso_tol * max(float(np.linalg.norm(x)), 1.0):
                converged = True
                break
        else:
            # reject the extrapolated point, restart momentum from x
            w = x + (t / t_next) * (z - x)
        t = t_next

    support = tuple(int(i) for i in np.flatnonzero(np.abs(x) > SUPPORT_TOL))
    return Reconstruction(
        estimate=x,
        support_estimate=support,
        residual_norm=float(np.linalg.norm(r)),
        iterations_used=it,
        converged=converged,
    )


def reconstruct(
    cfg: ReconConfig, phi: SensingMatrix, y, counter: CallCounter | None = None
) -> Reconstruction:
    """Dispatch to the configured reconstruction, tallying the call in ``counter``."""
    if counter is not None:
        counter.add()
    if cfg.kind is ReconKind.OMP:
        return omp_reconstruct(phi, y, cfg.sparsity_k)
    if cfg.kind is ReconKind.LASSO:
        return lasso_reconstruct(phi, y, cfg)
    raise InvalidParameterError(f"unknown reconstruction kind {cfg.kind!r}")


class Synthesizer:
    """Estimate-only reconstruction bound to one sensing matrix.

    The encoders call this thousands of times per frame, so it skips the
    :class:`Reconstruction` bookkeeping.  Results are identical to
    ``reconstruct(cfg, phi, y).estimate``.
    """

    def __init__(self, cfg: ReconConfig, phi: SensingMatrix, counter: CallCounter | None = None):
        if cfg.kind is ReconKind.OMP and not 0 < cfg.sparsity_k < phi.n_rows:
            raise InvalidParameterError(
                f"OMP needs 0 < k < N, got k={cfg.sparsity_k}, N={phi.n_rows}"
            )
        self.cfg = cfg
        self.phi = phi
        self.counter = counter
        self._phi_t = phi.transposed
        col_scale = float(np.sqrt(np.max(np.einsum("ij,ij->j", phi.entries, phi.entries))))
        self._tol = RANK_TOL * col_scale

    def __call__(self, y: np.ndarray) -> np.ndarray:
        if self.counter is not None:
            self.counter.add()
        if self.cfg.kind is ReconKind.OMP:
            return omp_kernel(self._phi_t, np.ascontiguousarray(y, dtype=float),
                              self.cfg.sparsity_k, self._tol)[0]
        return lasso_reconstruct(self.phi, y, self.cfg).estimate
