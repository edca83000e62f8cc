"""Alternating minimization for the ridge (l2) and sparse (l1) CoSpace models.

Both models minimize

    1/2 ||Y~ - P Theta X~||_F^2 + penalty(P) + beta/2 tr(Theta X~ L X~^T Theta^T)
    subject to Theta Theta^T = I

over the regression matrix ``P`` (classes x d) and the joint projection
``Theta`` (d x (d1 + d2)). ``penalty`` is ``alpha/2 ||P||_F^2`` for the ridge
model and ``alpha * sum |P_ij|`` for the sparse one.
"""
from __future__ import annotations

import logging
from dataclasses import dataclass, field, replace

import numpy as np
from scipy import linalg

from .data import (NumericalError, Standardizer, StackedSystem, ValidationError,
                   as_modality, build_stacked_system, fit_standardizers, onehot_encode)
from .graph import supervised_laplacian

log = logging.getLogger(__name__)

PENALTIES = ("ridge", "sparse")


@dataclass(frozen=True)
class AdmmConfig:
    # rho is relative: each ADMM loop rescales it by the curvature of its subproblem.
    # inner_* drive the Theta-step; p_inner_* the sparse P-step, which is cheap (d x d systems)
    # and needs a tight tolerance because its residuals understate the error when Q is ill-conditioned
    rho: float = 1.0
    inner_iter: int = 50
    inner_tol: float = 1e-6
    p_inner_iter: int = 500
    p_inner_tol: float = 1e-9

    def __post_init__(self):
        if not self.rho > 0:
            raise ValidationError(f"rho must be positive, got {self.rho}")
        if self.inner_iter < 1 or self.p_inner_iter < 1:
            raise ValidationError("inner iteration limits must be >= 1")
        if not (self.inner_tol > 0 and self.p_inner_tol > 0):
            raise ValidationError("inner tolerances must be positive")


@dataclass(frozen=True)
class SolverConfig:
    alpha: float = 0.1
    beta: float = 0.1
    subspace_dim: int = 10
    penalty: str = "ridge"
    zeta: float = 1e-4
    max_iter: int = 200
    admm: AdmmConfig = field(default_factory=AdmmConfig)
    seed: int = 0
    init: str = "svd"
    standardize: bool = True

    def __post_init__(self):
        if self.penalty not in PENALTIES:
            raise ValidationError(f"penalty must be one of {PENALTIES}, got {self.penalty!r}")
        if self.alpha < 0 or self.beta < 0:
            raise ValidationError("alpha and beta must be non-negative")
        if self.subspace_dim < 1:
            raise ValidationError("subspace_dim must be >= 1")
        if not self.zeta > 0:
            raise ValidationError("zeta must be positive")
        if self.max_iter < 0:
            raise ValidationError("max_iter must be >= 0")
        if self.init not in ("svd", "random"):
            raise ValidationError(f"unknown init {self.init!r}")


@dataclass(frozen=True)
class CoSpaceModel:
    theta: np.ndarray
    p: np.ndarray
    d1: int
    penalty: str
    alpha: float
    beta: float
    history: np.ndarray
    converged: bool
    iterations_used: int
    scalers: tuple[Standardizer, Standardizer]
    diagnostics: dict = field(default_factory=dict)

    @property
    def subspace_dim(self) -> int:
        return self.theta.shape[0]

    @property
    def theta1(self) -> np.ndarray:
        return self.theta[:, :self.d1]

    @property
    def theta2(self) -> np.ndarray:
        return self.theta[:, self.d1:]

    def theta_block(self, modality: int) -> np.ndarray:
        if modality == 1:
            return self.theta1
        if modality == 2:
            return self.theta2
        raise ValidationError(f"modality must be 1 or 2, got {modality}")

    def transform(self, x, modality: int) -> np.ndarray:
        """Standardize ``x`` with the training statistics and project it into the shared space."""
        theta_m = self.theta_block(modality)
        z = self.scalers[modality - 1].apply(x)
        if z.shape[0] != theta_m.shape[1]:
            raise ValidationError(f"modality {modality}: model expects {theta_m.shape[1]} features, got {z.shape[0]}")
        return theta_m @ z

    def predict(self, x, modality: int) -> np.ndarray:
        """Class scores straight from the regression matrix (argmax rule)."""
        return np.argmax(self.p @ self.transform(x, modality), axis=0)


def soft_threshold(x, lam):
    """``sign(x) * max(|x| - lam, 0)``, elementwise."""
    if np.any(np.asarray(lam) < 0):
        raise ValidationError(f"threshold must be non-negative, got {lam}")
    x = np.asarray(x, dtype=float)
    out = np.sign(x) * np.maximum(np.abs(x) - lam, 0.0)
    return float(out) if out.ndim == 0 else out


def _check_finite(name: str, value: float) -> float:
    if not np.isfinite(value):
        raise NumericalError(f"non-finite {name} term in objective")
    return float(value)


def _terms(system: StackedSystem, theta, p, beta):
    q = theta @ system.x_tilde
    fit = 0.5 * np.sum((system.y_tilde - p @ q) ** 2)
    graph = 0.5 * beta * np.sum(q * (q @ system.laplacian))
    return _check_finite("data-fit", fit), _check_finite("graph", graph)


def objective_l2(system: StackedSystem, theta, p, alpha, beta) -> float:
    fit, graph = _terms(system, theta, p, beta)
    reg = _check_finite("ridge", 0.5 * alpha * np.sum(p**2))
    return fit + reg + graph


def objective_l1(system: StackedSystem, theta, p, alpha, beta) -> float:
    fit, graph = _terms(system, theta, p, beta)
    reg = _check_finite("l1", alpha * np.sum(np.abs(p)))
    return fit + reg + graph


def objective(system, theta, p, alpha, beta, penalty="ridge") -> float:
    if penalty == "ridge":
        return objective_l2(system, theta, p, alpha, beta)
    return objective_l1(system, theta, p, alpha, beta)


# --- P-step -----------------------------------------------------------------

def solve_p_ridge(q, y_tilde, alpha) -> np.ndarray:
    """Closed-form minimizer of ``1/2||Y~ - P Q||^2 + alpha/2 ||P||^2``."""
    q = np.asarray(q, dtype=float)
    y_tilde = np.asarray(y_tilde, dtype=float)
    if alpha < 0:
        raise ValidationError("alpha must be non-negative")
    gram = q @ q.T + alpha * np.eye(q.shape[0])
    try:
        cho = linalg.cho_factor(gram, lower=True)
    except linalg.LinAlgError:
        raise NumericalError("singular ridge system (Q Q^T + alpha I not positive definite)") from None
    if alpha == 0 and np.linalg.cond(gram) > 1e12:
        raise NumericalError("singular ridge system at alpha = 0")
    return linalg.cho_solve(cho, q @ y_tilde.T).T


def _admm_p_sparse(q, y_tilde, alpha, admm: AdmmConfig, p0=None):
    q = np.asarray(q, dtype=float)
    y_tilde = np.asarray(y_tilde, dtype=float)
    if alpha < 0:
        raise ValidationError("alpha must be non-negative")
    gram = q @ q.T
    d = gram.shape[0]
    # geometric mean of the extreme curvatures (floored for rank-deficient Q) balances the
    # convergence of the primal and dual residuals
    ev = np.linalg.eigvalsh(gram)
    top = max(ev[-1], 1e-12)
    rho = admm.rho * np.sqrt(max(ev[0], 1e-6 * top) * top)
    cho = linalg.cho_factor(gram + rho * np.eye(d), lower=True)
    yq = y_tilde @ q.T
    z = np.zeros_like(yq) if p0 is None else np.array(p0, dtype=float)
    u = np.zeros_like(yq)
    converged = False
    it = 0
    for it in range(1, admm.p_inner_iter + 1):
        p = linalg.cho_solve(cho, (yq + rho * (z - u)).T).T
        z_old = z
        z = soft_threshold(p + u, alpha / rho)
        u = u + p - z
        r_primal = np.linalg.norm(p - z)
        r_dual = rho * np.linalg.norm(z - z_old)
        if r_primal <= admm.p_inner_tol and r_dual <= admm.p_inner_tol:
            converged = True
            break
    return z, it, converged


def solve_p_sparse(q, y_tilde, alpha, admm: AdmmConfig = AdmmConfig(), p0=None) -> np.ndarray:
    """ADMM for ``1/2||Y~ - P Q||^2 + alpha * sum|P_ij|`` with a soft-threshold split."""
    p, it, ok = _admm_p_sparse(q, y_tilde, alpha, admm, p0)
    if not ok:
        log.warning("sparse P-step stopped after %d iterations without meeting tolerance %g", it, admm.p_inner_tol)
    return p


# --- Theta-step ---------------------------------------------------------------

class _ThetaProblem:
    """Gram matrices of the smooth Theta objective for a fixed system."""

    def __init__(self, system: StackedSystem):
        x = system.x_tilde
        self.system = system
        self.xx = x @ x.T
        self.xlx = (x @ system.laplacian) @ x.T
        self.yx = system.y_tilde @ x.T
        self.yy = float(np.sum(system.y_tilde**2))

    def value(self, theta, p, beta) -> float:
        pt = p @ theta
        return (0.5 * self.yy - np.sum(self.yx * pt) + 0.5 * np.sum(pt * (pt @ self.xx))
                + 0.5 * beta * np.sum(theta * (theta @ self.xlx)))

    def gradient(self, theta, p, beta) -> np.ndarray:
        return p.T @ (p @ theta @ self.xx - self.yx) + beta * theta @ self.xlx


def theta_objective(system: StackedSystem, p, beta, theta) -> float:
    """Smooth part of the objective as a function of Theta (no constraint, no P penalty)."""
    fit, graph = _terms(system, theta, p, beta)
    return fit + graph


def theta_gradient(system: StackedSystem, p, beta, theta) -> np.ndarray:
    return _ThetaProblem(system).gradient(np.asarray(theta, float), np.asarray(p, float), beta)


def orthonormal_polar(m) -> np.ndarray:
    """Nearest matrix with orthonormal rows (orthogonal Procrustes projection)."""
    u, _, vt = np.linalg.svd(m, full_matrices=False)
    return u @ vt


def orthogonality_error(theta) -> float:
    return float(np.linalg.norm(theta @ theta.T - np.eye(theta.shape[0])))


def _admm_theta(prob: _ThetaProblem, p, beta, theta0, admm: AdmmConfig):
    """Split Theta = G with G on the Stiefel set; returns (theta, iterations, improved)."""
    theta0 = np.asarray(theta0, dtype=float)
    d, n_feat = theta0.shape
    s, v = np.linalg.eigh(p.T @ p)
    s = np.clip(s, 0.0, None)
    lam_xx = np.linalg.eigvalsh(prob.xx)[-1]
    lam_xlx = np.linalg.eigvalsh(prob.xlx)[-1] if beta > 0 else 0.0
    rho = admm.rho * max(s[-1] * lam_xx + beta * lam_xlx, 1e-12)
    # row i of V^T Theta solves a system with (s_i XX^T + beta XLX^T + rho I); rho bounds its
    # condition number, so explicit inverses are safe and let all rows solve in one einsum
    base = beta * prob.xlx + rho * np.eye(n_feat)
    inverses = np.linalg.inv(s[:, None, None] * prob.xx[None] + base[None])
    pty = p.T @ prob.yx

    f0 = prob.value(theta0, p, beta)
    best, best_f = theta0, f0
    # second candidate start: the projected minimizer of the unconstrained quadratic. ADMM on
    # the Stiefel set is non-convex, and this start escapes the poor stationary points a warm
    # start can sit in (it is exact in the Procrustes case P = I, beta = 0)
    reg = 1e-8 * rho * np.eye(n_feat)
    free = v @ np.einsum("ij,ijk->ik", v.T @ pty,
                         np.linalg.inv(s[:, None, None] * prob.xx[None] + (beta * prob.xlx + reg)[None]))
    alt = orthonormal_polar(free) if np.all(np.isfinite(free)) else theta0
    g = theta0.copy()
    f_alt = prob.value(alt, p, beta)
    if f_alt < f0:
        g = alt.copy()
        best, best_f = alt, f_alt
    u = np.zeros_like(g)
    it = 0
    for it in range(1, admm.inner_iter + 1):
        rhs = v.T @ (pty + rho * (g - u))
        theta = v @ np.einsum("ij,ijk->ik", rhs, inverses)
        g_old = g
        g = orthonormal_polar(theta + u)
        u = u + theta - g
        fg = prob.value(g, p, beta)
        if fg < best_f:
            best, best_f = g, fg
        r_primal = np.linalg.norm(theta - g)
        r_dual = rho * np.linalg.norm(g - g_old)
        if r_primal <= admm.inner_tol * np.sqrt(d) and r_dual <= admm.inner_tol * rho * np.sqrt(d):
            break
    improved = best is not theta0
    return best, it, improved


def solve_theta(system: StackedSystem, p, beta, current_theta, admm: AdmmConfig = AdmmConfig()) -> np.ndarray:
    """Orthogonality-constrained Theta update, warm-started at ``current_theta``.

    Returns the best feasible iterate found; if ADMM never improves on the warm
    start, the warm start is returned unchanged.
    """
    theta, it, improved = _admm_theta(_ThetaProblem(system), np.asarray(p, float), beta, current_theta, admm)
    if not improved:
        log.info("theta-step made no progress in %d iterations; keeping warm start", it)
    return theta


# --- outer loop ---------------------------------------------------------------

def _sign_fix(vectors: np.ndarray) -> np.ndarray:
    """Flip each column so its largest-magnitude entry is positive."""
    idx = np.argmax(np.abs(vectors), axis=0)
    signs = np.sign(vectors[idx, np.arange(vectors.shape[1])])
    signs[signs == 0] = 1.0
    return vectors * signs


def initial_theta(system: StackedSystem, d: int, init: str = "svd", seed: int = 0) -> np.ndarray:
    if init == "random":
        rng = np.random.default_rng(seed)
        return orthonormal_polar(rng.standard_normal((d, system.n_features)))
    u, _, _ = np.linalg.svd(system.x_tilde, full_matrices=True)
    return _sign_fix(u[:, :d]).T.copy()


def fit_system(system: StackedSystem, config: SolverConfig,
               scalers: tuple[Standardizer, Standardizer] | None = None) -> CoSpaceModel:
    """Run the alternating P / Theta iterations on a prepared stacked system."""
    d = config.subspace_dim
    if d > system.n_features:
        raise ValidationError(f"subspace_dim {d} exceeds d1 + d2 = {system.n_features}")
    if system.y_tilde.shape[0] < 2:
        raise ValidationError("at least two classes are required")
    if scalers is None:
        scalers = (Standardizer.identity(system.d1), Standardizer.identity(system.d2))
    alpha, beta, penalty = config.alpha, config.beta, config.penalty

    def energy(theta, p):
        return objective(system, theta, p, alpha, beta, penalty)

    prob = _ThetaProblem(system)
    theta = initial_theta(system, d, config.init, config.seed)
    q = theta @ system.x_tilde
    p = solve_p_ridge(q, system.y_tilde, alpha if alpha > 0 else 1e-8)
    e_prev = energy(theta, p)
    history = [e_prev]
    converged = False
    stalls = {"p_step": 0, "theta_step": 0}

    for _ in range(config.max_iter):
        q = theta @ system.x_tilde
        if penalty == "ridge":
            p = solve_p_ridge(q, system.y_tilde, alpha)
        else:
            p_new, _, ok = _admm_p_sparse(q, system.y_tilde, alpha, config.admm, p0=p)
            stalls["p_step"] += not ok
            if energy(theta, p_new) <= energy(theta, p):
                p = p_new
        theta, _, improved = _admm_theta(prob, p, beta, theta, config.admm)
        stalls["theta_step"] += not improved
        e = energy(theta, p)
        history.append(e)
        if abs(e - e_prev) / max(e_prev, 1e-12) < config.zeta:
            converged = True
            break
        e_prev = e

    history = np.asarray(history)
    history.setflags(write=False)
    theta.setflags(write=False)
    p = np.array(p)
    p.setflags(write=False)
    return CoSpaceModel(
        theta=theta, p=p, d1=system.d1, penalty=penalty, alpha=alpha, beta=beta,
        history=history, converged=converged, iterations_used=len(history) - 1,
        scalers=scalers,
        diagnostics={"orthogonality_error": orthogonality_error(theta),
                     "inexact_p_steps": stalls["p_step"], "stalled_theta_steps": stalls["theta_step"]},
    )


def prepare_system(x1, x2, labels, standardize: bool = True):
    """Standardize both modalities and build the supervised stacked system."""
    x1 = as_modality(x1, 1).data
    x2 = as_modality(x2, 2).data
    enc = onehot_encode(labels)
    if enc.num_classes < 2:
        raise ValidationError("at least two classes are required")
    scalers = fit_standardizers(x1, x2, standardize)
    lap = supervised_laplacian(enc.labels)
    system = build_stacked_system(scalers[0].apply(x1), scalers[1].apply(x2), enc, lap)
    return system, scalers


def fit_cospace(x1, x2, labels, config: SolverConfig = SolverConfig()) -> CoSpaceModel:
    x1 = as_modality(x1, 1)
    x2 = as_modality(x2, 2)
    if config.subspace_dim > x1.n_features + x2.n_features:
        raise ValidationError(
            f"subspace_dim {config.subspace_dim} exceeds d1 + d2 = {x1.n_features + x2.n_features}")
    system, scalers = prepare_system(x1, x2, labels, config.standardize)
    return fit_system(system, config, scalers)


def with_params(config: SolverConfig, **kw) -> SolverConfig:
    return replace(config, **kw)
