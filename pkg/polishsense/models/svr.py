"""
Linear ε-insensitive support vector regression.

Primal::

    min_{w,b}  ½‖w‖² + C Σ max(0, |y_i - w·x_i - b| - ε)

Dual in ``β = α - α*``::

    max_β  -½ βᵀKβ - ε Σ|β_i| + Σ y_i β_i    s.t.  Σ β_i = 0,  |β_i| ≤ C

with ``K = X Xᵀ`` and ``w = Xᵀβ``. The offset absorbs column means, so the
solver works on the centred design ``Xc = U diag(s) Vt`` truncated to its
numerical rank and optimises the fitted values ``q = diag(s) Vt w`` instead of
``w``. Every linear system it factors is then in the scale of the targets, no
matter how large the raw features are. The slack-variable primal is solved by a
Mehrotra predictor-corrector interior-point iteration; the multipliers of the
two tube constraints give ``β``.

``b`` is the midpoint of the interval minimising the primal loss for the current
``w``, and the solver stops once the duality gap is at most
``tol · (1 + |primal|)``.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Any, Dict, Mapping, Optional, Sequence, Tuple

import numpy as np
from scipy import linalg

from ..logging_utils import get_logger
from .base import ModelFitError, ModelKind, ModelSpec, TrainedModel, check_training_data, optional_names

log = get_logger("models.svr")

DEFAULT_TOL = 1e-8
DEFAULT_MAX_ITER = 200

_STEP_FRACTION = 0.995
_MIN_STEP = 1e-12
_STALL_TOL = 1e-6


class SvrConvergenceError(ModelFitError):
    """Raised when the duality gap is still above tolerance at the iteration cap."""

    def __init__(self, message: str, gap: float) -> None:
        super().__init__(message)
        self.gap = gap


@dataclass(frozen=True)
class SvrSolution:
    beta: np.ndarray
    w: np.ndarray
    b: float
    primal: float
    dual: float
    iterations: int

    @property
    def gap(self) -> float:
        return self.primal - self.dual


def insensitive_loss(residuals: np.ndarray, epsilon: float) -> float:
    return float(np.maximum(np.abs(residuals) - epsilon, 0.0).sum())


def optimal_bias(residuals: np.ndarray, epsilon: float) -> float:
    """Midpoint of the set of ``b`` minimising ``Σ max(0, |r - b| - ε)``.

    The loss is convex and piecewise linear with kinks at ``r ± ε``, so its
    minimising interval is bounded by kinks.
    """

    kinks = np.unique(np.concatenate((residuals - epsilon, residuals + epsilon)))
    losses = np.maximum(np.abs(residuals[np.newaxis, :] - kinks[:, np.newaxis]) - epsilon, 0.0).sum(axis=1)
    lowest = losses.min()
    optimal = kinks[losses <= lowest + 1e-12 * (1.0 + lowest)]
    return float(0.5 * (optimal[0] + optimal[-1]))


@dataclass(frozen=True)
class _ReducedDesign:
    """``X - mean(X) ≈ U diag(s) Vt`` with singular values below rank tolerance dropped."""

    U: np.ndarray
    s: np.ndarray
    Vt: np.ndarray

    @classmethod
    def of(cls, X: np.ndarray) -> "_ReducedDesign":
        centred = X - X.mean(axis=0)
        try:
            U, s, Vt = linalg.svd(centred, full_matrices=False)
        except linalg.LinAlgError as exc:
            raise ModelFitError(f"SVD of the SVR design failed: {exc}") from exc
        rank = 0
        if s.size and s[0] > 0.0:
            rank = int(np.count_nonzero(s > s[0] * max(X.shape) * np.finfo(np.float64).eps))
        return cls(U[:, :rank], s[:rank], Vt[:rank])

    @property
    def rank(self) -> int:
        return self.s.size

    def weights(self, q: np.ndarray) -> np.ndarray:
        return self.Vt.T @ (q / self.s)


@dataclass(frozen=True)
class _Certificate:
    w: np.ndarray
    b: float
    beta: np.ndarray
    primal: float
    dual: float

    def closed(self, tol: float) -> bool:
        return self.primal - self.dual <= tol * (1.0 + abs(self.primal))


def _certificate(
    X: np.ndarray, y: np.ndarray, design: _ReducedDesign, q: np.ndarray, beta: np.ndarray, C: float, epsilon: float
) -> _Certificate:
    """Primal value at ``w(q)`` with its best offset, dual value at a ``β`` consistent with ``q``.

    ``β`` is moved inside ``span(U)`` so that ``Uᵀβ = q / s²``, which makes
    ``½‖Xᵀβ‖² = ½‖w‖²`` without evaluating ``Xᵀβ`` on the raw scale.
    """

    w = design.weights(q)
    residuals = y - X @ w
    b = optimal_bias(residuals, epsilon)
    half_norm = 0.5 * float(w @ w)
    primal = half_norm + C * insensitive_loss(residuals - b, epsilon)

    row_part = q / (design.s * design.s)
    beta = np.clip(beta + design.U @ (row_part - design.U.T @ beta), -C, C)
    dual = float(y @ beta) - epsilon * float(np.abs(beta).sum()) - half_norm
    return _Certificate(w=w, b=b, beta=beta, primal=primal, dual=dual)


@dataclass(frozen=True)
class _TubeProgram:
    """``min ½ xᵀ diag(hessian) x + costᵀx  s.t.  G x ≤ h`` over ``x = (q, b, ξ, ξ*)``."""

    hessian: np.ndarray
    cost: np.ndarray
    G: np.ndarray
    h: np.ndarray

    @classmethod
    def build(cls, design: _ReducedDesign, y: np.ndarray, C: float, epsilon: float) -> "_TubeProgram":
        n, r = design.U.shape
        ones = np.ones((n, 1))
        eye = np.eye(n)
        zero_nn = np.zeros((n, n))
        zero_fit = np.zeros((n, r + 1))
        G = np.block(
            [
                [-design.U, -ones, -eye, zero_nn],
                [design.U, ones, zero_nn, -eye],
                [zero_fit, -eye, zero_nn],
                [zero_fit, zero_nn, -eye],
            ]
        )
        h = np.concatenate((epsilon - y, epsilon + y, np.zeros(2 * n)))
        hessian = np.concatenate((1.0 / (design.s * design.s), np.zeros(1 + 2 * n)))
        cost = np.concatenate((np.zeros(r + 1), np.full(2 * n, C)))
        return cls(hessian=hessian, cost=cost, G=G, h=h)


def _step_to_boundary(values: np.ndarray, direction: np.ndarray) -> float:
    shrinking = direction < 0.0
    if not shrinking.any():
        return 1.0
    return min(1.0, float(np.min(-values[shrinking] / direction[shrinking])))


def _interior_step(
    program: _TubeProgram, x: np.ndarray, slack: np.ndarray, z: np.ndarray
) -> Optional[Tuple[np.ndarray, np.ndarray, np.ndarray]]:
    """One predictor-corrector step, or ``None`` once no usable step remains."""

    G = program.G
    r_dual = program.hessian * x + program.cost + G.T @ z
    r_prim = G @ x + slack - program.h
    mu = float(slack @ z) / slack.size
    if mu <= 0.0:
        return None
    try:
        factor = linalg.cho_factor(np.diag(program.hessian) + G.T @ ((z / slack)[:, np.newaxis] * G))
    except linalg.LinAlgError:
        return None

    def direction(centring: np.ndarray) -> Tuple[np.ndarray, np.ndarray, np.ndarray]:
        dx = linalg.cho_solve(factor, -r_dual - G.T @ ((centring + z * r_prim) / slack))
        ds = -r_prim - G @ dx
        dz = (centring - z * ds) / slack
        return dx, ds, dz

    dx, ds, dz = direction(-slack * z)
    alpha = min(_step_to_boundary(slack, ds), _step_to_boundary(z, dz))
    mu_affine = float((slack + alpha * ds) @ (z + alpha * dz)) / slack.size
    sigma = (mu_affine / mu) ** 3

    dx, ds, dz = direction(-slack * z - ds * dz + sigma * mu)
    alpha = _STEP_FRACTION * min(_step_to_boundary(slack, ds), _step_to_boundary(z, dz))
    if alpha < _MIN_STEP or not np.all(np.isfinite(dx)):
        return None
    return x + alpha * dx, slack + alpha * ds, z + alpha * dz


def solve_svr_dual(
    X: np.ndarray,
    y: np.ndarray,
    C: float,
    epsilon: float,
    tol: float = DEFAULT_TOL,
    max_iter: int = DEFAULT_MAX_ITER,
) -> SvrSolution:
    n = X.shape[0]
    design = _ReducedDesign.of(X)
    r = design.rank
    certificate = _certificate(X, y, design, np.zeros(r), np.zeros(n), C, epsilon)

    program = _TubeProgram.build(design, y, C, epsilon)
    x = np.zeros(program.hessian.size)
    slack = np.ones(program.h.size)
    z = np.ones(program.h.size)

    iterations = 0
    while not certificate.closed(tol):
        if iterations >= max_iter:
            gap = certificate.primal - certificate.dual
            raise SvrConvergenceError(
                f"SVR did not converge in {max_iter} iterations; duality gap {gap:.3e}", gap
            )
        step = _interior_step(program, x, slack, z)
        if step is None:
            break
        x, slack, z = step
        iterations += 1
        certificate = _certificate(X, y, design, x[:r], z[:n] - z[n : 2 * n], C, epsilon)

    gap = certificate.primal - certificate.dual
    if not certificate.closed(tol):
        if not certificate.closed(_STALL_TOL):
            raise SvrConvergenceError(f"SVR stalled after {iterations} iterations; duality gap {gap:.3e}", gap)
        log.debug("SVR stalled with gap %.3e after %d iterations", gap, iterations)
    return SvrSolution(
        beta=certificate.beta,
        w=certificate.w,
        b=certificate.b,
        primal=certificate.primal,
        dual=certificate.dual,
        iterations=iterations,
    )

class SvrModel(TrainedModel):
    def __init__(self, spec: ModelSpec, feature_names: Sequence[str], w: np.ndarray, b: float, gap: float) -> None:
        super().__init__(spec, feature_names)
        self.w = np.asarray(w, dtype=np.float64)
        self.b = float(b)
        self.gap = float(gap)

    def _predict(self, X: np.ndarray) -> np.ndarray:
        return X @ self.w + self.b

    def parameters_state(self) -> Dict[str, Any]:
        return {"w": self.w.tolist(), "b": self.b, "gap": self.gap}

    @classmethod
    def from_parameters(
        cls, spec: ModelSpec, feature_names: Sequence[str], parameters: Mapping[str, Any]
    ) -> "SvrModel":
        return cls(spec, feature_names, np.array(parameters["w"], dtype=np.float64), parameters["b"], parameters["gap"])


def fit_svr(
    X: Any,
    y: Any,
    C: float = 1.0,
    epsilon: float = 0.1,
    tol: float = DEFAULT_TOL,
    max_iter: int = DEFAULT_MAX_ITER,
    feature_names: Optional[Sequence[str]] = None,
) -> SvrModel:
    spec = ModelSpec(ModelKind.SVR, {"C": C, "epsilon": epsilon, "tol": tol, "max_iter": max_iter})
    X, y = check_training_data(X, y)
    solution = solve_svr_dual(X, y, float(C), float(epsilon), float(tol), int(max_iter))
    return SvrModel(spec, optional_names(feature_names, X.shape[1]), solution.w, solution.b, solution.gap)
