"""Sparse solvers for the ill-posed snapshot equation r = Phi x.

Two routes to a sparse complex coefficient vector:

* `greedy_solve` -- orthogonal matching pursuit: pick the column most
  correlated with the residual, refit all selected columns by least squares,
  repeat.
* `l1_solve` -- proximal gradient on 0.5*||Phi x - r||^2 + lambda*||x||_1
  with the complex soft-thresholding prox (shrink the modulus, keep the
  phase). Acceleration is used with a monotone safeguard: an accelerated
  step is only accepted if it does not increase the objective, otherwise a
  plain descent step is taken and the momentum restarts.

Coefficients are relative to the stored unit-norm dictionary columns; divide
by ``column_norms`` to recover amplitudes on the raw steering scale.

Solvers are pure functions of (dictionary, snapshot, config), so concurrent
solves sharing one read-only dictionary are safe.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .errors import DegenerateSupportError
from .steering import SteeringDictionary, _power_method_spectral_norm

__all__ = [
    "SolverConfig",
    "SparseSolution",
    "TraceRow",
    "greedy_solve",
    "l1_solve",
    "solve_snapshot",
    "objective_value",
    "soft_threshold",
    "trace_to_csv",
]

#: Relative objective change below which the L1 iteration stops.
L1_RELATIVE_OBJECTIVE_TOL = 1e-8
#: Iterations after a momentum restart during which the stopping test is
#: suppressed (the restart step itself barely moves the objective).
_RESTART_COOLOFF = 50
#: Coefficients with modulus above this count as support for the L1 route.
L1_SUPPORT_THRESHOLD = 1e-10
#: Condition number of the selected columns above which the least-squares
#: refit switches from normal equations to QR.
_QR_FALLBACK_CONDITION = 1e8
#: Condition number above which the selected columns are rejected outright.
_DEGENERATE_CONDITION = 1e12

_METHODS = ("greedy_pursuit", "l1_proximal")


@dataclass(frozen=True)
class SolverConfig:
    """Configuration shared by both solver routes.

    ``l1_weight=None`` selects the data-driven default
    0.05 * max|Phi^H r| per snapshot. ``step_size=None`` selects
    1 / spectral_norm^2.
    """

    method: str = "greedy_pursuit"
    max_iterations: int | None = 1000
    residual_tolerance: float = 0.0
    l1_weight: float | None = None
    max_support: int | None = None
    step_size: float | None = None
    trace: bool = False

    def __post_init__(self):
        if self.method not in _METHODS:
            raise ValueError(
                f"unknown method {self.method!r}, expected one of {_METHODS}"
            )
        if self.residual_tolerance < 0:
            raise ValueError("residual_tolerance must be >= 0")
        if self.l1_weight is not None and not self.l1_weight > 0:
            raise ValueError("l1_weight must be > 0 when given")
        if self.max_support is not None and self.max_support < 1:
            raise ValueError("max_support must be >= 1 when given")
        if self.max_iterations is not None and self.max_iterations < 1:
            raise ValueError("max_iterations must be >= 1 when given")
        bounded = (
            self.residual_tolerance > 0
            or self.max_iterations is not None
            or (self.method == "greedy_pursuit" and self.max_support is not None)
        )
        if not bounded:
            raise ValueError(
                "residual_tolerance and max_iterations may not both be unbounded"
            )


@dataclass(frozen=True)
class TraceRow:
    iteration: int
    residual_norm: float
    objective: float


@dataclass
class SparseSolution:
    """Result of one sparse solve.

    ``support`` lists nonzero coefficient indices: selection order for the
    greedy route, ascending index order for the L1 route.
    """

    coefficients: np.ndarray
    residual_norm: float
    iterations_used: int
    support: list[int]
    converged: bool
    trace: list[TraceRow] | None = None


class _Operator:
    """Uniform matvec/rmatvec view over a dictionary or a raw matrix."""

    def __init__(self, dictionary):
        if isinstance(dictionary, SteeringDictionary):
            self.columns = dictionary.columns
            self.matvec = dictionary.matvec
            self.rmatvec = dictionary.rmatvec
            self._spectral = dictionary.spectral_norm
        else:
            columns = np.asarray(dictionary, dtype=np.complex128)
            if columns.ndim != 2:
                raise ValueError("dictionary must be a 2-D matrix")
            self.columns = columns
            self.matvec = lambda x: columns @ x
            self.rmatvec = lambda y: columns.conj().T @ y
            self._spectral = None

    @property
    def spectral_norm(self) -> float:
        if self._spectral is None:
            self._spectral = _power_method_spectral_norm(self.columns)
        return self._spectral

    def check_snapshot(self, r: np.ndarray) -> np.ndarray:
        r = np.asarray(r, dtype=np.complex128)
        if r.shape != (self.columns.shape[0],):
            raise ValueError(
                f"snapshot length {r.shape} does not match dictionary rows "
                f"{self.columns.shape[0]}"
            )
        return r


def soft_threshold(x: np.ndarray, threshold: float) -> np.ndarray:
    """Complex soft threshold: shrink moduli by ``threshold``, keep phases.

    Entries with modulus <= threshold become exactly zero; every output
    entry is a nonnegative real multiple of the corresponding input entry.
    """
    mag = np.abs(x)
    safe = np.where(mag > 0, mag, 1.0)
    return np.where(mag > threshold, x * ((mag - threshold) / safe), 0.0)


def objective_value(dictionary, r: np.ndarray, x: np.ndarray, l1_weight: float) -> float:
    """Evaluate 0.5*||Phi x - r||^2 + l1_weight*sum|x_i|."""
    op = _Operator(dictionary)
    r = op.check_snapshot(r)
    x = np.asarray(x, dtype=np.complex128)
    if x.shape != (op.columns.shape[1],):
        raise ValueError(
            f"coefficient length {x.shape} does not match dictionary columns "
            f"{op.columns.shape[1]}"
        )
    residual = op.matvec(x) - r
    return float(
        0.5 * np.real(np.vdot(residual, residual)) + l1_weight * np.abs(x).sum()
    )


def _refit(columns: np.ndarray, selected: list[int], r: np.ndarray) -> np.ndarray:
    """Least-squares coefficients of r on the selected columns.

    Normal equations by default; QR once the selected columns' condition
    number exceeds 1e8; degenerate-support error beyond 1e12.
    """
    sub = columns[:, selected]
    gram = sub.conj().T @ sub
    eigvals = np.linalg.eigvalsh(gram)
    lo, hi = float(eigvals[0]), float(eigvals[-1])
    cond = np.inf if lo <= 0 else float(np.sqrt(hi / lo))
    if cond > _DEGENERATE_CONDITION:
        raise DegenerateSupportError(selected[-1], cond)
    if cond > _QR_FALLBACK_CONDITION:
        q, upper = np.linalg.qr(sub)
        return np.linalg.solve(upper, q.conj().T @ r)
    return np.linalg.solve(gram, sub.conj().T @ r)


def greedy_solve(dictionary, r: np.ndarray, cfg: SolverConfig) -> SparseSolution:
    """Orthogonal matching pursuit against unit-norm columns.

    Stops when the residual norm reaches ``cfg.residual_tolerance``, the
    support reaches ``cfg.max_support``, or ``cfg.max_iterations`` passes.
    After every refit the residual is orthogonal to all selected columns, so
    the residual norm never increases. Trace rows report the data-fit
    objective 0.5*||residual||^2.
    """
    op = _Operator(dictionary)
    r = op.check_snapshot(r)
    n_cols = op.columns.shape[1]

    residual = r.copy()
    residual_norm = float(np.linalg.norm(residual))
    floor = 1e-12 * max(residual_norm, 1.0)
    selected: list[int] = []
    coeffs = np.zeros(0, dtype=np.complex128)
    trace: list[TraceRow] | None = [] if cfg.trace else None
    iterations = 0

    while True:
        if residual_norm <= max(cfg.residual_tolerance, floor):
            break
        if cfg.max_support is not None and len(selected) >= cfg.max_support:
            break
        if cfg.max_iterations is not None and iterations >= cfg.max_iterations:
            break
        correlations = np.abs(op.rmatvec(residual))
        if selected:
            correlations[selected] = -1.0
        best = int(np.argmax(correlations))
        if correlations[best] <= floor:
            break  # residual carries no component along any remaining column
        selected.append(best)
        coeffs = _refit(op.columns, selected, r)
        residual = r - op.columns[:, selected] @ coeffs
        residual_norm = float(np.linalg.norm(residual))
        iterations += 1
        if trace is not None:
            trace.append(TraceRow(iterations, residual_norm, 0.5 * residual_norm**2))

    x = np.zeros(n_cols, dtype=np.complex128)
    x[selected] = coeffs
    return SparseSolution(
        coefficients=x,
        residual_norm=residual_norm,
        iterations_used=iterations,
        support=list(selected),
        converged=residual_norm <= max(cfg.residual_tolerance, floor),
        trace=trace,
    )


def l1_solve(dictionary, r: np.ndarray, cfg: SolverConfig) -> SparseSolution:
    """Monotone accelerated proximal gradient for the complex lasso.

    Minimizes F(x) = 0.5*||Phi x - r||^2 + lambda*||x||_1 with ||x||_1 the
    sum of complex moduli. Momentum restarts whenever it points uphill
    (gradient-based adaptive restart), and an accelerated step is only
    accepted if the objective does not increase; a plain descent step is
    substituted otherwise, so the objective never increases. Iterates until
    the relative objective change drops below 1e-8 or ``cfg.max_iterations``
    passes; restart steps intentionally make little progress, so the
    stopping test is suppressed for a burn-in window after each restart.
    The returned iterate never has a larger objective than x = 0.
    """
    op = _Operator(dictionary)
    r = op.check_snapshot(r)
    n_cols = op.columns.shape[1]

    lam = cfg.l1_weight
    if lam is None:
        lam = 0.05 * float(np.abs(op.rmatvec(r)).max())
        if lam <= 0:
            lam = 1.0  # zero snapshot; any weight keeps x = 0 optimal
    lipschitz = op.spectral_norm**2
    step = cfg.step_size if cfg.step_size is not None else 1.0 / lipschitz
    if step * lipschitz > 2.0 * (1.0 + 1e-12):
        raise ValueError(
            f"step_size {step:.3e} exceeds 2/spectral_norm^2 "
            f"= {2.0 / lipschitz:.3e}; iteration would risk divergence"
        )
    threshold = lam * step

    def objective(v: np.ndarray, residual: np.ndarray) -> float:
        return float(
            0.5 * np.real(np.vdot(residual, residual)) + lam * np.abs(v).sum()
        )

    def plain_step(v: np.ndarray):
        grad = op.rmatvec(op.matvec(v) - r)
        z = soft_threshold(v - step * grad, threshold)
        residual_z = op.matvec(z) - r
        return z, residual_z

    x = np.zeros(n_cols, dtype=np.complex128)
    residual_x = -r
    f_x = objective(x, residual_x)
    y = x
    t = 1.0
    trace: list[TraceRow] | None = [] if cfg.trace else None
    max_iterations = cfg.max_iterations if cfg.max_iterations is not None else np.inf

    best_x, best_f, best_residual = x, f_x, float(np.linalg.norm(residual_x))
    iterations = 0
    converged = False
    cooloff = 0
    while iterations < max_iterations:
        grad = op.rmatvec(op.matvec(y) - r)
        z = soft_threshold(y - step * grad, threshold)
        restarted = False
        if np.real(np.vdot(y - z, z - x)) > 0:
            # Momentum points away from the descent direction: restart from
            # the last iterate with a plain step.
            z, residual_z = plain_step(x)
            y, t = z, 1.0
            restarted = True
        else:
            residual_z = op.matvec(z) - r
        f_z = objective(z, residual_z)
        if not restarted:
            if f_z <= f_x:
                t_next = 0.5 * (1.0 + np.sqrt(1.0 + 4.0 * t * t))
                y = z + ((t - 1.0) / t_next) * (z - x)
                t = t_next
            else:
                # Accelerated point overshot: plain descent step, restart.
                z, residual_z = plain_step(x)
                f_z = objective(z, residual_z)
                y, t = z, 1.0
                restarted = True
        x = z
        rel_change = abs(f_x - f_z) / max(f_x, np.finfo(float).tiny)
        f_x = f_z
        iterations += 1
        residual_norm = float(np.linalg.norm(residual_z))
        if trace is not None:
            trace.append(TraceRow(iterations, residual_norm, f_z))
        if f_z < best_f:
            best_x, best_f, best_residual = z, f_z, residual_norm
        cooloff = _RESTART_COOLOFF if restarted else max(0, cooloff - 1)
        if rel_change < L1_RELATIVE_OBJECTIVE_TOL and cooloff == 0:
            converged = True
            break

    support = np.flatnonzero(np.abs(best_x) > L1_SUPPORT_THRESHOLD)
    return SparseSolution(
        coefficients=best_x,
        residual_norm=best_residual,
        iterations_used=iterations,
        support=[int(i) for i in support],
        converged=converged,
        trace=trace,
    )


def solve_snapshot(dictionary, r: np.ndarray, cfg: SolverConfig) -> SparseSolution:
    """Dispatch to the solver selected by ``cfg.method``."""
    if cfg.method == "greedy_pursuit":
        return greedy_solve(dictionary, r, cfg)
    return l1_solve(dictionary, r, cfg)


def trace_to_csv(trace: list[TraceRow]) -> str:
    """Render a solver trace as CSV with header ``iter,residual_norm,objective``."""
    lines = ["iter,residual_norm,objective"]
    lines += [f"{row.iteration},{row.residual_norm!r},{row.objective!r}" for row in trace]
    return "\n".join(lines) + "\n"
