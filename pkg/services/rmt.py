"""
Resolvent machinery for Q = (I_p − X D Y^T / n)^{-1}.

- resolvent / resolvent_check: LU factorization with iterative refinement.
- q_tilde / solve_delta: the deterministic equivalent
      Q̃^δ(D) = (I_p − (1/n) Σ_i E[D_i / (1 − δ_i D_i)] Σ_i)^{-1},
      δ_i = (1/n) tr(Σ_i Q̃^δ(D)),
  solved by damped Picard iteration from δ = 0.
- leave_one_out: Q_{-i}, Δ_i = (1/n) y_i^T Q_{-i} x_i and the rank-one identities
      Q = Q_{-i} + (1/n) D_i Q_{-i} x_i y_i^T Q_{-i} / (1 − D_i Δ_i),
      Q x_i = Q_{-i} x_i / (1 − D_i Δ_i).
- robust_beta: β = (1/n) Σ f(x_i^T β) x_i and its leave-one-out versions β^{(i)}.
- Monte Carlo oracles for E[Q], E[XDY^T] and the spread of Qu.

Sign convention: with the minus sign inside Q the pivot is 1 − D_i Δ_i,
so every "1 + δD" of the additive convention becomes "1 − δD" here.
"""

import math
from dataclasses import dataclass, field
from typing import Optional, Sequence, Union

import numpy as np
from scipy import linalg

import config
from services.errors import (
    AdmissibilityError,
    ConvergenceError,
    DegeneratePivotError,
    DomainError,
    RangeError,
    RejectionError,
    ShapeError,
    SingularMatrixError,
)
from services.generators import (
    DiagonalModel,
    STREAM_DIRECTIONS,
    MatrixModel,
    SampleEnsemble,
    _run_parallel,
    sample_couple,
    sample_diagonal,
    sample_diagonal_marginal,
)
from services.observables import check_aligned
from utils.seeding import derive_generator

ADMISSIBILITY_SLACK = 1e-12
REFINEMENT_STEPS = 3


# ── Types ─────────────────────────────────────────────────────────────────────


@dataclass(frozen=True, eq=False)
class ResolventSpec:
    """
    One admissible draw (X, D, Y) with its bounds.

    ‖X‖, ‖Y‖ ≤ √n·κ, max|D_i| ≤ κ_D and κ²κ_D ≤ 1 − ε are verified at
    construction. Sigma holds Σ_i = E[x_i y_i^T], either one shared p×p matrix
    or an (n, p, p) stack; it is only needed by the deterministic equivalent.
    """

    X: np.ndarray
    D: np.ndarray
    Y: np.ndarray
    kappa: float
    kappa_D: float
    epsilon: float
    Sigma: Optional[np.ndarray] = None
    measured: float = field(init=False, default=0.0)

    def __post_init__(self):
        X = np.atleast_2d(np.asarray(self.X, dtype=float))
        Y = np.atleast_2d(np.asarray(self.Y, dtype=float))
        D = np.asarray(self.D, dtype=float).ravel()
        if X.shape != Y.shape:
            raise ShapeError(f"X and Y differ in shape: {X.shape} vs {Y.shape}")
        p, n = X.shape
        if D.shape != (n,):
            raise ShapeError(f"D must have n={n} entries, got {D.shape}")
        if not (self.kappa > 0 and self.kappa_D >= 0 and 0 < self.epsilon < 1):
            raise RangeError("need kappa > 0, kappa_D >= 0 and 0 < epsilon < 1")
        condition = self.kappa**2 * self.kappa_D
        if condition > 1 - self.epsilon + ADMISSIBILITY_SLACK:
            raise AdmissibilityError(
                f"kappa^2 kappa_D = {condition:.6g} exceeds 1 - epsilon = {1 - self.epsilon:.6g}",
                measured=condition,
            )
        limit = math.sqrt(n) * self.kappa * (1 + ADMISSIBILITY_SLACK)
        for name, M in (("X", X), ("Y", Y)):
            size = float(np.linalg.norm(M, 2))
            if size > limit:
                raise AdmissibilityError(
                    f"‖{name}‖ = {size:.6g} exceeds √n·kappa = {limit:.6g}", measured=size / math.sqrt(n)
                )
        d_max = float(np.max(np.abs(D)))
        if d_max > self.kappa_D * (1 + ADMISSIBILITY_SLACK):
            raise AdmissibilityError(
                f"max|D_i| = {d_max:.6g} exceeds kappa_D = {self.kappa_D:.6g}", measured=d_max
            )
        sigma = None if self.Sigma is None else _check_sigma(self.Sigma, p, n)
        object.__setattr__(self, "X", X)
        object.__setattr__(self, "Y", Y)
        object.__setattr__(self, "D", D)
        object.__setattr__(self, "Sigma", sigma)
        object.__setattr__(self, "measured", float(np.linalg.norm(_kernel(X, D, Y), 2)))

    @property
    def p(self) -> int:
        return self.X.shape[0]

    @property
    def n(self) -> int:
        return self.X.shape[1]

    def without(self, i: int) -> "ResolventSpec":
        """The same draw with column i of X and Y zeroed."""
        X, Y = self.X.copy(), self.Y.copy()
        X[:, i] = 0.0
        Y[:, i] = 0.0
        return ResolventSpec(X, self.D, Y, self.kappa, self.kappa_D, self.epsilon, self.Sigma)


def _check_sigma(Sigma, p: int, n: int) -> np.ndarray:
    S = np.asarray(Sigma, dtype=float)
    if S.shape == (p, p) or S.shape == (n, p, p):
        return S
    raise ShapeError(f"Sigma must be ({p}, {p}) or ({n}, {p}, {p}), got {S.shape}")


def _kernel(X: np.ndarray, D: np.ndarray, Y: np.ndarray) -> np.ndarray:
    """X D Y^T / n."""
    return (X * D) @ Y.T / X.shape[1]


@dataclass(frozen=True)
class ResolventCheck:
    Q: np.ndarray
    residual: float
    residual_limit: float
    norm: float
    norm_limit: float
    condition: float
    refinements: int

    @property
    def ok(self) -> bool:
        return self.residual <= self.residual_limit and self.norm <= self.norm_limit * (1 + 1e-9)

    def to_dict(self) -> dict:
        return {
            "residual": self.residual,
            "residual_limit": self.residual_limit,
            "norm": self.norm,
            "norm_limit": self.norm_limit,
            "condition": self.condition,
            "refinements": self.refinements,
        }


@dataclass(frozen=True, eq=False)
class FixedPointState:
    delta: np.ndarray
    residual: float
    iterations: int
    converged: bool
    trace: list = field(default_factory=list)
    omega: float = 1.0
    Q_tilde: Optional[np.ndarray] = None

    def to_dict(self) -> dict:
        return {
            "delta_mean": float(np.mean(self.delta)),
            "delta_min": float(np.min(self.delta)),
            "delta_max": float(np.max(self.delta)),
            "residual": self.residual,
            "iterations": self.iterations,
            "converged": self.converged,
            "omega": self.omega,
            "trace": list(self.trace),
        }


# ── Resolvent ─────────────────────────────────────────────────────────────────


def resolvent_check(spec: ResolventSpec, tol: float = config.RESOLVENT_RESIDUAL_TOL) -> ResolventCheck:
    p = spec.p
    M = np.eye(p) - _kernel(spec.X, spec.D, spec.Y)
    factor = linalg.lu_factor(M, check_finite=False)
    Q = linalg.lu_solve(factor, np.eye(p), check_finite=False)
    limit = tol * math.sqrt(p)
    residual_matrix = np.eye(p) - M @ Q
    residual = float(np.linalg.norm(residual_matrix))
    refinements = 0
    while residual > limit and refinements < REFINEMENT_STEPS:
        Q = Q + linalg.lu_solve(factor, residual_matrix, check_finite=False)
        residual_matrix = np.eye(p) - M @ Q
        residual = float(np.linalg.norm(residual_matrix))
        refinements += 1
    if residual > limit:
        raise ConvergenceError(
            f"resolvent residual {residual:.3g} above {limit:.3g} after {refinements} refinements",
            residuals=[residual],
        )
    return ResolventCheck(
        Q=Q,
        residual=residual,
        residual_limit=limit,
        norm=float(np.linalg.norm(Q, 2)),
        norm_limit=1.0 / spec.epsilon,
        condition=float(np.linalg.cond(M)),
        refinements=refinements,
    )


def resolvent(spec: ResolventSpec) -> np.ndarray:
    return resolvent_check(spec).Q


# ── Deterministic equivalent ──────────────────────────────────────────────────

DiagonalSource = Union[DiagonalModel, SampleEnsemble, np.ndarray]


def expectation_source(D_samples: DiagonalSource, n: int, master_seed: int = 0) -> DiagonalSource:
    """
    Finitely supported laws stay exact; any other DiagonalModel becomes
    config.EXPECTATION_SAMPLES auxiliary draws of length n.
    """
    if isinstance(D_samples, DiagonalModel) and D_samples.support() is None:
        return sample_diagonal_marginal(D_samples, config.EXPECTATION_SAMPLES, n, master_seed)
    return D_samples


def _diagonal_expectation(delta: np.ndarray, D_samples: DiagonalSource) -> np.ndarray:
    """e_i = E[D_i / (1 − δ_i D_i)], exact for finitely supported laws."""
    D_samples = expectation_source(D_samples, delta.size)
    if isinstance(D_samples, DiagonalModel):
        values, weights = D_samples.support()
        denominators = 1.0 - np.outer(delta, values)
        if np.any(denominators <= 0):
            raise DomainError("1 - delta_i D_i <= 0 on the support of D")
        return (values / denominators) @ weights
    samples = D_samples.data if isinstance(D_samples, SampleEnsemble) else np.atleast_2d(
        np.asarray(D_samples, dtype=float)
    )
    if samples.shape[1] != delta.size:
        raise ShapeError(f"D samples have {samples.shape[1]} entries, expected {delta.size}")
    denominators = 1.0 - delta[None, :] * samples
    if np.any(denominators <= 0):
        raise DomainError("1 - delta_i D_i <= 0 on some sample")
    return np.mean(samples / denominators, axis=0)


def _weighted_sigma(e: np.ndarray, Sigma: np.ndarray) -> np.ndarray:
    if Sigma.ndim == 2:
        return e.sum() * Sigma
    return np.einsum("i,ipq->pq", e, Sigma)


def _sigma_traces(Sigma: np.ndarray, Q: np.ndarray, n: int) -> np.ndarray:
    """(1/n) tr(Σ_i Q) for every i."""
    if Sigma.ndim == 2:
        return np.full(n, float(np.trace(Sigma @ Q)) / n)
    return np.einsum("ipq,qp->i", Sigma, Q) / n


def q_tilde(delta, D_samples: DiagonalSource, Sigma) -> np.ndarray:
    """(I_p − (1/n) Σ_i E[D_i/(1 − δ_i D_i)] Σ_i)^{-1}."""
    delta = np.asarray(delta, dtype=float).ravel()
    n = delta.size
    S = np.asarray(Sigma, dtype=float)
    p = S.shape[-1]
    _check_sigma(S, p, n)
    e = _diagonal_expectation(delta, D_samples)
    A = np.eye(p) - _weighted_sigma(e, S) / n
    singular_values = linalg.svdvals(A)
    smallest = float(singular_values.min())
    if smallest <= 1e-12 * max(1.0, float(singular_values.max())):
        raise SingularMatrixError(
            f"I - (1/n) sum e_i Sigma_i is singular (smallest singular value {smallest:.3g})",
            smallest_singular_value=smallest,
        )
    return linalg.solve(A, np.eye(p), check_finite=False)


def _delta_map(delta: np.ndarray, D_samples: DiagonalSource, Sigma: np.ndarray) -> tuple:
    Q = q_tilde(delta, D_samples, Sigma)
    return _sigma_traces(Sigma, Q, delta.size), Q


def solve_delta_for(
    Sigma,
    n: int,
    D_samples: DiagonalSource,
    tol: float = config.FIXED_POINT_TOL,
    max_iter: int = config.FIXED_POINT_MAX_ITER,
    omega: float = 1.0,
    master_seed: int = 0,
) -> FixedPointState:
    """
    Damped Picard iteration δ ← (1−ω)δ + ω·(1/n)tr(Σ_i Q̃^δ) from δ = 0.

    Laws without finite support are replaced once by auxiliary draws seeded
    from master_seed, so every iterate sees the same expectation.
    """
    if not 0 < omega <= 1:
        raise RangeError(f"damping must lie in (0, 1], got {omega}")
    S = np.asarray(Sigma, dtype=float)
    D_samples = expectation_source(D_samples, n, master_seed)
    delta = np.zeros(n)
    target, Q = _delta_map(delta, D_samples, S)
    residual = float(np.max(np.abs(delta - target)))
    trace = [residual]
    step = omega
    while residual > tol and len(trace) < max_iter:
        while True:
            candidate = np.maximum((1 - step) * delta + step * target, 0.0)
            try:
                candidate_target, candidate_Q = _delta_map(candidate, D_samples, S)
                candidate_residual = float(np.max(np.abs(candidate - candidate_target)))
            except (DomainError, SingularMatrixError):
                candidate_residual = math.inf
            if candidate_residual < residual or step < 1e-8:
                break
            step /= 2
        if not candidate_residual < residual:
            break
        delta, target, Q, residual = candidate, candidate_target, candidate_Q, candidate_residual
        trace.append(residual)
    if config.DEBUG:
        print(f"[FixedPoint] {len(trace)} iterations, residual {residual:.3g}, omega {step:g}")
    return FixedPointState(delta, residual, len(trace), residual <= tol, trace, step, Q)


def solve_delta(
    spec: ResolventSpec,
    D_samples: DiagonalSource,
    tol: float = config.FIXED_POINT_TOL,
    max_iter: int = config.FIXED_POINT_MAX_ITER,
    omega: float = 1.0,
    master_seed: int = 0,
) -> FixedPointState:
    if spec.Sigma is None:
        raise DomainError("solve_delta needs Sigma_i = E[x_i y_i^T] on the ResolventSpec")
    return solve_delta_for(spec.Sigma, spec.n, D_samples, tol, max_iter, omega, master_seed)


def isotropic_delta(ratio: float, d: float) -> float:
    """
    δ for Σ_i = I_p, D = d·I_n and p/n = ratio: the root of
    d·δ² − (1 − d + ratio·d)·δ + ratio = 0 reached from δ = 0.
    """
    if ratio < 0:
        raise RangeError("p/n must be >= 0")
    if d == 0:
        return float(ratio)
    b = 1 - d + ratio * d
    disc = b * b - 4 * d * ratio
    if disc < 0 or b + math.sqrt(disc) <= 0:
        raise DomainError(f"no admissible fixed point for p/n={ratio}, d={d}")
    delta = 2 * ratio / (b + math.sqrt(disc))
    if 1 - delta * d <= 0:
        raise DomainError(f"1 - delta d <= 0 at delta={delta:.6g}")
    return delta


def isotropic_q_tilde(ratio: float, d: float) -> float:
    """Scalar value of Q̃ = q·I_p in the isotropic deterministic case."""
    delta = isotropic_delta(ratio, d)
    return 1.0 / (1.0 - d / (1.0 - delta * d))


# ── Monte Carlo E[Q] ──────────────────────────────────────────────────────────


@dataclass(frozen=True, eq=False)
class MonteCarloResolvent:
    mean: np.ndarray
    stderr: np.ndarray
    accepted: int
    rejected: int
    max_residual: float
    max_norm: float
    max_condition: float
    norm_limit: float

    @property
    def rejection_rate(self) -> float:
        return self.rejected / max(1, self.accepted + self.rejected)

    def to_dict(self) -> dict:
        return {
            "accepted": self.accepted,
            "rejected": self.rejected,
            "rejection_rate": self.rejection_rate,
            "max_residual": self.max_residual,
            "max_norm": self.max_norm,
            "norm_limit": self.norm_limit,
            "max_condition": self.max_condition,
            "stderr_frobenius": float(np.linalg.norm(self.stderr)),
        }


def admissible_specs(
    X: SampleEnsemble, D: SampleEnsemble, Y: SampleEnsemble, kappa: float, kappa_D: float, epsilon: float
) -> tuple:
    check_aligned(X, D, Y)
    x, y = X.trials(), Y.trials()
    specs, rejected = [], 0
    for t in range(X.N):
        try:
            specs.append(ResolventSpec(x[t], D.data[t], y[t], kappa, kappa_D, epsilon))
        except AdmissibilityError:
            rejected += 1
    total = X.N
    if rejected > config.MAX_REJECTION_RATE * total:
        raise RejectionError(
            f"{rejected}/{total} draws violate the spectral bounds "
            f"(limit {config.MAX_REJECTION_RATE:.0%})",
            rejected=rejected,
            total=total,
        )
    return specs, rejected


def resolvent_mean(
    X: SampleEnsemble,
    D: SampleEnsemble,
    Y: SampleEnsemble,
    kappa: float,
    kappa_D: float,
    epsilon: float,
    threads: Optional[int] = None,
) -> MonteCarloResolvent:
    """Entrywise mean and standard error of Q over the admissible trials."""
    specs, rejected = admissible_specs(X, D, Y, kappa, kappa_D, epsilon)
    checks = _run_parallel(resolvent_check, specs, threads)
    stack = np.stack([c.Q for c in checks])
    T = stack.shape[0]
    stderr = stack.std(axis=0, ddof=1) / math.sqrt(T) if T > 1 else np.zeros_like(stack[0])
    return MonteCarloResolvent(
        mean=stack.mean(axis=0),
        stderr=stderr,
        accepted=T,
        rejected=rejected,
        max_residual=max(c.residual for c in checks),
        max_norm=max(c.norm for c in checks),
        max_condition=max(c.condition for c in checks),
        norm_limit=1.0 / epsilon,
    )


def monte_carlo_EQ(
    model: MatrixModel,
    D_model: DiagonalModel,
    trials: int,
    master_seed: int,
    kappa: float,
    kappa_D: float,
    epsilon: float,
    threads: Optional[int] = None,
) -> MonteCarloResolvent:
    X, Y = sample_couple(model, trials, master_seed, threads)
    D = sample_diagonal(D_model, trials, model.n, master_seed, X=X)
    return resolvent_mean(X, D, Y, kappa, kappa_D, epsilon, threads)


# ── Leave-one-out ─────────────────────────────────────────────────────────────


@dataclass(frozen=True, eq=False)
class LeaveOneOut:
    index: int
    Q: np.ndarray
    Q_minus: np.ndarray
    Delta: float
    pivot: float
    matrix_error: float
    vector_error: float
    tol: float = config.SCHUR_TOL

    @property
    def ok(self) -> bool:
        return self.matrix_error <= self.tol and self.vector_error <= self.tol


def _relative(error: float, reference: float) -> float:
    return error / reference if reference > 0 else error


def leave_one_out(spec: ResolventSpec, i: int, tol: float = config.SCHUR_TOL) -> LeaveOneOut:
    if not 0 <= i < spec.n:
        raise RangeError(f"column index {i} out of range [0, {spec.n})")
    n = spec.n
    Q = resolvent(spec)
    Q_minus = resolvent(spec.without(i))
    x, y, d = spec.X[:, i], spec.Y[:, i], spec.D[i]
    Qx = Q_minus @ x
    Delta = float(y @ Qx) / n
    pivot = 1.0 - d * Delta
    if abs(pivot) < config.PIVOT_EPS:
        raise DegeneratePivotError(f"pivot 1 - D_i Delta_i = {pivot:.3g} is degenerate", pivot=pivot)
    predicted = Q_minus + d * np.outer(Qx, y @ Q_minus) / (n * pivot)
    matrix_error = _relative(float(np.linalg.norm(Q - predicted)), float(np.linalg.norm(Q)))
    Qx_full = Q @ x
    vector_error = _relative(
        float(np.linalg.norm(Qx_full - Qx / pivot)), float(np.linalg.norm(Qx_full))
    )
    return LeaveOneOut(i, Q, Q_minus, Delta, pivot, matrix_error, vector_error, tol)


# ── Robust regression ─────────────────────────────────────────────────────────

LINK_BOUNDS = {
    # (‖f‖∞, ‖f′‖∞, ‖f″‖∞) per unit amplitude
    "zero": (0.0, 0.0, 0.0),
    "constant": (1.0, 0.0, 0.0),
    "tanh": (1.0, 1.0, 4.0 / (3.0 * math.sqrt(3.0))),
}


@dataclass(frozen=True, eq=False)
class RobustRegressionSpec:
    """
    β = (1/n) Σ f(x_i^T β) x_i with f = amplitude·link(· + shift).

    Links: zero, constant (f ≡ amplitude) and tanh. The contraction margin
    (1/n)‖f′‖∞‖X‖² ≤ 1 − ε is verified at construction.
    """

    X: np.ndarray
    link: str = "tanh"
    amplitude: float = 0.2
    shift: float = 0.0
    epsilon: float = 0.1
    margin: float = field(init=False, default=0.0)

    def __post_init__(self):
        X = np.atleast_2d(np.asarray(self.X, dtype=float))
        object.__setattr__(self, "X", X)
        if self.link not in LINK_BOUNDS:
            raise DomainError(f"unknown link {self.link!r}; expected one of {sorted(LINK_BOUNDS)}")
        if not 0 < self.epsilon < 1:
            raise RangeError("epsilon must lie in (0, 1)")
        margin = self.derivative_bound * float(np.linalg.norm(X, 2)) ** 2 / X.shape[1]
        object.__setattr__(self, "margin", margin)
        if margin > 1 - self.epsilon:
            raise AdmissibilityError(
                f"(1/n)‖f'‖‖X‖² = {margin:.4g} exceeds 1 - epsilon = {1 - self.epsilon:.4g}",
                measured=margin,
            )

    @property
    def p(self) -> int:
        return self.X.shape[0]

    @property
    def n(self) -> int:
        return self.X.shape[1]

    @property
    def derivative_bound(self) -> float:
        return abs(self.amplitude) * LINK_BOUNDS[self.link][1]

    def f(self, t: np.ndarray) -> np.ndarray:
        if self.link == "zero":
            return np.zeros_like(t)
        if self.link == "constant":
            return np.full_like(t, self.amplitude)
        return self.amplitude * np.tanh(t + self.shift)

    def f_prime(self, t: np.ndarray) -> np.ndarray:
        if self.link != "tanh":
            return np.zeros_like(t)
        return self.amplitude / np.cosh(t + self.shift) ** 2


@dataclass(frozen=True, eq=False)
class RobustFit:
    beta: np.ndarray
    D: np.ndarray
    iterations: int
    steps: list
    contraction_ratios: list
    contraction_limit: float
    beta_minus: Optional[np.ndarray] = None
    D_minus: Optional[np.ndarray] = None
    coupling_norms: Optional[np.ndarray] = None

    @property
    def max_contraction(self) -> float:
        return max(self.contraction_ratios, default=0.0)

    @property
    def contracts(self) -> bool:
        return self.max_contraction <= self.contraction_limit + 1e-9

    def to_dict(self) -> dict:
        data = {
            "beta_norm": float(np.linalg.norm(self.beta)),
            "iterations": self.iterations,
            "max_contraction": self.max_contraction,
            "contraction_limit": self.contraction_limit,
            "contracts": self.contracts,
        }
        if self.coupling_norms is not None:
            data["max_coupling_norm"] = float(self.coupling_norms.max())
            data["mean_coupling_norm"] = float(self.coupling_norms.mean())
        return data


def _iterate_beta(
    spec: RobustRegressionSpec,
    X: np.ndarray,
    start: np.ndarray,
    tol: float,
    max_iter: int,
) -> tuple:
    n = spec.n
    beta = start
    steps = []
    for _ in range(max_iter):
        new = X @ spec.f(X.T @ beta) / n
        step = float(np.linalg.norm(new - beta))
        beta = new
        steps.append(step)
        if step <= tol * max(1.0, float(np.linalg.norm(beta))):
            return beta, steps
    raise ConvergenceError(f"robust fixed point did not converge in {max_iter} iterations", residuals=steps)


def _contraction_ratios(steps: list, beta: np.ndarray) -> list:
    floor = 1e-13 * (1.0 + float(np.linalg.norm(beta)))
    return [b / a for a, b in zip(steps[:-1], steps[1:]) if a > floor]


def robust_beta(
    spec: RobustRegressionSpec,
    tol: float = config.FIXED_POINT_TOL,
    max_iter: int = config.FIXED_POINT_MAX_ITER,
    leave_out: bool = True,
    threads: Optional[int] = None,
) -> RobustFit:
    """
    β by fixed-point iteration from 0, D = diag(f′(x_i^T β)); with leave_out,
    β^{(i)} on X with column i zeroed (warm-started at β), D^{(i)}_j = f′(x_j^T β^{(i)})
    for j ≠ i and 0 at i, and the coupling norms ‖D_{-i} − D^{(i)}_{-i}‖_F.
    """
    X = spec.X
    beta, steps = _iterate_beta(spec, X, np.zeros(spec.p), tol, max_iter)
    D = spec.f_prime(X.T @ beta)
    ratios = _contraction_ratios(steps, beta)
    if not leave_out:
        return RobustFit(beta, D, len(steps), steps, ratios, 1 - spec.epsilon)

    def drop(i: int) -> tuple:
        X_minus = X.copy()
        X_minus[:, i] = 0.0
        beta_i, _ = _iterate_beta(spec, X_minus, beta, tol, max_iter)
        D_i = spec.f_prime(X.T @ beta_i)
        D_i[i] = 0.0
        return beta_i, D_i

    results = _run_parallel(drop, list(range(spec.n)), threads)
    beta_minus = np.stack([r[0] for r in results])
    D_minus = np.stack([r[1] for r in results])
    coupling = np.empty(spec.n)
    for i in range(spec.n):
        keep = np.arange(spec.n) != i
        coupling[i] = float(np.linalg.norm(D[keep] - D_minus[i, keep]))
    return RobustFit(beta, D, len(steps), steps, ratios, 1 - spec.epsilon, beta_minus, D_minus, coupling)


# ── E[XDY^T] versus E[X E[D] Y^T] ────────────────────────────────────────────


@dataclass(frozen=True)
class XDYReport:
    rows: list
    ratio_stability: float

    def to_dict(self) -> dict:
        return {"rows": self.rows, "ratio_stability": self.ratio_stability}


def _xdy_difference(model: MatrixModel, D_model: DiagonalModel, trials: int, master_seed: int, threads) -> dict:
    X, Y = sample_couple(model, trials, master_seed, threads)
    D = sample_diagonal(D_model, trials, model.n, master_seed, X=X)
    x, y = X.trials(), Y.trials()
    # per-trial X (D − E[D]) Y^T, paired so that the common part cancels exactly
    centered = D.data - D_model.mean()
    diffs = np.einsum("tpi,ti,tqi->tpq", x, centered, y)
    mean = diffs.mean(axis=0)
    stderr = diffs.std(axis=0, ddof=1) / math.sqrt(trials) if trials > 1 else np.zeros_like(mean)
    frob = float(np.linalg.norm(mean))
    return {
        "n": model.n,
        "p": model.p,
        "diff_frobenius": frob,
        "stderr_frobenius": float(np.linalg.norm(stderr)),
        "ratio_to_n": frob / model.n,
    }


def estimate_XDY_mean(
    models: Sequence[MatrixModel],
    D_model: DiagonalModel,
    trials: int,
    master_seed: int,
    threads: Optional[int] = None,
) -> XDYReport:
    """‖Ê[XDY^T] − Ê[X E[D] Y^T]‖_F per model, its standard error and ratio to n."""
    if trials < 2:
        raise RangeError("need at least 2 trials for a standard error")
    rows = [_xdy_difference(model, D_model, trials, master_seed, threads) for model in models]
    ratios = [row["ratio_to_n"] for row in rows if row["ratio_to_n"] > 0]
    stability = max(ratios) / min(ratios) if ratios else 1.0
    return XDYReport(rows, stability)


# ── Spread of Qu ──────────────────────────────────────────────────────────────


def monte_carlo_Qu_diameter(
    model: MatrixModel,
    D_model: DiagonalModel,
    trials: int,
    master_seed: int,
    kappa: float,
    kappa_D: float,
    epsilon: float,
    K: int = 8,
    threads: Optional[int] = None,
) -> dict:
    """
    Observable diameter of Qu for u = e_1: max std of w^T Q u over K random unit w,
    reported with its ratio to √(log n / n).
    """
    X, Y = sample_couple(model, trials, master_seed, threads)
    D = sample_diagonal(D_model, trials, model.n, master_seed, X=X)
    specs, rejected = admissible_specs(X, D, Y, kappa, kappa_D, epsilon)
    vectors = np.stack(_run_parallel(lambda s: resolvent(s)[:, 0], specs, threads))
    w = derive_generator(master_seed, STREAM_DIRECTIONS, 0, model.p).standard_normal((K, model.p))
    w /= np.linalg.norm(w, axis=1, keepdims=True)
    diameter = float((vectors @ w.T).std(axis=0, ddof=1).max())
    rate = math.sqrt(math.log(model.n) / model.n)
    return {
        "n": model.n,
        "p": model.p,
        "accepted": len(specs),
        "rejected": rejected,
        "diameter": diameter,
        "rate": rate,
        "ratio": diameter / rate,
    }
