"""
Empirical concentration functions, tail-exponent fits and envelope checks.

α̂(t) = (1/N)·#{|v_i − center| ≥ t} is computed by exact counting on a sorted
copy of the deviations. Confidence is the DKW half-width √(ln(2/δ)/(2N)).
Fits invert the single-regime model α = C·exp(−(t/s)^q) on a window of α̂
values; profiles with several regimes are fitted piecewise between their
breakpoints.
"""

import math
from dataclasses import dataclass, field
from typing import Optional, Sequence, Union

import numpy as np
from scipy import integrate, optimize, special, stats

import config
from services.errors import DomainError, InsufficientDataError, WindowError
from services.generators import SampleEnsemble
from services.observables import Observation, batch_norm, observe, random_unit_observations
from services.profile import ConcentrationProfile, norm_degree

CENTER_KINDS = ("median", "mean", "independent_copy")

Values = Union[SampleEnsemble, np.ndarray, Sequence[float]]


def _as_values(values: Values) -> np.ndarray:
    if isinstance(values, SampleEnsemble):
        return values.values()
    return np.asarray(values, dtype=float).ravel()


# ── Oracles ───────────────────────────────────────────────────────────────────


def dkw_band(N: int, confidence: float = config.DKW_CONFIDENCE) -> float:
    """Dvoretzky–Kiefer–Wolfowitz half-width at level δ = confidence."""
    if N < 1:
        raise InsufficientDataError("DKW band needs N >= 1")
    if not 0 < confidence < 1:
        raise DomainError(f"confidence must lie in (0, 1), got {confidence}")
    return math.sqrt(math.log(2.0 / confidence) / (2.0 * N))


def gaussian_norm_mean(p: int) -> float:
    """E‖g‖ for g ~ N(0, I_p): √2·Γ((p+1)/2)/Γ(p/2)."""
    return math.sqrt(2.0) * math.exp(special.gammaln((p + 1) / 2.0) - special.gammaln(p / 2.0))


def ball_norm_mean(p: int) -> float:
    """E‖Z‖/√p for Z uniform on √p·B: E[U^{1/p}] = p/(p+1)."""
    return p / (p + 1.0)


def gaussian_two_sided_tail(t):
    return 2.0 * stats.norm.sf(t)


def gaussian_product_tail(t: float) -> float:
    """P(|xy| ≥ t) for independent standard normals; xy has density K_0(|z|)/π."""
    value, _ = integrate.quad(special.k0, t, np.inf)
    return 2.0 * value / math.pi


def chi_square_centered_tail(t: float, dof: int) -> float:
    """P(|χ²_dof − dof| ≥ t)."""
    return float(stats.chi2.sf(dof + t, dof) + stats.chi2.cdf(dof - t, dof))


# ── Empirical tails ───────────────────────────────────────────────────────────


@dataclass(frozen=True, eq=False)
class EmpiricalTail:
    t_grid: np.ndarray
    alpha_hat: np.ndarray
    center: float
    center_kind: str
    N: int
    dkw_band: float
    confidence: float = config.DKW_CONFIDENCE

    @property
    def band_lo(self) -> np.ndarray:
        return np.clip(self.alpha_hat - self.dkw_band, 0.0, 1.0)

    @property
    def band_hi(self) -> np.ndarray:
        return np.clip(self.alpha_hat + self.dkw_band, 0.0, 1.0)

    def rows(self) -> list[list[float]]:
        """(t, alpha_hat, band_lo, band_hi) rows for CSV export."""
        return [
            [float(t), float(a), float(lo), float(hi)]
            for t, a, lo, hi in zip(self.t_grid, self.alpha_hat, self.band_lo, self.band_hi)
        ]

    def to_dict(self) -> dict:
        return {
            "center": self.center,
            "center_kind": self.center_kind,
            "N": self.N,
            "dkw_band": self.dkw_band,
            "confidence": self.confidence,
            "points": len(self.t_grid),
        }


def _default_grid(sorted_dev: np.ndarray, points: int) -> np.ndarray:
    N = sorted_dev.size
    lo = float(np.quantile(sorted_dev, 0.5))
    hi = float(np.quantile(sorted_dev, 1.0 - 1.0 / (2.0 * N)))
    if hi <= 0:
        # constant data: every deviation is zero
        return np.geomspace(1e-6, 1.0, points)
    if lo <= 0:
        positive = sorted_dev[sorted_dev > 0]
        lo = float(positive[0]) if positive.size else hi * 1e-3
    return np.geomspace(lo, hi, points)


def empirical_tail(
    values: Values,
    center_kind: str = "median",
    t_grid=None,
    confidence: float = config.DKW_CONFIDENCE,
    grid_points: int = config.TAIL_GRID_POINTS,
) -> EmpiricalTail:
    v = _as_values(values)
    if v.size < 2:
        raise InsufficientDataError(f"need at least 2 values, got {v.size}")
    if center_kind == "median":
        center = float(np.median(v))
        deviations = np.abs(v - center)
    elif center_kind == "mean":
        center = float(np.mean(v))
        deviations = np.abs(v - center)
    elif center_kind == "independent_copy":
        half = v.size // 2
        center = 0.0
        deviations = np.abs(v[0 : 2 * half : 2] - v[1 : 2 * half : 2])
    else:
        raise DomainError(f"unknown center kind {center_kind!r}; expected one of {CENTER_KINDS}")

    sorted_dev = np.sort(deviations)
    N = sorted_dev.size
    grid = _default_grid(sorted_dev, grid_points) if t_grid is None else np.asarray(t_grid, dtype=float)
    # #{dev >= t} = N − #{dev < t}
    alpha = (N - np.searchsorted(sorted_dev, grid, side="left")) / N
    return EmpiricalTail(grid, alpha, center, center_kind, N, dkw_band(N, confidence), confidence)


# ── Exponent fits ─────────────────────────────────────────────────────────────


@dataclass(frozen=True)
class TailFit:
    q_hat: float
    scale_hat: float
    C_hat: float
    fit_window: tuple
    r2: float
    points: int
    method: str

    def to_dict(self) -> dict:
        return {
            "q_hat": self.q_hat,
            "scale_hat": self.scale_hat,
            "C_hat": self.C_hat,
            "fit_window": list(self.fit_window),
            "r2": self.r2,
            "points": self.points,
            "method": self.method,
        }


def _window_mask(tail: EmpiricalTail, window: tuple) -> np.ndarray:
    lo, hi = window
    return (
        (tail.t_grid > 0)
        & (tail.alpha_hat > 0)
        & (tail.alpha_hat >= lo)
        & (tail.alpha_hat + tail.dkw_band <= hi)
    )


def _r2(y: np.ndarray, fitted: np.ndarray) -> float:
    total = float(np.sum((y - y.mean()) ** 2))
    if total == 0:
        return 1.0
    return float(min(1.0, max(0.0, 1.0 - np.sum((y - fitted) ** 2) / total)))


def _linear_fit(t: np.ndarray, alpha: np.ndarray, C: float) -> tuple:
    x = np.log(t)
    y = np.log(np.log(C / alpha))
    result = stats.linregress(x, y)
    q = float(result.slope)
    if not q > 0:
        raise WindowError(f"non-positive slope {q:.4g}: the window sees no tail decay")
    return q, float(math.exp(-result.intercept / q)), float(result.rvalue**2)


def _free_constant_model(log_t, a, log_q, log_s):
    return a + np.exp(np.exp(log_q) * (log_t - log_s))


def fit_tail_exponent(
    tail: EmpiricalTail,
    window: Optional[tuple] = None,
    C: Optional[float] = None,
    mask: Optional[np.ndarray] = None,
) -> TailFit:
    """
    Fit α̂(t) ≈ C·exp(−(t/s)^q) on the points of the window.

    C given: least squares of log log(C/α̂) on log t (C = 1 is the plain
    log(−log α̂) regression). C = None, the default: log C is fitted jointly,
    starting from the C = 1 solution. The fixed-constant fit at the configured
    outer constant needs C=config.DEFAULT_C passed explicitly.
    """
    window = tuple(window or config.FIT_WINDOW)
    selected = _window_mask(tail, window)
    if mask is not None:
        selected &= mask
    count = int(selected.sum())
    if count < config.MIN_FIT_POINTS:
        raise WindowError(
            f"only {count} grid points inside the window {window}; need {config.MIN_FIT_POINTS}"
        )
    t, alpha = tail.t_grid[selected], tail.alpha_hat[selected]

    if C is not None:
        if np.any(alpha >= C):
            raise WindowError(f"window contains α̂ >= C = {C}")
        q, s, r2 = _linear_fit(t, alpha, C)
        return TailFit(q, s, float(C), window, r2, count, "loglog")

    q0, s0, r2_lin = _linear_fit(t, alpha, 1.0)
    y = -np.log(alpha)
    log_t = np.log(t)
    start = (0.0, math.log(min(max(q0, 0.06), 15.0)), math.log(s0))
    bounds = ([-5.0, math.log(0.05), -np.inf], [5.0, math.log(20.0), np.inf])
    try:
        (a, log_q, log_s), _ = optimize.curve_fit(
            _free_constant_model, log_t, y, p0=start, bounds=bounds, maxfev=20_000
        )
    except (RuntimeError, ValueError):
        return TailFit(q0, s0, 1.0, window, r2_lin, count, "loglog-fallback")
    fitted = _free_constant_model(log_t, a, log_q, log_s)
    return TailFit(
        float(math.exp(log_q)),
        float(math.exp(log_s)),
        float(math.exp(-a)),
        window,
        _r2(y, fitted),
        count,
        "free-constant",
    )


def fit_piecewise(
    tail: EmpiricalTail,
    breakpoints: Sequence[float],
    window: Optional[tuple] = None,
    C: Optional[float] = None,
) -> list[dict]:
    """One fit per segment [b_k, b_{k+1}) of the t axis; segments too sparse get fit=None."""
    edges = np.asarray(breakpoints, dtype=float)
    segments = []
    for lo, hi in zip(edges[:-1], edges[1:]):
        mask = (tail.t_grid >= lo) & (tail.t_grid < hi)
        try:
            fit = fit_tail_exponent(tail, window, C, mask=mask)
        except WindowError:
            fit = None
        segments.append({"segment": (float(lo), float(hi)), "fit": fit})
    return segments


# ── Diameters ─────────────────────────────────────────────────────────────────


def observation_spreads(observed: SampleEnsemble) -> np.ndarray:
    """Empirical std of each column of an (N, K) observation ensemble."""
    if observed.N < 2:
        raise InsufficientDataError("spreads need N >= 2")
    return observed.data.std(axis=0, ddof=1)


def observable_diameter(
    ensemble: SampleEnsemble,
    observations=None,
    K: int = 16,
    master_seed: int = 0,
) -> float:
    """
    max over the observations of the empirical std of f(Z).

    Default family: K random unit linear forms plus the Euclidean norm.
    """
    if observations is None:
        observations = random_unit_observations(ensemble.width, K, master_seed)
        observations.append(Observation.norm("euclidean" if not ensemble.is_matrix else "frobenius"))
    return float(observation_spreads(observe(ensemble, observations)).max())


# ── Profile checks ────────────────────────────────────────────────────────────


@dataclass(frozen=True, eq=False)
class ProfileCheck:
    coverage: float
    worst_excess: float
    moments: list
    q_hat: Optional[float]
    leading_exponent: float
    trailing_exponent: float
    exponent_consistent: Optional[bool]
    tail: EmpiricalTail
    profile: ConcentrationProfile
    fit: Optional[TailFit] = None
    notes: list = field(default_factory=list)

    @property
    def envelope_ok(self) -> bool:
        return self.coverage == 1.0

    @property
    def moments_ok(self) -> bool:
        return all(m["ok"] for m in self.moments)

    @property
    def passed(self) -> bool:
        return self.envelope_ok and self.moments_ok

    def to_dict(self) -> dict:
        return {
            "verdict": "PASS" if self.passed else "FAIL",
            "coverage": self.coverage,
            "worst_excess": self.worst_excess,
            "moments": self.moments,
            "q_hat": self.q_hat,
            "leading_exponent": self.leading_exponent,
            "trailing_exponent": self.trailing_exponent,
            "exponent_consistent": self.exponent_consistent,
            "profile": self.profile.to_dict(),
            "tail": self.tail.to_dict(),
            "fit": self.fit.to_dict() if self.fit else None,
            "notes": list(self.notes),
        }

    def to_markdown(self) -> str:
        lines = [
            f"**Envelope**: coverage {self.coverage:.4f} "
            f"({'PASS' if self.envelope_ok else 'FAIL'}), worst excess {self.worst_excess:.3g}",
            "",
            "| r | empirical | bound | ok |",
            "|---|---|---|---|",
        ]
        for m in self.moments:
            lines.append(f"| {m['r']:g} | {m['empirical']:.4g} | {m['bound']:.4g} | {'✅' if m['ok'] else '❌'} |")
        if self.q_hat is not None:
            lines += [
                "",
                f"**Fitted exponent** q̂ = {self.q_hat:.3f} "
                f"(regimes span [{self.trailing_exponent:g}, {self.leading_exponent:g}])",
            ]
        return "\n".join(lines)


def check_profile(
    values: Values,
    profile: ConcentrationProfile,
    lipschitz_constant: float = 1.0,
    center_kind: str = "median",
    confidence: float = config.DKW_CONFIDENCE,
    moments: Sequence[float] = config.CHECK_MOMENTS,
) -> ProfileCheck:
    """Envelope coverage, centered-moment bounds and a fitted exponent, always reported."""
    v = _as_values(values)
    scaled = profile.scaled(lipschitz_constant) if lipschitz_constant > 0 else profile
    tail = empirical_tail(v, center_kind, confidence=confidence)
    bound = np.asarray(scaled.tail_bound(tail.t_grid))
    excess = tail.alpha_hat - tail.dkw_band - bound
    coverage = float(np.mean(excess <= 1e-15))

    centered = np.abs(v - v.mean())
    moment_rows = []
    for r in moments:
        empirical = float(np.mean(centered**r))
        limit = scaled.moment_bound(r)
        moment_rows.append({"r": float(r), "empirical": empirical, "bound": limit, "ok": empirical <= limit})

    notes = []
    try:
        fit = fit_tail_exponent(tail)
        q_hat = fit.q_hat
        tol = config.EXPONENT_TOLERANCE
        consistent = scaled.trailing.exponent - tol <= q_hat <= scaled.leading.exponent + tol
    except WindowError as exc:
        fit, q_hat, consistent = None, None, None
        notes.append(str(exc))

    return ProfileCheck(
        coverage=coverage,
        worst_excess=float(excess.max()),
        moments=moment_rows,
        q_hat=q_hat,
        leading_exponent=scaled.leading.exponent,
        trailing_exponent=scaled.trailing.exponent,
        exponent_consistent=consistent,
        tail=tail,
        profile=scaled,
        fit=fit,
        notes=notes,
    )


# ── Norm expectations ─────────────────────────────────────────────────────────


@dataclass(frozen=True)
class NormExpectationReport:
    norm_kind: str
    rows: list
    stability: float
    max_ratio: float = 2.0

    @property
    def passed(self) -> bool:
        return self.stability <= self.max_ratio

    def to_dict(self) -> dict:
        return {
            "norm_kind": self.norm_kind,
            "rows": self.rows,
            "stability": self.stability,
            "max_ratio": self.max_ratio,
            "verdict": "PASS" if self.passed else "FAIL",
        }


def _trial_dims(ensemble: SampleEnsemble) -> tuple:
    if ensemble.is_matrix:
        p, n = ensemble.shape
        return p, n
    return ensemble.shape[0], 1


def norm_expectation_check(
    ensembles: Sequence[SampleEnsemble],
    norm_kind: str,
    q: float = 2.0,
    sigma: float = 1.0,
    max_ratio: float = 2.0,
) -> NormExpectationReport:
    """
    Fit E‖Z − Ê[Z]‖ ≈ c·η^{1/q}·σ in each dimension; stability = max c / min c.
    """
    if len(ensembles) < 3:
        raise InsufficientDataError(f"need at least 3 dimensions, got {len(ensembles)}")
    rows = []
    for ensemble in ensembles:
        trials = ensemble.trials()
        centered = trials - trials.mean(axis=0, keepdims=True)
        mean_norm = float(batch_norm(centered, norm_kind).mean())
        p, n = _trial_dims(ensemble)
        eta = norm_degree(norm_kind, p, n)
        rows.append(
            {
                "p": p,
                "n": n,
                "eta": eta,
                "mean_norm": mean_norm,
                "constant": mean_norm / (eta ** (1.0 / q) * sigma),
            }
        )
    constants = [row["constant"] for row in rows]
    return NormExpectationReport(norm_kind, rows, max(constants) / min(constants), max_ratio)
