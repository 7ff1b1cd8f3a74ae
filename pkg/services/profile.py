"""
Multi-regime exponential concentration envelopes.

A profile is a finite family of regimes (exponent q_l, scale s_l) with outer/inner
constants (C, c); it stands for the tail bound

    P(|f(Z) - center| >= t) <= min(1, C * max_l exp(-(t / (c s_l))^{q_l})).

This module builds profiles for generalized products (one regime per number of
"fluctuating" factors), computes the breakpoints where the dominant regime changes,
evaluates tail and moment bounds, and carries a small catalogue of ready-made
profiles (Hanson-Wright forms, XDY^T actions, resolvents, ...).

Everything here is immutable and pure.
"""

import json
import math
import warnings
from dataclasses import dataclass, field, replace
from typing import Optional, Sequence, Union

import numpy as np

import config
from services.errors import DomainError, HypothesisWarning, RangeError, ShapeError

Number = Union[int, float]


# ── Types ─────────────────────────────────────────────────────────────────────


@dataclass(frozen=True)
class Regime:
    exponent: float
    scale: float

    def __post_init__(self):
        if not (math.isfinite(self.exponent) and self.exponent > 0):
            raise RangeError(f"regime exponent must be a positive real, got {self.exponent}")
        if not (math.isfinite(self.scale) and self.scale > 0):
            raise RangeError(f"regime scale must be a positive real, got {self.scale}")

    def log_term(self, t, c: float):
        """log of exp(-(t / (c * scale))^exponent), vectorized over t."""
        return -np.power(np.asarray(t, dtype=float) / (c * self.scale), self.exponent)


def _normalize(regimes: Sequence[Regime]) -> tuple:
    # duplicate exponents keep the larger scale
    merged: dict = {}
    for regime in regimes:
        kept = merged.get(regime.exponent)
        if kept is None or regime.scale > kept.scale:
            merged[regime.exponent] = regime
    return tuple(sorted(merged.values(), key=lambda r: -r.exponent))


@dataclass(frozen=True)
class ConcentrationProfile:
    regimes: tuple
    C: float = field(default_factory=lambda: config.DEFAULT_C)
    c: float = field(default_factory=lambda: config.DEFAULT_SMALL_C)
    warnings: tuple = field(default=(), compare=False)

    def __post_init__(self):
        regimes = tuple(self.regimes)
        if not regimes:
            raise RangeError("a profile needs at least one regime")
        if not (math.isfinite(self.C) and self.C >= 1):
            raise RangeError(f"outer constant C must be >= 1, got {self.C}")
        if not (math.isfinite(self.c) and self.c > 0):
            raise RangeError(f"inner constant c must be > 0, got {self.c}")
        object.__setattr__(self, "regimes", _normalize(regimes))

    @property
    def exponents(self) -> tuple:
        return tuple(r.exponent for r in self.regimes)

    @property
    def scales(self) -> tuple:
        return tuple(r.scale for r in self.regimes)

    @property
    def leading(self) -> Regime:
        """Highest-exponent regime: governs small t, i.e. the observable diameter."""
        return self.regimes[0]

    @property
    def trailing(self) -> Regime:
        """Lowest-exponent regime: governs the far tail."""
        return self.regimes[-1]

    # ── evaluation ────────────────────────────────────────────────────────────

    def log_terms(self, t) -> np.ndarray:
        """Matrix of regime log-terms, shape (len(regimes), *t.shape)."""
        return np.stack([r.log_term(t, self.c) for r in self.regimes])

    def tail_bound(self, t):
        t_arr = np.asarray(t, dtype=float)
        if np.any(t_arr < 0):
            raise RangeError("tail_bound is defined for t >= 0")
        bound = np.minimum(1.0, self.C * np.exp(self.log_terms(t_arr).max(axis=0)))
        return float(bound) if bound.ndim == 0 else bound

    def moment_bound(self, r: float) -> float:
        if not r > 0:
            raise RangeError(f"moment order must be > 0, got {r}")
        logs = [
            (r / reg.exponent) * math.log(r / reg.exponent) + r * math.log(self.c * reg.scale)
            for reg in self.regimes
        ]
        return math.exp(math.log(self.C) + max(logs))

    def dominant_regime(self, t) -> np.ndarray:
        """Index (into `regimes`) of the regime attaining the max at each t."""
        return np.argmax(self.log_terms(t), axis=0)

    # ── transformations ───────────────────────────────────────────────────────

    def scaled(self, lam: float) -> "ConcentrationProfile":
        """Profile of a λ-Lipschitz image: every scale multiplied by λ."""
        if not lam > 0:
            raise RangeError(f"Lipschitz factor must be > 0, got {lam}")
        return replace(
            self, regimes=tuple(Regime(r.exponent, r.scale * lam) for r in self.regimes)
        )

    def with_constants(self, C: float, c: float) -> "ConcentrationProfile":
        return replace(self, C=C, c=c)

    def with_warning(self, message: str) -> "ConcentrationProfile":
        return replace(self, warnings=self.warnings + (message,))

    def union(self, other: "ConcentrationProfile") -> "ConcentrationProfile":
        return ConcentrationProfile(
            self.regimes + other.regimes,
            C=max(self.C, other.C),
            c=max(self.c, other.c),
            warnings=self.warnings + other.warnings,
        )

    def pruned(self, grid_points: Optional[int] = None) -> "ConcentrationProfile":
        """Drop regimes that never strictly attain the max of the bound on [0, ∞)."""
        if len(self.regimes) == 1:
            return self
        grid = _dominance_grid(self, grid_points or config.PRUNE_GRID_POINTS)
        terms = self.log_terms(grid)
        keep = []
        for i, regime in enumerate(self.regimes):
            others = np.delete(terms, i, axis=0).max(axis=0)
            slack = 1e-12 * np.maximum(1.0, np.abs(others))
            if np.any(terms[i] > others + slack):
                keep.append(regime)
        return replace(self, regimes=tuple(keep))

    # ── serialization ─────────────────────────────────────────────────────────

    def to_dict(self) -> dict:
        return {
            "regimes": [{"exponent": r.exponent, "scale": r.scale} for r in self.regimes],
            "C": self.C,
            "c": self.c,
        }

    @classmethod
    def from_dict(cls, data: dict) -> "ConcentrationProfile":
        unknown = set(data) - {"regimes", "C", "c"}
        if unknown:
            raise DomainError(f"unknown profile keys: {sorted(unknown)}")
        regimes = tuple(Regime(float(r["exponent"]), float(r["scale"])) for r in data["regimes"])
        return cls(regimes, C=float(data["C"]), c=float(data["c"]))

    def to_json(self) -> str:
        return json.dumps(self.to_dict())

    @classmethod
    def from_json(cls, text: str) -> "ConcentrationProfile":
        return cls.from_dict(json.loads(text))


def _dominance_grid(profile: ConcentrationProfile, grid_points: int) -> np.ndarray:
    # between two consecutive pairwise crossings the dominant regime cannot change,
    # so geometric midpoints of the sorted crossings make the test exact; the
    # log-spaced grid covers the rest of the range
    regs = profile.regimes
    log_cross = []
    for i in range(len(regs)):
        for j in range(i + 1, len(regs)):
            qi, qj = regs[i].exponent, regs[j].exponent
            li, lj = math.log(profile.c * regs[i].scale), math.log(profile.c * regs[j].scale)
            log_cross.append((qi * li - qj * lj) / (qi - qj))
    log_scales = [math.log(profile.c * r.scale) for r in regs]
    lo = min(log_cross + log_scales) - 3 * math.log(10)
    hi = max(log_cross + log_scales) + 3 * math.log(10)
    points = list(np.linspace(lo, hi, grid_points))
    ordered = sorted(log_cross)
    points += [(a + b) / 2 for a, b in zip(ordered[:-1], ordered[1:])]
    points += [ordered[0] - 1.0, ordered[-1] + 1.0]
    return np.exp(np.array(sorted(points)))


@dataclass(frozen=True)
class ProductSpec:
    m: int
    q: float
    sigma: float
    mu: tuple

    def __post_init__(self):
        mu = tuple(float(v) for v in self.mu)
        object.__setattr__(self, "mu", mu)
        if self.m < 1:
            raise RangeError(f"m must be >= 1, got {self.m}")
        if len(mu) != self.m:
            raise RangeError(f"mu must have m={self.m} entries, got {len(mu)}")
        if not all(v > 0 and math.isfinite(v) for v in mu):
            raise RangeError("all mu_i must be positive")
        if not (self.q > 0 and self.sigma > 0):
            raise RangeError("q and sigma must be positive")

    @property
    def mu_sorted(self) -> tuple:
        """μ_(1) ≤ … ≤ μ_(m)."""
        return tuple(sorted(self.mu))


# ── Operations ────────────────────────────────────────────────────────────────


def nu_superscript(nu: Sequence[Number], k: int) -> float:
    """ν^{(k)}: the largest product of k distinct entries of ν (empty product = 1)."""
    m = len(nu)
    if not 0 <= k <= m:
        raise RangeError(f"k must lie in [0, {m}], got {k}")
    result = 1.0
    for value in sorted((float(v) for v in nu), reverse=True)[:k]:
        result *= value
    return result


def breakpoints(spec: ProductSpec) -> np.ndarray:
    """(t_1, …, t_{m+1}) = (0, μ^{(m-2)} μ_(2)², …, μ_(m)^m, +∞)."""
    ascending = spec.mu_sorted
    points = [0.0]
    for i in range(2, spec.m + 1):
        points.append(nu_superscript(spec.mu, spec.m - i) * ascending[i - 1] ** i)
    points.append(math.inf)
    return np.array(points)


def product_profile(
    spec: ProductSpec, C: Optional[float] = None, c: Optional[float] = None
) -> ConcentrationProfile:
    regimes = tuple(
        Regime(spec.q / l, spec.sigma ** l * nu_superscript(spec.mu, spec.m - l))
        for l in range(1, spec.m + 1)
    )
    profile = ConcentrationProfile(
        regimes,
        C=config.DEFAULT_C if C is None else C,
        c=config.DEFAULT_SMALL_C if c is None else c,
    )
    if len(set(spec.mu)) == spec.m:
        # regime l dominates exactly on [c t_l, c t_{l+1}], all non-empty here
        t = breakpoints(spec)
        keep = tuple(r for l, r in enumerate(profile.regimes, start=1) if t[l - 1] < t[l])
        return replace(profile, regimes=keep)
    return profile.pruned()


def tail_bound(profile: ConcentrationProfile, t):
    return profile.tail_bound(t)


def moment_bound(profile: ConcentrationProfile, r: float) -> float:
    return profile.moment_bound(r)


def regime_dominance(profile: ConcentrationProfile, t):
    return profile.dominant_regime(t)


def hanson_wright_profile(frobenius: float, spectral: float, K: float = 1.0) -> ConcentrationProfile:
    if frobenius < 0 or spectral < 0:
        raise RangeError("norms of A must be nonnegative")
    if not K > 0:
        raise RangeError(f"K must be > 0, got {K}")
    if frobenius == 0 or spectral == 0:
        raise RangeError("A = 0 gives a degenerate (identically zero) form")
    return ConcentrationProfile((Regime(2.0, K * K * frobenius), Regime(1.0, K * K * spectral)))


def high_order_profile(spec: ProductSpec, kappa: float) -> ConcentrationProfile:
    if not kappa > 0:
        raise RangeError(f"kappa must be > 0, got {kappa}")
    profile = product_profile(spec).scaled(kappa ** spec.m)
    lhs = math.log(spec.m) ** (1.0 / spec.q)
    rhs = min(spec.mu) / spec.sigma
    if lhs > rhs:
        message = (
            f"log(m)^(1/q) = {lhs:.4g} exceeds mu_(1)/sigma = {rhs:.4g}; "
            "the high-order bound is reported without its hypothesis"
        )
        warnings.warn(message, HypothesisWarning, stacklevel=2)
        profile = profile.with_warning(message)
    return profile


def power_profile(
    q: float, sigma: float, mu0: float, m: int, epsilon: float, kappa: float
) -> ConcentrationProfile:
    """Power Z^{⊙m} of a single vector: E_q(mσ((1+ε)μ₀)^{m-1}) + E_{q/m}((κσ)^m)."""
    if m < 1 or epsilon < 0 or not (sigma > 0 and mu0 > 0 and kappa > 0):
        raise RangeError("invalid power-profile parameters")
    return ConcentrationProfile(
        (
            Regime(q, m * sigma * ((1 + epsilon) * mu0) ** (m - 1)),
            Regime(q / m, (kappa * sigma) ** m),
        )
    )


def indexed_product_profile(q: float, sigma: float, etas: Sequence[float]) -> ConcentrationProfile:
    """Product profile with μ_i = σ η_i^{1/q} read off the norm degrees η_i."""
    mu = tuple(sigma * eta ** (1.0 / q) for eta in etas)
    return product_profile(ProductSpec(len(mu), q, sigma, mu))


def factor_profile(spec: ProductSpec, reduced: bool = False) -> tuple:
    """
    Profile of the per-slot variation factor Ψ_i in the alternative product form,
    returned with the bound μ^{(m-1)} on its expectation.
    """
    if spec.m < 2:
        raise RangeError("the variation factor needs m >= 2")
    if spec.mu_sorted[0] < 1:
        raise RangeError("the alternative form requires mu_(1) >= 1")
    top = spec.mu_sorted[-1]
    regimes = []
    for l in range(1, spec.m):
        if reduced:
            scale = spec.sigma ** l * nu_superscript(spec.mu, spec.m - l) / top
        else:
            scale = spec.sigma ** l * nu_superscript(spec.mu, spec.m - l - 1)
        regimes.append(Regime(spec.q / l, scale))
    return ConcentrationProfile(tuple(regimes)), nu_superscript(spec.mu, spec.m - 1)


def norm_degree(space_kind: str, p: int, n: int = 1) -> float:
    """
    Norm degree η of (E, ‖·‖); always > 0.

    ℓ∞ on ℝ^p has η = log p, so it needs p >= 2; ‖·‖_d lives on square M_n
    and takes p = n.
    """
    if space_kind not in config.SUPPORTED_NORM_KINDS:
        raise DomainError(
            f"unknown norm kind {space_kind!r}; expected one of {sorted(config.SUPPORTED_NORM_KINDS)}"
        )
    if p < 1 or n < 1:
        raise RangeError("dimensions must be >= 1")
    if space_kind == "linf" and p < 2:
        raise RangeError("the ℓ∞ degree log p needs p >= 2")
    if space_kind == "diag" and p != n:
        raise ShapeError(f"‖·‖_d is defined on square M_n, got {p}×{n}")
    degrees = {
        "linf": lambda: math.log(p),
        "euclidean": lambda: float(p),
        "spectral": lambda: float(n + p),
        "frobenius": lambda: float(n * p),
        "nuclear": lambda: float(n * p),
        "diag": lambda: float(n),
    }
    return degrees[space_kind]()


# ── Catalogue ─────────────────────────────────────────────────────────────────


def entrywise_product_profile(p: int, m: int, q: float = 2.0, sigma: float = 1.0) -> ConcentrationProfile:
    """x_1 ⊙ … ⊙ x_m with ℓ∞ control of the factors: E_2(log(p)^{(m-1)/2}) + E_{2/m}."""
    if p < 2:
        raise RangeError("entrywise product profile needs p >= 2")
    return indexed_product_profile(q, sigma, [norm_degree("linf", p)] * m)


def xdy_action_profile(p: int, n: int) -> ConcentrationProfile:
    """XDY^T u: E_2(√((p+n) log n)) + E_1(√(p+n)) + E_{2/3}."""
    if n < 2:
        raise RangeError("n must be >= 2")
    return ConcentrationProfile(
        (
            Regime(2.0, math.sqrt((p + n) * math.log(n))),
            Regime(1.0, math.sqrt(p + n)),
            Regime(2.0 / 3.0, 1.0),
        )
    )


def trace_pairing_profile(n: int) -> ConcentrationProfile:
    """tr(A X D Y^T): E_1(√n) + E_{2/3}."""
    return ConcentrationProfile((Regime(1.0, math.sqrt(n)), Regime(2.0 / 3.0, 1.0)))


def diag_stat_profile(n: int, p: int) -> ConcentrationProfile:
    """‖Y^T A X‖_d: E_2(√log(np)) + E_1."""
    if n * p < 2:
        raise RangeError("np must be >= 2")
    return ConcentrationProfile((Regime(2.0, math.sqrt(math.log(n * p))), Regime(1.0, 1.0)))


def resolvent_profile(n: int) -> ConcentrationProfile:
    """Linear observations of Q: E_1(√(log n / n)) + E_{1/2}(1/√n)."""
    if n < 2:
        raise RangeError("n must be >= 2")
    return ConcentrationProfile(
        (Regime(1.0, math.sqrt(math.log(n) / n)), Regime(0.5, 1.0 / math.sqrt(n)))
    )


def qu_profile(n: int) -> ConcentrationProfile:
    """Qu for a bounded deterministic u: E_1(√(log n / n))."""
    if n < 2:
        raise RangeError("n must be >= 2")
    return ConcentrationProfile((Regime(1.0, math.sqrt(math.log(n) / n)),))
