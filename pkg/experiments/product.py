"""
experiments/product.py
───────────────────────
广义乘积实验

mode = "tail"：
  标量高斯乘积 z = x_1 ⋯ x_m（每个因子独立的列流），N 次试验；
  自由常数拟合远尾指数，检查落在 ranges[m] 内（q/m 的预期值）；
  可选：product_profile 包络检查、m = 2 时与 K_0 Bessel 精确尾的比较。
  结果中附带 entrywise_p 维逐元乘积 x_1 ⊙ … ⊙ x_m 的声明剖面。

mode = "algebra"：
  profile 代数的精确校验：
    - nu_superscript 与暴力枚举子集乘积一致（相对 1e-12）
    - 互异 μ 时，区间 [c t_l, c t_{l+1}] 内的主导 regime 恰为第 l 个
    - factor_profile：期望界 μ^{(m-1)} 与 reduced 形式不超过完整形式
"""

import itertools
import math

import numpy as np

from experiments.common import artifact, check, experiment_node, in_range
from services.errors import DomainError, RangeError
from services.estimation import (
    check_profile,
    empirical_tail,
    fit_tail_exponent,
    gaussian_product_tail,
)
from services.generators import VectorModel, sample
from services.observables import hadamard_chain
from services.profile import (
    ProductSpec,
    breakpoints,
    entrywise_product_profile,
    factor_profile,
    nu_superscript,
    product_profile,
    regime_dominance,
)
from utils.seeding import derive_generator

# 代数校验专用的随机流（与采样流分开）
ALGEBRA_STREAM = 5


# ── tail 模式 ─────────────────────────────────────────────────────────────────


def _product_values(m: int, N: int, seed: int, threads: int) -> np.ndarray:
    factor = VectorModel("gaussian", 1)
    factors = [sample(factor, N, seed, column=k, threads=threads) for k in range(m)]
    return hadamard_chain(factors).values()


def _bessel_gap(tail) -> float:
    exact = np.array([gaussian_product_tail(float(t)) for t in tail.t_grid])
    return float(np.max(np.abs(tail.alpha_hat - exact)))


def _tail_mode(params: dict, seed: int, threads: int) -> dict:
    m_values, ranges = params["m_values"], params["ranges"]
    if len(ranges) != len(m_values):
        raise RangeError(f"ranges needs one [lo, hi] per m, got {len(ranges)} for {len(m_values)}")

    checks, artifacts, fits = [], [], []
    for m, (lo, hi) in zip(m_values, ranges):
        values = _product_values(m, params["n"], seed, threads)
        tail = empirical_tail(values, "median")
        fit = fit_tail_exponent(tail, tuple(params["window"]))
        checks.append(in_range(f"q_hat[m={m}]", fit.q_hat, lo, hi, f"expected 2/m = {2 / m:.3g}"))
        entry = {"m": m, "expected_q": 2.0 / m, **fit.to_dict()}
        artifacts.append(artifact(f"product_tail_m{m}", ["t", "alpha_hat", "band_lo", "band_hi"], tail.rows()))

        if params["envelope"]:
            profile = product_profile(ProductSpec(m, 2.0, 1.0, (1.0,) * m), params["C"], params["c"])
            report = check_profile(values, profile)
            checks.append(
                check(f"envelope[m={m}]", report.envelope_ok, report.coverage, "coverage = 1",
                      f"worst excess {report.worst_excess:.3g}")
            )
            checks.append(
                check(f"moments[m={m}]", report.moments_ok, [r["empirical"] for r in report.moments],
                      "≤ moment_bound", str([r["bound"] for r in report.moments]))
            )
            entry["envelope"] = {"coverage": report.coverage, "profile": report.profile.to_dict()}
            # 每个坐标即上面的标量乘积；p 维整体在 ℓ∞ 下的剖面
            entry["entrywise_profile"] = entrywise_product_profile(params["entrywise_p"], m).to_dict()

        if params["oracle"] and m == 2:
            gap = _bessel_gap(tail)
            checks.append(
                in_range("bessel_oracle[m=2]", gap, None, 2 * tail.dkw_band,
                         "max |α̂ − P(|xy| ≥ t)| over the grid")
            )
            entry["bessel_gap"] = gap
        fits.append(entry)

    return {"checks": checks, "results": {"fits": fits}, "artifacts": artifacts}


# ── algebra 模式 ──────────────────────────────────────────────────────────────


def _brute_force_nu(nu: np.ndarray, k: int) -> float:
    return max((math.prod(subset) for subset in itertools.combinations(nu.tolist(), k)), default=1.0)


def _nu_oracle(params: dict, gen: np.random.Generator) -> tuple:
    worst, failures = 0.0, 0
    for _ in range(params["nu_trials"]):
        m = int(gen.integers(1, params["max_m"] + 1))
        nu = gen.uniform(0.0, 5.0, m)
        k = int(gen.integers(0, m + 1))
        expected = _brute_force_nu(nu, k)
        got = nu_superscript(nu, k)
        error = abs(got - expected) / max(1.0, abs(expected))
        worst = max(worst, error)
        failures += error > params["slack"]
    return worst, failures


def _interval_points(t: np.ndarray, c: float) -> list:
    """每个区间 [c t_l, c t_{l+1}] 内取一个内点"""
    m = len(t) - 1
    points = []
    for l in range(1, m + 1):
        lo, hi = c * t[l - 1], c * t[l]
        if l == 1:
            points.append(hi / 2)
        elif l == m:
            points.append(2 * lo)
        else:
            points.append(math.sqrt(lo * hi))
    return points


def _dominance_oracle(params: dict, gen: np.random.Generator) -> tuple:
    mismatches, checked = [], 0
    for trial in range(params["dominance_trials"]):
        m = int(gen.integers(2, params["max_m"] + 1))
        mu = tuple(gen.uniform(0.5, 3.0, m))
        if len(set(mu)) != m:
            continue
        spec = ProductSpec(m, 2.0, 1.0, mu)
        profile = product_profile(spec)
        if len(profile.regimes) != m:
            mismatches.append({"trial": trial, "m": m, "kept": len(profile.regimes)})
            continue
        points = _interval_points(breakpoints(spec), profile.c)
        dominant = regime_dominance(profile, np.array(points))
        for l, winner in enumerate(dominant):
            if int(winner) != l:
                mismatches.append({"trial": trial, "m": m, "interval": l + 1, "winner": int(winner) + 1})
        checked += 1
    return checked, mismatches


def _factor_oracle(params: dict, gen: np.random.Generator) -> tuple:
    """reduced 形式逐 regime 不超过完整形式，期望界为前 m-1 个最大 μ 之积"""
    worst, failures = 0.0, 0
    for _ in range(params["nu_trials"]):
        m = int(gen.integers(2, params["max_m"] + 1))
        spec = ProductSpec(m, 2.0, float(gen.uniform(0.5, 2.0)), tuple(gen.uniform(1.0, 4.0, m)))
        full, bound = factor_profile(spec)
        reduced, _ = factor_profile(spec, reduced=True)
        expected = math.prod(spec.mu_sorted[1:])
        error = abs(bound - expected) / expected
        worst = max(worst, error)
        dominated = all(r <= f * (1 + params["slack"]) for r, f in zip(reduced.scales, full.scales))
        failures += error > params["slack"] or not dominated
    return worst, failures


def _algebra_mode(params: dict, seed: int) -> dict:
    if not 1 <= params["max_m"] <= 12:
        raise RangeError(f"max_m must lie in [1, 12], got {params['max_m']}")
    gen = derive_generator(seed, ALGEBRA_STREAM, 0, 0)
    worst, failures = _nu_oracle(params, gen)
    checked, mismatches = _dominance_oracle(params, gen)
    factor_worst, factor_failures = _factor_oracle(params, gen)
    checks = [
        check("nu_superscript_vs_enumeration", failures == 0, worst,
              f"relative error ≤ {params['slack']:g}", f"{failures}/{params['nu_trials']} mismatches"),
        check("breakpoint_dominance", not mismatches, len(mismatches), "0 mismatches",
              f"{checked} specs with distinct mu"),
        check("factor_profile_forms", factor_failures == 0, factor_worst,
              f"relative error ≤ {params['slack']:g}", f"{factor_failures}/{params['nu_trials']} violations"),
    ]
    results = {
        "nu_trials": params["nu_trials"],
        "nu_worst_relative_error": worst,
        "dominance_specs": checked,
        "dominance_mismatches": mismatches[:20],
        "factor_worst_relative_error": factor_worst,
    }
    return {"checks": checks, "results": results}


@experiment_node("product")
def product_node(params: dict, seed: int, threads: int) -> dict:
    if params["mode"] == "tail":
        return _tail_mode(params, seed, threads)
    if params["mode"] == "algebra":
        return _algebra_mode(params, seed)
    raise DomainError(f"mode must be 'tail' or 'algebra', got {params['mode']!r}")
