"""
experiments/hanson_wright.py
─────────────────────────────
双线性型 x^T A y 的 Hanson-Wright 实验（x ⊥ y 独立高斯）

  1. 方差：对 `matrices` 个随机高斯 A_k，Var(x^T A_k y)/‖A_k‖_F² ∈ var_range
  2. 远尾：A = I、低维 (far_tail_dim) 下 ‖x‖² 的远尾指数 ∈ far_range（指数型）
  3. 包络：hanson_wright_profile(‖A‖_F, ‖A‖) 以 (C, c) 覆盖经验尾
"""

import numpy as np

from experiments.common import artifact, check, experiment_node, in_range
from services.estimation import check_profile, empirical_tail, fit_tail_exponent
from services.generators import STREAM_MATRICES, VectorModel, sample
from services.observables import bilinear_form, bilinear_form_model
from services.profile import hanson_wright_profile
from utils.seeding import derive_generator


def _random_matrices(p: int, count: int, seed: int) -> list:
    return [derive_generator(seed, STREAM_MATRICES, k, p).standard_normal((p, p)) for k in range(count)]


def _envelope_check(name: str, values, profile) -> tuple:
    report = check_profile(values, profile)
    result = check(
        name,
        report.passed,
        report.coverage,
        "coverage = 1 and moments ≤ moment_bound",
        f"worst excess {report.worst_excess:.3g}",
    )
    return result, report


@experiment_node("hanson_wright")
def hanson_wright_node(params: dict, seed: int, threads: int) -> dict:
    p, C, c = params["p"], params["C"], params["c"]
    lo, hi = params["var_range"]
    checks, results = [], {}

    # ── 1. 方差 / ‖A‖_F² ──────────────────────────────────────────────────
    matrices = _random_matrices(p, params["matrices"], seed)
    forms = bilinear_form_model(VectorModel("gaussian", p), matrices, params["n"], seed, threads=threads)
    variances = forms.data.var(axis=0, ddof=1)
    rows = []
    for k, (A, var) in enumerate(zip(matrices, variances)):
        frob2 = float(np.linalg.norm(A) ** 2)
        ratio = float(var) / frob2
        rows.append([k, frob2, float(np.linalg.norm(A, 2)), float(var), ratio])
        checks.append(in_range(f"var/frob2[A_{k}]", ratio, lo, hi))
    results["variance_ratios"] = [r[4] for r in rows]

    # ── 2. 包络：第一个 A ───────────────────────────────────────────────────
    A0 = matrices[0]
    profile = hanson_wright_profile(float(np.linalg.norm(A0)), float(np.linalg.norm(A0, 2))).with_constants(C, c)
    result, report = _envelope_check("envelope[A_0]", forms.data[:, 0], profile)
    checks.append(result)
    results["envelope_A0"] = {"coverage": report.coverage, "profile": profile.to_dict(), "q_hat": report.q_hat}

    # ── 3. 远尾：A = I 时 ‖x‖² ─────────────────────────────────────────────
    dim = params["far_tail_dim"]
    X = sample(VectorModel("gaussian", dim), params["far_n"], seed, threads=threads)
    squares = bilinear_form(X, np.eye(dim), X).values()
    tail = empirical_tail(squares, "mean")
    fit = fit_tail_exponent(tail, tuple(params["window"]))
    far_lo, far_hi = params["far_range"]
    checks.append(
        in_range(f"far_tail_q_hat[A=I_{dim}]", fit.q_hat, far_lo, far_hi, f"{fit.method}, {fit.points} points")
    )
    results["far_tail"] = {"dim": dim, **fit.to_dict()}

    identity_profile = hanson_wright_profile(float(np.sqrt(dim)), 1.0).with_constants(C, c)
    result, report = _envelope_check(f"envelope[A=I_{dim}]", squares, identity_profile)
    checks.append(result)
    results["envelope_identity"] = {"coverage": report.coverage, "profile": identity_profile.to_dict()}

    artifacts = [
        artifact("hanson_wright_variances", ["k", "frobenius_sq", "spectral", "variance", "ratio"], rows),
        artifact("hanson_wright_far_tail", ["t", "alpha_hat", "band_lo", "band_hi"], tail.rows()),
    ]
    return {"checks": checks, "results": results, "artifacts": artifacts}
