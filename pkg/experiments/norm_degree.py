"""
experiments/norm_degree.py
───────────────────────────
范数度数实验：E‖Z − Ê[Z]‖ ≈ c · η^{1/2}，常数 c 跨三个维度稳定

  euclidean / linf ：高斯向量，trials 次
  spectral / frobenius / diag ：p = n 的高斯方阵，matrix_trials 次

另有两个精确对照：
  - E‖g‖ 与 Γ 函数比值 √2 Γ((p+1)/2)/Γ(p/2)（gamma_p 维，相对误差 ≤ gamma_tol）
  - 最大 spectral 维度上 E‖X‖/(√p + √n) ∈ spectral_range
"""

import math

import numpy as np

from experiments.common import artifact, check, experiment_node, in_range
from services.errors import DomainError
from services.estimation import gaussian_norm_mean, norm_expectation_check
from services.generators import MatrixModel, VectorModel, sample, sample_matrix
from services.observables import batch_norm

VECTOR_KINDS = ("euclidean", "linf")
MATRIX_KINDS = ("spectral", "frobenius", "diag", "nuclear")


def _ensembles(kind: str, dims: list, params: dict, seed: int, threads: int) -> list:
    if kind in VECTOR_KINDS:
        return [sample(VectorModel("gaussian", p), params["trials"], seed, threads=threads) for p in dims]
    if kind in MATRIX_KINDS:
        return [
            sample_matrix(MatrixModel.gaussian(p, p), params["matrix_trials"], seed, threads=threads)
            for p in dims
        ]
    raise DomainError(f"unknown norm kind {kind!r}")


@experiment_node("norm_degree")
def norm_degree_node(params: dict, seed: int, threads: int) -> dict:
    checks, reports, table = [], {}, []
    for kind in params["kinds"]:
        dims = params["dims"].get(kind)
        if not dims:
            raise DomainError(f"no dimensions configured for norm kind {kind!r}")
        report = norm_expectation_check(
            _ensembles(kind, dims, params, seed, threads), kind, q=2.0, sigma=1.0, max_ratio=params["max_ratio"]
        )
        checks.append(
            check(
                f"constant_stability[{kind}]",
                report.passed,
                report.stability,
                f"max c / min c ≤ {params['max_ratio']:g}",
                str([round(r["constant"], 4) for r in report.rows]),
            )
        )
        reports[kind] = report.to_dict()
        table += [[kind, r["p"], r["n"], r["eta"], r["mean_norm"], r["constant"]] for r in report.rows]

    # ── Γ 函数对照 ───────────────────────────────────────────────────────────
    p = params["gamma_p"]
    Z = sample(VectorModel("gaussian", p), params["trials"], seed, threads=threads)
    empirical = float(np.linalg.norm(Z.data, axis=1).mean())
    exact = gaussian_norm_mean(p)
    checks.append(
        in_range(f"gamma_ratio_oracle[p={p}]", abs(empirical / exact - 1.0), None, params["gamma_tol"],
                 f"Ê‖g‖ = {empirical:.5g}, exact {exact:.5g}")
    )

    # ── 谱范数的 Bai-Yin 尺度 ──────────────────────────────────────────────
    results = {"reports": reports, "gamma_oracle": {"p": p, "empirical": empirical, "exact": exact}}
    if "spectral" in params["kinds"]:
        size = max(params["dims"]["spectral"])
        X = sample_matrix(MatrixModel.gaussian(size, size), params["matrix_trials"], seed, threads=threads)
        ratio = float(batch_norm(X.trials(), "spectral").mean()) / (2 * math.sqrt(size))
        lo, hi = params["spectral_range"]
        checks.append(in_range(f"spectral_edge[p=n={size}]", ratio, lo, hi, "E‖X‖ / (√p + √n)"))
        results["spectral_edge"] = {"p": size, "ratio": ratio}

    artifacts = [artifact("norm_degree", ["kind", "p", "n", "eta", "mean_norm", "constant"], table)]
    return {"checks": checks, "results": results, "artifacts": artifacts}
