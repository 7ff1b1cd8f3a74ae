"""
experiments/tail.py
────────────────────
尾部拟合实验：单位线性观测 u^T Z 的经验集中函数

对 params["dims"] 中的每个维度：
  1. 流式采样 N 次 observe(u^T Z)（u 为随机单位向量或 e_1）
  2. 在拟合窗口内估计尾指数 q̂，与声明剖面的主导指数比较（±tolerance）
  3. 可选：包络检查 α̂(t) − DKW ≤ C·exp(−(t/(c s))^q) 与中心矩上界
"""

import numpy as np

from experiments.common import artifact, check, experiment_node, in_range, vector_model
from services.estimation import check_profile, empirical_tail, fit_tail_exponent
from services.errors import DomainError
from services.generators import sample
from services.observables import Observation, observe, observe_model, random_unit_observations


def _direction(kind: str, dim: int, seed: int) -> Observation:
    if kind == "random":
        return random_unit_observations(dim, 1, seed)[0]
    if kind == "basis":
        u = np.zeros(dim)
        u[0] = 1.0
        return Observation.linear(u, label="basis_0")
    raise DomainError(f"direction must be 'random' or 'basis', got {kind!r}")


@experiment_node("tail")
def tail_node(params: dict, seed: int, threads: int) -> dict:
    checks, artifacts, ensembles = [], [], {}
    results = {"fits": [], "envelopes": []}
    tolerance = params["tolerance"]

    for dim in params["dims"]:
        model = vector_model(params["model"], dim, params["q"])
        observation = _direction(params["direction"], model.output_dim, seed)
        if params["save_ensemble"]:
            # 保存原始样本时需要完整的 N×p 矩阵
            Z = sample(model, params["n"], seed, threads=threads)
            values = observe(Z, [observation])
            ensembles[f"samples_p{dim}"] = Z
        else:
            values = observe_model(model, params["n"], seed, [observation], threads=threads)
        values = values.data[:, 0]

        declared = model.declared_profile
        expected_q = params["expect_q"] if params["expect_q"] is not None else declared.leading.exponent
        tail = empirical_tail(values, params["center"])
        fit = fit_tail_exponent(tail, tuple(params["window"]))
        checks.append(
            in_range(
                f"q_hat[p={dim}]",
                fit.q_hat,
                expected_q - tolerance,
                expected_q + tolerance,
                f"{fit.method}, {fit.points} points, r2={fit.r2:.4f}",
            )
        )
        results["fits"].append({"p": dim, "expected_q": expected_q, **fit.to_dict()})
        artifacts.append(artifact(f"tail_p{dim}", ["t", "alpha_hat", "band_lo", "band_hi"], tail.rows()))

        if params["envelope"]:
            profile = declared.with_constants(params["C"], params["c"])
            report = check_profile(values, profile, observation.lipschitz_constant, params["center"])
            checks.append(
                check(
                    f"envelope[p={dim}]",
                    report.envelope_ok,
                    report.coverage,
                    "coverage = 1",
                    f"worst excess {report.worst_excess:.3g}",
                )
            )
            checks.append(
                check(
                    f"moments[p={dim}]",
                    report.moments_ok,
                    [m["empirical"] for m in report.moments],
                    "≤ moment_bound",
                    str([m["bound"] for m in report.moments]),
                )
            )
            results["envelopes"].append({"p": dim, **report.to_dict()})

    return {"checks": checks, "results": results, "artifacts": artifacts, "ensembles": ensembles}
