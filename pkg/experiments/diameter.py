"""
experiments/diameter.py
────────────────────────
可观测直径实验

target = "vector"：
  观测族 = K 个随机单位线性型 (+ 欧氏范数) (+ 归一化和 Σz_i/√p)，
  直径 = 各观测经验标准差的最大值；检查直径落在 [lo, hi] 且跨维度稳定。
  复制向量 (X, …, X) 的归一化和标准差 ≈ √p，用 min_sum_std_ratio 检出“不集中”。

target = "covariance"：
  样本协方差 XX^T/n（p = n），K 个 Frobenius 单位线性观测，
  检查 √n · 直径 跨 n 稳定在 max_ratio 倍以内。
"""

import math

from experiments.common import artifact, check, experiment_node, in_range, ratio_check, vector_model
from services.errors import DomainError
from services.estimation import observation_spreads
from services.generators import MatrixModel, SampleEnsemble, sample_matrix
from services.observables import (
    Observation,
    matrix_chain,
    observe,
    observe_model,
    random_unit_observations,
    transpose,
)


def _vector_diameters(params: dict, seed: int, threads: int) -> dict:
    checks, rows = [], []
    diameters = []
    for dim in params["dims"]:
        model = vector_model(params["model"], dim, params["q"])
        p = model.output_dim
        observations = random_unit_observations(p, params["K"], seed)
        if params["include_norm"]:
            observations.append(Observation.norm("euclidean"))
        if params["include_normalized_sum"]:
            observations.append(Observation.normalized_sum(p))
        spreads = observation_spreads(observe_model(model, params["n"], seed, observations, threads=threads))
        diameter = float(spreads.max())
        diameters.append(diameter)
        row = {"p": p, "diameter": diameter, "spreads": {o.label: float(s) for o, s in zip(observations, spreads)}}
        rows.append(row)

        if params["lo"] is not None or params["hi"] is not None:
            checks.append(in_range(f"diameter[p={p}]", diameter, params["lo"], params["hi"]))
        if params["include_normalized_sum"] and params["min_sum_std_ratio"] is not None:
            ratio = row["spreads"]["normalized_sum"] / math.sqrt(p)
            checks.append(
                in_range(
                    f"normalized_sum_std/sqrt(p)[p={p}]",
                    ratio,
                    params["min_sum_std_ratio"],
                    None,
                    "non-concentration detected when the sum spreads like √p",
                )
            )

    if params["max_ratio"] is not None and len(diameters) > 1:
        checks.append(ratio_check("diameter_stability", diameters, params["max_ratio"]))
    table = artifact("diameters", ["p", "diameter"], [[r["p"], r["diameter"]] for r in rows])
    return {"checks": checks, "results": {"rows": rows}, "artifacts": [table]}


def _covariance_diameters(params: dict, seed: int, threads: int) -> dict:
    rows = []
    for n in params["dims"]:
        X = sample_matrix(MatrixModel.gaussian(n, n), params["n"], seed, threads=threads)
        gram = matrix_chain([X, transpose(X)])
        S = SampleEnsemble.derived(gram.data / n, gram.shape, "sample_covariance", [X])
        spreads = observation_spreads(observe(S, random_unit_observations(n * n, params["K"], seed)))
        diameter = float(spreads.max())
        rows.append({"n": n, "diameter": diameter, "scaled": diameter * math.sqrt(n)})

    scaled = [r["scaled"] for r in rows]
    checks = [
        ratio_check("sqrt(n)*diameter_stability", scaled, params["max_ratio"] or 2.0),
    ]
    checks += [
        check(f"diameter_decreases[n={b['n']}]", b["diameter"] < a["diameter"], b["diameter"], f"< {a['diameter']:.4g}")
        for a, b in zip(rows[:-1], rows[1:])
    ]
    table = artifact("covariance_diameters", ["n", "diameter", "sqrt_n_diameter"], [[r["n"], r["diameter"], r["scaled"]] for r in rows])
    return {"checks": checks, "results": {"rows": rows}, "artifacts": [table]}


@experiment_node("diameter")
def diameter_node(params: dict, seed: int, threads: int) -> dict:
    if params["target"] == "vector":
        return _vector_diameters(params, seed, threads)
    if params["target"] == "covariance":
        return _covariance_diameters(params, seed, threads)
    raise DomainError(f"target must be 'vector' or 'covariance', got {params['target']!r}")
