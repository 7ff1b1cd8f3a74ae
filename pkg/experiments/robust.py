"""
experiments/robust.py
──────────────────────
稳健回归不动点 β = (1/n) Σ f(x_i^T β) x_i，f = amplitude · link(· + shift)

对 params["ns"] 中的每个 n（p = n · p_ratio）：
  - 迭代从 β = 0 出发，逐步收缩率 ≤ 1 − ε
  - 留一耦合范数 max_i ‖D_{−i} − D^{(i)}_{−i}‖_F 跨 n 的 max/min ≤ max_ratio
"""

from experiments.common import artifact, check, experiment_node, ratio_check
from services.generators import MatrixModel, sample_matrix
from services.rmt import RobustRegressionSpec, robust_beta


@experiment_node("robust")
def robust_node(params: dict, seed: int, threads: int) -> dict:
    checks, fits, table = [], [], []
    for n in params["ns"]:
        p = max(1, round(n * params["p_ratio"]))
        X = sample_matrix(MatrixModel.gaussian(p, n), 1, seed, threads=threads).trials()[0]
        spec = RobustRegressionSpec(
            X,
            link=params["link"],
            amplitude=params["amplitude"],
            shift=params["shift"],
            epsilon=params["epsilon"],
        )
        fit = robust_beta(spec, threads=threads)
        checks.append(
            check(
                f"contraction[n={n}]",
                fit.contracts,
                fit.max_contraction,
                f"≤ 1 − ε = {fit.contraction_limit:g}",
                f"{fit.iterations} iterations, margin {spec.margin:.3g}",
            )
        )
        coupling = float(fit.coupling_norms.max())
        fits.append({"n": n, "p": p, "margin": spec.margin, "max_coupling_norm": coupling, **fit.to_dict()})
        table.append([n, p, fit.iterations, fit.max_contraction, coupling])

    checks.append(ratio_check("coupling_norm_stability", [f["max_coupling_norm"] for f in fits], params["max_ratio"]))
    artifacts = [artifact("robust_fits", ["n", "p", "iterations", "max_contraction", "max_coupling_norm"], table)]
    return {"checks": checks, "results": {"fits": fits}, "artifacts": artifacts}
