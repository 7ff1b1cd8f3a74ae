"""
experiments/resolvent.py
─────────────────────────
预解式 Q = (I_p − X D Y^T / n)^{-1} 的实验，按 params["checks"] 组合：

  equivalent  Monte Carlo Ê[Q] 与确定性等价 Q̃^δ 的相对 Frobenius 误差 ≤ rel_tol；
              各向同性时 Q̃^δ 与二次方程闭式解逐元素一致（oracle_tol）
  scaling     固定 p/n，误差 / log n 跨 n 的 max/min ≤ scaling_factor
  schur       schur_draws 次可容许抽样上，两个留一恒等式相对误差 ≤ 1e-8，且 ‖Q‖ ≤ 1/ε
  qu          Qu 的可观测直径 / √(log n / n) 跨 n 稳定
"""

import numpy as np

from experiments.common import artifact, check, experiment_node, in_range, ratio_check
from services.errors import ConvergenceError, DomainError
from services.generators import DiagonalModel, MatrixModel, sample_couple, sample_diagonal
from services.profile import qu_profile, resolvent_profile
from services.rmt import (
    admissible_specs,
    isotropic_q_tilde,
    leave_one_out,
    monte_carlo_EQ,
    monte_carlo_Qu_diameter,
    resolvent_check,
    solve_delta_for,
)

CHECK_KINDS = ("equivalent", "scaling", "schur", "qu")


# ── 模型选择 ──────────────────────────────────────────────────────────────────


D_LAWS = ("two_point", "uniform")


def _setting(params: dict, p: int, n: int) -> tuple:
    """(矩阵模型, D 的分布, Σ)；各向同性 = Y = X 且 D = d·I；否则 D 按 d_law 取 ±d 上的分布"""
    d = params["d"]
    if params["isotropic"]:
        model = MatrixModel.gaussian(p, n, "identical")
        return model, DiagonalModel.deterministic(d), np.eye(p)
    if params["d_law"] not in D_LAWS:
        raise DomainError(f"d_law must be one of {D_LAWS}, got {params['d_law']!r}")
    model = MatrixModel.gaussian(p, n, "mixed")
    D_model = DiagonalModel.two_point(-d, d) if params["d_law"] == "two_point" else DiagonalModel.uniform(-d, d)
    return model, D_model, model.sigma()[0]


def _deterministic_equivalent(params: dict, p: int, n: int, seed: int) -> tuple:
    model, D_model, Sigma = _setting(params, p, n)
    # uniform D：期望用辅助抽样（EXPECTATION_SAMPLES 次）估计
    state = solve_delta_for(Sigma, n, D_model, master_seed=seed)
    if not state.converged:
        raise ConvergenceError(
            f"δ fixed point stalled at residual {state.residual:.3g} after {state.iterations} iterations",
            residuals=state.trace,
        )
    return model, D_model, state


def _relative_error(params: dict, p: int, n: int, trials: int, seed: int, threads: int) -> dict:
    model, D_model, state = _deterministic_equivalent(params, p, n, seed)
    mc = monte_carlo_EQ(model, D_model, trials, seed, params["kappa"], params["kappa_D"], params["epsilon"], threads)
    reference = float(np.linalg.norm(state.Q_tilde))
    error = float(np.linalg.norm(mc.mean - state.Q_tilde))
    return {
        "p": p,
        "n": n,
        "error": error,
        "relative_error": error / reference,
        "log_n_ratio": error / np.log(n),
        "fixed_point": state.to_dict(),
        "monte_carlo": mc.to_dict(),
        "max_norm": mc.max_norm,
        "norm_limit": mc.norm_limit,
        "Q_tilde": state.Q_tilde,
    }


# ── 各项检查 ──────────────────────────────────────────────────────────────────


def _equivalent(params: dict, seed: int, threads: int) -> tuple:
    p, n = params["p"], params["n"]
    row = _relative_error(params, p, n, params["trials"], seed, threads)
    checks = [
        in_range(f"relative_error[p={p},n={n}]", row["relative_error"], None, params["rel_tol"],
                 "‖Ê[Q] − Q̃‖_F / ‖Q̃‖_F"),
        in_range("max_resolvent_norm", row["max_norm"], None, row["norm_limit"], "‖Q‖ ≤ 1/ε on every draw"),
    ]
    if params["isotropic"]:
        closed_form = isotropic_q_tilde(p / n, params["d"])
        gap = float(np.max(np.abs(row["Q_tilde"] - closed_form * np.eye(p))))
        checks.append(in_range("isotropic_oracle", gap, None, params["oracle_tol"],
                               f"Q̃ = {closed_form:.10g}·I from the quadratic formula"))
        row["closed_form"] = closed_form
    row.pop("Q_tilde")
    row["profile"] = resolvent_profile(n).to_dict()
    return checks, row


def _scaling(params: dict, seed: int, threads: int) -> tuple:
    ratio = params["p"] / params["n"]
    rows = []
    for n in params["scaling_ns"]:
        row = _relative_error(params, max(1, round(n * ratio)), n, params["scaling_trials"], seed, threads)
        row.pop("Q_tilde")
        rows.append(row)
    checks = [
        ratio_check("error_over_log_n", [r["log_n_ratio"] for r in rows], params["scaling_factor"]),
    ]
    return checks, rows


def _schur(params: dict, seed: int, threads: int) -> tuple:
    p, n, draws = params["schur_p"], params["schur_n"], params["schur_draws"]
    model = MatrixModel.gaussian(p, n, "independent")
    D_model = DiagonalModel.uniform(-params["schur_kappa_D"], params["schur_kappa_D"])
    X, Y = sample_couple(model, draws, seed, threads)
    D = sample_diagonal(D_model, draws, n, seed, X=X)
    specs, rejected = admissible_specs(
        X, D, Y, params["schur_kappa"], params["schur_kappa_D"], params["schur_epsilon"]
    )
    passed, worst_matrix, worst_vector, worst_norm = 0, 0.0, 0.0, 0.0
    for t, spec in enumerate(specs):
        loo = leave_one_out(spec, t % n)
        resolvent_ok = resolvent_check(spec)
        worst_matrix = max(worst_matrix, loo.matrix_error)
        worst_vector = max(worst_vector, loo.vector_error)
        worst_norm = max(worst_norm, resolvent_ok.norm * params["schur_epsilon"])
        passed += loo.ok and resolvent_ok.ok
    fraction = passed / len(specs) if specs else 0.0
    checks = [
        check("schur_identities", fraction == 1.0, fraction, "fraction of draws = 1",
              f"worst matrix {worst_matrix:.3g}, worst vector {worst_vector:.3g}"),
        in_range("resolvent_norm_times_epsilon", worst_norm, None, 1.0 + 1e-9, "max ε‖Q‖ over the draws"),
    ]
    summary = {
        "p": p,
        "n": n,
        "draws": draws,
        "accepted": len(specs),
        "rejected": rejected,
        "fraction_passed": fraction,
        "worst_matrix_error": worst_matrix,
        "worst_vector_error": worst_vector,
    }
    return checks, summary


def _qu(params: dict, seed: int, threads: int) -> tuple:
    ratio = params["p"] / params["n"]
    rows = []
    for n in params["scaling_ns"]:
        model, D_model, _ = _setting(params, max(1, round(n * ratio)), n)
        row = monte_carlo_Qu_diameter(
            model, D_model, params["qu_trials"], seed,
            params["kappa"], params["kappa_D"], params["epsilon"], params["qu_K"], threads,
        )
        row["profile"] = qu_profile(n).to_dict()
        rows.append(row)
    checks = [ratio_check("qu_diameter_rate", [r["ratio"] for r in rows], params["scaling_factor"])]
    return checks, rows


RUNNERS = {"equivalent": _equivalent, "scaling": _scaling, "schur": _schur, "qu": _qu}


@experiment_node("resolvent")
def resolvent_node(params: dict, seed: int, threads: int) -> dict:
    unknown = [c for c in params["checks"] if c not in RUNNERS]
    if unknown or not params["checks"]:
        raise DomainError(f"checks must be a non-empty subset of {CHECK_KINDS}, got {params['checks']}")
    checks, results, artifacts = [], {}, []
    for kind in params["checks"]:
        found, result = RUNNERS[kind](params, seed, threads)
        checks += found
        results[kind] = result
    if "scaling" in results:
        artifacts.append(
            artifact(
                "resolvent_scaling",
                ["n", "p", "error", "relative_error", "error_over_log_n"],
                [[r["n"], r["p"], r["error"], r["relative_error"], r["log_n_ratio"]] for r in results["scaling"]],
            )
        )
    return {"checks": checks, "results": results, "artifacts": artifacts}
