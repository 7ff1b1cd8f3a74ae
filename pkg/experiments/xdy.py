"""
experiments/xdy.py
───────────────────
X D Y^T 型统计量的尺度实验

对 params["ns"] 中的每个 n（p = n · p_ratio）：
  - XDY^T u 的可观测直径 / √((p+n) log n)        跨 n 稳定
  - E‖Y^T A X‖_d / √n（A = I/√p）                 跨 n 稳定
  - std tr(A X D Y^T) / √n                         跨 n 稳定
  - tr(A X D Y^T) 的逐列求和与直接求迹一致

另做 E[XDY^T] 与 X E[D] Y^T 的比较（estimate_XDY_mean）：
  - D 与 X 耦合（clip）、Y = X：差值 ∝ n，ratio_to_n 跨 n 稳定
  - D 独立：差值在 3 倍标准误以内
"""

import math

import numpy as np

from experiments.common import (
    artifact,
    check,
    diagonal_model,
    experiment_node,
    in_range,
    ratio_check,
    relative_spread_check,
)
from services.estimation import observation_spreads
from services.generators import DiagonalModel, MatrixModel, sample_couple, sample_diagonal
from services.observables import observe, random_unit_observations, trace_pairing, xdy_action, ydax_diag_stat
from services.profile import diag_stat_profile, trace_pairing_profile, xdy_action_profile
from services.rmt import estimate_XDY_mean

TRACE_IDENTITY_TOL = 1e-10


def _trace_identity_gap(X, D, Y, A, pairing) -> float:
    x, y = X.trials()[0], Y.trials()[0]
    direct = float(np.trace(A @ x @ np.diag(D.data[0]) @ y.T))
    return abs(pairing.data[0, 0] - direct) / max(1.0, abs(direct))


def _scaling_rows(params: dict, seed: int, threads: int) -> tuple:
    D_model = diagonal_model(params["d_model"])
    rows, gaps = [], []
    for n in params["ns"]:
        p = max(2, round(n * params["p_ratio"]))
        model = MatrixModel.gaussian(p, n, params["coupling"])
        X, Y = sample_couple(model, params["trials"], seed, threads)
        D = sample_diagonal(D_model, params["trials"], n, seed, X=X)

        u = random_unit_observations(p, 1, seed)[0].vector
        action = xdy_action(X, D, Y, u)
        diameter = float(observation_spreads(observe(action, random_unit_observations(p, params["K"], seed))).max())

        A = np.eye(p) / math.sqrt(p)
        diag_values, diag_mean = ydax_diag_stat(X, Y, A)
        pairing = trace_pairing(A, X, D, Y, mode="frobenius")
        pairing_std = float(pairing.values().std(ddof=1))
        gaps.append(_trace_identity_gap(X, D, Y, A, pairing))

        rows.append(
            {
                "n": n,
                "p": p,
                "action_diameter": diameter,
                "action_constant": diameter / math.sqrt((p + n) * math.log(n)),
                "diag_mean": diag_mean,
                "diag_constant": diag_mean / math.sqrt(n),
                "diag_std": float(diag_values.values().std(ddof=1)),
                "pairing_std": pairing_std,
                "pairing_constant": pairing_std / math.sqrt(n),
                "profiles": {
                    "xdy_action": xdy_action_profile(p, n).to_dict(),
                    "diag_stat": diag_stat_profile(n, p).to_dict(),
                    "trace_pairing": trace_pairing_profile(n).to_dict(),
                },
            }
        )
    return rows, gaps


@experiment_node("xdy")
def xdy_node(params: dict, seed: int, threads: int) -> dict:
    tolerance = params["tolerance"]
    rows, gaps = _scaling_rows(params, seed, threads)
    checks = [
        relative_spread_check("xdy_action_constant", [r["action_constant"] for r in rows], tolerance),
        relative_spread_check("ydax_diag_constant", [r["diag_constant"] for r in rows], tolerance),
        relative_spread_check("trace_pairing_constant", [r["pairing_constant"] for r in rows], tolerance),
        in_range("trace_identity", max(gaps), None, TRACE_IDENTITY_TOL, "Σ_i D_i y_i^T A x_i vs tr(A X D Y^T)"),
    ]

    # ── E[XDY^T] vs X E[D] Y^T ──────────────────────────────────────────────
    mean_p, mean_trials = params["mean_p"], params["mean_trials"]
    coupled = estimate_XDY_mean(
        [MatrixModel.gaussian(mean_p, n, "identical") for n in params["ns"]],
        DiagonalModel.clip(1.0),
        mean_trials,
        seed,
        threads,
    )
    checks.append(
        check(
            "coupled_difference_linear_in_n",
            coupled.ratio_stability <= params["mean_factor"],
            coupled.ratio_stability,
            f"max/min ratio_to_n ≤ {params['mean_factor']:g}",
            str([r["ratio_to_n"] for r in coupled.rows]),
        )
    )
    independent = estimate_XDY_mean(
        [MatrixModel.gaussian(mean_p, n) for n in params["ns"]],
        DiagonalModel.uniform(-1.0, 1.0),
        mean_trials,
        seed,
        threads,
    )
    for row in independent.rows:
        checks.append(
            in_range(
                f"independent_difference[n={row['n']}]",
                row["diff_frobenius"],
                None,
                3 * row["stderr_frobenius"],
                "‖Ê[X(D − E[D])Y^T]‖_F within 3 standard errors",
            )
        )
    if len(rows) > 1:
        checks.append(ratio_check("xdy_action_diameter_vs_sqrt_n",
                                  [r["action_diameter"] / math.sqrt(r["n"]) for r in rows], 2.0))

    table = artifact(
        "xdy_scaling",
        ["n", "p", "action_diameter", "action_constant", "diag_mean", "diag_constant", "pairing_std", "pairing_constant"],
        [
            [r["n"], r["p"], r["action_diameter"], r["action_constant"], r["diag_mean"], r["diag_constant"],
             r["pairing_std"], r["pairing_constant"]]
            for r in rows
        ],
    )
    results = {
        "rows": rows,
        "trace_identity_gap": max(gaps),
        "coupled_mean": coupled.to_dict(),
        "independent_mean": independent.to_dict(),
    }
    return {"checks": checks, "results": results, "artifacts": [table]}
