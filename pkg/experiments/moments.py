"""
experiments/moments.py
───────────────────────
矩刻画实验：经验中心矩 E|f − E f|^r 不超过剖面给出的 moment_bound

  gaussian  随机单位方向 u^T Z，Z ~ N(0, I_dim)，剖面 E_2(1)
  laplace   第一个坐标 e_1^T Z，Z 为 Laplace 向量，剖面 E_1(1)
  product2  标量乘积 x·y，剖面 product_profile(m = 2, q = 2, σ = 1, μ = (1, 1))

所有剖面都以 (C, c) 覆盖常数后比较。
"""

import numpy as np

from experiments.common import artifact, check, experiment_node, vector_model
from services.errors import DomainError
from services.estimation import check_profile
from services.generators import VectorModel, sample
from services.observables import Observation, hadamard_chain, observe_model, random_unit_observations
from services.profile import ProductSpec, product_profile


def _observations(kind: str, params: dict, seed: int, threads: int) -> tuple:
    """(values, profile) for one observation family."""
    dim, N = params["dim"], params["n"]
    if kind == "gaussian":
        model = vector_model("gaussian", dim)
        u = random_unit_observations(dim, 1, seed)[0]
        values = observe_model(model, N, seed, [u], threads=threads).values()
        return values, model.declared_profile
    if kind == "laplace":
        model = vector_model("laplace", dim)
        basis = np.zeros(dim)
        basis[0] = 1.0
        values = observe_model(model, N, seed, [Observation.linear(basis, label="basis_0")], threads=threads).values()
        return values, model.declared_profile
    if kind == "product2":
        factor = VectorModel("gaussian", 1)
        values = hadamard_chain([sample(factor, N, seed, column=k, threads=threads) for k in range(2)]).values()
        return values, product_profile(ProductSpec(2, 2.0, 1.0, (1.0, 1.0)))
    raise DomainError(f"unknown moment family {kind!r}; expected gaussian, laplace or product2")


@experiment_node("moments")
def moments_node(params: dict, seed: int, threads: int) -> dict:
    checks, results, table = [], {}, []
    for kind in params["kinds"]:
        values, declared = _observations(kind, params, seed, threads)
        profile = declared.with_constants(params["C"], params["c"])
        report = check_profile(values, profile, moments=params["orders"])
        checks.append(
            check(
                f"moments[{kind}]",
                report.moments_ok,
                [m["empirical"] for m in report.moments],
                "≤ moment_bound",
                str([m["bound"] for m in report.moments]),
            )
        )
        results[kind] = {"profile": profile.to_dict(), "moments": report.moments, "coverage": report.coverage}
        table += [[kind, m["r"], m["empirical"], m["bound"], m["ok"]] for m in report.moments]
    artifacts = [artifact("moments", ["family", "r", "empirical", "bound", "ok"], table)]
    return {"checks": checks, "results": results, "artifacts": artifacts}
