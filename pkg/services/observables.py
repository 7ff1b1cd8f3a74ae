"""
Multilinear statistics of ensembles: Hadamard and matrix-product chains,
bilinear forms, XDY^T functionals, the diagonal semi-norm ‖M‖_d, and the
Lipschitz observations whose concentration is measured.

All operations are per-trial and exact; the only randomness is in the inputs.
Multi-input operations require aligned trials (same N, same master seed).
"""

import math
import warnings
from dataclasses import dataclass, field
from typing import Callable, Optional, Sequence

import numpy as np

import config
from services.errors import (
    DomainError,
    NormModeWarning,
    RangeError,
    ShapeError,
    TrialAlignmentError,
)
from services.generators import (
    STREAM_DIRECTIONS,
    STREAM_X,
    STREAM_Y,
    SampleEnsemble,
    VectorModel,
    _draw_block,
    _run_parallel,
)
from utils.chunker import split_into_blocks
from utils.seeding import derive_generator, validate_seed

NORM_TOLERANCE = 1e-12


# ── Observations ──────────────────────────────────────────────────────────────


def batch_norm(trials: np.ndarray, kind: str) -> np.ndarray:
    """Norm of every trial; trials is (N, d) for vectors or (N, p, n) for matrices."""
    if trials.ndim == 2:
        if kind == "euclidean":
            return np.linalg.norm(trials, axis=1)
        if kind == "linf":
            return np.max(np.abs(trials), axis=1)
        raise DomainError(f"norm {kind!r} is not defined on vectors")
    if trials.ndim == 3:
        if kind == "spectral":
            return np.linalg.norm(trials, ord=2, axis=(1, 2))
        if kind == "frobenius":
            return np.linalg.norm(trials, axis=(1, 2))
        if kind == "nuclear":
            return np.linalg.norm(trials, ord="nuc", axis=(1, 2))
        if kind == "diag":
            return diag_seminorm(trials)
        raise DomainError(f"norm {kind!r} is not defined on matrices")
    raise ShapeError(f"expected (N, d) or (N, p, n) trials, got {trials.shape}")


def _norm_lipschitz(kind: str, shape: tuple) -> float:
    # with respect to the Euclidean / Frobenius metric on the trial space
    if kind == "nuclear":
        return math.sqrt(min(shape))
    return 1.0


@dataclass(frozen=True, eq=False)
class Observation:
    kind: str
    vector: Optional[np.ndarray] = None
    norm_kind: Optional[str] = None
    radius: float = 0.0
    fn: Optional[Callable] = None
    label: str = ""
    lipschitz_constant: float = field(default=1.0)

    @classmethod
    def linear(cls, u, label: str = "linear") -> "Observation":
        u = np.asarray(u, dtype=float).ravel()
        return cls("linear", vector=u, label=label, lipschitz_constant=float(np.linalg.norm(u)))

    @classmethod
    def linear_matrix(cls, A, label: str = "linear_matrix") -> "Observation":
        """M ↦ tr(A^T M) under the Frobenius pairing."""
        A = np.atleast_2d(np.asarray(A, dtype=float))
        return cls(
            "linear_matrix", vector=A, label=label, lipschitz_constant=float(np.linalg.norm(A))
        )

    @classmethod
    def norm(cls, kind: str, shape: tuple = ()) -> "Observation":
        if kind not in config.SUPPORTED_NORM_KINDS:
            raise DomainError(
                f"unknown norm kind {kind!r}; expected one of {sorted(config.SUPPORTED_NORM_KINDS)}"
            )
        return cls(
            "norm", norm_kind=kind, label=f"norm_{kind}", lipschitz_constant=_norm_lipschitz(kind, shape)
        )

    @classmethod
    def distance_to_ball(cls, radius: float) -> "Observation":
        if radius < 0:
            raise RangeError("radius must be >= 0")
        return cls("distance_to_ball", radius=float(radius), label=f"dist_ball_{radius:g}")

    @classmethod
    def normalized_sum(cls, p: int) -> "Observation":
        """z ↦ Σ z_i / √p: the unit linear form along the all-ones direction."""
        return cls.linear(np.full(p, 1.0 / math.sqrt(p)), label="normalized_sum")

    @classmethod
    def custom(cls, fn: Callable, lipschitz_constant: float, label: str = "custom") -> "Observation":
        if not lipschitz_constant >= 0:
            raise RangeError("a custom observation needs a Lipschitz bound >= 0")
        return cls("custom", fn=fn, label=label, lipschitz_constant=float(lipschitz_constant))

    def evaluate(self, rows: np.ndarray, shape: tuple) -> np.ndarray:
        """Apply to a (B, width) block of flattened trials with per-trial `shape`."""
        if self.kind in ("linear", "linear_matrix"):
            weights = self.vector.ravel()
            if weights.size != rows.shape[1]:
                raise ShapeError(f"observation of width {weights.size} on trials of width {rows.shape[1]}")
            return rows @ weights
        if self.kind == "norm":
            return batch_norm(rows.reshape((rows.shape[0],) + tuple(shape)), self.norm_kind)
        if self.kind == "distance_to_ball":
            return np.maximum(np.linalg.norm(rows, axis=1) - self.radius, 0.0)
        if self.kind == "custom":
            return np.asarray(self.fn(rows.reshape((rows.shape[0],) + tuple(shape))), dtype=float)
        raise DomainError(f"unknown observation kind {self.kind!r}")

    def to_dict(self) -> dict:
        data = {"kind": self.kind, "label": self.label, "lipschitz_constant": self.lipschitz_constant}
        if self.norm_kind is not None:
            data["norm_kind"] = self.norm_kind
        if self.kind == "distance_to_ball":
            data["radius"] = self.radius
        if self.vector is not None:
            data["shape"] = list(self.vector.shape)
        return data


def random_unit_observations(
    dim: int, K: int, master_seed: int, stream: int = STREAM_DIRECTIONS
) -> list[Observation]:
    """K linear forms along independent uniform directions of S^{dim-1}."""
    if K < 1:
        raise RangeError("K must be >= 1")
    g = derive_generator(master_seed, stream, 0, dim).standard_normal((K, dim))
    g /= np.linalg.norm(g, axis=1, keepdims=True)
    return [Observation.linear(u, label=f"direction_{k}") for k, u in enumerate(g)]


def observe(ensemble: SampleEnsemble, observations: Sequence[Observation]) -> SampleEnsemble:
    """(N, K) ensemble of the K observations of every trial."""
    columns = [obs.evaluate(ensemble.data, ensemble.shape) for obs in observations]
    return SampleEnsemble.derived(
        np.column_stack(columns), (len(columns),), "observe", [ensemble]
    )


def observe_model(
    model: VectorModel,
    N: int,
    master_seed: int,
    observations: Sequence[Observation],
    stream: int = 0,
    threads: Optional[int] = None,
) -> SampleEnsemble:
    """
    Same values as observe(sample(model, N, seed, stream), observations),
    computed block by block so that N·p is never materialized.
    """
    seed = validate_seed(master_seed)
    shape = (model.output_dim,)

    def run(block) -> np.ndarray:
        rows = _draw_block(model, seed, (stream, block.index, 0), block.size)
        return np.column_stack([obs.evaluate(rows, shape) for obs in observations])

    parts = _run_parallel(run, split_into_blocks(N), threads)
    provenance = {
        "type": "derived",
        "op": "observe_model",
        "inputs": [model.to_dict()],
        "observations": [obs.to_dict() for obs in observations],
    }
    return SampleEnsemble(
        np.concatenate(parts, axis=0), (len(observations),), None, seed, stream, provenance=provenance
    )


def bilinear_form_model(
    model: VectorModel,
    matrices: Sequence,
    N: int,
    master_seed: int,
    threads: Optional[int] = None,
) -> SampleEnsemble:
    """
    (N, K) ensemble of x^T A_k y for independent x, y ~ model.

    Same values as bilinear_form(sample(model, N, seed, STREAM_X), A_k,
    sample(model, N, seed, STREAM_Y)) for every k, drawn block by block.
    """
    seed = validate_seed(master_seed)
    stack = [np.atleast_2d(np.asarray(A, dtype=float)) for A in matrices]
    dim = model.output_dim
    for A in stack:
        if A.shape != (dim, dim):
            raise ShapeError(f"A has shape {A.shape}, expected ({dim}, {dim})")

    def run(block) -> np.ndarray:
        x = _draw_block(model, seed, (STREAM_X, block.index, 0), block.size)
        y = _draw_block(model, seed, (STREAM_Y, block.index, 0), block.size)
        return np.column_stack([np.einsum("ti,ti->t", x @ A, y) for A in stack])

    parts = _run_parallel(run, split_into_blocks(N), threads)
    provenance = {"type": "derived", "op": "bilinear_form_model", "inputs": [model.to_dict()]}
    return SampleEnsemble(
        np.concatenate(parts, axis=0), (len(stack),), None, seed, STREAM_X, provenance=provenance
    )


# ── Alignment helpers ─────────────────────────────────────────────────────────


def _shares_draws(a: SampleEnsemble, b: SampleEnsemble) -> bool:
    if a is b or a.draw_key is None or b.draw_key is None:
        return False
    (stream_a, column_a), (stream_b, column_b) = a.draw_key, b.draw_key
    return stream_a == stream_b and (column_a is None or column_b is None or column_a == column_b)


def check_aligned(*ensembles: SampleEnsemble) -> None:
    """Same N and master seed; distinct raw draws must not reuse a (stream, column)."""
    first = ensembles[0]
    for other in ensembles[1:]:
        if other.N != first.N:
            raise TrialAlignmentError(f"trial counts differ: {first.N} vs {other.N}")
        if other.master_seed != first.master_seed:
            raise TrialAlignmentError(
                f"master seeds differ: {first.master_seed} vs {other.master_seed}"
            )
    for i, a in enumerate(ensembles):
        for b in ensembles[i + 1 :]:
            if _shares_draws(a, b):
                raise TrialAlignmentError(
                    f"ensembles reuse the draws of stream {a.draw_key[0]} "
                    f"(columns {a.draw_key[1]} and {b.draw_key[1]})"
                )


def _matrix_trials(ensemble: SampleEnsemble, name: str) -> np.ndarray:
    if not ensemble.is_matrix:
        raise ShapeError(f"{name} must be a matrix ensemble, got trial shape {ensemble.shape}")
    return ensemble.trials()


def _diagonal_trials(D: SampleEnsemble, n: int) -> np.ndarray:
    if D.shape != (n,):
        raise ShapeError(f"D must hold n={n} diagonal entries per trial, got {D.shape}")
    return D.data


# ── Operations ────────────────────────────────────────────────────────────────


def hadamard_chain(ensembles: Sequence[SampleEnsemble]) -> SampleEnsemble:
    """Per-trial x_1 ⊙ … ⊙ x_m."""
    ensembles = list(ensembles)
    if not ensembles:
        raise RangeError("hadamard_chain needs at least one ensemble")
    check_aligned(*ensembles)
    for e in ensembles[1:]:
        if e.shape != ensembles[0].shape:
            raise ShapeError(f"shapes differ: {ensembles[0].shape} vs {e.shape}")
    out = ensembles[0].data.copy()
    for e in ensembles[1:]:
        out *= e.data
    return SampleEnsemble.derived(out, ensembles[0].shape, "hadamard_chain", ensembles)


def matrix_chain(ensembles: Sequence[SampleEnsemble]) -> SampleEnsemble:
    """Per-trial M_1 ⋯ M_m."""
    ensembles = list(ensembles)
    if not ensembles:
        raise RangeError("matrix_chain needs at least one ensemble")
    check_aligned(*ensembles)
    out = _matrix_trials(ensembles[0], "M_1")
    for k, e in enumerate(ensembles[1:], start=2):
        right = _matrix_trials(e, f"M_{k}")
        if out.shape[2] != right.shape[1]:
            raise ShapeError(f"cannot multiply {out.shape[1:]} by {right.shape[1:]}")
        out = np.matmul(out, right)
    return SampleEnsemble.derived(
        out.reshape(out.shape[0], -1), out.shape[1:], "matrix_chain", ensembles
    )


def transpose(ensemble: SampleEnsemble) -> SampleEnsemble:
    trials = _matrix_trials(ensemble, "ensemble")
    out = np.ascontiguousarray(np.swapaxes(trials, 1, 2))
    return SampleEnsemble.derived(out.reshape(out.shape[0], -1), out.shape[1:], "transpose", [ensemble])


def bilinear_form(
    X: SampleEnsemble, A, Y: SampleEnsemble, B=None
) -> SampleEnsemble:
    """
    Vectors: per-trial x^T A y.
    Matrices: per-trial X^T A Y (n_x × n_y), or its Frobenius pairing tr(B^T X^T A Y)
    when B is given.
    """
    check_aligned(X, Y)
    A = np.atleast_2d(np.asarray(A, dtype=float))
    if not X.is_matrix and not Y.is_matrix:
        if A.shape != (X.width, Y.width):
            raise ShapeError(f"A has shape {A.shape}, expected ({X.width}, {Y.width})")
        values = np.einsum("ti,ti->t", X.data @ A, Y.data)
        return SampleEnsemble.derived(values, (), "bilinear_form", [X, Y])
    x, y = _matrix_trials(X, "X"), _matrix_trials(Y, "Y")
    if A.shape != (x.shape[1], y.shape[1]):
        raise ShapeError(f"A has shape {A.shape}, expected ({x.shape[1]}, {y.shape[1]})")
    gram = np.matmul(np.swapaxes(x, 1, 2), np.matmul(A, y))
    if B is None:
        return SampleEnsemble.derived(gram.reshape(gram.shape[0], -1), gram.shape[1:], "bilinear_form", [X, Y])
    B = np.atleast_2d(np.asarray(B, dtype=float))
    if B.shape != gram.shape[1:]:
        raise ShapeError(f"B has shape {B.shape}, expected {gram.shape[1:]}")
    values = np.einsum("tij,ij->t", gram, B)
    return SampleEnsemble.derived(values, (), "bilinear_form", [X, Y])


def xdy_action(X: SampleEnsemble, D: SampleEnsemble, Y: SampleEnsemble, u) -> SampleEnsemble:
    """Per-trial X D Y^T u for a deterministic u with ‖u‖ ≤ 1."""
    check_aligned(X, D, Y)
    x, y = _matrix_trials(X, "X"), _matrix_trials(Y, "Y")
    if x.shape != y.shape:
        raise ShapeError(f"X and Y differ in shape: {x.shape[1:]} vs {y.shape[1:]}")
    d = _diagonal_trials(D, x.shape[2])
    u = np.asarray(u, dtype=float).ravel()
    if u.size != x.shape[1]:
        raise ShapeError(f"u has dimension {u.size}, expected p={x.shape[1]}")
    if np.linalg.norm(u) > 1 + NORM_TOLERANCE:
        raise RangeError(f"u must satisfy ‖u‖ <= 1, got {np.linalg.norm(u):.6g}")
    weights = d * np.einsum("tpi,p->ti", y, u)
    out = np.einsum("tpi,ti->tp", x, weights)
    return SampleEnsemble.derived(out, (x.shape[1],), "xdy_action", [X, D, Y])


def trace_pairing(
    A, X: SampleEnsemble, D: SampleEnsemble, Y: SampleEnsemble, mode: str = "frobenius"
) -> SampleEnsemble:
    """
    Per-trial tr(A X D Y^T) = Σ_i D_i y_i^T A x_i.

    mode "frobenius" expects ‖A‖_F ≤ 1, mode "nuclear" expects ‖A‖_* ≤ 1
    (the dual of the spectral norm); a violation is reported as NormModeWarning.
    """
    check_aligned(X, D, Y)
    A = np.atleast_2d(np.asarray(A, dtype=float))
    x, y = _matrix_trials(X, "X"), _matrix_trials(Y, "Y")
    if x.shape != y.shape:
        raise ShapeError(f"X and Y differ in shape: {x.shape[1:]} vs {y.shape[1:]}")
    if A.shape != (x.shape[1], x.shape[1]):
        raise ShapeError(f"A has shape {A.shape}, expected ({x.shape[1]}, {x.shape[1]})")
    d = _diagonal_trials(D, x.shape[2])
    if mode == "frobenius":
        size = float(np.linalg.norm(A))
    elif mode == "nuclear":
        size = float(np.linalg.norm(A, ord="nuc"))
    else:
        raise DomainError(f"unknown pairing mode {mode!r}; expected 'frobenius' or 'nuclear'")
    if size > 1 + NORM_TOLERANCE:
        warnings.warn(
            f"A has {mode} norm {size:.6g} > 1; the declared profile assumes the unit ball",
            NormModeWarning,
            stacklevel=2,
        )
    per_column = np.einsum("tpi,tpi->ti", y, np.einsum("pq,tqi->tpi", A, x))
    values = np.sum(d * per_column, axis=1)
    return SampleEnsemble.derived(values, (), "trace_pairing", [X, D, Y])


def diag_seminorm(M) -> float | np.ndarray:
    """‖M‖_d = (Σ M_ii²)^{1/2}; a (N, n, n) stack gives one value per trial."""
    M = np.asarray(M, dtype=float)
    if M.ndim < 2 or M.shape[-1] != M.shape[-2]:
        raise ShapeError(f"‖·‖_d needs square matrices, got shape {M.shape}")
    values = np.linalg.norm(np.diagonal(M, axis1=-2, axis2=-1), axis=-1)
    return float(values) if values.ndim == 0 else values


def ydax_diag_stat(X: SampleEnsemble, Y: SampleEnsemble, A) -> tuple:
    """
    Per-trial ‖Y^T A X‖_d with A rescaled to ‖A‖_F ≤ 1.

    Returns (scalar ensemble, empirical mean).
    """
    check_aligned(X, Y)
    A = np.atleast_2d(np.asarray(A, dtype=float))
    frob = float(np.linalg.norm(A))
    if frob > 1:
        A = A / frob
    x, y = _matrix_trials(X, "X"), _matrix_trials(Y, "Y")
    if x.shape != y.shape:
        raise ShapeError(f"X and Y differ in shape: {x.shape[1:]} vs {y.shape[1:]}")
    if A.shape != (x.shape[1], x.shape[1]):
        raise ShapeError(f"A has shape {A.shape}, expected ({x.shape[1]}, {x.shape[1]})")
    diagonal = np.einsum("tpi,tpi->ti", y, np.einsum("pq,tqi->tpi", A, x))
    values = np.linalg.norm(diagonal, axis=1)
    ensemble = SampleEnsemble.derived(values, (), "ydax_diag_stat", [X, Y])
    return ensemble, float(values.mean())
