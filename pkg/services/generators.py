"""
Reproducible samplers for the fundamental concentrated-vector families.

Every draw is produced block by block from counter-derived seeds
(master_seed, stream, block, column, component), so ensembles are identical
whatever the thread count and whatever the order in which blocks are produced.

Families: gaussian, sphere √p·S^{p-1}, ball √p·B, cube [0, √p]^p, laplace,
uniform on the unit ℓ_q ball, plus the replicated counter-example (X, …, X)
and independent concatenations. A LipschitzTransform is applied last and scales
the declared profile by its Lipschitz constant.
"""

import math
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from typing import Callable, Iterator, Optional, Sequence

import numpy as np
from scipy.stats import norm

import config
from services.errors import DomainError, RangeError, ShapeError
from services.profile import ConcentrationProfile, Regime
from utils.chunker import TrialBlock, split_into_blocks
from utils.seeding import derive_generator, validate_seed

COORDINATE_MAPS: dict = {
    "tanh": np.tanh,
    "sin": np.sin,
    "relu": lambda x: np.maximum(x, 0.0),
    "abs": np.abs,
    "clip": lambda x: np.clip(x, -1.0, 1.0),
}

COUPLINGS = ("identical", "mixed", "independent")

# stream ids used when one experiment draws several independent objects
STREAM_X = 0
STREAM_Y = 1
STREAM_D = 2
STREAM_MIX = 3
STREAM_MATRICES = 4
STREAM_DIRECTIONS = 7
STREAM_EXPECTATION = 8


# ── Lipschitz transforms ──────────────────────────────────────────────────────


@dataclass(frozen=True, eq=False)
class LipschitzTransform:
    kind: str
    matrix: Optional[np.ndarray] = None
    offset: Optional[np.ndarray] = None
    tag: Optional[str] = None
    factor: float = 1.0
    lipschitz_constant: float = field(init=False, default=0.0)

    def __post_init__(self):
        if self.kind == "affine":
            A = np.atleast_2d(np.asarray(self.matrix, dtype=float))
            b = np.zeros(A.shape[0]) if self.offset is None else np.asarray(self.offset, dtype=float)
            if b.shape != (A.shape[0],):
                raise ShapeError(f"offset has shape {b.shape}, expected ({A.shape[0]},)")
            object.__setattr__(self, "matrix", A)
            object.__setattr__(self, "offset", b)
            object.__setattr__(self, "lipschitz_constant", float(np.linalg.norm(A, 2)))
        elif self.kind == "coordinatewise":
            if self.tag not in COORDINATE_MAPS:
                raise DomainError(
                    f"unknown coordinate map {self.tag!r}; expected one of {sorted(COORDINATE_MAPS)}"
                )
            object.__setattr__(self, "lipschitz_constant", 1.0)
        elif self.kind == "scaling":
            if not (math.isfinite(self.factor) and self.factor != 0):
                raise RangeError(f"scaling factor must be finite and nonzero, got {self.factor}")
            object.__setattr__(self, "lipschitz_constant", abs(float(self.factor)))
        else:
            raise DomainError(f"unknown transform kind {self.kind!r}")

    @classmethod
    def affine(cls, A, b=None) -> "LipschitzTransform":
        return cls("affine", matrix=A, offset=b)

    @classmethod
    def coordinatewise(cls, tag: str) -> "LipschitzTransform":
        return cls("coordinatewise", tag=tag)

    @classmethod
    def scaling(cls, lam: float) -> "LipschitzTransform":
        return cls("scaling", factor=float(lam))

    def output_dim(self, dim: int) -> int:
        if self.kind != "affine":
            return dim
        if self.matrix.shape[1] != dim:
            raise ShapeError(f"affine map expects dimension {self.matrix.shape[1]}, got {dim}")
        return self.matrix.shape[0]

    def apply(self, data: np.ndarray) -> np.ndarray:
        if self.kind == "affine":
            return data @ self.matrix.T + self.offset
        if self.kind == "coordinatewise":
            return COORDINATE_MAPS[self.tag](data)
        return self.factor * data

    def to_dict(self) -> dict:
        if self.kind == "affine":
            return {"kind": "affine", "A": self.matrix.tolist(), "b": self.offset.tolist()}
        if self.kind == "coordinatewise":
            return {"kind": "coordinatewise", "tag": self.tag}
        return {"kind": "scaling", "factor": self.factor}

    @classmethod
    def from_dict(cls, data: dict) -> "LipschitzTransform":
        if data["kind"] == "affine":
            return cls.affine(data["A"], data.get("b"))
        if data["kind"] == "coordinatewise":
            return cls.coordinatewise(data["tag"])
        return cls.scaling(data["factor"])


# ── Vector models ─────────────────────────────────────────────────────────────


def _base_profile(kind: str, dim: int, q: Optional[float]) -> ConcentrationProfile:
    if kind in ("gaussian", "sphere", "ball"):
        return ConcentrationProfile((Regime(2.0, 1.0),))
    if kind == "cube":
        # √p · uniform[0,1]^p is the √p-Lipschitz image of the unit cube
        return ConcentrationProfile((Regime(2.0, math.sqrt(dim)),))
    if kind == "laplace":
        return ConcentrationProfile((Regime(1.0, 1.0),))
    if kind == "lq_ball":
        return ConcentrationProfile((Regime(q, dim ** (-1.0 / q)),))
    if kind == "replicated":
        return ConcentrationProfile((Regime(2.0, math.sqrt(dim)),))
    raise DomainError(f"no base profile for kind {kind!r}")


@dataclass(frozen=True, eq=False)
class VectorModel:
    kind: str
    dim: int
    q: Optional[float] = None
    transform: Optional[LipschitzTransform] = None
    components: tuple = ()
    declared_profile: Optional[ConcentrationProfile] = None

    def __post_init__(self):
        if self.kind not in config.SUPPORTED_VECTOR_KINDS:
            raise DomainError(
                f"unknown vector kind {self.kind!r}; expected one of {config.SUPPORTED_VECTOR_KINDS}"
            )
        if self.dim < 1:
            raise RangeError(f"dimension must be >= 1, got {self.dim}")
        if self.kind == "lq_ball" and not (self.q is not None and self.q > 0):
            raise RangeError("lq_ball needs an exponent q > 0")
        if self.kind == "concat":
            if not self.components:
                raise RangeError("concat needs at least one component")
            total = sum(c.output_dim for c in self.components)
            if total != self.dim:
                raise ShapeError(f"concat dimension {self.dim} != sum of components {total}")
        if self.transform is not None:
            self.transform.output_dim(self.dim)
        if self.declared_profile is None:
            object.__setattr__(self, "declared_profile", self._derive_profile())

    def _derive_profile(self) -> ConcentrationProfile:
        if self.kind == "concat":
            profile = self.components[0].declared_profile
            for component in self.components[1:]:
                profile = profile.union(component.declared_profile)
        else:
            profile = _base_profile(self.kind, self.dim, self.q)
        if self.transform is not None and self.transform.lipschitz_constant > 0:
            profile = profile.scaled(self.transform.lipschitz_constant)
        return profile

    @property
    def output_dim(self) -> int:
        return self.dim if self.transform is None else self.transform.output_dim(self.dim)

    def with_transform(self, transform: LipschitzTransform) -> "VectorModel":
        if self.transform is not None:
            raise DomainError("model already carries a transform")
        return VectorModel(self.kind, self.dim, self.q, transform, self.components)

    def to_dict(self) -> dict:
        data = {"type": "vector", "kind": self.kind, "dim": self.dim}
        if self.q is not None:
            data["q"] = self.q
        if self.transform is not None:
            data["transform"] = self.transform.to_dict()
        if self.components:
            data["components"] = [c.to_dict() for c in self.components]
        return data

    @classmethod
    def from_dict(cls, data: dict) -> "VectorModel":
        transform = data.get("transform")
        return cls(
            data["kind"],
            int(data["dim"]),
            q=data.get("q"),
            transform=LipschitzTransform.from_dict(transform) if transform else None,
            components=tuple(cls.from_dict(c) for c in data.get("components", ())),
        )


def concat(models: Sequence[VectorModel]) -> VectorModel:
    """Independent concatenation; the declared profile is the union of the regimes."""
    models = tuple(models)
    if not models:
        raise RangeError("concat needs at least one model")
    if len(models) == 1:
        return models[0]
    return VectorModel("concat", sum(m.output_dim for m in models), components=models)


# ── Recipes ───────────────────────────────────────────────────────────────────


def _gaussian(gen: np.random.Generator, rows: int, model: VectorModel) -> np.ndarray:
    return gen.standard_normal((rows, model.dim))


def _directions(gen: np.random.Generator, rows: int, p: int) -> np.ndarray:
    g = gen.standard_normal((rows, p))
    return g / np.linalg.norm(g, axis=1, keepdims=True)


def _sphere(gen, rows, model):
    return math.sqrt(model.dim) * _directions(gen, rows, model.dim)


def _ball(gen, rows, model):
    p = model.dim
    radius = gen.random(rows) ** (1.0 / p)
    return math.sqrt(p) * radius[:, None] * _directions(gen, rows, p)


def _cube(gen, rows, model):
    return math.sqrt(model.dim) * gen.random((rows, model.dim))


def _laplace(gen, rows, model):
    return gen.laplace(0.0, 1.0, (rows, model.dim))


def _lq_ball(gen, rows, model):
    # coordinates with density ∝ exp(-|y|^q) and one extra exponential, then normalize
    q, p = model.q, model.dim
    magnitude = gen.gamma(1.0 / q, 1.0, (rows, p)) ** (1.0 / q)
    sign = np.where(gen.random((rows, p)) < 0.5, -1.0, 1.0)
    y = sign * magnitude
    w = gen.exponential(1.0, rows)
    norm = (np.sum(np.abs(y) ** q, axis=1) + w) ** (1.0 / q)
    return y / norm[:, None]


def _replicated(gen, rows, model):
    return np.repeat(gen.standard_normal((rows, 1)), model.dim, axis=1)


_RECIPES: dict[str, Callable] = {
    "gaussian": _gaussian,
    "sphere": _sphere,
    "ball": _ball,
    "cube": _cube,
    "laplace": _laplace,
    "lq_ball": _lq_ball,
    "replicated": _replicated,
}


def _draw_block(model: VectorModel, master_seed: int, key: tuple, rows: int) -> np.ndarray:
    if model.kind == "concat":
        out = np.concatenate(
            [
                _draw_block(component, master_seed, key + (k,), rows)
                for k, component in enumerate(model.components)
            ],
            axis=1,
        )
    else:
        out = _RECIPES[model.kind](derive_generator(master_seed, *key), rows, model)
    if model.transform is not None:
        out = model.transform.apply(out)
    return out


def _run_parallel(fn: Callable, tasks: list, threads: Optional[int] = None) -> list:
    workers = max(1, min(threads or config.THREADS, len(tasks)))
    if workers == 1:
        return [fn(task) for task in tasks]
    with ThreadPoolExecutor(max_workers=workers) as pool:
        return list(pool.map(fn, tasks))


# ── Ensembles ─────────────────────────────────────────────────────────────────


@dataclass(frozen=True, eq=False)
class SampleEnsemble:
    """
    N independent realizations, one per row of `data`.

    `shape` is the per-trial shape: (d,) for vectors, (p, n) for matrices
    (row-major flattening), () for scalar statistics.

    `draw_key` is (stream, column) for raw draws, column None for a matrix
    that spans every column of its stream, and None for derived or coupled data.
    """

    data: np.ndarray
    shape: tuple
    model: Optional[object]
    master_seed: int
    stream: int = 0
    derivation: str = config.SEED_DERIVATION
    provenance: Optional[dict] = None
    draw_key: Optional[tuple] = None

    def __post_init__(self):
        data = np.asarray(self.data, dtype=float)
        if data.ndim == 1:
            data = data[:, None]
        if data.ndim != 2 or data.shape[0] < 1:
            raise ShapeError(f"ensemble data must be N x d with N >= 1, got {data.shape}")
        shape = tuple(int(s) for s in self.shape)
        if int(np.prod(shape, dtype=int)) != data.shape[1]:
            raise ShapeError(f"row width {data.shape[1]} does not match trial shape {shape}")
        object.__setattr__(self, "data", data)
        object.__setattr__(self, "shape", shape)
        object.__setattr__(self, "master_seed", validate_seed(self.master_seed))
        if self.draw_key is not None:
            object.__setattr__(self, "draw_key", tuple(self.draw_key))

    @property
    def N(self) -> int:
        return self.data.shape[0]

    @property
    def width(self) -> int:
        return self.data.shape[1]

    @property
    def is_matrix(self) -> bool:
        return len(self.shape) == 2

    def trials(self) -> np.ndarray:
        return self.data.reshape((self.N,) + self.shape)

    def values(self) -> np.ndarray:
        """Scalar ensembles as a flat length-N vector."""
        if self.width != 1:
            raise ShapeError(f"not a scalar ensemble (trial shape {self.shape})")
        return self.data[:, 0]

    @property
    def descriptor(self) -> dict:
        if self.model is not None:
            return self.model.to_dict()
        return dict(self.provenance or {"type": "derived"})

    def header(self) -> dict:
        return {
            "model": self.descriptor,
            "N": self.N,
            "shape": list(self.shape),
            "master_seed": self.master_seed,
            "stream": self.stream,
            "derivation": self.derivation,
            "draw_key": None if self.draw_key is None else list(self.draw_key),
        }

    @classmethod
    def derived(
        cls, data: np.ndarray, shape: tuple, op: str, inputs: Sequence["SampleEnsemble"]
    ) -> "SampleEnsemble":
        """Ensemble computed trial-by-trial from aligned inputs; inherits their seed."""
        first = inputs[0]
        provenance = {
            "type": "derived",
            "op": op,
            "inputs": [e.descriptor for e in inputs],
            "streams": [e.stream for e in inputs],
        }
        return cls(data, shape, None, first.master_seed, first.stream, first.derivation, provenance)


def iter_blocks(
    model: VectorModel, N: int, master_seed: int, stream: int = 0, column: int = 0
) -> Iterator[tuple]:
    """Yield (TrialBlock, rows) pairs; concatenated they equal sample(...).data."""
    if N < 1:
        raise RangeError(f"N must be >= 1, got {N}")
    for block in split_into_blocks(N):
        yield block, _draw_block(model, master_seed, (stream, block.index, column), block.size)


def sample(
    model: VectorModel,
    N: int,
    master_seed: int,
    stream: int = 0,
    column: int = 0,
    threads: Optional[int] = None,
) -> SampleEnsemble:
    if N < 1:
        raise RangeError(f"N must be >= 1, got {N}")
    seed = validate_seed(master_seed)

    def draw(block: TrialBlock) -> np.ndarray:
        return _draw_block(model, seed, (stream, block.index, column), block.size)

    parts = _run_parallel(draw, split_into_blocks(N), threads)
    return SampleEnsemble(
        np.concatenate(parts, axis=0), (model.output_dim,), model, seed, stream, draw_key=(stream, column)
    )


# ── Matrix models ─────────────────────────────────────────────────────────────


@dataclass(frozen=True, eq=False)
class MatrixModel:
    p: int
    n: int
    column_models: tuple
    coupling: Optional[str] = None

    def __post_init__(self):
        models = tuple(self.column_models)
        object.__setattr__(self, "column_models", models)
        if self.p < 1 or self.n < 1:
            raise RangeError("p and n must be >= 1")
        if len(models) not in (1, self.n):
            raise ShapeError(f"expected 1 or n={self.n} column models, got {len(models)}")
        for model in models:
            if model.output_dim != self.p:
                raise ShapeError(f"column model has dimension {model.output_dim}, expected p={self.p}")
        if self.coupling is not None and self.coupling not in COUPLINGS:
            raise DomainError(f"unknown coupling {self.coupling!r}; expected one of {COUPLINGS}")

    @classmethod
    def gaussian(cls, p: int, n: int, coupling: Optional[str] = None) -> "MatrixModel":
        return cls(p, n, (VectorModel("gaussian", p),), coupling)

    def column_model(self, j: int) -> VectorModel:
        return self.column_models[0] if len(self.column_models) == 1 else self.column_models[j]

    @property
    def analytic_sigma(self) -> bool:
        return all(m.kind == "gaussian" and m.transform is None for m in self.column_models)

    def sigma(self, master_seed: int = 0, N: Optional[int] = None) -> list:
        """
        Σ_i = E[x_i y_i^T] for every column.

        Exact for plain gaussian columns; otherwise estimated from N
        (default config.EXPECTATION_SAMPLES) auxiliary draws, see estimate_sigma.
        """
        if self.analytic_sigma:
            factor = {"identical": 1.0, "mixed": 1.0 / math.sqrt(2.0)}.get(self.coupling, 0.0)
            return [factor * np.eye(self.p)] * self.n
        return estimate_sigma(self, N or config.EXPECTATION_SAMPLES, master_seed)[0]

    def to_dict(self) -> dict:
        return {
            "type": "matrix",
            "p": self.p,
            "n": self.n,
            "column_models": [m.to_dict() for m in self.column_models],
            "coupling": self.coupling,
        }

    @classmethod
    def from_dict(cls, data: dict) -> "MatrixModel":
        return cls(
            int(data["p"]),
            int(data["n"]),
            tuple(VectorModel.from_dict(m) for m in data["column_models"]),
            data.get("coupling"),
        )


def estimate_sigma(model: MatrixModel, N: int, master_seed: int = 0) -> tuple:
    """
    Monte Carlo Σ_i from N auxiliary columns per distinct column model,
    coupled the way sample_couple couples them.

    Returns (Σ list of length n, largest entrywise standard error).
    """
    if N < 2:
        raise RangeError(f"N must be >= 2, got {N}")
    seed = validate_seed(master_seed)
    distinct = 1 if len(model.column_models) == 1 else model.n
    estimates, worst = [], 0.0
    for j in range(distinct):
        column = model.column_model(j)
        x = _draw_block(column, seed, (STREAM_EXPECTATION, 0, j), N)
        if model.coupling == "identical":
            y = x
        elif model.coupling == "mixed":
            g = derive_generator(seed, STREAM_EXPECTATION, 2, j).standard_normal((N, model.p))
            y = (x + g) / math.sqrt(2.0)
        else:
            y = _draw_block(column, seed, (STREAM_EXPECTATION, 1, j), N)
        mean = x.T @ y / N
        second = (x * x).T @ (y * y) / N
        variance = np.maximum(second - mean * mean, 0.0)
        worst = max(worst, float(np.sqrt(variance.max() / N)))
        estimates.append(mean)
    if distinct == 1:
        estimates = estimates * model.n
    return estimates, worst


def model_from_dict(data: dict):
    if data.get("type") == "matrix":
        return MatrixModel.from_dict(data)
    if data.get("type") == "vector":
        return VectorModel.from_dict(data)
    if data.get("type") == "diagonal":
        return DiagonalModel(data["kind"], tuple(data["params"]))
    return None


def sample_matrix(
    model: MatrixModel,
    N: int,
    master_seed: int,
    stream: int = STREAM_X,
    threads: Optional[int] = None,
) -> SampleEnsemble:
    """Per-trial p×n matrices; column j uses its own seed stream."""
    if N < 1:
        raise RangeError(f"N must be >= 1, got {N}")
    seed = validate_seed(master_seed)
    out = np.empty((N, model.p, model.n))
    blocks = split_into_blocks(N)

    def fill(task: tuple) -> None:
        j, block = task
        out[block.start : block.stop, :, j] = _draw_block(
            model.column_model(j), seed, (stream, block.index, j), block.size
        )

    _run_parallel(fill, [(j, block) for j in range(model.n) for block in blocks], threads)
    return SampleEnsemble(
        out.reshape(N, model.p * model.n), (model.p, model.n), model, seed, stream, draw_key=(stream, None)
    )


def sample_couple(
    model: MatrixModel, N: int, master_seed: int, threads: Optional[int] = None
) -> tuple:
    """
    (X, Y) couples following the model's coupling rule.

    identical: Y = X; mixed: y_i = (x_i + g_i)/√2 with fresh gaussian g_i;
    independent (default): Y drawn from its own stream.
    """
    X = sample_matrix(model, N, master_seed, STREAM_X, threads)
    if model.coupling == "identical":
        Y = SampleEnsemble(X.data.copy(), X.shape, model, X.master_seed, STREAM_X)
    elif model.coupling == "mixed":
        G = sample_matrix(MatrixModel.gaussian(model.p, model.n), N, master_seed, STREAM_MIX, threads)
        Y = SampleEnsemble(
            (X.data + G.data) / math.sqrt(2.0), X.shape, model, X.master_seed, STREAM_MIX
        )
    else:
        Y = sample_matrix(model, N, master_seed, STREAM_Y, threads)
    return X, Y


# ── Random diagonals ──────────────────────────────────────────────────────────


@dataclass(frozen=True)
class DiagonalModel:
    """
    Law of the diagonal entries D_i.

    deterministic(d), two_point(d1, d2) (each with probability 1/2),
    uniform(low, high), gaussian(mean, std), and clip(scale):
    D_i = scale · clip((x_i)_1, 0, 1), coupled to the first coordinate of x_i.
    """

    kind: str
    params: tuple = (0.0,)

    def __post_init__(self):
        if self.kind not in config.SUPPORTED_DIAGONAL_MODELS:
            raise DomainError(
                f"unknown diagonal model {self.kind!r}; "
                f"expected one of {config.SUPPORTED_DIAGONAL_MODELS}"
            )
        params = tuple(float(v) for v in self.params)
        expected = {"deterministic": 1, "two_point": 2, "uniform": 2, "gaussian": 2, "clip": 1}
        if len(params) != expected[self.kind]:
            raise RangeError(f"{self.kind} takes {expected[self.kind]} parameter(s), got {len(params)}")
        if self.kind == "uniform" and params[0] > params[1]:
            raise RangeError("uniform needs low <= high")
        if self.kind == "gaussian" and params[1] < 0:
            raise RangeError("gaussian needs std >= 0")
        object.__setattr__(self, "params", params)

    @classmethod
    def deterministic(cls, d: float) -> "DiagonalModel":
        return cls("deterministic", (d,))

    @classmethod
    def two_point(cls, d1: float, d2: float) -> "DiagonalModel":
        return cls("two_point", (d1, d2))

    @classmethod
    def uniform(cls, low: float, high: float) -> "DiagonalModel":
        return cls("uniform", (low, high))

    @classmethod
    def gaussian(cls, mean: float, std: float) -> "DiagonalModel":
        return cls("gaussian", (mean, std))

    @classmethod
    def clip(cls, scale: float) -> "DiagonalModel":
        return cls("clip", (scale,))

    @property
    def coupled(self) -> bool:
        return self.kind == "clip"

    @property
    def bound(self) -> float:
        """sup |D_i| (κ_D); infinite for the gaussian law."""
        if self.kind == "gaussian":
            return math.inf if self.params[1] > 0 else abs(self.params[0])
        return max(abs(v) for v in self.params)

    def support(self) -> Optional[tuple]:
        """Exact (values, weights) for finitely supported laws, else None."""
        if self.kind == "deterministic":
            return np.array(self.params), np.array([1.0])
        if self.kind == "two_point":
            return np.array(self.params), np.array([0.5, 0.5])
        return None

    def mean(self) -> float:
        """E[D_i]; for clip, under a standard gaussian first coordinate."""
        if self.kind in ("deterministic", "two_point", "uniform"):
            return float(np.mean(self.params))
        if self.kind == "gaussian":
            return self.params[0]
        # E[clip(g, 0, 1)] = φ(0) - φ(1) + P(g > 1)
        return self.params[0] * float(norm.pdf(0.0) - norm.pdf(1.0) + norm.sf(1.0))

    def draw(self, gen: np.random.Generator, shape: tuple) -> np.ndarray:
        a = self.params[0]
        if self.kind == "deterministic":
            return np.full(shape, a)
        if self.kind == "two_point":
            return np.where(gen.random(shape) < 0.5, a, self.params[1])
        if self.kind == "uniform":
            return gen.uniform(a, self.params[1], shape)
        if self.kind == "gaussian":
            return gen.normal(a, self.params[1], shape)
        raise DomainError("clip diagonals are read off X, not drawn")

    def to_dict(self) -> dict:
        return {"type": "diagonal", "kind": self.kind, "params": list(self.params)}


def sample_diagonal(
    model: DiagonalModel,
    N: int,
    n: int,
    master_seed: int,
    X: Optional[SampleEnsemble] = None,
    stream: int = STREAM_D,
) -> SampleEnsemble:
    """Per-trial diagonals D ∈ ℝ^n; coupled laws read the first row of each X trial."""
    if N < 1 or n < 1:
        raise RangeError("N and n must be >= 1")
    if model.coupled:
        if X is None or not X.is_matrix or X.shape[1] != n:
            raise ShapeError("a coupled diagonal needs the p×n matrix ensemble X")
        data = model.params[0] * np.clip(X.trials()[:, 0, :], 0.0, 1.0)
        return SampleEnsemble(data, (n,), model, X.master_seed, X.stream)
    parts = [
        model.draw(derive_generator(master_seed, stream, block.index, 0), (block.size, n))
        for block in split_into_blocks(N)
    ]
    return SampleEnsemble(
        np.concatenate(parts, axis=0), (n,), model, master_seed, stream, draw_key=(stream, 0)
    )


def sample_diagonal_marginal(
    model: DiagonalModel, N: int, n: int, master_seed: int, stream: int = STREAM_EXPECTATION
) -> SampleEnsemble:
    """Auxiliary diagonals from the marginal law; coupled laws read a fresh gaussian first row."""
    if not model.coupled:
        return sample_diagonal(model, N, n, master_seed, stream=stream)
    X = sample_matrix(MatrixModel.gaussian(1, n), N, master_seed, stream)
    return sample_diagonal(model, N, n, master_seed, X=X)
