"""Coordinate-level curvature quantities of a Finsler metric.

Everything here is a pure function of a :class:`MetricModel` and a flag
point (x, y): the fundamental tensor g_ij = (1/2)[F^2]_{y^i y^j}, the Cartan
tensor A_ijk = (F/4)[F^2]_{y^i y^j y^k}, the geodesic spray coefficients

    G^i = (1/4) g^{il} ( [F^2]_{x^k y^l} y^k - [F^2]_{x^l} ),

the nonlinear connection N^i_j = dG^i/dy^j, the mean Berwald curvature in
the normalisation

    E_ij = d^3 G^m / dy^i dy^j dy^m      (no factor 1/2),

the distortion tau = ln(sqrt(det g) / sigma) for a pluggable volume
coefficient sigma(x), and the S-curvature as the derivative of tau along
the spray, with the divergence form S = dG^m/dy^m - y^m d(ln sigma)/dx^m
kept as an independent cross-check.

All derivatives come from truncated Taylor jets of F^2 seeded at the flag
point, so they are exact up to roundoff.  Models are immutable after
construction and every operation is a pure function, so evaluation is safe
to parallelise over points.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Mapping, Sequence

import numpy as np

from . import jets, volume
from .expr import (
    Node,
    Var,
    check_positive_homogeneity,
    evaluate,
    iter_nodes,
    parse,
)
from .jets import Jet, extract_derivative, jet_matrix_det, jet_matrix_inverse

__all__ = [
    "EIGENVALUE_FLOOR",
    "MetricModel",
    "FlagPoint",
    "VolumeSpec",
    "CoordinateTensors",
    "MetricDefinitionError",
    "NonPositiveDefiniteError",
    "NonPositiveMetricError",
    "UnsupportedDimensionError",
    "VolumeFormError",
    "fundamental_tensor",
    "cartan_tensor",
    "spray_coefficients",
    "nonlinear_connection",
    "mean_berwald",
    "distortion",
    "s_curvature",
    "s_curvature_alt",
    "coordinate_tensors",
    "sigma_value",
    "dln_sigma",
]

EIGENVALUE_FLOOR = 1e-10

VOLUME_KINDS = ("lebesgue", "busemann_hausdorff", "riemannian_auto", "custom")


class MetricDefinitionError(ValueError):
    """The expression does not define a Finsler metric (homogeneity, positivity)."""


class NonPositiveDefiniteError(ArithmeticError):
    """The fundamental tensor failed the positive-definiteness floor."""

    def __init__(self, min_eigenvalue: float, where: str = "fundamental tensor"):
        super().__init__(
            f"{where} is not positive definite (smallest eigenvalue {min_eigenvalue:.3e})"
        )
        self.min_eigenvalue = min_eigenvalue


class NonPositiveMetricError(ArithmeticError):
    """F evaluated to a non-positive value at a point where it must be positive."""


class UnsupportedDimensionError(ValueError):
    """The requested computation would exceed the jet engine variable cap."""


class VolumeFormError(ValueError):
    """The volume form is inconsistent with the model or non-positive."""


@dataclass(frozen=True)
class VolumeSpec:
    """Volume coefficient choice: sigma(x) in dV = sigma(x) dx^1 ... dx^n."""

    kind: str
    sigma_ast: Node | None = None

    def __post_init__(self):
        if self.kind not in VOLUME_KINDS:
            raise VolumeFormError(f"unknown volume form kind {self.kind!r}")
        if self.kind == "custom" and self.sigma_ast is None:
            raise VolumeFormError("custom volume form requires a sigma expression")


def _normalize_volume(spec, dim: int, params) -> VolumeSpec:
    if isinstance(spec, VolumeSpec):
        return spec
    if isinstance(spec, str):
        alias = {"bh": "busemann_hausdorff", "auto": "riemannian_auto"}
        kind = alias.get(spec, spec)
        if kind.startswith("expr:"):
            ast = parse(kind[len("expr:"):], dim, params)
            return VolumeSpec("custom", ast)
        return VolumeSpec(kind)
    raise VolumeFormError(f"cannot interpret volume form {spec!r}")


class MetricModel:
    """A Finsler structure: dimension, norm expression, volume form.

    The norm F is an expression over x1..xn, y1..yn and named parameters; it
    must be positive and positively 1-homogeneous in y on the sampled cone
    (validated at construction, tolerance 1e-8).  Positive definiteness of
    the fundamental tensor is checked lazily wherever g is assembled.

    ``a_asts`` carries the matrix entries of a Riemannian ground metric and
    is required by the ``riemannian_auto`` volume form, where
    sigma = sqrt(det a(x)).
    """

    def __init__(
        self,
        dim: int,
        f,
        *,
        params: Mapping[str, float] | None = None,
        volume="lebesgue",
        metric_id: str = "custom",
        a_asts=None,
        x_radius: float = 1.0,
        x_max_norm: float = math.inf,
        y_guard=None,
        validate: bool = True,
        validation_trials: int = 64,
        validation_seed: int = 987654321,
    ):
        dim = int(dim)
        if dim < 2:
            raise MetricDefinitionError("dimension must be at least 2")
        self.dim = dim
        self.params = dict(params or {})
        self.f_ast = parse(f, dim, self.params) if isinstance(f, str) else f
        self.volume = _normalize_volume(volume, dim, self.params)
        self.metric_id = metric_id
        self.a_asts = a_asts
        self.x_radius = float(x_radius)
        self.x_max_norm = float(x_max_norm)
        self.y_guard = y_guard
        self.depends_on_x = any(
            isinstance(node, Var) and node.kind == "x" for node in iter_nodes(self.f_ast)
        )
        if self.volume.kind == "riemannian_auto" and a_asts is None:
            raise VolumeFormError(
                "riemannian_auto volume requires the ground-metric entries"
            )
        if self.volume.kind == "custom":
            if any(
                isinstance(node, Var) and node.kind == "y"
                for node in iter_nodes(self.volume.sigma_ast)
            ):
                raise VolumeFormError("the volume coefficient may only depend on x")
        if validate:
            self._validate(validation_trials, validation_seed)

    def _validate(self, trials: int, seed: int):
        report = check_positive_homogeneity(
            self.f_ast, self.dim, trials, seed, self.params, x_radius=self.x_radius
        )
        if report.max_rel_deviation > 1e-8:
            raise MetricDefinitionError(
                "F is not positively 1-homogeneous in y: max relative deviation "
                f"{report.max_rel_deviation:.3e} at {report.worst}"
            )
        rng = np.random.default_rng(seed)
        for _ in range(trials):
            x = self.sample_x(rng)
            y = self.sample_y(rng)
            value = self.f(x, y)
            if not value > 0.0:
                raise MetricDefinitionError(
                    f"F must be positive on y != 0; got {value!r} at x={x}, y={y}"
                )

    # -- sampling helpers (deterministic given the caller's generator) ------

    def sample_x(self, rng) -> np.ndarray:
        direction = rng.standard_normal(self.dim)
        norm = np.linalg.norm(direction)
        while norm < 1e-12:
            direction = rng.standard_normal(self.dim)
            norm = np.linalg.norm(direction)
        radius = self.x_radius * rng.uniform(0.0, 1.0) ** (1.0 / self.dim)
        return direction / norm * radius

    def sample_y(self, rng) -> np.ndarray:
        while True:
            y = rng.standard_normal(self.dim)
            if np.linalg.norm(y) < 1e-3:
                continue
            if self.y_guard is not None and not self.y_guard(y):
                continue
            return y

    def f(self, x, y):
        """Evaluate F(x, y); generic over floats, arrays and jets."""
        return evaluate(self.f_ast, list(x), list(y), self.params)


@dataclass(frozen=True, eq=False)
class FlagPoint:
    """A point (x, y) with y != 0 where the coordinate tensors are evaluated."""

    x: np.ndarray
    y: np.ndarray

    def __post_init__(self):
        object.__setattr__(self, "x", np.asarray(self.x, dtype=float))
        object.__setattr__(self, "y", np.asarray(self.y, dtype=float))
        if self.x.shape != self.y.shape or self.x.ndim != 1:
            raise ValueError("x and y must be vectors of equal length")
        if np.linalg.norm(self.y) == 0.0:
            raise ValueError("y must be nonzero")


@dataclass
class CoordinateTensors:
    """All coordinate tensors at one flag point."""

    f: float
    g: np.ndarray
    g_inv: np.ndarray
    cartan: np.ndarray
    spray: np.ndarray
    nonlinear: np.ndarray
    mean_berwald: np.ndarray
    tau: float
    s: float


# -- jet scaffolding ----------------------------------------------------------


class TensorJets:
    """Taylor data of F and F^2 around a flag point.

    ``with_x`` selects jets over the 2n variables (x1..xn, y1..yn); without
    it the x coordinates enter as constants and the jets run over y only,
    which keeps x-independent metrics usable up to the variable cap.
    """

    def __init__(self, model: MetricModel, x, y, order: int, with_x: bool):
        n = model.dim
        self.n = n
        self.with_x = with_x
        self.order = order
        self.n_vars = 2 * n if with_x else n
        if self.n_vars > jets.MAX_VARS:
            raise UnsupportedDimensionError(
                f"dim {n} needs jets over {self.n_vars} variables; the engine caps at "
                f"{jets.MAX_VARS} (x-dependent metrics are supported up to dim "
                f"{jets.MAX_VARS // 2})"
            )
        self.y_offset = n if with_x else 0
        if with_x:
            xs = [jets.seed_variable(i + 1, float(x[i]), self.n_vars, order) for i in range(n)]
        else:
            xs = [float(v) for v in x]
        ys = [
            jets.seed_variable(self.y_offset + i + 1, float(y[i]), self.n_vars, order)
            for i in range(n)
        ]
        self.f_jet = evaluate(model.f_ast, xs, ys, model.params)
        if not self.f_jet.value > 0.0:
            raise NonPositiveMetricError(
                f"F(x, y) = {self.f_jet.value!r} must be positive at x={x}, y={y}"
            )
        self.f2_jet = self.f_jet * self.f_jet

    def gamma(self, x_part=(), y_part=()) -> tuple[int, ...]:
        g = [0] * self.n_vars
        for i in x_part:
            if not self.with_x:
                raise ValueError("x derivatives need jets over the x variables")
            g[i] += 1
        for i in y_part:
            g[self.y_offset + i] += 1
        return tuple(g)

    def d_f2(self, x_part=(), y_part=(), order: int | None = None) -> Jet:
        out = self.f2_jet.derivative(self.gamma(x_part, y_part))
        return out if order is None else out.truncated(order)


def _check_pd(gmat: np.ndarray, where: str) -> np.ndarray:
    eigenvalues = np.linalg.eigvalsh(gmat)
    if eigenvalues.min() < EIGENVALUE_FLOOR:
        raise NonPositiveDefiniteError(float(eigenvalues.min()), where)
    return gmat


def _g_values(tj: TensorJets) -> np.ndarray:
    n = tj.n
    g = np.empty((n, n))
    for i in range(n):
        for j in range(i, n):
            g[i, j] = g[j, i] = 0.5 * extract_derivative(tj.f2_jet, tj.gamma(y_part=(i, j)))
    return g


def _g_jets(tj: TensorJets, order: int) -> list[list[Jet]]:
    n = tj.n
    rows = [[None] * n for _ in range(n)]
    for i in range(n):
        for j in range(i, n):
            entry = tj.d_f2(y_part=(i, j), order=order) * 0.5
            rows[i][j] = entry
            rows[j][i] = entry
    return rows


def _spray_jets(tj: TensorJets, order: int, y_values: Sequence[float]) -> list[Jet]:
    """Spray coefficients G^i as jets of the requested order."""
    n = tj.n
    if not tj.with_x:
        return [jets.constant(0.0, tj.n_vars, order) for _ in range(n)]
    g = _g_jets(tj, order)
    _check_pd(np.array([[entry.value for entry in row] for row in g]), "fundamental tensor")
    g_inv = jet_matrix_inverse(g)
    y_jets = [
        jets.seed_variable(tj.y_offset + k + 1, float(y_values[k]), tj.n_vars, order)
        for k in range(n)
    ]
    b = []
    for l in range(n):
        term = -tj.d_f2(x_part=(l,), order=order)
        for k in range(n):
            term = term + tj.d_f2(x_part=(k,), y_part=(l,), order=order) * y_jets[k]
        b.append(term)
    spray = []
    for i in range(n):
        acc = jets.constant(0.0, tj.n_vars, order)
        for l in range(n):
            acc = acc + g_inv[i][l] * b[l]
        spray.append(acc * 0.25)
    return spray


def _ln_sigma_as_jet(model: MetricModel, x, n_vars: int, order: int, x_offset: int = 0) -> Jet:
    """ln(sigma(x)) as a jet; only the value and x-gradient are ever consumed."""
    if model.volume.kind == "lebesgue":
        return jets.constant(0.0, n_vars, order)
    value = sigma_value(model, x)
    grad = dln_sigma(model, x)
    out = jets.constant(math.log(value), n_vars, order)
    if order >= 1:
        space = out.space
        coeffs = out.coeffs.copy()
        for i in range(model.dim):
            unit = tuple(1 if k == x_offset + i else 0 for k in range(n_vars))
            coeffs[space.index_of[unit]] = grad[i]
        out = Jet(space, coeffs)
    return out


def s_main_jet(tj: TensorJets, order: int, y_values: Sequence[float]) -> Jet:
    """The volume-independent part of the S-curvature as a jet:
    (spray derivative of ln sqrt(det g)) around the flag point."""
    tau_g = jet_matrix_det(_g_jets(tj, order + 1)).ln() * 0.5
    spray = _spray_jets(tj, order, y_values)
    n = tj.n
    acc = jets.constant(0.0, tj.n_vars, order)
    for i in range(n):
        y_i = jets.seed_variable(tj.y_offset + i + 1, float(y_values[i]), tj.n_vars, order)
        acc = acc + y_i * tau_g.derivative(tj.gamma(x_part=(i,))).truncated(order)
        acc = acc - 2.0 * spray[i] * tau_g.derivative(tj.gamma(y_part=(i,))).truncated(order)
    return acc


# -- volume coefficient --------------------------------------------------------


def _a_matrix_jets(model: MetricModel, x, order: int):
    n = model.dim
    xs = [jets.seed_variable(i + 1, float(x[i]), n, order) for i in range(n)]
    dummy_y = [0.0] * n
    rows = []
    for i in range(n):
        row = []
        for j in range(n):
            entry = evaluate(model.a_asts[i][j], xs, dummy_y, model.params)
            if not isinstance(entry, Jet):
                entry = jets.constant(float(entry), n, order)
            row.append(entry)
        rows.append(row)
    return rows


def sigma_value(model: MetricModel, x) -> float:
    """Value of the volume coefficient sigma(x)."""
    kind = model.volume.kind
    if kind == "lebesgue":
        return 1.0
    if kind == "custom":
        value = evaluate(model.volume.sigma_ast, list(x), [0.0] * model.dim, model.params)
        if not value > 0.0:
            raise VolumeFormError(f"sigma(x) = {value!r} must be positive")
        return float(value)
    if kind == "riemannian_auto":
        det = jet_matrix_det(_a_matrix_jets(model, x, 0)).value
        if not det > 0.0:
            raise VolumeFormError(f"det a(x) = {det!r} must be positive")
        return math.sqrt(det)
    return volume.bh_volume_coefficient(model, x)


def dln_sigma(model: MetricModel, x) -> np.ndarray:
    """Gradient of ln(sigma) at x."""
    n = model.dim
    kind = model.volume.kind
    if kind == "lebesgue":
        return np.zeros(n)
    if kind == "custom":
        xs = [jets.seed_variable(i + 1, float(x[i]), n, 1) for i in range(n)]
        sigma_jet = evaluate(model.volume.sigma_ast, xs, [0.0] * n, model.params)
        if not isinstance(sigma_jet, Jet):
            return np.zeros(n)
        if not sigma_jet.value > 0.0:
            raise VolumeFormError(f"sigma(x) = {sigma_jet.value!r} must be positive")
        log_jet = sigma_jet.ln()
        unit = lambda i: tuple(1 if k == i else 0 for k in range(n))
        return np.array([extract_derivative(log_jet, unit(i)) for i in range(n)])
    if kind == "riemannian_auto":
        det_jet = jet_matrix_det(_a_matrix_jets(model, x, 1))
        if not det_jet.value > 0.0:
            raise VolumeFormError(f"det a(x) = {det_jet.value!r} must be positive")
        log_jet = det_jet.ln() * 0.5
        unit = lambda i: tuple(1 if k == i else 0 for k in range(n))
        return np.array([extract_derivative(log_jet, unit(i)) for i in range(n)])
    return volume.bh_log_gradient(model, x)


# -- public coordinate operations ----------------------------------------------


def metric_value(model: MetricModel, point: FlagPoint) -> float:
    value = model.f(point.x, point.y)
    if not value > 0.0:
        raise NonPositiveMetricError(f"F = {value!r} at x={point.x}, y={point.y}")
    return float(value)


def fundamental_tensor(model: MetricModel, point: FlagPoint) -> np.ndarray:
    """g_ij = (1/2) [F^2]_{y^i y^j}; raises if not positive definite."""
    tj = TensorJets(model, point.x, point.y, 2, with_x=False)
    return _check_pd(_g_values(tj), "fundamental tensor")


def cartan_tensor(model: MetricModel, point: FlagPoint) -> np.ndarray:
    """A_ijk = (F/4) [F^2]_{y^i y^j y^k}, totally symmetric with A_ijk y^k = 0."""
    n = model.dim
    tj = TensorJets(model, point.x, point.y, 3, with_x=False)
    f_value = tj.f_jet.value
    out = np.empty((n, n, n))
    for i in range(n):
        for j in range(i, n):
            for k in range(j, n):
                value = 0.25 * f_value * extract_derivative(
                    tj.f2_jet, tj.gamma(y_part=(i, j, k))
                )
                for a, b, c in ((i, j, k), (i, k, j), (j, i, k), (j, k, i), (k, i, j), (k, j, i)):
                    out[a, b, c] = value
    return out


def spray_coefficients(model: MetricModel, point: FlagPoint) -> np.ndarray:
    """Geodesic spray coefficients G^i; zero for x-independent metrics."""
    n = model.dim
    if not model.depends_on_x:
        TensorJets(model, point.x, point.y, 0, with_x=False)  # positivity check
        return np.zeros(n)
    tj = TensorJets(model, point.x, point.y, 2, with_x=True)
    g = _check_pd(_g_values(tj), "fundamental tensor")
    g_inv = np.linalg.inv(g)
    b = np.empty(n)
    for l in range(n):
        acc = -extract_derivative(tj.f2_jet, tj.gamma(x_part=(l,)))
        for k in range(n):
            acc += extract_derivative(tj.f2_jet, tj.gamma(x_part=(k,), y_part=(l,))) * point.y[k]
        b[l] = acc
    return 0.25 * g_inv @ b


def nonlinear_connection(model: MetricModel, point: FlagPoint) -> np.ndarray:
    """N^i_j = dG^i/dy^j."""
    n = model.dim
    if not model.depends_on_x:
        return np.zeros((n, n))
    tj = TensorJets(model, point.x, point.y, 3, with_x=True)
    spray = _spray_jets(tj, 1, point.y)
    out = np.empty((n, n))
    for i in range(n):
        for j in range(n):
            out[i, j] = extract_derivative(spray[i], tj.gamma(y_part=(j,)))
    return out


def mean_berwald(model: MetricModel, point: FlagPoint) -> np.ndarray:
    """E_ij = d^3 G^m / dy^i dy^j dy^m (symmetric, E_ij y^j = 0)."""
    n = model.dim
    if not model.depends_on_x:
        return np.zeros((n, n))
    tj = TensorJets(model, point.x, point.y, 5, with_x=True)
    spray = _spray_jets(tj, 3, point.y)
    out = np.empty((n, n))
    for i in range(n):
        for j in range(i, n):
            acc = 0.0
            for m in range(n):
                acc += extract_derivative(spray[m], tj.gamma(y_part=(i, j, m)))
            out[i, j] = out[j, i] = acc
    return out


def distortion(model: MetricModel, point: FlagPoint) -> float:
    """tau = ln( sqrt(det g) / sigma(x) )."""
    g = fundamental_tensor(model, point)
    sigma = sigma_value(model, point.x)
    return 0.5 * math.log(np.linalg.det(g)) - math.log(sigma)


def s_curvature(model: MetricModel, point: FlagPoint) -> float:
    """S = derivative of the distortion along the spray:
    S = y^i dtau/dx^i - y^i N^j_i dtau/dy^j."""
    n = model.dim
    y = point.y
    sigma_grad = dln_sigma(model, point.x)
    if not model.depends_on_x:
        tj = TensorJets(model, point.x, point.y, 2, with_x=False)
        _check_pd(_g_values(tj), "fundamental tensor")
        return -float(y @ sigma_grad)
    tj = TensorJets(model, point.x, point.y, 3, with_x=True)
    tau_g = jet_matrix_det(_g_jets(tj, 1)).ln() * 0.5
    ln_sigma = _ln_sigma_as_jet(model, point.x, tj.n_vars, 1)
    tau = tau_g - ln_sigma
    spray = _spray_jets(tj, 1, y)
    nonlinear = np.array(
        [
            [extract_derivative(spray[i], tj.gamma(y_part=(j,))) for j in range(n)]
            for i in range(n)
        ]
    )
    tau_x = np.array([extract_derivative(tau, tj.gamma(x_part=(i,))) for i in range(n)])
    tau_y = np.array([extract_derivative(tau, tj.gamma(y_part=(j,))) for j in range(n)])
    return float(y @ tau_x - (y @ nonlinear.T) @ tau_y)


def s_curvature_alt(model: MetricModel, point: FlagPoint) -> float:
    """Divergence form S = dG^m/dy^m - y^m d(ln sigma)/dx^m (cross-check route)."""
    n = model.dim
    sigma_grad = dln_sigma(model, point.x)
    if not model.depends_on_x:
        return -float(point.y @ sigma_grad)
    tj = TensorJets(model, point.x, point.y, 3, with_x=True)
    spray = _spray_jets(tj, 1, point.y)
    div = sum(extract_derivative(spray[m], tj.gamma(y_part=(m,))) for m in range(n))
    return float(div - point.y @ sigma_grad)


def coordinate_tensors(model: MetricModel, point: FlagPoint) -> CoordinateTensors:
    g = fundamental_tensor(model, point)
    return CoordinateTensors(
        f=metric_value(model, point),
        g=g,
        g_inv=np.linalg.inv(g),
        cartan=cartan_tensor(model, point),
        spray=spray_coefficients(model, point),
        nonlinear=nonlinear_connection(model, point),
        mean_berwald=mean_berwald(model, point),
        tau=distortion(model, point),
        s=s_curvature(model, point),
    )
