"""
Registry of interval-evaluable maps and homotopies.

A map is f(θ; x, y) on the bundle, a homotopy is h(α, θ; x, y) deforming a
map (α = 0) into its linear endpoint (η(θ); A_θ·x, 0) (α = 1). Both are
plain functions of Interval arguments, so one call evaluates a whole batch of
cells.

Builtins:

    toy_f0        (kθ; 4x, μy)
    toy_f1        (kθ; -3x + 5x³, sin(θ)/2 + μy)
    toy_fbeta     (1-β) toy_f0 + β toy_f1
    toy_homotopy  (1-α) toy_fbeta + α (kθ; 2x, 0), β over [0, 1] unless given
    cap_map       (3θ + xy sinθ; 4x³ - c·x + xy/2, μy + 2/5 sinθ + x cosθ)
    cap_homotopy  (3θ + (1-α) xy sinθ; 2αx + (1-α)(...), (1-α)(...))
    linear_nhim   (θ + k·ω; (a^k / C) x, (C b^k) y)

θ-outputs of the toy maps are reduced modulo 2π; the cap and linear maps
return the unreduced angle.
"""

import itertools
import logging
from dataclasses import dataclass, field, replace
from typing import Callable, Dict, List, Mapping, Optional, Tuple, Union

import numpy as np

from .errors import (
    EvaluationError,
    IntervalError,
    ParameterError,
    UnknownMapError,
)
from .expressions import Expression, compile_all
from .geometry import COORDINATES, Cell, CellBatch, DomainSpec, wrap
from .interval import (
    TWO_PI,
    UNIT,
    Interval,
    cos,
    intersects,
    parts,
    power,
    sin,
    subset,
)

logger = logging.getLogger(__name__)

Params = Dict[str, Interval]
Triple = Tuple[Interval, Interval, Interval]
MapFunction = Callable[[Interval, Interval, Interval, Params], Triple]
HomotopyFunction = Callable[[Interval, Interval, Interval, Interval, Params], Triple]
LiftFunction = Callable[[Interval, Params], Interval]


# --- parameters -----------------------------------------------------------


def parse_parameter(value) -> Tuple[Interval, bool]:
    """Parameter value and whether it is a family (a ``lo:hi`` range)

    Accepts Intervals, ints, Fractions, Decimals and strings holding a decimal,
    a fraction ``a/b`` or a range ``lo:hi``.
    """
    if isinstance(value, Interval):
        return value, False
    if isinstance(value, str) and ":" in value:
        lo_text, _, hi_text = value.partition(":")
        try:
            lo = Interval.from_decimal(lo_text)
            hi = Interval.from_decimal(hi_text)
        except IntervalError as e:
            raise ParameterError(f"invalid parameter range {value!r}") from e
        if not lo.hi <= hi.lo:
            raise ParameterError(f"parameter range {value!r} has lo > hi")
        return Interval(lo.lo, hi.hi), True
    if isinstance(value, float):
        raise ParameterError(f"parameter {value!r} must be given exactly (string, int or fraction)")
    try:
        return Interval.coerce(value), False
    except IntervalError as e:
        raise ParameterError(f"invalid parameter value {value!r}") from e


class _ParamReader:
    """Validated access to a builtin's parameters"""

    def __init__(self, name: str, raw: Optional[Mapping]):
        self.name = name
        self.values: Params = {}
        self.family: List[str] = []
        self._given = {}
        for key, value in (raw or {}).items():
            self._given[key], is_family = parse_parameter(value)
            if is_family:
                self.family.append(key)

    def get(self, key: str, default=None) -> Interval:
        if key in self._given:
            value = self._given[key]
        elif default is None:
            raise ParameterError(f"{self.name} requires parameter {key!r}")
        else:
            value, is_family = parse_parameter(default)
            if is_family:
                self.family.append(key)
        self.values[key] = value
        return value

    def integer(self, key: str, default: int, minimum: int = 0) -> int:
        value = self.get(key, default)
        lo = float(value.lo)
        if key in self.family or lo != float(value.hi) or not lo.is_integer() or lo < minimum:
            raise ParameterError(f"{self.name}: {key} must be an integer >= {minimum}, got {value}")
        return int(lo)

    def finish(self) -> Tuple[Params, Tuple[str, ...]]:
        unknown = set(self._given) - set(self.values)
        if unknown:
            raise ParameterError(
                f"{self.name} does not take parameter(s) {', '.join(sorted(unknown))} "
                f"(accepted: {', '.join(sorted(self.values))})"
            )
        return dict(self.values), tuple(k for k in self.values if k in self.family)


# --- specs ----------------------------------------------------------------


@dataclass(frozen=True)
class EtaLift:
    """Continuous lift L: [0, period] -> R of the base map η"""

    func: LiftFunction
    params: Params = field(default_factory=dict)
    declared_degree: Optional[int] = None
    period: Interval = TWO_PI
    description: str = ""

    def lift(self, theta: Interval) -> Interval:
        return _fit(self.func(theta, self.params), theta.shape)

    __call__ = lift

    def with_params(self, **updates: Interval) -> "EtaLift":
        return replace(self, params={**self.params, **updates})


ExpansionFunction = Callable[[Interval, Params], Interval]


@dataclass(frozen=True)
class MapSpec:
    name: str
    func: MapFunction
    params: Params = field(default_factory=dict)
    family: Tuple[str, ...] = ()
    period: Interval = TWO_PI
    eta: Optional[EtaLift] = None
    endpoint_A: Optional[ExpansionFunction] = None

    def eval(self, theta: Interval, x: Interval, y: Interval) -> Triple:
        shape = np.broadcast_shapes(theta.shape, x.shape, y.shape)
        return tuple(_fit(v, shape) for v in self.func(theta, x, y, self.params))

    __call__ = eval

    def with_params(self, **updates: Interval) -> "MapSpec":
        """Copy with some parameter values replaced (no re-validation)"""
        return replace(
            self,
            params={**self.params, **updates},
            eta=None if self.eta is None else self.eta.with_params(**updates),
        )


@dataclass(frozen=True)
class HomotopySpec:
    name: str
    func: HomotopyFunction
    eta: EtaLift
    endpoint_A: Optional[ExpansionFunction]
    base_map: MapSpec
    params: Params = field(default_factory=dict)
    family: Tuple[str, ...] = ()
    period: Interval = TWO_PI

    def eval(self, alpha: Interval, theta: Interval, x: Interval, y: Interval) -> Triple:
        shape = np.broadcast_shapes(alpha.shape, theta.shape, x.shape, y.shape)
        return tuple(_fit(v, shape) for v in self.func(alpha, theta, x, y, self.params))

    __call__ = eval

    def expansion(self, theta: Interval) -> Interval:
        """Enclosure of the declared linear coefficient A_θ"""
        if self.endpoint_A is None:
            raise ParameterError(f"{self.name} declares no expansion coefficient")
        return _fit(self.endpoint_A(theta, self.params), theta.shape)

    def with_params(self, **updates: Interval) -> "HomotopySpec":
        return replace(
            self,
            params={**self.params, **updates},
            eta=self.eta.with_params(**updates),
            base_map=self.base_map.with_params(**updates),
        )

    def with_eta(self, eta: EtaLift) -> "HomotopySpec":
        return replace(self, eta=eta)

    def with_expansion(self, endpoint_A: ExpansionFunction) -> "HomotopySpec":
        return replace(self, endpoint_A=endpoint_A)


Spec = Union[MapSpec, HomotopySpec]


def _fit(value, shape) -> Interval:
    value = Interval.coerce(value)
    if value.shape == tuple(shape):
        return value
    return value.broadcast(shape)


def _constant(value) -> ExpansionFunction:
    value = Interval.coerce(value)
    return lambda theta, params: value


def _linear_lift(k: int) -> EtaLift:
    """The lift θ -> kθ, degree k"""
    return EtaLift(lambda theta, params: k * theta, {}, k, TWO_PI, f"{k}*theta")


# --- registry -------------------------------------------------------------

BUILTINS: Dict[str, Callable[[_ParamReader], Spec]] = {}


def register(name: str):
    def decorator(builder):
        BUILTINS[name] = builder
        return builder

    return decorator


def builtin(name: str, params: Optional[Mapping] = None) -> Spec:
    """Look up a builtin map or homotopy and bind its parameters"""
    builder = BUILTINS.get(name)
    if builder is None:
        raise UnknownMapError(f"unknown map {name!r} (builtins: {', '.join(sorted(BUILTINS))})")
    spec = builder(_ParamReader(name, params))
    logger.debug(f"Built {name} with params {sorted(spec.params)} (family: {list(spec.family)})")
    return spec


# toy family

def _toy_params(p: _ParamReader) -> int:
    mu = p.get("mu")
    if not (float(mu.lo) > -0.5 and float(mu.hi) < 0.5):
        raise ParameterError(f"{p.name}: mu must satisfy |mu| < 1/2, got {mu}")
    return p.integer("winding", 3, minimum=1)


def _toy_f0(theta, x, y, params):
    return wrap(params["winding"] * theta), 4 * x, params["mu"] * y


def _toy_f1(theta, x, y, params):
    return wrap(params["winding"] * theta), -3 * x + 5 * power(x, 3), sin(theta) / 2 + params["mu"] * y


def _toy_fbeta(theta, x, y, params):
    beta = params["beta"]
    angle, x0, y0 = _toy_f0(theta, x, y, params)
    _, x1, y1 = _toy_f1(theta, x, y, params)
    return angle, (1 - beta) * x0 + beta * x1, (1 - beta) * y0 + beta * y1


def _toy_map(p: _ParamReader, name: str, func: MapFunction) -> MapSpec:
    k = _toy_params(p)
    params, family = p.finish()
    return MapSpec(
        name,
        func,
        params,
        family,
        eta=_linear_lift(k),
        endpoint_A=_constant(2),
    )


@register("toy_f0")
def _build_toy_f0(p: _ParamReader) -> MapSpec:
    return _toy_map(p, "toy_f0", _toy_f0)


@register("toy_f1")
def _build_toy_f1(p: _ParamReader) -> MapSpec:
    return _toy_map(p, "toy_f1", _toy_f1)


def _beta(p: _ParamReader, default=None) -> Interval:
    beta = p.get("beta", default)
    if not subset(beta, UNIT):
        raise ParameterError(f"{p.name}: beta must lie in [0, 1], got {beta}")
    return beta


@register("toy_fbeta")
def _build_toy_fbeta(p: _ParamReader) -> MapSpec:
    _beta(p)
    return _toy_map(p, "toy_fbeta", _toy_fbeta)


@register("toy_homotopy")
def _build_toy_homotopy(p: _ParamReader) -> HomotopySpec:
    _beta(p, default="0:1")
    base = _toy_map(p, "toy_fbeta", _toy_fbeta)
    return replace(straight_line_homotopy(base), name="toy_homotopy")


# computer-assisted example

def _cap_params(p: _ParamReader):
    p.get("mu", "1/10")
    p.get("linear_coeff", "8/5")
    return p.finish()


def _cap_map(theta, x, y, params):
    s = sin(theta)
    return (
        3 * theta + x * y * s,
        4 * power(x, 3) - params["linear_coeff"] * x + x * y / 2,
        params["mu"] * y + 2 * s / 5 + x * cos(theta),
    )


def _cap_homotopy(alpha, theta, x, y, params):
    rest = 1 - alpha
    return (
        3 * theta + rest * x * y * sin(theta),
        alpha * 2 * x + rest * (-params["linear_coeff"] * x + 4 * power(x, 3) + x * y / 2),
        rest * (params["mu"] * y + 2 * sin(theta) / 5 + x * cos(theta)),
    )


def _cap_base(params, family) -> MapSpec:
    return MapSpec(
        "cap_map",
        _cap_map,
        params,
        family,
        eta=_linear_lift(3),
        endpoint_A=_constant(2),
    )


@register("cap_map")
def _build_cap_map(p: _ParamReader) -> MapSpec:
    return _cap_base(*_cap_params(p))


@register("cap_homotopy")
def _build_cap_homotopy(p: _ParamReader) -> HomotopySpec:
    params, family = _cap_params(p)
    base = _cap_base(params, family)
    return HomotopySpec(
        "cap_homotopy",
        _cap_homotopy,
        eta=base.eta,
        endpoint_A=base.endpoint_A,
        base_map=base,
        params=params,
        family=family,
    )


# linear model of a normally hyperbolic invariant manifold

def _nhim_rates(params):
    k = int(params["iterates"].lo)
    return power(params["a"], k) / params["C"], params["C"] * power(params["b"], k), k


def _linear_nhim(theta, x, y, params):
    grow, shrink, k = _nhim_rates(params)
    return theta + k * params["rotation"], grow * x, shrink * y


@register("linear_nhim")
def _build_linear_nhim(p: _ParamReader) -> MapSpec:
    p.get("a")
    p.get("b")
    C = p.get("C", 1)
    if not C.lo > 0:
        raise ParameterError(f"linear_nhim: C must be positive, got {C}")
    p.integer("iterates", 1, minimum=1)
    p.get("rotation", 0)
    params, family = p.finish()

    def lift(theta, params):
        return theta + int(params["iterates"].lo) * params["rotation"]

    return MapSpec(
        "linear_nhim",
        _linear_nhim,
        params,
        family,
        eta=EtaLift(lift, params, 1, TWO_PI, "theta + iterates*rotation"),
        endpoint_A=lambda theta, params: _nhim_rates(params)[0],
    )


# --- homotopy construction --------------------------------------------------


def straight_line_homotopy(
    base: MapSpec,
    eta: Optional[EtaLift] = None,
    endpoint_A: Optional[ExpansionFunction] = None,
    unstable: bool = True,
) -> HomotopySpec:
    """h(α) = (θ-part of f; (1-α) f_x + α A_θ x, (1-α) f_y)

    Uses the map's declared η-lift and coefficient unless others are given.
    ``unstable=False`` builds the endpoint (η(θ); 0) of the u = 0 case.
    """
    eta = eta or base.eta
    endpoint_A = endpoint_A or base.endpoint_A
    if eta is None:
        raise ParameterError(f"{base.name} declares no eta lift; give one explicitly")
    if unstable and endpoint_A is None:
        raise ParameterError(f"{base.name} declares no expansion coefficient; give one explicitly")

    def func(alpha, theta, x, y, params):
        angle, fx, fy = base.func(theta, x, y, params)
        rest = 1 - alpha
        if unstable:
            hx = rest * fx + alpha * endpoint_A(theta, params) * x
        else:
            hx = rest * fx
        return angle, hx, rest * fy

    return HomotopySpec(
        f"{base.name}_homotopy",
        func,
        eta=eta,
        endpoint_A=endpoint_A if unstable else None,
        base_map=base,
        params=base.params,
        family=base.family,
        period=base.period,
    )


def constant_homotopy(base: MapSpec) -> HomotopySpec:
    """h(α) = f for every α; only meaningful for the exit and entry conditions"""

    def func(alpha, theta, x, y, params):
        return base.func(theta, x, y, params)

    eta = base.eta or _linear_lift(1)
    return HomotopySpec(
        f"{base.name}_constant",
        func,
        eta=eta,
        endpoint_A=base.endpoint_A,
        base_map=base,
        params=base.params,
        family=base.family,
        period=base.period,
    )


def as_homotopy(spec: Spec) -> HomotopySpec:
    if isinstance(spec, HomotopySpec):
        return spec
    return straight_line_homotopy(spec)


def family_members(spec: Spec, n_family: int) -> List[Tuple[Dict[str, Interval], Spec]]:
    """Split every family parameter into n_family parts; one spec per combination"""
    if not spec.family:
        return [({}, spec)]
    axes = [[(name, parts(spec.params[name], n_family)[i]) for i in range(n_family)] for name in spec.family]
    members = []
    for combo in itertools.product(*axes):
        assignment = dict(combo)
        members.append((assignment, spec.with_params(**assignment)))
    return members


# --- evaluation -------------------------------------------------------------


def eval_homotopy(h: HomotopySpec, cell: Cell) -> Cell:
    """Interval image of h over one cell"""
    alpha = cell.alpha if cell.alpha is not None else Interval(0.0)
    if not subset(alpha, UNIT):
        raise ParameterError(f"alpha must lie in [0, 1], got {alpha}")
    try:
        theta, x, y = h.eval(alpha, cell.theta, cell.x, cell.y)
    except IntervalError as e:
        raise EvaluationError(f"{h.name}: {e}", cell) from e
    return Cell(theta, x, y, alpha)


def eval_homotopy_batch(h: HomotopySpec, cells: CellBatch) -> Triple:
    """Interval images of h over a batch; errors name the first offending cell"""
    try:
        return h.eval(cells.alpha, cells.theta, cells.x, cells.y)
    except IntervalError:
        for i in range(len(cells)):
            eval_homotopy(h, cells[i])
        raise


def eval_map_batch(f: MapSpec, cells: CellBatch) -> Triple:
    try:
        return f.eval(cells.theta, cells.x, cells.y)
    except IntervalError:
        for i in range(len(cells)):
            cell = cells[i]
            try:
                f.eval(cell.theta, cell.x, cell.y)
            except IntervalError as e:
                raise EvaluationError(f"{f.name}: {e}", cell) from e
        raise


def check_endpoint(h: HomotopySpec, d: DomainSpec, samples: int = 64, seed: int = 0) -> List[Cell]:
    """Sampled cells where h(1, ·) does not meet the declared (η(θ); A_θ·x, 0)

    Points are compared as degenerate intervals; angles are compared modulo the period.
    """
    rng = np.random.default_rng(seed)
    theta = Interval(rng.uniform(0.0, float(d.period.lo), samples))
    x_box = d.x_box
    x = Interval(rng.uniform(float(x_box.lo), float(x_box.hi), samples))
    y = Interval(rng.uniform(float(d.y_box.lo), float(d.y_box.hi), samples))
    one = Interval(np.ones(samples))
    angle, hx, hy = h.eval(one, theta, x, y)
    expected_x = h.expansion(theta) * x if d.has_unstable else Interval(np.zeros(samples))
    ok = (
        np.asarray(intersects(wrap(angle, h.period), wrap(h.eta(theta), h.period)))
        & np.asarray(intersects(hx, expected_x))
        & np.asarray(intersects(hy, Interval(np.zeros(samples))))
    )
    bad = CellBatch(theta, x, y, one).select(~ok)
    for cell in bad:
        logger.warning(f"{h.name}: endpoint at alpha=1 differs from declared endpoint at {cell}")
    if not len(bad):
        logger.debug(f"{h.name}: endpoint consistent on {samples} sampled points")
    return list(bad)


# --- expression-defined maps ------------------------------------------------


def _constants(raw: Optional[Mapping]) -> Tuple[Params, Tuple[str, ...]]:
    values, family = {}, []
    for key, value in (raw or {}).items():
        if key in COORDINATES or key == "pi":
            raise ParameterError(f"constant name {key!r} is reserved")
        values[key], is_family = parse_parameter(value)
        if is_family:
            family.append(key)
    return values, tuple(family)


def expression_eta(
    source: str, constants: Optional[Mapping] = None, declared_degree: Optional[int] = None
) -> EtaLift:
    params, _ = _constants(constants)
    expr = Expression(source, set(params) | {"theta"})
    return EtaLift(
        lambda theta, params: expr.evaluate({**params, "theta": theta}),
        params,
        declared_degree,
        TWO_PI,
        source,
    )


def expression_expansion(source: str, constants: Optional[Mapping] = None) -> ExpansionFunction:
    params, _ = _constants(constants)
    expr = Expression(source, set(params) | {"theta"})
    return lambda theta, params: expr.evaluate({**params, "theta": theta})


def expression_map(
    name: str,
    theta_out: str,
    x_out: str,
    y_out: str,
    constants: Optional[Mapping] = None,
    eta_lift: Optional[str] = None,
    A_coeff: Optional[str] = None,
) -> MapSpec:
    params, family = _constants(constants)
    compiled = compile_all(
        {"theta_out": theta_out, "x_out": x_out, "y_out": y_out}, set(params) | {"theta", "x", "y"}
    )
    exprs = [compiled["theta_out"], compiled["x_out"], compiled["y_out"]]

    def func(theta, x, y, params):
        env = {**params, "theta": theta, "x": x, "y": y}
        return tuple(e.evaluate(env) for e in exprs)

    return MapSpec(
        name,
        func,
        params,
        family,
        eta=None if eta_lift is None else expression_eta(eta_lift, constants),
        endpoint_A=None if A_coeff is None else expression_expansion(A_coeff, constants),
    )


def expression_homotopy(
    name: str,
    h_theta: str,
    h_x: str,
    h_y: str,
    eta_lift: str,
    A_coeff: Optional[str],
    constants: Optional[Mapping] = None,
    base_map: Optional[MapSpec] = None,
) -> HomotopySpec:
    params, family = _constants(constants)
    compiled = compile_all(
        {"h_theta": h_theta, "h_x": h_x, "h_y": h_y}, set(params) | {"alpha", "theta", "x", "y"}
    )
    exprs = [compiled["h_theta"], compiled["h_x"], compiled["h_y"]]

    def func(alpha, theta, x, y, params):
        env = {**params, "alpha": alpha, "theta": theta, "x": x, "y": y}
        return tuple(e.evaluate(env) for e in exprs)

    eta = expression_eta(eta_lift, constants)
    endpoint_A = None if A_coeff is None else expression_expansion(A_coeff, constants)
    if base_map is None:
        base_map = MapSpec(
            name,
            lambda theta, x, y, params: func(Interval(0.0), theta, x, y, params),
            params,
            family,
            eta=eta,
            endpoint_A=endpoint_A,
        )
    return HomotopySpec(name, func, eta, endpoint_A, base_map, params, family)
