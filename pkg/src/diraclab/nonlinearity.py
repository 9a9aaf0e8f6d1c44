"""Nonlinearities F(x, z) with exact directional derivatives up to order 3.

The k-th derivative here is the k-th Taylor coefficient map: a symmetric
k-linear form D_k with F(x, z+h) = F(x, z) + D_1(h) + D_2(h, h) + D_3(h, h, h)
+ O(|h|^4).  Directions are treated as *real*-multilinear arguments (C^4
realified to R^8), because the physically interesting models involve
conjugates; models whose derivative maps happen to be complex-linear carry a
``holomorphic`` flag.

All callables broadcast: x has shape (..., 3), z and directions (..., 4).
Exact derivatives are hand-coded per model; the finite-difference routine
below is only an oracle for validating them and is never used by the
recovery pipeline.
"""

from __future__ import annotations

import math

import numpy as np

from .algebra import BETA_DIAG, realify

__all__ = [
    "Nonlinearity",
    "make_model",
    "builtin_names",
    "derivative",
    "fd_derivative_oracle",
    "taylor_remainder",
    "jacobian_real",
]


def _re_pair(a, b, weight=None):
    """Re <a, b>_w = Re sum_i conj(a_i) w_i b_i, a real symmetric pairing."""
    prod = (np.conj(a) * b).real
    if weight is not None:
        prod = prod * weight
    return np.sum(prod, axis=-1)


class Nonlinearity:
    """Base class; concrete models override value/d1/d2/d3."""

    name = "base"
    holomorphic = False

    def __init__(self, **params):
        self.params = params

    def value(self, x, z):
        raise NotImplementedError

    def d1(self, x, z, v):
        raise NotImplementedError

    def d2(self, x, z, v, w):
        """Half the second directional derivative (Taylor normalization)."""
        raise NotImplementedError

    def d3(self, x, z, v1, v2, v3):
        """One sixth of the third directional derivative."""
        raise NotImplementedError

    def __repr__(self):
        args = ", ".join(f"{k}={v!r}" for k, v in self.params.items())
        return f"{type(self).__name__}({args})"


class ZeroModel(Nonlinearity):
    name = "zero"
    holomorphic = True

    def value(self, x, z):
        return np.zeros_like(np.asarray(z, dtype=complex))

    def d1(self, x, z, v):
        return np.zeros_like(np.asarray(v, dtype=complex))

    def d2(self, x, z, v, w):
        return np.zeros_like(np.asarray(v, dtype=complex))

    def d3(self, x, z, v1, v2, v3):
        return np.zeros_like(np.asarray(v1, dtype=complex))


class LinearMassShift(Nonlinearity):
    """F(z) = c * beta z, a complex-linear mass perturbation."""

    name = "linear"
    holomorphic = True

    def __init__(self, coupling=1.0):
        super().__init__(coupling=float(coupling))
        self.c = float(coupling)

    def value(self, x, z):
        return self.c * BETA_DIAG * np.asarray(z, dtype=complex)

    def d1(self, x, z, v):
        return self.c * BETA_DIAG * np.asarray(v, dtype=complex)

    def d2(self, x, z, v, w):
        return np.zeros_like(np.asarray(v, dtype=complex))

    def d3(self, x, z, v1, v2, v3):
        return np.zeros_like(np.asarray(v1, dtype=complex))


class _CubicForm(Nonlinearity):
    """Shared machinery for F(z) = g(x) * q(z, z) * (L z).

    q(a, b) = Re sum conj(a) w b is a real symmetric pairing with diagonal
    weight w; L is a diagonal matrix.  Covers the beta-weighted cubic
    (w = L = beta) and the plain |z|^2 z cubic (w = L = 1), optionally
    modulated by a smooth scalar g(x).
    """

    weight = None  # None means identity
    lmat = None

    def _g(self, x):
        return 1.0

    def _lz(self, a):
        a = np.asarray(a, dtype=complex)
        return a if self.lmat is None else self.lmat * a

    def _q(self, a, b):
        return _re_pair(a, b, self.weight)

    def value(self, x, z):
        return np.asarray(self._g(x))[..., None] * self._q(z, z)[..., None] * self._lz(z)

    def d1(self, x, z, v):
        out = 2.0 * self._q(z, v)[..., None] * self._lz(z) + self._q(z, z)[..., None] * self._lz(v)
        return np.asarray(self._g(x))[..., None] * out

    def d2(self, x, z, v, w):
        out = (
            self._q(v, w)[..., None] * self._lz(z)
            + self._q(z, v)[..., None] * self._lz(w)
            + self._q(z, w)[..., None] * self._lz(v)
        )
        return np.asarray(self._g(x))[..., None] * out

    def d3(self, x, z, v1, v2, v3):
        out = (
            self._q(v2, v3)[..., None] * self._lz(v1)
            + self._q(v1, v3)[..., None] * self._lz(v2)
            + self._q(v1, v2)[..., None] * self._lz(v3)
        ) / 3.0
        return np.asarray(self._g(x))[..., None] * out


class SolerCubic(_CubicForm):
    """F(z) = (z* beta z) beta z, scaled by a real coupling."""

    name = "soler"

    def __init__(self, coupling=1.0):
        super().__init__(coupling=float(coupling))
        c = float(coupling)
        self.weight = BETA_DIAG
        self.lmat = c * BETA_DIAG

    def _g(self, x):
        return 1.0


class PointwiseCubic(_CubicForm):
    """F(z) = |z|^2 z, scaled by a real coupling."""

    name = "cubic"

    def __init__(self, coupling=1.0):
        super().__init__(coupling=float(coupling))
        self.coupling = float(coupling)

    def _g(self, x):
        return self.coupling


class ModulatedCubic(_CubicForm):
    """F(x, z) = g(x) |z|^2 z with g(x) = g0 + g1 * cos(direction . x)."""

    name = "xcubic"

    def __init__(self, g0=1.0, g1=1.0, direction=(1.0, 0.0, 0.0)):
        direction = tuple(float(d) for d in direction)
        super().__init__(g0=float(g0), g1=float(g1), direction=direction)
        self.g0 = float(g0)
        self.g1 = float(g1)
        self.direction = np.asarray(direction, dtype=float)

    def _g(self, x):
        x = np.asarray(x, dtype=float)
        return self.g0 + self.g1 * np.cos(np.sum(x * self.direction, axis=-1))


class Quintic(Nonlinearity):
    """F(z) = |z|^4 z; its third derivative vanishes at z = 0."""

    name = "quintic"

    def __init__(self, coupling=1.0):
        super().__init__(coupling=float(coupling))
        self.c = float(coupling)

    @staticmethod
    def _r(a, b):
        return _re_pair(a, b)

    def value(self, x, z):
        z = np.asarray(z, dtype=complex)
        s = self._r(z, z)
        return self.c * (s * s)[..., None] * z

    def d1(self, x, z, v):
        z = np.asarray(z, dtype=complex)
        v = np.asarray(v, dtype=complex)
        s = self._r(z, z)
        return self.c * (4.0 * (s * self._r(z, v))[..., None] * z + (s * s)[..., None] * v)

    def d2(self, x, z, v, w):
        z = np.asarray(z, dtype=complex)
        v = np.asarray(v, dtype=complex)
        w = np.asarray(w, dtype=complex)
        s = self._r(z, z)
        rv, rw = self._r(z, v), self._r(z, w)
        out = (
            (4.0 * rv * rw + 2.0 * s * self._r(v, w))[..., None] * z
            + (2.0 * s * rv)[..., None] * w
            + (2.0 * s * rw)[..., None] * v
        )
        return self.c * out

    def d3(self, x, z, v1, v2, v3):
        z = np.asarray(z, dtype=complex)
        v1 = np.asarray(v1, dtype=complex)
        v2 = np.asarray(v2, dtype=complex)
        v3 = np.asarray(v3, dtype=complex)
        s = self._r(z, z)
        r1, r2, r3 = self._r(z, v1), self._r(z, v2), self._r(z, v3)
        r12, r13, r23 = self._r(v1, v2), self._r(v1, v3), self._r(v2, v3)
        out = (
            (4.0 / 3.0) * (r12 * r3 + r13 * r2 + r23 * r1)[..., None] * z
            + ((4.0 * r2 * r3 + 2.0 * s * r23) / 3.0)[..., None] * v1
            + ((4.0 * r1 * r3 + 2.0 * s * r13) / 3.0)[..., None] * v2
            + ((4.0 * r1 * r2 + 2.0 * s * r12) / 3.0)[..., None] * v3
        )
        return self.c * out


class SumModel(Nonlinearity):
    """Pointwise sum of nonlinearities (used for the cubic+quintic blend)."""

    name = "sum"

    def __init__(self, parts, name=None):
        super().__init__(parts=[p.name for p in parts])
        self.parts = list(parts)
        if name:
            self.name = name
        self.holomorphic = all(p.holomorphic for p in parts)

    def value(self, x, z):
        return sum(p.value(x, z) for p in self.parts)

    def d1(self, x, z, v):
        return sum(p.d1(x, z, v) for p in self.parts)

    def d2(self, x, z, v, w):
        return sum(p.d2(x, z, v, w) for p in self.parts)

    def d3(self, x, z, v1, v2, v3):
        return sum(p.d3(x, z, v1, v2, v3) for p in self.parts)


_REGISTRY = {
    "zero": ZeroModel,
    "linear": LinearMassShift,
    "soler": SolerCubic,
    "cubic": PointwiseCubic,
    "xcubic": ModulatedCubic,
    "quintic": Quintic,
}


def builtin_names():
    return sorted(_REGISTRY) + ["soler+quintic"]


def make_model(name: str, **params) -> Nonlinearity:
    """Instantiate a built-in model by name; raises ValueError on bad input."""
    if name == "soler+quintic":
        weight = params.pop("quintic_weight", 1.0)
        if params:
            raise ValueError(f"unknown parameters for {name}: {sorted(params)}")
        return SumModel(
            [SolerCubic(), Quintic(coupling=weight)], name="soler+quintic"
        )
    if name not in _REGISTRY:
        raise ValueError(f"unknown model '{name}'; choose from {builtin_names()}")
    try:
        return _REGISTRY[name](**params)
    except TypeError as exc:
        raise ValueError(f"bad parameters for model '{name}': {exc}") from None


def derivative(model: Nonlinearity, x, z, k: int, directions):
    """k-th Taylor-coefficient form of the model, k in {1, 2, 3}."""
    directions = list(directions)
    if k not in (1, 2, 3):
        raise ValueError(f"derivative order k={k} unsupported (need 1, 2 or 3)")
    if len(directions) != k:
        raise ValueError(f"expected {k} directions, got {len(directions)}")
    if k == 1:
        return model.d1(x, z, directions[0])
    if k == 2:
        return model.d2(x, z, directions[0], directions[1])
    return model.d3(x, z, directions[0], directions[1], directions[2])


def fd_derivative_oracle(model: Nonlinearity, x, z, k: int, directions, h: float):
    """Central-difference estimate of derivative(...) with O(h^2) error.

    Applies k nested symmetric differences along real multiples of each
    direction and divides by k!; independent of the hand-coded derivatives.
    """
    if not 1e-5 <= h <= 1e-1:
        raise ValueError(f"step h={h} outside the supported range [1e-5, 1e-1]")
    directions = [np.asarray(d, dtype=complex) for d in directions]
    if len(directions) != k:
        raise ValueError(f"expected {k} directions, got {len(directions)}")

    def nested(center, dirs):
        if not dirs:
            return model.value(x, center)
        v = dirs[0]
        return (nested(center + h * v, dirs[1:]) - nested(center - h * v, dirs[1:])) / (
            2.0 * h
        )

    return nested(np.asarray(z, dtype=complex), directions) / math.factorial(k)


def taylor_remainder(model: Nonlinearity, x, z, h_list, direction=None):
    """|F(z + t*d) - degree-3 Taylor sum| for each scale t in h_list.

    Returns (remainders, slope) where slope is the log-log fit of remainder
    against t (nan when the remainders sit at rounding level, e.g. for models
    that are polynomials of degree <= 3).
    """
    z = np.asarray(z, dtype=complex)
    if direction is None:
        direction = np.array([0.6 + 0.2j, -0.3 + 0.4j, 0.5 - 0.1j, 0.2 + 0.7j])
    d = np.asarray(direction, dtype=complex)
    base = model.value(x, z)
    rems = []
    for t in h_list:
        h = t * d
        taylor = (
            base
            + model.d1(x, z, h)
            + model.d2(x, z, h, h)
            + model.d3(x, z, h, h, h)
        )
        rems.append(float(np.linalg.norm(model.value(x, z + h) - taylor)))
    rems = np.asarray(rems)
    scale = max(np.linalg.norm(base), 1.0)
    if np.all(rems <= 1e-13 * scale):
        return rems, float("nan")
    from .util import loglog_slope

    return rems, loglog_slope(np.asarray(h_list, dtype=float), rems)


def jacobian_real(model: Nonlinearity, x, z) -> np.ndarray:
    """Realified 8x8 matrix (batched: (..., 8, 8)) of v -> d1(x, z, v)."""
    z = np.asarray(z, dtype=complex)
    batch = z.shape[:-1]
    out = np.empty(batch + (8, 8))
    for k in range(4):
        e = np.zeros(4, dtype=complex)
        e[k] = 1.0
        out[..., :, k] = realify(model.d1(x, z, np.broadcast_to(e, z.shape)))
        out[..., :, 4 + k] = realify(model.d1(x, z, np.broadcast_to(1j * e, z.shape)))
    return out
