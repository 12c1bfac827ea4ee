"""Vortex/coupling data model and the Chern–Simons nonlinearity."""

from dataclasses import dataclass, field
from math import isfinite, log, sqrt

import numpy as np


# Generalized model: f(u) = e^u (e^u - 1)^5
POWER = 5


def _as_array(u):
    return np.asarray(u, dtype=float)


def _unwrap(x, like):
    return float(x) if np.ndim(like) == 0 else x


@dataclass(frozen=True)
class Nonlinearity:
    """The family f_p(u) = e^u (e^u − 1)^p and its companions.

    p = 5 is the generalized self-dual model, p = 1 the classical
    Chern–Simons nonlinearity. All members accept scalars or arrays and use
    `expm1` so nothing cancels catastrophically near u = 0; e^u underflows
    to exactly 0 for very negative u.
    """
    power: int = POWER

    def __post_init__(self):
        if self.power < 1:
            raise ValueError(f"power must be >= 1, got {self.power}")

    def f(self, u):
        x = _as_array(u)
        with np.errstate(over='ignore', invalid='ignore'):
            em1 = np.expm1(x)
            out = (em1 + 1.0) * em1 ** self.power
        return _unwrap(out, u)

    def f_prime(self, u):
        p = self.power
        x = _as_array(u)
        with np.errstate(over='ignore', invalid='ignore'):
            e = np.exp(x)
            em1 = np.expm1(x)
            out = e * em1 ** (p - 1) * ((p + 1) * e - 1.0)
        return _unwrap(out, u)

    def g(self, u):
        """Truncated form: e^u (1 − e^u)^p for u ≤ 0, 0 for u > 0."""
        x = _as_array(u)
        xm = np.minimum(x, 0.0)
        em1 = np.expm1(xm)
        out = np.where(x > 0, 0.0, (em1 + 1.0) * (-em1) ** self.power)
        return _unwrap(out, u)

    def g_prime(self, u):
        """Derivative of `g`; the left derivative at 0 (which is 0 for p ≥ 2)."""
        x = _as_array(u)
        xm = np.minimum(x, 0.0)
        # g = (−1)^p f on u ≤ 0
        out = np.where(x > 0, 0.0, (-1.0) ** self.power * self.f_prime(xm))
        return _unwrap(out, u)

    def F(self, u):
        """Antiderivative (e^u − 1)^(p+1)/(p+1), so that F′ = f and F(0) = 0."""
        x = _as_array(u)
        with np.errstate(over='ignore'):
            out = np.expm1(x) ** (self.power + 1) / (self.power + 1)
        return _unwrap(out, u)

    def G(self, u):
        """Antiderivative of `g` vanishing at −∞: [1 − (1 − e^u)^(p+1)]/(p+1) for u ≤ 0."""
        x = _as_array(u)
        xm = np.minimum(x, 0.0)
        out = (1.0 - (-np.expm1(xm)) ** (self.power + 1)) / (self.power + 1)
        return _unwrap(out, u)

    @property
    def constants(self) -> 'NonlinearityConstants':
        return NonlinearityConstants.for_power(self.power)


FIVE = Nonlinearity(5)
CLASSICAL = Nonlinearity(1)


def nonlinearity_f(u):
    return FIVE.f(u)


def nonlinearity_f_prime(u):
    return FIVE.f_prime(u)


def truncated_g(u):
    return FIVE.g(u)


def antiderivative_F(u):
    return FIVE.F(u)


@dataclass(frozen=True)
class NonlinearityConstants:
    """Extremal data of f on u ≤ 0.

    `fprime_bound` is the bound on |f′| the iteration constant is sized
    against; for p = 5 the true supremum is ≈ 0.073, well under 5.
    """
    u_star: float = log(1 / 6)
    f_min: float = -5 ** 5 / 6 ** 6
    fprime_bound: float = 5.0
    power: int = POWER

    @classmethod
    def for_power(cls, p: int) -> 'NonlinearityConstants':
        return cls(
            u_star=-log(p + 1),
            # even p: (e^u − 1)^p ≥ 0, so f ≥ 0 on u ≤ 0 with minimum 0 at u = 0
            f_min=-(p ** p) / (p + 1) ** (p + 1) if p % 2 else 0.0,
            fprime_bound=float(p),
            power=p,
        )

    @property
    def g_max(self) -> float:
        """sup over u ≤ 0 of e^u (1 − e^u)^p."""
        p = self.power
        return p ** p / (p + 1) ** (p + 1)

    def default_K(self, lambda_: float) -> float:
        """Smallest licensed iteration constant, (p + 1)·λ (6λ for p = 5)."""
        return (self.power + 1) * lambda_


CONSTANTS = NonlinearityConstants()


def far_field_amplitude(lambda_: float, power: int = POWER) -> float:
    """Amplitude c of the topological far field u ≈ −c·r^(−2/(p−1)).

    Balances u″ against λe^{2t}|u|^p in t = ln r; for p = 5 this is
    c = (4λ)^(−1/4) and the decay is r^(−1/2).
    """
    if power < 2:
        raise ValueError("algebraic far field requires power >= 2")
    alpha = 2.0 / (power - 1)
    return (alpha * alpha / lambda_) ** (1.0 / (power - 1))


@dataclass(frozen=True)
class Coupling:
    """Chern–Simons coupling κ and λ = 12/κ²."""
    kappa: float
    lambda_: float = field(init=False)

    def __post_init__(self):
        if not (isfinite(self.kappa) and self.kappa > 0):
            raise ValueError(f"kappa must be positive, got {self.kappa}")
        object.__setattr__(self, 'lambda_', 12.0 / self.kappa ** 2)

    @classmethod
    def from_kappa(cls, kappa: float) -> 'Coupling':
        return cls(kappa)

    @classmethod
    def from_lambda(cls, lambda_: float) -> 'Coupling':
        if not (isfinite(lambda_) and lambda_ > 0):
            raise ValueError(f"lambda must be positive, got {lambda_}")
        c = cls(sqrt(12.0 / lambda_))
        object.__setattr__(c, 'lambda_', float(lambda_))
        return c


@dataclass(frozen=True)
class VortexSet:
    """Prescribed zeros p_s of φ with multiplicities n_s."""
    points: tuple[tuple[float, float], ...] = ()
    multiplicities: tuple[int, ...] = ()

    def __post_init__(self):
        points = tuple((float(x), float(y)) for x, y in self.points)
        mults = tuple(self.multiplicities)
        object.__setattr__(self, 'points', points)
        object.__setattr__(self, 'multiplicities', mults)
        if len(points) != len(mults):
            raise ValueError(f"{len(points)} points but {len(mults)} multiplicities")
        for n in mults:
            if int(n) != n or n < 1:
                raise ValueError(f"multiplicities must be positive integers, got {n}")
        if len(set(points)) != len(points):
            raise ValueError("vortex points must be pairwise distinct")

    @classmethod
    def single(cls, n: int = 1, at: tuple[float, float] = (0.0, 0.0)) -> 'VortexSet':
        return cls((at,), (n,))

    @classmethod
    def from_dicts(cls, items: list[dict]) -> 'VortexSet':
        return cls(
            tuple((d['x'], d['y']) for d in items),
            tuple(int(d['n']) for d in items),
        )

    def to_dicts(self) -> list[dict]:
        return [{'x': x, 'y': y, 'n': n} for (x, y), n in zip(self.points, self.multiplicities)]

    @property
    def N(self) -> int:
        return int(sum(self.multiplicities))

    @property
    def is_radial(self) -> bool:
        """All winding sits at one point (or there is none)."""
        return len(self.points) <= 1

    @property
    def center(self) -> tuple[float, float]:
        return self.points[0] if self.points else (0.0, 0.0)

    def __iter__(self):
        return iter(zip(self.points, self.multiplicities))

    def __len__(self):
        return len(self.points)
