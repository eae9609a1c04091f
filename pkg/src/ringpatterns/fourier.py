"""Additive characters, Fourier transforms, Gowers norms, and dual functions.

Transforms are the naive O(|R|^2) kind; every inequality here is checked at
desk scale where that is plenty.  Complex accumulation relies on numpy's
pairwise summation.
"""

from __future__ import annotations

import cmath
import csv
import itertools
import math
from functools import cached_property

import numpy as np

from .errors import BudgetExceeded
from .poly import IntPoly
from .rings import Ring

GOWERS_BUDGET = 10**8
DIRECT_GOWERS_CAP = 10**6


class Character:
    """An additive character, indexed by residues against the invariant factors."""

    def __init__(self, ring: Ring, index: tuple[int, ...]):
        st = ring.additive_structure
        self.ring = ring
        self.index = tuple(a % b for a, b in zip(index, st.invariant_factors))

    @property
    def is_trivial(self) -> bool:
        return not any(self.index)

    @cached_property
    def values(self) -> np.ndarray:
        ring = self.ring
        st = ring.additive_structure
        n = ring.characteristic
        weights = np.array(
            [(n // b) * a for a, b in zip(self.index, st.invariant_factors)], dtype=np.int64
        )
        phases = (st.coords_matrix @ weights) % n
        return _root_table(n)[phases]

    def __call__(self, x: int) -> complex:
        return complex(self.values[x])

    def power(self, c: int) -> "Character":
        return Character(self.ring, tuple(c * a for a in self.index))

    def conjugate(self) -> "Character":
        return self.power(-1)

    def __mul__(self, other: "Character") -> "Character":
        return Character(self.ring, tuple(a + b for a, b in zip(self.index, other.index)))

    def __eq__(self, other) -> bool:
        return isinstance(other, Character) and self.ring is other.ring and self.index == other.index

    def __hash__(self) -> int:
        return hash((id(self.ring), self.index))

    def __repr__(self) -> str:
        return f"Character{self.index}"


_ROOTS: dict[int, np.ndarray] = {}


def _root_table(n: int) -> np.ndarray:
    if n not in _ROOTS:
        _ROOTS[n] = np.exp(2j * np.pi * np.arange(n) / n)
    return _ROOTS[n]


def characters(ring: Ring) -> list[Character]:
    """All |R| additive characters; index 0 is trivial."""
    st = ring.additive_structure
    out = []
    for combo in itertools.product(*(range(b) for b in st.invariant_factors)):
        out.append(Character(ring, combo))
    assert len(out) == ring.size
    return out


class FunctionOnRing:
    """A table of complex values over the ring's elements."""

    def __init__(self, ring: Ring, values, bounded_by_one: bool = False):
        self.ring = ring
        vals = np.asarray(values, dtype=np.complex128)
        if vals.shape != (ring.size,):
            raise ValueError(f"need {ring.size} values, got shape {vals.shape}")
        if bounded_by_one and np.any(np.abs(vals) > 1 + 1e-12):
            raise ValueError("values exceed the claimed 1-bound")
        self.values = vals
        self.values.setflags(write=False)
        self.bounded_by_one = bounded_by_one

    @classmethod
    def constant(cls, ring: Ring, c: complex) -> "FunctionOnRing":
        return cls(ring, np.full(ring.size, c), bounded_by_one=abs(c) <= 1 + 1e-12)

    @classmethod
    def indicator(cls, ring: Ring, members) -> "FunctionOnRing":
        vals = np.zeros(ring.size)
        idx = list(members)
        if idx:
            vals[idx] = 1.0
        return cls(ring, vals, bounded_by_one=True)

    @classmethod
    def random_bounded(cls, ring: Ring, seed) -> "FunctionOnRing":
        rng = np.random.default_rng(seed)
        radius = np.sqrt(rng.uniform(size=ring.size))
        phase = rng.uniform(0, 2 * np.pi, size=ring.size)
        return cls(ring, radius * np.exp(1j * phase), bounded_by_one=True)

    @classmethod
    def random_indicator(cls, ring: Ring, seed, density: float = 0.5) -> "FunctionOnRing":
        rng = np.random.default_rng(seed)
        vals = (rng.uniform(size=ring.size) < density).astype(np.complex128)
        return cls(ring, vals, bounded_by_one=True)

    @classmethod
    def from_csv(cls, ring: Ring, path: str, bounded_by_one: bool = False) -> "FunctionOnRing":
        vals = np.zeros(ring.size, dtype=np.complex128)
        with open(path, newline="") as fh:
            for row in csv.reader(fh):
                if not row or row[0].strip().lower() in ("index", "#"):
                    continue
                idx = int(row[0])
                vals[idx] = float(row[1]) + 1j * float(row[2] if len(row) > 2 else 0.0)
        return cls(ring, vals, bounded_by_one=bounded_by_one)

    def mean(self) -> complex:
        return complex(self.values.mean())

    def conj(self) -> "FunctionOnRing":
        return FunctionOnRing(self.ring, np.conj(self.values), self.bounded_by_one)

    def translate(self, h: int) -> "FunctionOnRing":
        """x -> f(x + h)."""
        return FunctionOnRing(self.ring, self.values[self.ring.add_col(h)], self.bounded_by_one)

    def __mul__(self, other: "FunctionOnRing") -> "FunctionOnRing":
        return FunctionOnRing(
            self.ring,
            self.values * other.values,
            self.bounded_by_one and other.bounded_by_one,
        )


def z6_counterexample(ring: Ring | None = None) -> tuple[FunctionOnRing, FunctionOnRing]:
    """The 3-periodic phase pair on Z_6 breaking linear-average Gowers control."""
    from .rings import ModInt, make_ring

    if ring is None:
        ring = make_ring(ModInt(6))
    if ring.size != 6 or ring.characteristic != 6:
        raise ValueError("the builtin counterexample lives on Z_6")
    # the third phase must be 3*pi/4 for the derivative table to be 6-periodic
    phases = [cmath.exp(1j * math.pi / 4), cmath.exp(-1j * math.pi / 4), cmath.exp(3j * math.pi / 4)]
    f1 = np.array([phases[x % 3] for x in range(6)])
    f0 = 1 / f1
    return (
        FunctionOnRing(ring, f0, bounded_by_one=True),
        FunctionOnRing(ring, f1, bounded_by_one=True),
    )


def fourier_transform(f: FunctionOnRing) -> np.ndarray:
    """f^(chi) = sum_x f(x) chi(x), in the order characters() yields."""
    ring = f.ring
    return np.array([np.dot(f.values, chi.values) for chi in characters(ring)])


def inverse_transform(ring: Ring, fhat: np.ndarray) -> FunctionOnRing:
    """f(a) = avg_chi fhat(chi) chi(-a)."""
    chars = characters(ring)
    neg = ring.neg_table
    vals = np.zeros(ring.size, dtype=np.complex128)
    for coeff, chi in zip(fhat, chars):
        vals += coeff * chi.values[neg]
    return FunctionOnRing(ring, vals / ring.size)


def discrete_derivative(f: FunctionOnRing, h_list) -> FunctionOnRing:
    """Iterated multiplicative derivative f(x+h) conj f(x); order irrelevant."""
    vals = f.values
    ring = f.ring
    for h in h_list:
        vals = vals[ring.add_col(h)] * np.conj(vals)
    return FunctionOnRing(ring, vals, f.bounded_by_one)


def gowers_norm(f: FunctionOnRing, s: int, budget: int = GOWERS_BUDGET) -> float:
    """The U^s uniformity (semi)norm.

    Below the direct cap this is the literal (s+1)-fold average; above it the
    recursion over derivative shifts is used.  The two paths agree on overlap.
    """
    if s < 1:
        raise ValueError("s must be at least 1")
    size = f.ring.size
    if size ** (s + 1) <= DIRECT_GOWERS_CAP:
        power = _gowers_power_direct(f.values, f.ring, s)
    else:
        if size**s > budget:
            raise BudgetExceeded(f"|R|^{s} = {size**s} exceeds budget {budget}")
        power = _gowers_power_recursive(f.values, f.ring, s)
    return max(power, 0.0) ** (1.0 / 2**s)


def gowers_norm_direct(f: FunctionOnRing, s: int) -> float:
    return max(_gowers_power_direct(f.values, f.ring, s), 0.0) ** (1.0 / 2**s)


def _gowers_power_recursive(vals: np.ndarray, ring: Ring, s: int) -> float:
    if s == 1:
        m = vals.mean()
        return (m * np.conj(m)).real
    total = 0.0
    for h in range(ring.size):
        dvals = vals[ring.add_col(h)] * np.conj(vals)
        total += _gowers_power_recursive(dvals, ring, s - 1)
    return total / ring.size


def _gowers_power_direct(vals: np.ndarray, ring: Ring, s: int) -> float:
    total = 0.0 + 0.0j
    for hs in itertools.product(range(ring.size), repeat=s):
        dvals = vals
        for h in hs:
            dvals = dvals[ring.add_col(h)] * np.conj(dvals)
        total += dvals.mean()
    return (total / ring.size**s).real


def dual_function(
    ring: Ring,
    family: list[IntPoly],
    funcs: list[FunctionOnRing],
    char_args: list[tuple[Character, IntPoly]],
    k: int,
) -> FunctionOnRing:
    """g(x) = avg_y prod_{i != k} f_i(x + P_i(y) - P_k(y)) prod_j psi_j(Q_j(y)).

    The family lists P_1..P_m; index 0 refers to P_0 = 0 and must satisfy
    0 <= k <= m.  The defining identity is Lambda(F; Psi) = avg_x f_k(x) g(x).
    """
    m = len(family)
    if not 0 <= k <= m:
        raise ValueError("k out of range")
    if len(funcs) != m + 1:
        raise ValueError("need m+1 functions")
    n_vars = family[0].n_vars if family else 1
    polys = [IntPoly.zero(n_vars)] + list(family)
    tables = [ring.poly_table(p, n_vars) for p in polys]
    psi_tables = []
    for psi, q in char_args:
        qt = ring.poly_table(q, n_vars)
        psi_tables.append(psi.values[qt])
    total = np.zeros(ring.size, dtype=np.complex128)
    n_points = ring.size**n_vars
    for yi in range(n_points):
        term = np.ones(ring.size, dtype=np.complex128)
        pk = tables[k][yi]
        for i in range(m + 1):
            if i == k:
                continue
            shift = ring.sub(tables[i][yi], pk)
            term = term * funcs[i].values[ring.add_col(shift)]
        for pv in psi_tables:
            term = term * pv[yi]
        total += term
    return FunctionOnRing(ring, total / n_points)


def pel51_check(ring: Ring, xi_list: list[np.ndarray], s: int, n: int) -> tuple[float, float]:
    """Both sides of the degree-lowering inequality for y-averaged products.

    Functions xi live on R x R^n as arrays of shape (|R|, |R|^n).  Returns
    (||g||_{U^s}^{2^{2s-2}}, avg_h ||g_h||_{U^2}^4) for s in {2, 3}.
    """
    if s not in (2, 3):
        raise ValueError("s must be 2 or 3")
    for xi in xi_list:
        if xi.shape != (ring.size, ring.size**n):
            raise ValueError("xi tables must have shape (|R|, |R|^n)")
    g = _averaged_product(xi_list)
    gf = FunctionOnRing(ring, g)
    lhs = gowers_norm(gf, s) ** (2 ** (2 * s - 2))
    if s == 2:
        rhs = gowers_norm(gf, 2) ** 4
    else:
        total = 0.0
        for h in range(ring.size):
            perm = ring.add_col(h)
            derived = [xi[perm] * np.conj(xi) for xi in xi_list]
            gh = FunctionOnRing(ring, _averaged_product(derived))
            total += gowers_norm(gh, 2) ** 4
        rhs = total / ring.size
    return lhs, rhs


def _averaged_product(xi_list: list[np.ndarray]) -> np.ndarray:
    prod = np.ones_like(xi_list[0])
    for xi in xi_list:
        prod = prod * xi
    return prod.mean(axis=1)


def product_characters(ring: Ring, n: int):
    """Characters of R^n as n-tuples of characters of R."""
    return itertools.product(characters(ring), repeat=n)


def product_char_values(chars: tuple[Character, ...]) -> np.ndarray:
    """Value table over R^n (mixed-radix index, first coordinate slowest)."""
    vals = chars[0].values
    for chi in chars[1:]:
        vals = np.multiply.outer(vals, chi.values).ravel()
    return vals
