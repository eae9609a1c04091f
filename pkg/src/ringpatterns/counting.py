"""Multilinear averages, explicit character-sum and root-count bounds,
configuration counting, and the named avoidance constructions.

Every operation is exact or exhaustive; above the enumeration cap it fails
fast rather than sampling.
"""

from __future__ import annotations

import itertools
import math
from dataclasses import dataclass, field

import numpy as np

from .errors import (
    BudgetExceeded,
    DegenerateB,
    EmptyAllowedSet,
    HypothesisViolation,
    InvertibilityViolation,
    TrivialCharacter,
)
from .fourier import Character, FunctionOnRing, gowers_norm
from .intutil import least_prime_factor
from .poly import IntPoly, independence_check, parse_poly
from .rings import ModInt, NilpotentExt, Product, Ring, make_ring

ENUMERATION_CAP = 10**8


@dataclass
class LambdaQuery:
    ring: Ring
    p_family: list[IntPoly]
    funcs: list[FunctionOnRing]
    q_family: list[IntPoly] = field(default_factory=list)
    psi: list[Character] = field(default_factory=list)
    n_vars: int | None = None
    budget: int = ENUMERATION_CAP

    def __post_init__(self):
        if not self.p_family:
            raise ValueError("need at least one shift polynomial")
        nv = self.n_vars or self.p_family[0].n_vars
        self.n_vars = nv
        for p in self.p_family + self.q_family:
            if p.n_vars != nv:
                raise ValueError("polynomials disagree on variable count")
        if len(self.funcs) != len(self.p_family) + 1:
            raise ValueError("need m1+1 functions")
        if len(self.psi) != len(self.q_family):
            raise ValueError("need one character per twist polynomial")

    def check_budget(self):
        if self.ring.size ** (self.n_vars + 1) > self.budget:
            raise BudgetExceeded(
                f"|R|^(n+1) = {self.ring.size ** (self.n_vars + 1)} exceeds budget {self.budget}"
            )


def lambda_average(q: LambdaQuery) -> complex:
    """avg over (x, y) of f0(x) prod f_i(x + P_i(y)) prod psi_j(Q_j(y))."""
    q.check_budget()
    ring = q.ring
    nv = q.n_vars
    shift_tables = [ring.poly_table(p, nv) for p in q.p_family]
    twist = np.ones(ring.size**nv, dtype=np.complex128)
    for psi, poly in zip(q.psi, q.q_family):
        twist = twist * psi.values[ring.poly_table(poly, nv)]
    base = q.funcs[0].values
    total = 0.0 + 0.0j
    for yi in range(ring.size**nv):
        inner = base
        for f, table in zip(q.funcs[1:], shift_tables):
            inner = inner * f.values[ring.add_col(int(table[yi]))]
        total += inner.mean() * twist[yi]
    return complex(total / ring.size**nv)


def main_discrepancy(q: LambdaQuery) -> float:
    """|Lambda - 1_{Psi trivial} prod_i avg f_i|."""
    value = lambda_average(q)
    if all(psi.is_trivial for psi in q.psi):
        expected = math.prod([f.mean() for f in q.funcs])
    else:
        expected = 0.0
    return abs(value - expected)


@dataclass(frozen=True)
class BoundedValue:
    value: complex
    bound: float
    bound_applies: bool

    @property
    def magnitude(self) -> float:
        return abs(self.value)


def hadamard_char_sum(ring: Ring, chi: Character, m: int, budget: int = ENUMERATION_CAP) -> BoundedValue:
    """avg over (h_1..h_m) of chi(h_1 ... h_m) next to the bound (m-1)/lpf N."""
    if chi.is_trivial:
        raise TrivialCharacter("the multiplicative average needs a nontrivial character")
    if m < 1:
        raise ValueError("m must be positive")
    bound = (m - 1) / ring.lpf
    if m == 1:
        return BoundedValue(complex(chi.values.mean()), bound, True)
    if m > 2 and ring.size**m > budget:
        raise BudgetExceeded(f"|R|^{m} exceeds budget {budget}")
    mul = ring.mul_table
    vals = chi.values
    if m == 2:
        total = vals[mul].mean()
        return BoundedValue(complex(total), bound, True)
    total = 0.0 + 0.0j
    for prefix in itertools.product(ring.elements(), repeat=m - 2):
        p = ring.one
        for h in prefix:
            p = ring.mul(p, h)
        total += vals[mul[mul[p]]].mean()
    return BoundedValue(complex(total / ring.size ** (m - 2)), bound, True)


def char_sum(
    ring: Ring,
    q_family: list[IntPoly],
    psi: list[Character],
    budget: int = ENUMERATION_CAP,
) -> BoundedValue:
    """avg over y in R^n of prod psi_j(Q_j(y)) with the ((d-1)/lpf N)^(1/2^d) bound.

    The family must be independent with zero constant terms and some psi
    nontrivial; when lpf N is too small the value is still computed and the
    bound is flagged non-applicable.
    """
    if len(q_family) != len(psi) or not q_family:
        raise ValueError("need one character per polynomial")
    if all(p.is_trivial for p in psi):
        raise TrivialCharacter("need at least one nontrivial character")
    for q in q_family:
        if q.constant_term() != 0:
            raise HypothesisViolation("twist polynomials must have zero constant term")
    independent, c1 = independence_check(q_family)
    if not independent:
        raise HypothesisViolation("twist family is not independent")
    nv = q_family[0].n_vars
    if ring.size**nv > budget:
        raise BudgetExceeded(f"|R|^{nv} exceeds budget {budget}")
    d = max(q.degree() for q in q_family)
    total = np.ones(ring.size**nv, dtype=np.complex128)
    for chi, q in zip(psi, q_family):
        total = total * chi.values[ring.poly_table(q, nv)]
    value = complex(total.mean())
    applies = ring.lpf > max(2, d, c1)
    bound = ((d - 1) / ring.lpf) ** (2.0**-d) if d >= 1 else 0.0
    return BoundedValue(value, bound, applies)


@dataclass(frozen=True)
class RootCount:
    count: int
    bound: float
    bound_applies: bool


def count_roots(ring: Ring, p: IntPoly, n: int | None = None, budget: int = ENUMERATION_CAP) -> RootCount:
    """Exhaustive count of y in R^n with P(y) = 0, next to the explicit bound
    |R|^{n-1} + c |R|^n / lpf^eps with eps = 2^-d and c = (d-1)^(2^-d)."""
    nv = n or p.n_vars
    if p.degree() < 1:
        raise ValueError("the polynomial must be nonconstant")
    if ring.size**nv > budget:
        raise BudgetExceeded(f"|R|^{nv} exceeds budget {budget}")
    table = ring.poly_table(p, nv)
    count = int(np.count_nonzero(table == ring.zero))
    d = p.degree()
    eps = 2.0**-d
    c = (d - 1) ** eps
    bound = ring.size ** (nv - 1) + c * ring.size**nv / ring.lpf**eps
    _, c1 = independence_check([p.drop_constant()])
    applies = ring.lpf > max(2, d, c1 or 0)
    return RootCount(count, bound, applies)


def linear_solution_count(n: int, b: int, c: int) -> tuple[int, float]:
    """Exhaustive count of x in Z_n with b x = c, bounded by n / lpf n."""
    if n < 2:
        raise ValueError("modulus must be at least 2")
    if b % n == 0:
        raise DegenerateB(f"{b} vanishes mod {n}")
    count = sum(1 for x in range(n) if (b * x - c) % n == 0)
    bound = n / least_prime_factor(n)
    assert count <= bound
    return count, bound


@dataclass(frozen=True)
class ConfigCount:
    M: int
    M1: int
    M2: int
    S: float


def count_configurations(
    ring: Ring,
    p_family: list[IntPoly],
    a_sets: list[np.ndarray],
    budget: int = ENUMERATION_CAP,
) -> ConfigCount:
    """Count (x, y) with x + P_i(y) in A_i for all i (P_0 = 0), split into
    nontrivial (value set {0, P_1(y), .., P_m(y)} of full size) and degenerate."""
    m = len(p_family)
    if len(a_sets) != m + 1:
        raise ValueError("need m+1 sets")
    nv = p_family[0].n_vars
    if ring.size ** (nv + 1) > budget:
        raise BudgetExceeded(f"|R|^(n+1) exceeds budget {budget}")
    indicators = [_as_indicator(ring, a) for a in a_sets]
    tables = [ring.poly_table(p, nv) for p in p_family]
    m_total = m1 = m2 = 0
    for yi in range(ring.size**nv):
        shifts = [int(t[yi]) for t in tables]
        eligible = indicators[0].copy()
        for ind, d in zip(indicators[1:], shifts):
            eligible &= ind[ring.add_col(d)]
        cnt = int(eligible.sum())
        if cnt == 0:
            continue
        m_total += cnt
        if len(set([ring.zero] + shifts)) == m + 1:
            m1 += cnt
        else:
            m2 += cnt
    return ConfigCount(m_total, m1, m2, m1 / ring.size ** (nv + 1))


def _as_indicator(ring: Ring, a) -> np.ndarray:
    arr = np.asarray(a)
    if arr.dtype == bool and arr.shape == (ring.size,):
        return arr
    out = np.zeros(ring.size, dtype=bool)
    out[np.asarray(list(a), dtype=np.int64)] = True
    return out


def find_nontrivial_config(
    ring: Ring,
    p_family: list[IntPoly],
    a_sets: list[np.ndarray],
    budget: int = ENUMERATION_CAP,
) -> tuple[int, tuple[int, ...]] | None:
    """The lexicographically first witness (x, y) of a nontrivial configuration."""
    m = len(p_family)
    nv = p_family[0].n_vars
    if ring.size ** (nv + 1) > budget:
        raise BudgetExceeded("enumeration over budget")
    indicators = [_as_indicator(ring, a) for a in a_sets]
    tables = [ring.poly_table(p, nv) for p in p_family]
    best: tuple | None = None
    for yi, y in enumerate(itertools.product(ring.elements(), repeat=nv)):
        shifts = [int(t[yi]) for t in tables]
        if len(set([ring.zero] + shifts)) != m + 1:
            continue
        eligible = indicators[0].copy()
        for ind, d in zip(indicators[1:], shifts):
            eligible &= ind[ring.add_col(d)]
        hits = np.nonzero(eligible)[0]
        if hits.size:
            candidate = (int(hits[0]),) + y
            if best is None or candidate < best:
                best = candidate
    if best is None:
        return None
    return best[0], best[1:]


def degenerate_bound(ring: Ring, p_family: list[IntPoly], a0_size: int) -> float:
    """|A_0| times the summed root bounds of the pairwise differences
    (P_0 = 0 included), an upper bound for M2 when the root bounds apply."""
    nv = p_family[0].n_vars
    polys = [IntPoly.zero(nv)] + list(p_family)
    total = 0.0
    for i in range(len(polys)):
        for j in range(i + 1, len(polys)):
            diff = polys[i] - polys[j]
            d = diff.degree()
            if d < 1:
                raise HypothesisViolation("a pairwise difference is constant")
            eps = 2.0**-d
            c = (d - 1) ** eps
            total += ring.size ** (nv - 1) + c * ring.size**nv / ring.lpf**eps
    return a0_size * total


def linear_average(
    ring: Ring, coeffs: list[tuple[int, ...]], funcs: list[FunctionOnRing], n: int
) -> complex:
    """avg_x avg_{y in R^n} f0(x) prod_i f_i(x + a^(i) . y) without hypotheses."""
    if len(funcs) != len(coeffs) + 1:
        raise ValueError("need d+1 functions")
    total = 0.0 + 0.0j
    base = funcs[0].values
    for y in itertools.product(ring.elements(), repeat=n):
        inner = base
        for a, f in zip(coeffs, funcs[1:]):
            dot = ring.zero
            for aj, yj in zip(a, y):
                dot = ring.add(dot, ring.mul(ring.embed(aj), yj))
            inner = inner * f.values[ring.add_col(dot)]
        total += inner.mean()
    return complex(total / ring.size**n)


def linear_ud_check(
    ring: Ring, coeffs: list[tuple[int, ...]], funcs: list[FunctionOnRing], n: int
) -> tuple[float, float]:
    """(|linear average|, ||f_d||_{U^d}) after verifying every coefficient and
    pairwise difference is invertible componentwise."""
    d = len(coeffs)
    for a in coeffs:
        if len(a) != n:
            raise ValueError("coefficient vectors must have length n")
        for aj in a:
            if not ring.is_unit(ring.embed(aj)):
                raise InvertibilityViolation(f"coefficient {aj} is not a unit")
    for i in range(d):
        for j in range(i + 1, d):
            for ai, aj in zip(coeffs[i], coeffs[j]):
                if not ring.is_unit(ring.embed(ai - aj)):
                    raise InvertibilityViolation(
                        f"difference {ai}-{aj} is not a unit"
                    )
    lhs = abs(linear_average(ring, coeffs, funcs, n))
    rhs = gowers_norm(funcs[-1], d)
    return lhs, rhs


def vdc_window(ring: Ring, h_bound: int, n: int) -> list[tuple[int, ...]]:
    """({0..H-1} union {N-H+1..N-1})^n as residue tuples in lexicographic order."""
    n_char = ring.characteristic
    window = sorted({x % n_char for x in range(-(h_bound - 1), h_bound)})
    return list(itertools.product(window, repeat=n))


def vdc_select_h(
    ring: Ring,
    g: np.ndarray,
    h_bound: int,
    excluded: set[tuple[int, ...]],
    n: int,
) -> tuple[tuple[int, ...], float, float]:
    """Pick the correlation-maximizing shift h from the height window minus the
    exclusions; returns (h, avg_x |avg_y g|^2, 2^n(|excluded|/H^n + G(h)))."""
    if g.shape != (ring.size, ring.size**n):
        raise ValueError("g must have shape (|R|, |R|^n)")
    allowed = [h for h in vdc_window(ring, h_bound, n) if h not in excluded]
    if not allowed:
        raise EmptyAllowedSet("every window shift is excluded")
    best_h = None
    best_corr = -1.0
    for h in allowed:
        perm = _y_shift_permutation(ring, h, n)
        corr = abs((g[:, perm] * np.conj(g)).mean())
        if corr > best_corr + 1e-15:
            best_corr = corr
            best_h = h
    lhs = float(np.mean(np.abs(g.mean(axis=1)) ** 2))
    rhs = 2**n * (len(excluded) / h_bound**n + best_corr)
    return best_h, lhs, rhs


def _y_shift_permutation(ring: Ring, h: tuple[int, ...], n: int) -> np.ndarray:
    """Index permutation on R^n realizing y -> y + h (h lifted from Z_N^n)."""
    size = ring.size
    idx = np.arange(size**n, dtype=np.int64)
    out = np.zeros_like(idx)
    for j in range(n):
        digit = (idx // size ** (n - 1 - j)) % size
        shifted = ring.add_col(ring.embed(h[j]))[digit]
        out += shifted * size ** (n - 1 - j)
    return out


# -- builtin avoidance constructions ---------------------------------------------


def avoid_3y(m: int) -> tuple[Ring, list[IntPoly], list[np.ndarray]]:
    """(Z_3^m x Z_9, {3y}, A) with A = Z_3 x .. x Z_3 x {0,1,2}: no nontrivial
    configurations {x, x+3y} live in A."""
    if m < 1:
        raise ValueError("m must be positive")
    ring = make_ring(Product((ModInt(3),) * m + (ModInt(9),)))
    mask = np.array([x % 9 in (0, 1, 2) for x in ring.elements()])
    family = [parse_poly("3*y")]
    return ring, family, [mask, mask]


def avoid_y_y2p1(p: int, k: int) -> tuple[Ring, list[IntPoly], list[np.ndarray]]:
    """(Z_{p^k}, {y, y^2+1}, multiples of p): the set avoids the configuration
    {x, x+y, x+y^2+1} entirely."""
    ring = make_ring(ModInt(p**k))
    mask = np.array([x % p == 0 for x in ring.elements()])
    family = [parse_poly("y"), parse_poly("y^2+1")]
    return ring, family, [mask, mask, mask]


def loper(p: int, k: int) -> tuple[Ring, list[IntPoly], list[np.ndarray]]:
    """(Z_p[x_1..x_k]/(x_i x_j), {y^2}, {constant term 0}): squares with zero
    constant term vanish, so the set has no nontrivial {x, x+y^2}."""
    ring = make_ring(NilpotentExt(p, k))
    mask = np.array([x % p == 0 for x in ring.elements()])
    family = [parse_poly("y^2")]
    return ring, family, [mask, mask]
