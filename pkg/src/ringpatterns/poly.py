"""Sparse multivariate integer polynomials with mod-N bookkeeping.

Exponent vectors are fixed-length tuples; term maps never store zero
coefficients.  The monomial order compares total degree first, then the
exponent vectors lexicographically (so y2 comes before y1 in two variables).
"""

from __future__ import annotations

import itertools
import math
import re
from dataclasses import dataclass
from functools import lru_cache

from .errors import (
    BudgetExceeded,
    ConstantMember,
    ParseError,
    ZeroExponent,
)
from .intutil import (
    int_det,
    largest_prime_factor,
    least_prime_factor,
    matrix_rank,
    residue_height,
)

FUNCTION_EQ_BUDGET = 10**7


def order_key(alpha: tuple[int, ...]) -> tuple:
    """Sort key realizing the graded-then-lexicographic monomial order."""
    return (sum(alpha), alpha)


@lru_cache(maxsize=None)
def weight_order_rank(alpha: tuple[int, ...]) -> int:
    """1-based rank of a nonzero exponent vector in the monomial order."""
    if not any(alpha):
        raise ZeroExponent(f"zero exponent vector {alpha}")
    n = len(alpha)
    d = sum(alpha)
    key = order_key(alpha)
    rank = 1
    for e in range(1, d + 1):
        for beta in _compositions(e, n):
            if order_key(beta) < key:
                rank += 1
    return rank


def _compositions(total: int, parts: int):
    if parts == 1:
        yield (total,)
        return
    for first in range(total + 1):
        for rest in _compositions(total - first, parts - 1):
            yield (first,) + rest


class IntPoly:
    """Immutable sparse polynomial with integer coefficients."""

    __slots__ = ("n_vars", "_terms", "_hash")

    def __init__(self, n_vars: int, terms: dict[tuple[int, ...], int] | None = None):
        if n_vars < 1:
            raise ValueError("n_vars must be positive")
        clean: dict[tuple[int, ...], int] = {}
        for alpha, c in (terms or {}).items():
            alpha = tuple(int(a) for a in alpha)
            if len(alpha) != n_vars or any(a < 0 for a in alpha):
                raise ValueError(f"bad exponent vector {alpha} for n_vars={n_vars}")
            if not isinstance(c, int):
                raise ValueError(f"non-integer coefficient {c!r}")
            if c != 0:
                clean[alpha] = clean.get(alpha, 0) + c
                if clean[alpha] == 0:
                    del clean[alpha]
        object.__setattr__(self, "n_vars", n_vars)
        object.__setattr__(self, "_terms", dict(sorted(clean.items(), key=lambda kv: order_key(kv[0]), reverse=True)))
        object.__setattr__(self, "_hash", hash((n_vars, tuple(self._terms.items()))))

    def __setattr__(self, *_):
        raise AttributeError("IntPoly is immutable")

    @property
    def terms(self) -> dict[tuple[int, ...], int]:
        return dict(self._terms)

    @classmethod
    def zero(cls, n_vars: int) -> "IntPoly":
        return cls(n_vars, {})

    @classmethod
    def constant(cls, n_vars: int, c: int) -> "IntPoly":
        return cls(n_vars, {(0,) * n_vars: c})

    @classmethod
    def variable(cls, i: int, n_vars: int) -> "IntPoly":
        alpha = tuple(1 if j == i else 0 for j in range(n_vars))
        return cls(n_vars, {alpha: 1})

    def __eq__(self, other) -> bool:
        return isinstance(other, IntPoly) and self.n_vars == other.n_vars and self._terms == other._terms

    def __hash__(self) -> int:
        return self._hash

    def __add__(self, other: "IntPoly") -> "IntPoly":
        self._check(other)
        terms = dict(self._terms)
        for alpha, c in other._terms.items():
            terms[alpha] = terms.get(alpha, 0) + c
        return IntPoly(self.n_vars, terms)

    def __sub__(self, other: "IntPoly") -> "IntPoly":
        return self + (-other)

    def __neg__(self) -> "IntPoly":
        return IntPoly(self.n_vars, {a: -c for a, c in self._terms.items()})

    def __mul__(self, other):
        if isinstance(other, int):
            return IntPoly(self.n_vars, {a: c * other for a, c in self._terms.items()})
        self._check(other)
        terms: dict[tuple[int, ...], int] = {}
        for a1, c1 in self._terms.items():
            for a2, c2 in other._terms.items():
                a = tuple(x + y for x, y in zip(a1, a2))
                terms[a] = terms.get(a, 0) + c1 * c2
        return IntPoly(self.n_vars, terms)

    __rmul__ = __mul__

    def _check(self, other: "IntPoly"):
        if self.n_vars != other.n_vars:
            raise ValueError("variable count mismatch")

    def is_zero(self) -> bool:
        return not self._terms

    def is_constant(self) -> bool:
        return all(not any(a) for a in self._terms)

    def constant_term(self) -> int:
        return self._terms.get((0,) * self.n_vars, 0)

    def degree(self) -> int:
        """Total degree; -1 for the zero polynomial, 0 for nonzero constants."""
        if not self._terms:
            return -1
        return max(sum(a) for a in self._terms)

    def coefficient(self, alpha: tuple[int, ...]) -> int:
        return self._terms.get(tuple(alpha), 0)

    def evaluate(self, ys: tuple[int, ...], modulus: int | None = None) -> int:
        if len(ys) != self.n_vars:
            raise ValueError("argument count mismatch")
        total = 0
        for alpha, c in self._terms.items():
            t = c
            for y, e in zip(ys, alpha):
                t *= y**e
            total += t
        return total % modulus if modulus is not None else total

    def reduce_mod(self, n: int) -> "IntPoly":
        return IntPoly(self.n_vars, {a: c % n for a, c in self._terms.items()})

    def shifted(self, h: tuple[int, ...]) -> "IntPoly":
        """P(y + h) for an integer shift vector, expanded exactly."""
        if len(h) != self.n_vars:
            raise ValueError("shift length mismatch")
        terms: dict[tuple[int, ...], int] = {}
        for alpha, c in self._terms.items():
            ranges = [range(a + 1) for a in alpha]
            for beta in itertools.product(*ranges):
                coef = c
                for ai, bi, hi in zip(alpha, beta, h):
                    coef *= math.comb(ai, bi) * hi ** (ai - bi)
                if coef:
                    terms[beta] = terms.get(beta, 0) + coef
        return IntPoly(self.n_vars, terms)

    def drop_constant(self) -> "IntPoly":
        terms = {a: c for a, c in self._terms.items() if any(a)}
        return IntPoly(self.n_vars, terms)

    def leading_term(self, modulus: int | None = None) -> tuple[tuple[int, ...], int] | None:
        """Heaviest nonconstant monomial and its coefficient (mod N if given)."""
        best = None
        for alpha, c in self._terms.items():
            if not any(alpha):
                continue
            if modulus is not None and c % modulus == 0:
                continue
            if best is None or order_key(alpha) > order_key(best[0]):
                best = (alpha, c % modulus if modulus is not None else c)
        return best

    def __repr__(self) -> str:
        return f"IntPoly({format_poly(self)!r})"

    def __str__(self) -> str:
        return format_poly(self)


@dataclass(frozen=True)
class ZnProfile:
    modulus: int
    deg_zn: int
    height: int
    weight: int | None
    leading: int | None


def zn_height(p: IntPoly, n: int) -> int:
    """Max cyclic distance to 0 over the coefficients, taken mod n."""
    if not p.terms:
        return 0
    return max(residue_height(c, n) for c in p.terms.values())


def zn_profile(p: IntPoly, n: int) -> ZnProfile:
    if n < 2:
        raise ValueError("modulus must be at least 2")
    reduced = {a: c % n for a, c in p.terms.items() if c % n != 0}
    if not reduced:
        return ZnProfile(n, -1, 0, None, None)
    deg = max(sum(a) for a in reduced)
    height = zn_height(p, n)
    lead = p.leading_term(modulus=n)
    if lead is None:
        return ZnProfile(n, 0, height, None, None)
    alpha, c = lead
    return ZnProfile(n, deg, height, weight_order_rank(alpha), c)


def poly_weight(p: IntPoly, n: int | None = None) -> int | None:
    lead = p.leading_term(modulus=n)
    return None if lead is None else weight_order_rank(lead[0])


def weight_sequence(family: list[IntPoly], n: int | None = None) -> tuple[int, ...]:
    """Counts of distinct leading coefficients per weight, trailing zeros trimmed."""
    buckets: dict[int, set[int]] = {}
    for i, p in enumerate(family):
        lead = p.leading_term(modulus=n)
        if lead is None:
            raise ConstantMember(f"member {i + 1} is constant" + (f" mod {n}" if n else ""))
        alpha, c = lead
        buckets.setdefault(weight_order_rank(alpha), set()).add(c)
    if not buckets:
        return ()
    top = max(buckets)
    return tuple(len(buckets.get(r, ())) for r in range(1, top + 1))


def independence_check(family: list[IntPoly]) -> tuple[bool, int | None]:
    """Full column rank of the nonconstant coefficient matrix over the rationals.

    When independent, also returns the largest prime factor of the first
    full-rank m x m minor (rows scanned in monomial order), so the family stays
    independent mod M whenever lpf M exceeds it.  A unit minor gives 1.
    """
    if not family:
        raise ValueError("empty family")
    m = len(family)
    alphas = sorted({a for p in family for a in p.terms if any(a)}, key=order_key)
    if len(alphas) < m:
        return (False, None)
    rows = [[p.coefficient(a) for p in family] for a in alphas]
    if matrix_rank(rows) < m:
        return (False, None)
    chosen: list[list[int]] = []
    for row in rows:
        if len(chosen) == m:
            break
        if matrix_rank(chosen + [row]) > len(chosen):
            chosen.append(row)
    det = int_det(chosen)
    assert det != 0
    c1 = 1 if abs(det) == 1 else largest_prime_factor(det)
    return (True, c1)


def singmaster_bound(n: int) -> int:
    """Least positive l with n | l!."""
    f = 1
    k = 1
    while f % n != 0:
        k += 1
        f *= k
    return k


def singmaster_canonical(p: IntPoly, n: int) -> IntPoly:
    """Canonical representative of the function a univariate polynomial induces mod n.

    Coefficients b_k satisfy 0 <= b_k < n/gcd(k!, n) and the degree is below the
    least l with n | l!.
    """
    if p.n_vars != 1:
        raise ValueError("univariate polynomials only")
    if n < 2:
        raise ValueError("modulus must be at least 2")
    ell = singmaster_bound(n)
    coeffs = [0] * max(p.degree() + 1, ell)
    for alpha, c in p.terms.items():
        coeffs[alpha[0]] = c % n

    falling = _falling_factorial_coeffs(ell)
    # degree reduction: x^l = (x^l - (x)_l) + (x)_l and (x)_l induces 0 mod n
    for d in range(len(coeffs) - 1, ell - 1, -1):
        c = coeffs[d] % n
        coeffs[d] = 0
        if c:
            base = falling[ell]  # monic, degree ell
            # multiply (x)_ell by x^(d-ell) and subtract the non-top part
            for k in range(ell):
                coeffs[k + d - ell] = (coeffs[k + d - ell] - c * base[k]) % n
    coeffs = [c % n for c in coeffs[:ell]]
    # coefficient normalization from the top down, using the null polynomials
    # (n/gcd(k!, n)) * (x)_k
    for k in range(ell - 1, -1, -1):
        step = n // math.gcd(math.factorial(k), n)
        q = coeffs[k] // step
        coeffs[k] -= q * step
        if q:
            base = falling[k]
            for j in range(k):
                coeffs[j] = (coeffs[j] - q * step * base[j]) % n
        coeffs[k] %= n
        assert 0 <= coeffs[k] < step
    return IntPoly(1, {(k,): c for k, c in enumerate(coeffs) if c})


@lru_cache(maxsize=None)
def _falling_factorial_coeffs(upto: int) -> tuple[tuple[int, ...], ...]:
    """Coefficient lists of (x)_k = x(x-1)...(x-k+1) for k = 0..upto."""
    polys = [[1]]
    for k in range(upto):
        prev = polys[-1]
        nxt = [0] * (len(prev) + 1)
        for i, c in enumerate(prev):
            nxt[i + 1] += c
            nxt[i] += -k * c
        polys.append(nxt)
    return tuple(tuple(p) for p in polys)


def function_equal_mod(p: IntPoly, q: IntPoly, n: int, budget: int = FUNCTION_EQ_BUDGET) -> bool:
    """Whether p and q induce the same function on Z_n^n_vars.

    Uses coefficient comparison when both degrees mod n are below lpf n, and a
    full evaluation sweep otherwise (subject to the enumeration budget).
    """
    if p.n_vars != q.n_vars:
        raise ValueError("variable count mismatch")
    lpf = least_prime_factor(n)
    dp = zn_profile(p, n).deg_zn
    dq = zn_profile(q, n).deg_zn
    if dp < lpf and dq < lpf:
        return (p - q).reduce_mod(n).is_zero()
    if n**p.n_vars > budget:
        raise BudgetExceeded(f"{n}^{p.n_vars} evaluations exceed budget {budget}")
    diff = p - q
    return all(
        diff.evaluate(ys, n) == 0 for ys in itertools.product(range(n), repeat=p.n_vars)
    )


def is_constant_function_mod(p: IntPoly, n: int, budget: int = FUNCTION_EQ_BUDGET) -> bool:
    shifted = p - IntPoly.constant(p.n_vars, p.constant_term())
    return function_equal_mod(shifted, IntPoly.zero(p.n_vars), n, budget)


def essentially_distinct(
    family: list[IntPoly], n: int, budget: int = FUNCTION_EQ_BUDGET
) -> tuple[bool, tuple[int, int] | int | None]:
    """No member and no pairwise difference induces a constant function mod n.

    The witness is the first violating member index, else the first violating
    pair (1-based), scanning singles before pairs.
    """
    m = len(family)
    if m < 2:
        raise ValueError("need at least two members")
    for i, p in enumerate(family):
        if is_constant_function_mod(p, n, budget):
            return (False, i + 1)
    for i in range(m):
        for j in range(i + 1, m):
            if is_constant_function_mod(family[i] - family[j], n, budget):
                return (False, (i + 1, j + 1))
    return (True, None)


def shift_difference(p: IntPoly, q: IntPoly, h: tuple[int, ...]) -> IntPoly:
    """Exact integer expansion of p(y + h) - q(y)."""
    if p.n_vars != q.n_vars:
        raise ValueError("variable count mismatch")
    if len(h) != p.n_vars:
        raise ValueError("shift length mismatch")
    return p.shifted(h) - q


def jointly_intersective_up_to(family: list[IntPoly], k_max: int) -> tuple[bool, int | None]:
    """For each k <= k_max, search y in Z_k with every member = 0 mod k."""
    if k_max < 1:
        raise ValueError("k_max must be positive")
    for p in family:
        if p.n_vars != 1:
            raise ValueError("univariate polynomials only")
    for k in range(1, k_max + 1):
        if not any(
            all(p.evaluate((y,), k) == 0 for p in family) for y in range(k)
        ):
            return (False, k)
    return (True, None)


@dataclass(frozen=True)
class HeightBounds:
    sum_height: int
    prod_height: int
    sum_bound: int
    prod_bound: int


def height_arithmetic_bounds(a: int, b: int, n: int) -> HeightBounds:
    """Exact heights of a+b and a*b next to the additive/multiplicative bounds."""
    if n < 2:
        raise ValueError("modulus must be at least 2")
    h1 = residue_height(a, n)
    h2 = residue_height(b, n)
    out = HeightBounds(
        sum_height=residue_height(a + b, n),
        prod_height=residue_height(a * b, n),
        sum_bound=h1 + h2,
        prod_bound=h1 * h2,
    )
    assert out.sum_height <= out.sum_bound
    assert out.prod_height <= out.prod_bound
    return out


def translate_matches(
    p: IntPoly,
    q: IntPoly,
    n: int,
    h_bound: int,
    c: int | None = None,
) -> list[tuple[int, ...]]:
    """Shift vectors h (each coordinate of height <= h_bound - 1) making
    p(y+h) and q(y) + c equal as polynomials mod n.

    With c=None any constant offset is accepted (only nonconstant coefficients
    are compared).
    """
    window = sorted(set(x % n for x in range(-(h_bound - 1), h_bound)))
    out = []
    for h in itertools.product(window, repeat=p.n_vars):
        diff = (p.shifted(h) - q).reduce_mod(n)
        if c is not None:
            diff = (diff - IntPoly.constant(p.n_vars, c)).reduce_mod(n)
            if diff.is_zero():
                out.append(h)
        else:
            if diff.drop_constant().is_zero():
                out.append(h)
    return out


def weight_stability_threshold(family: list[IntPoly]) -> int:
    """2 * max |coefficient| over the family and its last-member differences.

    Above this bound on lpf N nothing in the weight bookkeeping changes mod N.
    """
    members = list(family)
    last = family[-1]
    members += [p - last for p in family[:-1]] + [-last]
    coeffs = [abs(c) for p in members for c in p.terms.values()]
    return 2 * max(coeffs) if coeffs else 0


# ---------------------------------------------------------------------------
# textual syntax


_TOKEN = re.compile(r"\s*(?:(?P<num>\d+)|(?P<var>[a-zA-Z]\d*'*)|(?P<op>[-+*^()]))")


def _tokenize(text: str) -> list[str]:
    pos = 0
    out = []
    while pos < len(text):
        m = _TOKEN.match(text, pos)
        if not m or m.end() == pos:
            raise ParseError(f"bad character in {text!r} at position {pos}")
        out.append(m.group(m.lastgroup))
        pos = m.end()
    return out


def parse_poly(text: str, n_vars: int | None = None, var: str = "y") -> IntPoly:
    """Parse syntax like ``y1^2+3*y2^2`` or ``-6*y1``; bare ``y`` means ``y1``."""
    tokens = _tokenize(text)
    if not tokens:
        raise ParseError("empty polynomial")
    terms: list[tuple[int, dict[int, int]]] = []
    sign = 1
    i = 0

    def var_index(tok: str) -> int:
        if not tok.startswith(var):
            raise ParseError(f"unknown variable {tok!r} (expected {var}...)")
        suffix = tok[len(var):]
        if suffix == "":
            return 0
        if not suffix.isdigit():
            raise ParseError(f"bad variable {tok!r}")
        idx = int(suffix)
        if not 1 <= idx <= 9:
            raise ParseError(f"variable index out of range in {tok!r}")
        return idx - 1

    while i < len(tokens):
        tok = tokens[i]
        if tok == "+":
            sign = 1
            i += 1
            continue
        if tok == "-":
            sign = -sign
            i += 1
            continue
        coeff = sign
        powers: dict[int, int] = {}
        expect_factor = True
        while i < len(tokens) and tokens[i] not in "+-":
            tok = tokens[i]
            if tok == "*":
                if expect_factor:
                    raise ParseError(f"misplaced '*' in {text!r}")
                i += 1
                expect_factor = True
                continue
            if not expect_factor:
                raise ParseError(f"missing operator in {text!r}")
            if tok.isdigit():
                coeff *= int(tok)
                i += 1
            else:
                vi = var_index(tok)
                exp = 1
                i += 1
                if i < len(tokens) and tokens[i] == "^":
                    if i + 1 >= len(tokens) or not tokens[i + 1].isdigit():
                        raise ParseError(f"bad exponent in {text!r}")
                    exp = int(tokens[i + 1])
                    i += 2
                powers[vi] = powers.get(vi, 0) + exp
            expect_factor = False
        if expect_factor:
            raise ParseError(f"dangling sign in {text!r}")
        terms.append((coeff, powers))
        sign = 1

    used = max((max(p) + 1 for _, p in terms if p), default=1)
    nv = n_vars if n_vars is not None else used
    if used > nv:
        raise ParseError(f"variable index exceeds n_vars={nv}")
    acc: dict[tuple[int, ...], int] = {}
    for coeff, powers in terms:
        alpha = tuple(powers.get(j, 0) for j in range(nv))
        acc[alpha] = acc.get(alpha, 0) + coeff
    return IntPoly(nv, acc)


def parse_family(text: str, n_vars: int | None = None) -> list[IntPoly]:
    """Comma-separated polynomials sharing a variable count."""
    parts = [s for s in text.split(",") if s.strip()]
    if not parts:
        raise ParseError("empty family")
    polys = [parse_poly(s) for s in parts]
    nv = n_vars if n_vars is not None else max(p.n_vars for p in polys)
    return [IntPoly(nv, {a + (0,) * (nv - p.n_vars): c for a, c in p.terms.items()}) for p in polys]


def format_poly(p: IntPoly, var: str = "y") -> str:
    """Canonical printer: terms in descending monomial order."""
    if not p.terms:
        return "0"
    multi = p.n_vars > 1
    parts = []
    for alpha, c in sorted(p.terms.items(), key=lambda kv: order_key(kv[0]), reverse=True):
        factors = []
        for j, e in enumerate(alpha):
            if e == 0:
                continue
            name = f"{var}{j + 1}" if multi else var
            factors.append(name if e == 1 else f"{name}^{e}")
        if not factors:
            body = str(abs(c))
        else:
            body = "*".join(factors)
            if abs(c) != 1:
                body = f"{abs(c)}*{body}"
        parts.append(("-" if c < 0 else "+", body))
    sign0, body0 = parts[0]
    text = ("-" if sign0 == "-" else "") + body0
    for sign, body in parts[1:]:
        text += sign + body
    return text


def format_family(family: list[IntPoly], var: str = "y") -> str:
    return "{" + ", ".join(format_poly(p, var) for p in family) + "}"
