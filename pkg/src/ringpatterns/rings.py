"""Finite commutative rings as enumerable objects.

Elements are dense indices 0..|R|-1.  Four constructions are supported:
integers mod N, quotients Z_N[x]/(f) for f monic and irreducible mod every
prime dividing N, finite products, and the nilpotent extensions
Z_p[x_1..x_k]/(x_i x_j).  Rings larger than the size guard are rejected.
"""

from __future__ import annotations

import itertools
import json
import math
from dataclasses import dataclass
from functools import cached_property

import numpy as np

from .errors import ParseError, SpecViolation
from .intutil import (
    crt_idempotent,
    factorize,
    is_prime,
    least_prime_factor,
)
from .poly import IntPoly, format_poly, parse_poly

SIZE_GUARD = 10**6
TABLE_GUARD = 4 * 10**6  # max |R|^2 entries for precomputed op tables


class RingSpec:
    """Base class for ring specifications."""

    def build(self) -> "Ring":
        return Ring(self)

    def text(self) -> str:
        raise NotImplementedError


@dataclass(frozen=True)
class ModInt(RingSpec):
    n: int

    def text(self) -> str:
        return f"zmod:{self.n}"


@dataclass(frozen=True)
class Quotient(RingSpec):
    n: int
    f: IntPoly

    def text(self) -> str:
        return f"pgr:{self.n}:{format_poly(self.f, var='x')}"


@dataclass(frozen=True)
class Product(RingSpec):
    parts: tuple[RingSpec, ...]

    def text(self) -> str:
        return "prod:(" + ",".join(p.text() for p in self.parts) + ")"


@dataclass(frozen=True)
class NilpotentExt(RingSpec):
    p: int
    k: int

    def text(self) -> str:
        return f"nilp:{self.p}:{self.k}"


def _validate_quotient(n: int, f: IntPoly):
    if n < 2:
        raise SpecViolation(f"modulus {n} below 2")
    if f.n_vars != 1:
        raise SpecViolation("quotient polynomial must be univariate")
    d = f.degree()
    if d < 1:
        raise SpecViolation("quotient polynomial must have degree at least 1")
    if f.coefficient((d,)) != 1:
        raise SpecViolation("quotient polynomial must be monic")
    if not _monic_irreducible_mod(f, n):
        raise SpecViolation(f"{format_poly(f, var='x')} splits into monic factors mod {n}")


def _monic_irreducible_mod(f: IntPoly, n: int) -> bool:
    """Exhaustive search: no monic divisor of degree 1..deg/2 over Z_n.

    Division by a monic polynomial is exact over Z_n, so this is decidable by
    brute force; it coincides with ordinary irreducibility when n is prime.
    """
    d = f.degree()
    coeffs = [f.coefficient((i,)) % n for i in range(d + 1)]
    for e in range(1, d // 2 + 1):
        for tail in itertools.product(range(n), repeat=e):
            divisor = list(tail) + [1]
            if _monic_divides_mod(divisor, coeffs, n):
                return False
    return True


def _monic_divides_mod(g: list[int], f: list[int], n: int) -> bool:
    """Whether monic g divides f over Z_n (long division by a monic)."""
    rem = [c % n for c in f]
    dg = len(g) - 1
    while True:
        while rem and rem[-1] % n == 0:
            rem.pop()
        if len(rem) - 1 < dg:
            break
        lead = rem[-1] % n
        shift = len(rem) - 1 - dg
        for i, c in enumerate(g):
            rem[shift + i] = (rem[shift + i] - lead * c) % n
    return not any(c % n for c in rem)


class Ring:
    """An enumerable finite commutative ring with dense element indices."""

    def __init__(self, spec: RingSpec):
        self.spec = spec
        if isinstance(spec, ModInt):
            if spec.n < 2:
                raise SpecViolation(f"modulus {spec.n} below 2")
            self.size = spec.n
            self.characteristic = spec.n
        elif isinstance(spec, Quotient):
            _validate_quotient(spec.n, spec.f)
            self._qdeg = spec.f.degree()
            self._qmod = spec.n
            # x^d = -(f - x^d), reduced coefficients for modular reduction
            self._qred = [(-spec.f.coefficient((i,))) % spec.n for i in range(self._qdeg)]
            self.size = spec.n**self._qdeg
            self.characteristic = spec.n
        elif isinstance(spec, Product):
            if not spec.parts:
                raise SpecViolation("empty product")
            self._factors = [Ring(p) for p in spec.parts]
            self.size = math.prod(r.size for r in self._factors)
            self.characteristic = math.lcm(*(r.characteristic for r in self._factors))
        elif isinstance(spec, NilpotentExt):
            if not is_prime(spec.p):
                raise SpecViolation(f"{spec.p} is not prime")
            if spec.k < 1:
                raise SpecViolation("need at least one nilpotent generator")
            self.size = spec.p ** (spec.k + 1)
            self.characteristic = spec.p
        else:
            raise SpecViolation(f"unknown spec {spec!r}")
        if self.size > SIZE_GUARD:
            raise SpecViolation(f"|R| = {self.size} exceeds the size guard {SIZE_GUARD}")
        self.lpf = least_prime_factor(self.characteristic)
        self.zero = 0
        self.one = self._compute_one()

    # -- elementwise operations ------------------------------------------------

    def _compute_one(self) -> int:
        spec = self.spec
        if isinstance(spec, ModInt):
            return 1 % spec.n
        if isinstance(spec, Quotient):
            return 1
        if isinstance(spec, Product):
            return self._pack([r.one for r in self._factors])
        return 1  # NilpotentExt: constant-term digit is the lowest

    def _pack(self, comps: list[int]) -> int:
        idx = 0
        for r, c in zip(self._factors, comps):
            idx = idx * r.size + c
        return idx

    def _unpack(self, x: int) -> list[int]:
        out = []
        for r in reversed(self._factors):
            out.append(x % r.size)
            x //= r.size
        return list(reversed(out))

    def _vec(self, x: int) -> list[int]:
        """Coefficient digits for Quotient (low degree first) and NilpotentExt."""
        spec = self.spec
        if isinstance(spec, Quotient):
            base = spec.n
            length = self._qdeg
        else:
            base = spec.p
            length = spec.k + 1
        out = []
        for _ in range(length):
            out.append(x % base)
            x //= base
        return out

    def _unvec(self, digits: list[int]) -> int:
        spec = self.spec
        base = spec.n if isinstance(spec, Quotient) else spec.p
        idx = 0
        for d in reversed(digits):
            idx = idx * base + d % base
        return idx

    def add(self, x: int, y: int) -> int:
        spec = self.spec
        if isinstance(spec, ModInt):
            return (x + y) % spec.n
        if isinstance(spec, Product):
            xs, ys = self._unpack(x), self._unpack(y)
            return self._pack([r.add(a, b) for r, a, b in zip(self._factors, xs, ys)])
        xd, yd = self._vec(x), self._vec(y)
        return self._unvec([a + b for a, b in zip(xd, yd)])

    def neg(self, x: int) -> int:
        spec = self.spec
        if isinstance(spec, ModInt):
            return (-x) % spec.n
        if isinstance(spec, Product):
            return self._pack([r.neg(a) for r, a in zip(self._factors, self._unpack(x))])
        return self._unvec([-a for a in self._vec(x)])

    def sub(self, x: int, y: int) -> int:
        return self.add(x, self.neg(y))

    def mul(self, x: int, y: int) -> int:
        spec = self.spec
        if isinstance(spec, ModInt):
            return (x * y) % spec.n
        if isinstance(spec, Product):
            xs, ys = self._unpack(x), self._unpack(y)
            return self._pack([r.mul(a, b) for r, a, b in zip(self._factors, xs, ys)])
        if isinstance(spec, Quotient):
            xd, yd = self._vec(x), self._vec(y)
            n, d = spec.n, self._qdeg
            prod = [0] * (2 * d - 1)
            for i, a in enumerate(xd):
                if a:
                    for j, b in enumerate(yd):
                        prod[i + j] = (prod[i + j] + a * b) % n
            for k in range(2 * d - 2, d - 1, -1):
                c = prod[k]
                if c:
                    prod[k] = 0
                    for i, r in enumerate(self._qred):
                        prod[k - d + i] = (prod[k - d + i] + c * r) % n
            return self._unvec(prod[:d])
        # NilpotentExt: (c0 + sum c_i x_i)(e0 + sum e_i x_i)
        xd, yd = self._vec(x), self._vec(y)
        c0, e0 = xd[0], yd[0]
        out = [c0 * e0] + [c0 * e + e0 * c for c, e in zip(xd[1:], yd[1:])]
        return self._unvec(out)

    def power(self, x: int, e: int) -> int:
        acc = self.one
        for _ in range(e):
            acc = self.mul(acc, x)
        return acc

    def embed(self, a: int) -> int:
        """(a mod N) * 1, the canonical image of an integer."""
        return self._embed_table[a % self.characteristic]

    @cached_property
    def _embed_table(self) -> list[int]:
        out = [self.zero]
        for _ in range(self.characteristic - 1):
            out.append(self.add(out[-1], self.one))
        return out

    def is_unit(self, x: int) -> bool:
        return self.inverse(x) is not None

    def inverse(self, x: int) -> int | None:
        if self.size**2 <= TABLE_GUARD:
            hits = np.nonzero(self.mul_row(x) == self.one)[0]
            return int(hits[0]) if hits.size else None
        return next((y for y in self.elements() if self.mul(x, y) == self.one), None)

    # -- vectorized tables -------------------------------------------------------

    @cached_property
    def add_table(self) -> np.ndarray:
        if self.size**2 > TABLE_GUARD:
            raise SpecViolation(f"operation table for |R|={self.size} exceeds guard")
        t = np.empty((self.size, self.size), dtype=np.int64)
        for x in range(self.size):
            for y in range(x, self.size):
                t[x, y] = t[y, x] = self.add(x, y)
        return t

    @cached_property
    def mul_table(self) -> np.ndarray:
        if self.size**2 > TABLE_GUARD:
            raise SpecViolation(f"operation table for |R|={self.size} exceeds guard")
        t = np.empty((self.size, self.size), dtype=np.int64)
        for x in range(self.size):
            for y in range(x, self.size):
                t[x, y] = t[y, x] = self.mul(x, y)
        return t

    def add_col(self, d: int) -> np.ndarray:
        """Vector over x of the index of x + d."""
        return self.add_table[:, d]

    def mul_row(self, x: int) -> np.ndarray:
        return self.mul_table[x]

    @cached_property
    def neg_table(self) -> np.ndarray:
        return np.array([self.neg(x) for x in range(self.size)], dtype=np.int64)

    def elements(self) -> range:
        return range(self.size)

    # -- additive structure --------------------------------------------------------

    @cached_property
    def additive_structure(self) -> "AdditiveStructure":
        return AdditiveStructure(self)

    def eval_poly(self, p: IntPoly, ys: tuple[int, ...]) -> int:
        """Evaluate an integer polynomial at ring elements."""
        acc = self.zero
        for alpha, c in p.terms.items():
            t = self.embed(c)
            for y, e in zip(ys, alpha):
                if e:
                    t = self.mul(t, self.power(y, e))
            acc = self.add(acc, t)
        return acc

    def poly_table(self, p: IntPoly, n_vars: int) -> np.ndarray:
        """Values of p over all of R^n_vars, indexed in mixed radix base |R|."""
        ys = list(itertools.product(self.elements(), repeat=n_vars))
        return np.array([self.eval_poly(p, y) for y in ys], dtype=np.int64)

    def format_element(self, x: int) -> str:
        spec = self.spec
        if isinstance(spec, ModInt):
            return str(x)
        if isinstance(spec, Product):
            return "(" + ",".join(r.format_element(c) for r, c in zip(self._factors, self._unpack(x))) + ")"
        return "(" + ",".join(str(d) for d in self._vec(x)) + ")"

    def metadata(self) -> dict:
        return {
            "kind": self.spec.text(),
            "size": self.size,
            "char": self.characteristic,
            "lpf": self.lpf,
            "factors": list(self.additive_structure.invariant_factors),
        }

    def metadata_json(self) -> str:
        return json.dumps(self.metadata())

    def __repr__(self) -> str:
        return f"Ring({self.spec.text()})"


class AdditiveStructure:
    """Decomposition (R,+) = Z_b1 x ... x Z_br with b_r = N and phi(1) = (0,..,0,1).

    Carries the generators g_i (ring elements, g_r = 1), the coordinate map,
    and the structure constants c_k^(i,j) with g_i g_j = sum_k c_k^(i,j) g_k.
    """

    def __init__(self, ring: Ring):
        self.ring = ring
        if isinstance(ring.spec, Product):
            self._plan = self._product_plan(ring)
        factors, gens = self._decompose(ring)
        self.invariant_factors = tuple(factors)
        self.generators = tuple(gens)
        assert self.invariant_factors[-1] == ring.characteristic
        assert self.generators[-1] == ring.one
        self.rank = len(factors)
        self._coord_cache = self._build_coords()

    @staticmethod
    def _product_plan(ring: Ring) -> dict:
        """Which component carries the heaviest power of each prime of N."""
        n = ring.characteristic
        comp_factorizations = [factorize(r.characteristic) for r in ring._factors]
        selected = {}
        for p in factorize(n):
            # max() keeps the first maximum, so the first component wins ties
            selected[p] = max(
                range(len(ring._factors)), key=lambda ci: comp_factorizations[ci].get(p, 0)
            )
        idempotents = {p: crt_idempotent(p ** comp_factorizations[selected[p]][p], n) for p in selected}
        return {
            "selected": selected,
            "comp_factorizations": comp_factorizations,
            "idempotents": idempotents,
        }

    def _decompose(self, ring: Ring) -> tuple[list[int], list[int]]:
        spec = ring.spec
        if isinstance(spec, ModInt):
            return [spec.n], [ring.one]
        if isinstance(spec, Quotient):
            d = spec.f.degree()
            xs = []
            for power in range(d - 1, 0, -1):
                digits = [0] * d
                digits[power] = 1
                xs.append(ring._unvec(digits))
            return [spec.n] * d, xs + [ring.one]
        if isinstance(spec, NilpotentExt):
            gens = []
            for i in range(1, spec.k + 1):
                digits = [0] * (spec.k + 1)
                digits[i] = 1
                gens.append(ring._unvec(digits))
            return [spec.p] * (spec.k + 1), gens + [ring.one]
        assert isinstance(spec, Product)
        n = ring.characteristic
        selected = self._plan["selected"]
        comp_factorizations = self._plan["comp_factorizations"]
        factors: list[int] = []
        gens: list[int] = []
        # non-final factors of each component lift directly
        for ci, part in enumerate(ring._factors):
            st = part.additive_structure
            for b, g in zip(st.invariant_factors[:-1], st.generators[:-1]):
                comps = [r.zero for r in ring._factors]
                comps[ci] = g
                factors.append(b)
                gens.append(ring._pack(comps))
        # the final Z_{N_i} factors split by CRT; the heaviest power of each prime
        # recombines into the Z_N block around 1, the rest become new factors
        for ci, part in enumerate(ring._factors):
            for p, e in sorted(comp_factorizations[ci].items()):
                if selected[p] == ci:
                    continue
                u = crt_idempotent(p**e, part.characteristic)
                comps = [r.zero for r in ring._factors]
                comps[ci] = part.embed(u)
                factors.append(p**e)
                gens.append(ring._pack(comps))
        factors.append(n)
        gens.append(ring.one)
        return factors, gens

    def _build_coords(self) -> np.ndarray:
        ring = self.ring
        r = self.rank
        coords = np.empty((ring.size, r), dtype=np.int64)
        spec = ring.spec
        if isinstance(spec, (ModInt, Quotient, NilpotentExt)):
            for x in ring.elements():
                coords[x] = self._direct_coords(x)
        else:
            for x in ring.elements():
                coords[x] = self._product_coords(x)
        # verification: coordinates reproduce the element and are unique
        seen = set()
        for x in ring.elements():
            t = tuple(int(v) for v in coords[x])
            assert t not in seen
            seen.add(t)
        one = tuple(int(v) for v in coords[ring.one])
        assert one == (0,) * (r - 1) + (1,)
        return coords

    def _direct_coords(self, x: int) -> list[int]:
        ring = self.ring
        spec = ring.spec
        if isinstance(spec, ModInt):
            return [x]
        digits = ring._vec(x)
        if isinstance(spec, Quotient):
            return list(reversed(digits))
        return digits[1:] + [digits[0]]

    def _product_coords(self, x: int) -> list[int]:
        ring = self.ring
        n = ring.characteristic
        comps = ring._unpack(x)
        selected = self._plan["selected"]
        comp_factorizations = self._plan["comp_factorizations"]
        idempotents = self._plan["idempotents"]
        out: list[int] = []
        finals: list[int] = []
        for part, c in zip(ring._factors, comps):
            v = part.additive_structure.coords(c)
            out.extend(v[:-1])
            finals.append(v[-1])
        # z collects the heaviest prime parts of the final coordinates
        z = 0
        for p, ci in selected.items():
            e = comp_factorizations[ci][p]
            z += (finals[ci] % p**e) * idempotents[p]
        z %= n
        for ci, part in enumerate(ring._factors):
            for p, e in sorted(comp_factorizations[ci].items()):
                if selected[p] == ci:
                    continue
                out.append((finals[ci] - z) % p**e)
        out.append(z)
        return out

    def coords(self, x: int) -> tuple[int, ...]:
        return tuple(int(v) for v in self._coord_cache[x])

    @property
    def coords_matrix(self) -> np.ndarray:
        return self._coord_cache

    def from_coords(self, xs: tuple[int, ...]) -> int:
        ring = self.ring
        acc = ring.zero
        for x, g, b in zip(xs, self.generators, self.invariant_factors):
            term = ring.mul(ring.embed(x % b), g)
            acc = ring.add(acc, term)
        return acc

    @cached_property
    def structure_constants(self) -> np.ndarray:
        """c[k, i, j] with g_i g_j = sum_k c_k g_k, entries reduced mod b_k."""
        r = self.rank
        c = np.empty((r, r, r), dtype=np.int64)
        for i in range(r):
            for j in range(i, r):
                prod = self.ring.mul(self.generators[i], self.generators[j])
                v = self.coords(prod)
                c[:, i, j] = v
                c[:, j, i] = v
        return c


def make_ring(spec: RingSpec) -> Ring:
    return Ring(spec)


def embed_int(ring: Ring, a: int) -> int:
    return ring.embed(a)


def is_unit(ring: Ring, x: int) -> bool:
    return ring.is_unit(x)


def additive_structure(ring: Ring) -> AdditiveStructure:
    return ring.additive_structure


# -- textual ring specs -----------------------------------------------------------


def parse_ring_spec(text: str) -> RingSpec:
    """Grammar: ``zmod:15``, ``pgr:6:x^2-2``, ``prod:(zmod:3,zmod:9)``, ``nilp:3:2``."""
    spec, rest = _parse_spec(text.strip())
    if rest:
        raise ParseError(f"trailing input {rest!r} in ring spec")
    return spec


def _parse_spec(text: str) -> tuple[RingSpec, str]:
    if text.startswith("zmod:"):
        body, rest = _take_atom(text[len("zmod:"):])
        return ModInt(_int(body)), rest
    if text.startswith("pgr:"):
        body = text[len("pgr:"):]
        if ":" not in body:
            raise ParseError(f"pgr spec needs modulus and polynomial: {text!r}")
        mod_text, poly_body = body.split(":", 1)
        poly_text, rest = _take_atom(poly_body)
        f = parse_poly(poly_text, var="x")
        return Quotient(_int(mod_text), f), rest
    if text.startswith("nilp:"):
        body = text[len("nilp:"):]
        if ":" not in body:
            raise ParseError(f"nilp spec needs prime and count: {text!r}")
        p_text, k_body = body.split(":", 1)
        k_text, rest = _take_atom(k_body)
        return NilpotentExt(_int(p_text), _int(k_text)), rest
    if text.startswith("prod:("):
        body = text[len("prod:("):]
        parts = []
        while True:
            spec, body = _parse_spec(body)
            parts.append(spec)
            if body.startswith(","):
                body = body[1:]
                continue
            if body.startswith(")"):
                return Product(tuple(parts)), body[1:]
            raise ParseError(f"unterminated product in ring spec near {body!r}")
    raise ParseError(f"unknown ring spec {text!r}")


def _take_atom(text: str) -> tuple[str, str]:
    for i, ch in enumerate(text):
        if ch in ",)":
            return text[:i], text[i:]
    return text, ""


def _int(text: str) -> int:
    try:
        return int(text)
    except ValueError:
        raise ParseError(f"bad integer {text!r} in ring spec") from None
