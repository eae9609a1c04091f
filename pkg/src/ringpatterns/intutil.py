"""Small integer helpers: factorization, least prime factors, heights, determinants."""

from __future__ import annotations

import math
from fractions import Fraction


def least_prime_factor(n: int) -> int:
    if n < 2:
        raise ValueError(f"least prime factor undefined for {n}")
    if n % 2 == 0:
        return 2
    d = 3
    while d * d <= n:
        if n % d == 0:
            return d
        d += 2
    return n


def is_prime(n: int) -> bool:
    return n >= 2 and least_prime_factor(n) == n


def prime_factors(n: int) -> list[int]:
    """Distinct prime factors of n, ascending."""
    out = []
    while n > 1:
        p = least_prime_factor(n)
        out.append(p)
        while n % p == 0:
            n //= p
    return out


def factorize(n: int) -> dict[int, int]:
    """Prime factorization {p: exponent} by trial division."""
    out: dict[int, int] = {}
    while n > 1:
        p = least_prime_factor(n)
        e = 0
        while n % p == 0:
            n //= p
            e += 1
        out[p] = e
    return out


def largest_prime_factor(n: int) -> int:
    ps = prime_factors(abs(n))
    if not ps:
        raise ValueError(f"no prime factor of {n}")
    return ps[-1]


def primes_in_range(lo: int, hi: int) -> list[int]:
    return [n for n in range(max(lo, 2), hi + 1) if is_prime(n)]


def first_primes_above(bound: int, count: int) -> list[int]:
    out = []
    n = bound + 1
    while len(out) < count:
        if is_prime(n):
            out.append(n)
        n += 1
    return out


def residue_height(a: int, n: int) -> int:
    """Distance of a mod n to 0 in the cyclic metric: min(a mod n, n - a mod n)."""
    r = a % n
    return min(r, n - r)


def crt_idempotent(q: int, n: int) -> int:
    """The residue u mod n with u = 1 mod q and u = 0 mod n//q, for q | n coprime to n//q."""
    m = n // q
    if math.gcd(q, m) != 1:
        raise ValueError(f"{q} and {n // q} not coprime")
    # u = m * (m^{-1} mod q)
    return (m * pow(m, -1, q)) % n


def int_det(rows: list[list[int]]) -> int:
    """Exact determinant of a square integer matrix (fraction-free via Fractions)."""
    n = len(rows)
    a = [[Fraction(x) for x in row] for row in rows]
    det = Fraction(1)
    for col in range(n):
        pivot = next((r for r in range(col, n) if a[r][col] != 0), None)
        if pivot is None:
            return 0
        if pivot != col:
            a[col], a[pivot] = a[pivot], a[col]
            det = -det
        det *= a[col][col]
        inv = 1 / a[col][col]
        for r in range(col + 1, n):
            factor = a[r][col] * inv
            if factor:
                for c in range(col, n):
                    a[r][c] -= factor * a[col][c]
    assert det.denominator == 1
    return int(det)


def matrix_rank(rows: list[list[int]]) -> int:
    """Rank over the rationals."""
    a = [[Fraction(x) for x in row] for row in rows]
    rank = 0
    ncols = len(a[0]) if a else 0
    row = 0
    for col in range(ncols):
        pivot = next((r for r in range(row, len(a)) if a[r][col] != 0), None)
        if pivot is None:
            continue
        a[row], a[pivot] = a[pivot], a[row]
        inv = 1 / a[row][col]
        for r in range(row + 1, len(a)):
            factor = a[r][col] * inv
            if factor:
                for c in range(col, ncols):
                    a[r][c] -= factor * a[row][c]
        row += 1
        rank += 1
        if row == len(a):
            break
    return rank
