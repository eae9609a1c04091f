"""PET induction machinery: weight pairs and permissible operations,
termination bounds, the numeric inductive step, matrix regularization,
and the desk-scale trace composing them.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from .counting import ENUMERATION_CAP, LambdaQuery, lambda_average, linear_ud_check, vdc_select_h
from .errors import (
    Deg0Input,
    HypothesisViolation,
    InvertibilityViolation,
    SearchBudgetExceeded,
)
from .fourier import FunctionOnRing, gowers_norm
from .intutil import residue_height
from .poly import (
    IntPoly,
    essentially_distinct,
    independence_check,
    poly_weight,
    translate_matches,
    weight_sequence,
    zn_height,
    zn_profile,
)
from .rings import Ring

# -- weight pairs -------------------------------------------------------------


@dataclass(frozen=True)
class WeightPair:
    """(m, finitely supported weight sequence); the sum of the sequence is at
    most m and trailing zeros are normalized away."""

    m: int
    seq: tuple[int, ...]

    def __post_init__(self):
        if self.m < 1:
            raise ValueError("m must be positive")
        seq = tuple(int(a) for a in self.seq)
        while seq and seq[-1] == 0:
            seq = seq[:-1]
        if any(a < 0 for a in seq):
            raise ValueError("sequence entries must be nonnegative")
        if sum(seq) > self.m:
            raise ValueError("sequence mass exceeds m")
        object.__setattr__(self, "seq", seq)

    def entry(self, r: int) -> int:
        return self.seq[r - 1] if 1 <= r <= len(self.seq) else 0


def classify(pair: WeightPair, n: int) -> str:
    """'deg0' (all zero), 'deg1' (support within the first n slots), 'general'."""
    if not pair.seq:
        return "deg0"
    if len(pair.seq) <= n:
        return "deg1"
    return "general"


def is_lonely(pair: WeightPair, n: int) -> bool:
    """A single 1 sitting above slot n, everything else zero."""
    s = len(pair.seq)
    return s > n and pair.seq[-1] == 1 and all(a == 0 for a in pair.seq[:-1])


def permissible_successors(pair: WeightPair, n: int) -> set[WeightPair]:
    """All pairs reachable by one permissible operation."""
    if classify(pair, n) == "deg0":
        raise Deg0Input("no operation applies to an all-zero sequence")
    m = pair.m
    out: set[WeightPair] = set()
    if is_lonely(pair, n):
        s = len(pair.seq)
        for total in range(1, 2 * m + 1):
            for prefix in _compositions_upto(total, s - 1):
                for m2 in range(max(m, total), 2 * m + 1):
                    out.add(WeightPair(m2, prefix))
    else:
        s_prime = next(i for i, a in enumerate(pair.seq) if a > 0)
        tail = (pair.seq[s_prime] - 1,) + pair.seq[s_prime + 1 :]
        if s_prime == 0:
            prefixes = [()]
        else:
            prefixes = [
                p
                for total in range(0, 2 * m + 1)
                for p in _compositions_upto(total, s_prime)
            ]
        for prefix in prefixes:
            seq = prefix + tail
            mass = sum(seq)
            for m2 in range(max(m, mass, 1), 2 * m + 1):
                out.add(WeightPair(m2, seq))
    return out


def _compositions_upto(total: int, parts: int):
    """Compositions of exactly `total` into `parts` nonnegative slots."""
    if parts == 0:
        if total == 0:
            yield ()
        return
    if parts == 1:
        yield (total,)
        return
    for first in range(total + 1):
        for rest in _compositions_upto(total - first, parts - 1):
            yield (first,) + rest


def is_permissible_transition(before: WeightPair, after: WeightPair, n: int) -> bool:
    """Membership test for one permissible operation, without enumeration."""
    m = before.m
    if not (m <= after.m <= 2 * m):
        return False
    if classify(before, n) == "deg0":
        return False
    if is_lonely(before, n):
        s = len(before.seq)
        if not after.seq or len(after.seq) > s - 1:
            return False
        return sum(after.seq) <= 2 * m
    s_prime = next(i for i, a in enumerate(before.seq) if a > 0)
    expected_tail = _trim(
        (before.seq[s_prime] - 1,) + before.seq[s_prime + 1 :]
    )
    full_len = s_prime + len(expected_tail)
    got = after.seq + (0,) * max(0, full_len - len(after.seq))
    if len(got) > max(full_len, s_prime):
        return False
    prefix, tail = got[:s_prime], _trim(got[s_prime:])
    return tail == expected_tail and sum(prefix) <= 2 * m


def _trim(seq: tuple[int, ...]) -> tuple[int, ...]:
    while seq and seq[-1] == 0:
        seq = seq[:-1]
    return seq


# -- termination bounds ----------------------------------------------------------


SATURATION = 1 << 20000
_POW_GUARD = 20000


@dataclass(frozen=True)
class TerminationBound:
    """A step bound; when saturated the true value is at least `value`."""

    value: int
    saturated: bool

    def __ge__(self, other: int) -> bool:
        return self.value >= other

    def __str__(self) -> str:
        if self.saturated:
            return f">= 2^{_POW_GUARD}"
        return str(self.value)


def _sat(x: int) -> int:
    return x if x < SATURATION else SATURATION


def t_bound(m: int, d: int) -> TerminationBound:
    """The explicit PET termination bound: level-1 pair f(m) = m, g(m) = 2^m m,
    lifted d-1 times via f'(m) = m + sum_{i<=m} f((2g)^{oi}(m)) and
    g'(m) = (2g)^{o(m+1)}(m).  Values saturate once they pass 2^20000."""
    if m < 1 or d < 1:
        raise ValueError("m and d must be positive")

    def f1(x: int) -> int:
        return x

    def g1(x: int) -> int:
        if x >= _POW_GUARD:
            return SATURATION
        return _sat((1 << x) * x)

    f, g = f1, g1
    for _ in range(d - 1):
        f, g = _lift(f, g)
    value = f(m)
    return TerminationBound(value, value >= SATURATION)


_LOOP_CAP = 10**6


def _lift(f, g):
    def two_g(x: int) -> int:
        return _sat(2 * g(x))

    def f_next(m: int) -> int:
        if m >= _LOOP_CAP:
            return SATURATION
        total = m
        x = m
        for _ in range(m + 1):
            total = _sat(total + f(x))
            if total >= SATURATION:
                return SATURATION
            x = two_g(x)
        return total

    def g_next(m: int) -> int:
        if m >= _LOOP_CAP:
            return SATURATION
        x = m
        for _ in range(m + 1):
            x = two_g(x)
        return x

    return f_next, g_next


def max_path_length(
    pair: WeightPair, n: int, cap: int = 500_000, collapse_m: bool = True
) -> int:
    """Longest chain of permissible operations from `pair` down to the
    degree-one class, by memoized search over the reachable graph.

    With collapse_m the search uses the fact that the longest path is monotone
    in m (a larger m only loosens every constraint), so m' = 2m may be assumed
    at every step; the reachable graph is often astronomically large without it.
    Raises SearchBudgetExceeded once the memo passes `cap` states.
    """
    cls = classify(pair, n)
    if cls == "deg0":
        raise Deg0Input("no path from an all-zero sequence")
    if cls == "deg1":
        return 0
    memo: dict[WeightPair, int] = {}
    succ_cache: dict[WeightPair, set[WeightPair]] = {}
    generated = [0]

    def successors(p: WeightPair) -> set[WeightPair]:
        if p not in succ_cache:
            budget = 20 * cap - generated[0]
            if _successor_count_estimate(p, n, collapse_m) > budget:
                raise SearchBudgetExceeded(
                    f"successor enumeration would pass {20 * cap} pairs"
                )
            out = set()
            for q in _successor_iter(p, n, collapse_m):
                out.add(q)
                generated[0] += 1
                if generated[0] > 20 * cap:
                    raise SearchBudgetExceeded(
                        f"successor enumeration passed {20 * cap} pairs"
                    )
            succ_cache[p] = out
        return succ_cache[p]

    def _successor_count_estimate(p: WeightPair, n_: int, collapse: bool) -> int:
        m = p.m
        m_choices = 1 if collapse else m + 1
        if is_lonely(p, n_):
            parts = len(p.seq) - 1
        else:
            parts = next(i for i, a in enumerate(p.seq) if a > 0)
        if parts == 0:
            return m_choices
        return min((2 * m + 1) ** parts, 1 << 62) * m_choices

    def _successor_iter(p: WeightPair, n_: int, collapse: bool):
        m = p.m
        m_range = [2 * m] if collapse else range(m, 2 * m + 1)
        if is_lonely(p, n_):
            s = len(p.seq)
            for total in range(1, 2 * m + 1):
                for prefix in _compositions_upto(total, s - 1):
                    for m2 in m_range:
                        if total <= m2:
                            yield WeightPair(m2, prefix)
            return
        s_prime = next(i for i, a in enumerate(p.seq) if a > 0)
        tail = (p.seq[s_prime] - 1,) + p.seq[s_prime + 1 :]
        prefixes = (
            [()]
            if s_prime == 0
            else (
                pre
                for total in range(0, 2 * m + 1)
                for pre in _compositions_upto(total, s_prime)
            )
        )
        for prefix in prefixes:
            seq = prefix + tail
            mass = sum(seq)
            for m2 in m_range:
                if mass <= m2:
                    yield WeightPair(m2, seq)

    stack = [pair]
    while stack:
        p = stack[-1]
        if p in memo:
            stack.pop()
            continue
        if is_lonely(p, n) and len(p.seq) - 1 <= n:
            # every successor lands in the degree-one class: one step remains
            memo[p] = 1
            stack.pop()
            continue
        succ = successors(p)
        unresolved = [
            q for q in succ if classify(q, n) == "general" and q not in memo
        ]
        if unresolved:
            stack.extend(unresolved)
            if len(succ_cache) > cap or len(stack) > 4 * cap:
                raise SearchBudgetExceeded(
                    f"more than {cap} weight-pair states explored"
                )
            continue
        best = 0
        for q in succ:
            c = classify(q, n)
            if c == "deg1":
                best = max(best, 1)
            elif c == "general":
                best = max(best, 1 + memo[q])
        memo[p] = best
        stack.pop()
    return memo[pair]


# -- the numeric inductive step ------------------------------------------------


@dataclass
class PetStepResult:
    m_prime: int
    family: list[IntPoly]                  # mod-N coefficients
    funcs: list[FunctionOnRing]            # g_0 .. g_{m'}
    labels: list[str]                      # provenance of each g_i
    selected_h: tuple[int, ...]
    branch: str                            # one of 'a'..'e'
    lhs: float
    rhs: float
    pair_before: WeightPair
    pair_after: WeightPair
    ell: int
    lambda_q: float
    h_bound: int
    excluded: set = field(default_factory=set)


def pet_step(
    ring: Ring,
    family: list[IntPoly],
    funcs: list[FunctionOnRing],
    h_bound: int,
    names: list[str] | None = None,
    budget: int = ENUMERATION_CAP,
) -> PetStepResult:
    """One van der Corput differencing step of a polynomial family.

    Follows the inductive-step recipe: reorder so degree-one members lead and
    the differencing member has minimal weight, exclude the shifts that break
    essential distinctness, pick the correlation-maximizing shift, difference,
    and in the all-same-leading-coefficient case recenter (branch e).
    """
    n_mod = ring.characteristic
    m = len(family)
    if m < 1:
        raise HypothesisViolation("empty family")
    nv = family[0].n_vars
    if len(funcs) != m + 1:
        raise HypothesisViolation("need m+1 functions")
    if not all(f.bounded_by_one for f in funcs):
        raise HypothesisViolation("all functions must be 1-bounded")
    names = names or [f"f{i}" for i in range(m + 1)]

    profiles = [zn_profile(p, n_mod) for p in family]
    k = max(pr.deg_zn for pr in profiles)
    if k <= 1:
        raise HypothesisViolation(f"maximal degree {k} must exceed 1")
    if k >= ring.lpf:
        raise HypothesisViolation(f"maximal degree {k} must be below lpf N = {ring.lpf}")
    height = max(zn_height(p, n_mod) for p in family)
    if height >= ring.lpf:
        raise HypothesisViolation(f"family height {height} must be below lpf N = {ring.lpf}")
    if not (max(2, m * m) <= h_bound <= math.ceil(n_mod / 2)):
        raise HypothesisViolation(
            f"H = {h_bound} outside [max(2, m^2), ceil(N/2)] = [{max(2, m*m)}, {math.ceil(n_mod/2)}]"
        )
    weights = [pr.weight for pr in profiles]
    if profiles[-1].weight != max(weights):
        raise HypothesisViolation("the last member must have maximal weight")
    if m >= 2:
        ok, witness = essentially_distinct(family, n_mod)
        if not ok:
            raise HypothesisViolation(f"family not essentially distinct (witness {witness})")

    pair_before = WeightPair(m, weight_sequence(family, n_mod))

    perm, ell = _reorder_for_step(family, profiles, m)
    fam = [family[i] for i in perm]
    f_list = [funcs[0]] + [funcs[i + 1] for i in perm]
    f_names = [names[0]] + [names[i + 1] for i in perm]

    # exclusion set: shifts whose translate collides with some member
    excluded: set[tuple[int, ...]] = set()
    for i in range(ell - 1, m):
        for j in range(m):
            for h in translate_matches(fam[i], fam[j], n_mod, h_bound, c=None):
                excluded.add(h)
    assert len(excluded) <= m * m * (2 * h_bound - 1) ** (nv - 1)

    g_table = _product_table(ring, fam, f_list[1:], nv, budget)
    selected_h, _, _ = vdc_select_h(ring, g_table, h_bound, excluded, nv)

    new_family, new_funcs, new_labels = _difference_family(
        ring, fam, f_list, f_names, selected_h, ell
    )
    m_prime = len(new_family)
    assert m_prime == 2 * m - ell

    # branch determination
    r = max(poly_weight(p, n_mod) for p in new_family)
    if ell >= 2:
        branch = "a"
    elif profiles[perm[-1]].weight > zn_profile(fam[0], n_mod).weight:
        branch = "b"
    else:
        lc_first = zn_profile(fam[0], n_mod).leading
        lc_last = zn_profile(fam[-1], n_mod).leading
        if lc_first != lc_last:
            branch = "c"
        elif poly_weight(new_family[-1], n_mod) == r:
            branch = "d"
        else:
            branch = "e"

    if branch == "e":
        i_star = next(
            i for i, p in enumerate(new_family) if poly_weight(p, n_mod) == r
        )
        recentered = []
        for i, p in enumerate(new_family):
            q = -p if i == i_star else p - new_family[i_star]
            recentered.append(q.reduce_mod(n_mod))
        new_family = recentered
        g0, gi = new_funcs[i_star + 1], new_funcs[0]
        new_funcs = [g0] + new_funcs[1:]
        new_funcs[i_star + 1] = gi
        l0, li = new_labels[i_star + 1], new_labels[0]
        new_labels = [l0] + new_labels[1:]
        new_labels[i_star + 1] = li

    assert poly_weight(new_family[-1], n_mod) == max(
        poly_weight(p, n_mod) for p in new_family
    )

    pair_after = WeightPair(m_prime, weight_sequence(new_family, n_mod))

    lhs = abs(lambda_average(LambdaQuery(ring, family, funcs, budget=budget)))
    lam_q = abs(lambda_average(LambdaQuery(ring, new_family, new_funcs, budget=budget)))
    rhs = 2 ** (nv / 2) * (2 ** (nv / 2) * m / math.sqrt(h_bound) + math.sqrt(lam_q))

    result = PetStepResult(
        m_prime=m_prime,
        family=new_family,
        funcs=new_funcs,
        labels=new_labels,
        selected_h=selected_h,
        branch=branch,
        lhs=lhs,
        rhs=rhs,
        pair_before=pair_before,
        pair_after=pair_after,
        ell=ell,
        lambda_q=lam_q,
        h_bound=h_bound,
        excluded=excluded,
    )
    _check_step_postconditions(ring, result, family, funcs, k, height, nv)
    return result


def _reorder_for_step(
    family: list[IntPoly], profiles, m: int
) -> tuple[list[int], int]:
    """Indices of the reordered family (last member fixed) and the 1-based
    count ell marking where the degree-one prefix ends."""
    n_mod = profiles[0].modulus
    head = list(range(m - 1))
    linear = [i for i in head if profiles[i].deg_zn == 1]
    higher = [i for i in head if profiles[i].deg_zn != 1]
    if profiles[m - 1].deg_zn == 1:
        # the last member has maximal weight; with k > 1 it cannot be linear
        raise HypothesisViolation("degree bookkeeping is inconsistent")
    if linear:
        lead = min(linear, key=lambda i: (profiles[i].weight, i))
        linear = [lead] + [i for i in linear if i != lead]
        if higher:
            front = min(higher, key=lambda i: (profiles[i].weight, i))
            higher = [front] + [i for i in higher if i != front]
        return linear + higher + [m - 1], len(linear) + 1
    # ell = 1: prefer a leading coefficient distinct from the last member's
    min_w = min(min(profiles[i].weight for i in head), profiles[m - 1].weight) if head else profiles[m - 1].weight
    candidates = [i for i in head if profiles[i].weight == min_w]
    distinct = [
        i for i in candidates if profiles[i].leading != profiles[m - 1].leading
    ]
    lead = (distinct or candidates)[0]
    rest = [i for i in head if i != lead]
    return [lead] + rest + [m - 1], 1


def _product_table(ring, fam, funcs, nv, budget) -> np.ndarray:
    if ring.size ** (nv + 1) > budget:
        raise HypothesisViolation("enumeration budget exceeded for the shift table")
    tables = [ring.poly_table(p, nv) for p in fam]
    g = np.ones((ring.size, ring.size**nv), dtype=np.complex128)
    for f, t in zip(funcs, tables):
        for yi in range(ring.size**nv):
            g[:, yi] *= f.values[ring.add_col(int(t[yi]))]
    return g


def _difference_family(ring, fam, f_list, f_names, h, ell):
    """The differenced family Q, its functions, and provenance labels."""
    n_mod = ring.characteristic
    m = len(fam)
    p1 = fam[0]
    entries: list[tuple[IntPoly, FunctionOnRing, str]] = []
    g0 = None
    if ell >= 2:
        for i in range(1, ell):  # 1-based positions of the linear prefix
            p = fam[i - 1]
            a = (p.evaluate(h) - p.constant_term()) % n_mod
            shifted = FunctionOnRing(
                ring,
                f_list[i].values[ring.add_col(ring.embed(a))] * np.conj(f_list[i].values),
                f_list[i].bounded_by_one,
            )
            label = f"delta[{a}]({f_names[i]})"
            q = (p - p1).reduce_mod(n_mod)
            if i == 1:
                g0 = (shifted, label)
            else:
                entries.append((q, shifted, label))
        start = ell
    else:
        g0 = (f_list[1].conj(), f"conj({f_names[1]})")
        q_shift = (p1.shifted(h) - p1).reduce_mod(n_mod)
        entries.append((q_shift, f_list[1], f_names[1]))
        start = 2
    for i in range(start, m + 1):
        p = fam[i - 1]
        entries.append(((p - p1).reduce_mod(n_mod), f_list[i].conj(), f"conj({f_names[i]})"))
        entries.append(((p.shifted(h) - p1).reduce_mod(n_mod), f_list[i], f_names[i]))
    assert g0 is not None
    new_family = [q for q, _, _ in entries]
    new_funcs = [g0[0]] + [f for _, f, _ in entries]
    new_labels = [g0[1]] + [lab for _, _, lab in entries]
    return new_family, new_funcs, new_labels


def _check_step_postconditions(ring, result, family, funcs, k, height, nv):
    n_mod = ring.characteristic
    if len(result.family) >= 2:
        ok, witness = essentially_distinct(result.family, n_mod)
        assert ok, f"differenced family lost essential distinctness: {witness}"
    height_bound = (k + 1) ** (2 * k * nv) * max(height, 1) * result.h_bound**k
    got = max(zn_height(p, n_mod) for p in result.family)
    assert got <= height_bound, f"height {got} exceeds {height_bound}"
    assert is_permissible_transition(result.pair_before, result.pair_after, nv), (
        f"transition {result.pair_before} -> {result.pair_after} is not permissible"
    )
    assert np.allclose(result.funcs[-1].values, funcs[-1].values), "lost the tracked function"
    assert result.lhs <= result.rhs + 1e-8, f"{result.lhs} > {result.rhs}"


# -- matrix regularization ----------------------------------------------------------


def matrix_regularize(
    a_matrix: list[list[int]], n_mod: int, m0: int
) -> tuple[list[list[int]], list[tuple[int, int, int]]]:
    """Elementary row operations making all row entries pairwise distinct and
    nonzero, with height control.

    Requires every column to have a nonzero entry, no two identical columns,
    all heights at most m0, and m0^(2^(nm^2)) * 2^(3*2^(nm^2)) < N.  Returns
    (B, ops) where ops lists (target_row, source_row, multiplier) and replaying
    them over Z_N transforms A into B exactly.
    """
    n = len(a_matrix)
    m = len(a_matrix[0]) if n else 0
    if n == 0 or m == 0:
        raise HypothesisViolation("empty matrix")
    a = [[x % n_mod for x in row] for row in a_matrix]
    for j in range(m):
        if all(a[i][j] % n_mod == 0 for i in range(n)):
            raise HypothesisViolation(f"column {j} is zero")
    for j1 in range(m):
        for j2 in range(j1 + 1, m):
            if all(a[i][j1] == a[i][j2] for i in range(n)):
                raise HypothesisViolation(f"columns {j1} and {j2} are identical")
    if any(residue_height(a[i][j], n_mod) > m0 for i in range(n) for j in range(m)):
        raise HypothesisViolation(f"an entry exceeds the declared height {m0}")
    if n == 1:
        # a single admissible row is already regular
        return a, []
    exponent = n * m * m
    if exponent > 20:
        raise HypothesisViolation(
            f"threshold 2^(3*2^{exponent}) is beyond desk scale"
        )
    t = 1 << exponent
    if max(m0, 1) ** t * (1 << (3 * t)) >= n_mod:
        raise HypothesisViolation(
            f"m0^(2^{exponent}) * 2^(3*2^{exponent}) is not below N"
        )

    ops: list[tuple[int, int, int]] = []
    heights = max(m0, 1)
    step = 0

    def multiplier() -> int:
        return 2 ** (3 * 2**step - 1) * m0 ** (2**step)

    # phase 1: clear zero entries
    while True:
        zero_pos = next(
            ((i, j) for i in range(n) for j in range(m) if a[i][j] % n_mod == 0), None
        )
        if zero_pos is None:
            break
        i1, j1 = zero_pos
        i2 = next(i for i in range(n) if a[i][j1] % n_mod != 0)
        c = multiplier()
        for j in range(m):
            a[i1][j] = (a[i1][j] + c * a[i2][j]) % n_mod
        ops.append((i1, i2, c))
        step += 1

    # phase 2: separate equal entries within rows
    while True:
        dup = next(
            (
                (i, j1, j2)
                for i in range(n)
                for j1 in range(m)
                for j2 in range(j1 + 1, m)
                if a[i][j1] == a[i][j2]
            ),
            None,
        )
        if dup is None:
            break
        i1, j1, j2 = dup
        i2 = next(i for i in range(n) if a[i][j1] != a[i][j2])
        c = multiplier()
        for j in range(m):
            a[i1][j] = (a[i1][j] + c * a[i2][j]) % n_mod
        ops.append((i1, i2, c))
        step += 1

    height_bound = (8 * max(m0, 1)) ** t
    for i in range(n):
        row = a[i]
        assert len({x % n_mod for x in row}) == m, "duplicate entries survived"
        assert all(x % n_mod != 0 for x in row), "zero entries survived"
        assert all(residue_height(x, n_mod) <= height_bound for x in row)
    return a, ops


def replay_ops(
    a_matrix: list[list[int]], ops: list[tuple[int, int, int]], n_mod: int
) -> list[list[int]]:
    a = [[x % n_mod for x in row] for row in a_matrix]
    for target, source, c in ops:
        for j in range(len(a[0])):
            a[target][j] = (a[target][j] + c * a[source][j]) % n_mod
    return a


# -- the desk-scale trace -----------------------------------------------------------


@dataclass
class TraceStage:
    index: int
    family: list[IntPoly]
    m: int
    h_bound: int | None
    selected_h: tuple[int, ...] | None
    branch: str | None
    lhs: float
    rhs: float


@dataclass
class UsControlTrace:
    target: int
    rearrangement: str
    stages: list[TraceStage]
    final_family: list[IntPoly]
    u_degree: int
    u_value: float
    lhs: float
    bound: float
    certified: bool
    h_schedule: list[int]


def us_control_trace(
    ring: Ring,
    family: list[IntPoly],
    funcs: list[FunctionOnRing],
    target_index: int,
    h_overrides: list[int] | None = None,
    budget: int = ENUMERATION_CAP,
) -> UsControlTrace:
    """Drive a polynomial average down to a Gowers-norm bound for one function.

    Linear families go through rational row reduction directly; otherwise the
    inductive step runs until the family is linear, the coefficient matrix is
    regularized if multivariate, and the invertible linear average is bounded
    by the U^{m_D} norm of the tracked function.  Without overrides each step
    uses the smallest permissible window, since the proof schedule's constants
    are far beyond desk scale; every per-step inequality is still certified.
    """
    m = len(family)
    nv = family[0].n_vars
    n_mod = ring.characteristic
    independent, _ = independence_check(family)
    if not independent:
        raise HypothesisViolation("family is not independent", stage="input")
    if any(p.constant_term() != 0 for p in family):
        raise HypothesisViolation("constant terms must vanish", stage="input")
    if not 0 <= target_index <= m:
        raise HypothesisViolation("target index out of range", stage="input")
    k = max(p.degree() for p in family)
    if k >= ring.lpf:
        raise HypothesisViolation(
            f"maximal degree {k} must be below lpf N = {ring.lpf}", stage="input"
        )

    lhs_original = abs(lambda_average(LambdaQuery(ring, family, funcs, budget=budget)))

    if k == 1:
        return _linear_trace(ring, family, funcs, target_index, lhs_original, nv)

    fam, f_list, j_pos, rearrangement = _rearrange_for_target(
        ring, family, funcs, target_index, n_mod
    )

    stages: list[TraceStage] = []
    schedule: list[int] = []
    current_family = [p.reduce_mod(n_mod) for p in fam]
    current_funcs = list(f_list)
    names = [f"f{i}" for i in range(m + 1)]
    step_no = 0
    m_sizes = [m]
    while True:
        profiles = [zn_profile(p, n_mod) for p in current_family]
        if max(pr.deg_zn for pr in profiles) <= 1:
            break
        step_no += 1
        if h_overrides is not None:
            if step_no > len(h_overrides):
                raise HypothesisViolation(
                    f"needed more than {len(h_overrides)} window sizes",
                    stage=f"pet-step-{step_no}",
                )
            h_bound = h_overrides[step_no - 1]
        else:
            h_bound = max(2, len(current_family) ** 2)
        try:
            step = pet_step(ring, current_family, current_funcs, h_bound, names=names, budget=budget)
        except HypothesisViolation as exc:
            raise HypothesisViolation(str(exc), stage=f"pet-step-{step_no}") from exc
        stages.append(
            TraceStage(
                index=step_no,
                family=step.family,
                m=step.m_prime,
                h_bound=h_bound,
                selected_h=step.selected_h,
                branch=step.branch,
                lhs=step.lhs,
                rhs=step.rhs,
            )
        )
        schedule.append(h_bound)
        m_sizes.append(step.m_prime)
        current_family = step.family
        current_funcs = step.funcs
        names = step.labels
    depth = step_no
    if depth == 0:
        raise HypothesisViolation("family was already linear mod N", stage="input")

    # strip constants: translate each function by its polynomial's constant term
    m_d = len(current_family)
    lin_funcs = []
    coeff_matrix = [[0] * m_d for _ in range(nv)]
    for idx, p in enumerate(current_family):
        c = p.constant_term() % n_mod
        vals = current_funcs[idx + 1].values[ring.add_col(ring.embed(c))]
        lin_funcs.append(FunctionOnRing(ring, vals, current_funcs[idx + 1].bounded_by_one))
        for v in range(nv):
            alpha = tuple(1 if t == v else 0 for t in range(nv))
            coeff_matrix[v][idx] = p.coefficient(alpha) % n_mod

    if nv == 1:
        b_matrix = coeff_matrix
    else:
        m0 = max(
            residue_height(coeff_matrix[i][j], n_mod)
            for i in range(nv)
            for j in range(m_d)
        )
        try:
            b_matrix, _ops = matrix_regularize(coeff_matrix, n_mod, m0)
        except HypothesisViolation as exc:
            raise HypothesisViolation(str(exc), stage="matrix-regularize") from exc

    coeffs = [tuple(b_matrix[i][j] for i in range(nv)) for j in range(m_d)]
    try:
        lhs_d, u_value = linear_ud_check(
            ring, coeffs, [current_funcs[0]] + lin_funcs, nv
        )
    except InvertibilityViolation as exc:
        raise HypothesisViolation(str(exc), stage="ud-check") from exc

    bound = 2**nv * sum(
        (m_sizes[i - 1] / math.sqrt(schedule[i - 1])) ** (2.0 ** -(depth - 1))
        for i in range(1, depth + 1)
    ) + 2**nv * u_value ** (2.0**-depth)
    certified = lhs_original <= bound + 1e-8
    assert certified, f"composed bound failed: {lhs_original} > {bound}"
    return UsControlTrace(
        target=target_index,
        rearrangement=rearrangement,
        stages=stages,
        final_family=current_family,
        u_degree=m_d,
        u_value=u_value,
        lhs=lhs_original,
        bound=bound,
        certified=certified,
        h_schedule=schedule,
    )


def _linear_trace(ring, family, funcs, target_index, lhs, nv) -> UsControlTrace:
    """Degree-one path: rational row reduction splits the average exactly."""
    from fractions import Fraction

    m = len(family)
    rows = [
        [Fraction(p.coefficient(tuple(1 if t == v else 0 for t in range(nv)))) for p in family]
        for v in range(nv)
    ]
    # Gauss-Jordan over Q, collecting every scale factor used
    needed: set[int] = set()
    mat = [row[:] for row in rows]
    row = 0
    for col in range(m):
        pivot = next((r for r in range(row, nv) if mat[r][col] != 0), None)
        if pivot is None:
            continue
        mat[row], mat[pivot] = mat[pivot], mat[row]
        pv = mat[row][col]
        needed.update((pv.numerator, pv.denominator))
        mat[row] = [x / pv for x in mat[row]]
        for r in range(nv):
            if r != row and mat[r][col] != 0:
                factor = mat[r][col]
                needed.update((factor.numerator, factor.denominator))
                mat[r] = [x - factor * y for x, y in zip(mat[r], mat[row])]
        row += 1
    for q in needed:
        if q % ring.characteristic != 0 and not ring.is_unit(ring.embed(q)):
            raise HypothesisViolation(
                f"scale factor {q} is not a unit", stage="gauss-jordan"
            )
    bound = gowers_norm(funcs[target_index], 1)
    certified = lhs <= bound + 1e-8
    assert certified
    return UsControlTrace(
        target=target_index,
        rearrangement="linear",
        stages=[],
        final_family=list(family),
        u_degree=1,
        u_value=bound,
        lhs=lhs,
        bound=bound,
        certified=certified,
        h_schedule=[],
    )


def _rearrange_for_target(ring, family, funcs, target_index, n_mod):
    """Bring the target function to the tracked last slot.

    Families with the target among the maximal-weight members swap two slots;
    otherwise the whole family is recentered around the last member.
    """
    m = len(family)
    weights = [poly_weight(p) for p in family]
    w_max = max(weights)
    # normalize: last member carries maximal weight (move the last such there)
    last_max = max(i for i, w in enumerate(weights) if w == w_max)
    order = [i for i in range(m) if i != last_max] + [last_max]
    fam = [family[i] for i in order]
    f_list = [funcs[0]] + [funcs[i + 1] for i in order]
    # target position after normalization (0 means f_0)
    if target_index == 0:
        j = 0
    else:
        j = order.index(target_index - 1) + 1
    big = {i + 1 for i in range(m) if poly_weight(fam[i]) == w_max}
    if j == m:
        return fam, f_list, m, "identity"
    if j in big:
        new_fam = fam[:]
        new_fam[j - 1], new_fam[m - 1] = new_fam[m - 1], new_fam[j - 1]
        new_funcs = f_list[:]
        new_funcs[j], new_funcs[m] = new_funcs[m], new_funcs[j]
        return new_fam, new_funcs, m, f"swap({j},{m})"
    last = fam[m - 1]
    diffs = [fam[i] - last for i in range(m - 1)]
    neg_last = IntPoly.zero(last.n_vars) - last
    if j == 0:
        new_fam = diffs + [neg_last]
        new_funcs = [f_list[m]] + f_list[1:m] + [f_list[0]]
    else:
        # f_0 rides -P_m in slot j; the tracked slot carries (P_j - P_m, f_j)
        new_fam = diffs[:]
        tracked = new_fam[j - 1]
        new_fam[j - 1] = neg_last
        new_fam = new_fam + [tracked]
        new_funcs = [f_list[m]] + f_list[1:m] + [f_list[j]]
        new_funcs[j] = f_list[0]
    return new_fam, new_funcs, m, "recenter"
