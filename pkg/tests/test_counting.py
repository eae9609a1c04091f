import numpy as np
import pytest

from ringpatterns.counting import (
    LambdaQuery,
    avoid_3y,
    avoid_y_y2p1,
    char_sum,
    count_configurations,
    count_roots,
    degenerate_bound,
    find_nontrivial_config,
    hadamard_char_sum,
    lambda_average,
    linear_average,
    linear_solution_count,
    linear_ud_check,
    loper,
    main_discrepancy,
    vdc_select_h,
)
from ringpatterns.errors import (
    BudgetExceeded,
    DegenerateB,
    EmptyAllowedSet,
    HypothesisViolation,
    InvertibilityViolation,
    TrivialCharacter,
)
from ringpatterns.fourier import FunctionOnRing, characters, gowers_norm, z6_counterexample
from ringpatterns.poly import parse_family, parse_poly
from ringpatterns.rings import ModInt, make_ring, parse_ring_spec


def ring_of(spec):
    return make_ring(parse_ring_spec(spec))


def test_lambda_trivial():
    ring = ring_of("zmod:7")
    ones = FunctionOnRing.constant(ring, 1.0)
    q = LambdaQuery(ring, parse_family("y,y^2"), [ones] * 3)
    assert abs(lambda_average(q) - 1) < 1e-12


def test_lambda_matches_pair_count_oracle():
    ring = ring_of("zmod:7")
    rng = np.random.default_rng(5)
    mask = rng.uniform(size=7) < 0.5
    f = FunctionOnRing(ring, mask.astype(complex), bounded_by_one=True)
    q = LambdaQuery(ring, [parse_poly("y")], [f, f])
    value = lambda_average(q)
    # brute-force pair count: x in A and x + y in A
    count = sum(
        1
        for x in range(7)
        for y in range(7)
        if mask[x] and mask[(x + y) % 7]
    )
    assert abs(value - count / 49) < 1e-12
    assert abs(value - (mask.sum() / 7) ** 2) < 1e-12


def test_lambda_indicator_counts_are_integers():
    rng = np.random.default_rng(17)
    for spec in ("zmod:9", "pgr:2:x^2+x+1", "nilp:3:1"):
        ring = ring_of(spec)
        family = parse_family("y,y^2")
        funcs = [
            FunctionOnRing(ring, (rng.uniform(size=ring.size) < 0.55).astype(complex), bounded_by_one=True)
            for _ in range(3)
        ]
        scaled = lambda_average(LambdaQuery(ring, family, funcs)) * ring.size**2
        assert abs(scaled - round(scaled.real)) < 1e-6


def test_z6_counterexample_lambda():
    ring = ring_of("zmod:6")
    f0, f1 = z6_counterexample(ring)
    q = LambdaQuery(ring, [parse_poly("3*y")], [f0, f1])
    assert abs(lambda_average(q) - 1) < 1e-9


def test_lambda_budget():
    ring = ring_of("zmod:60")
    ones = FunctionOnRing.constant(ring, 1.0)
    with pytest.raises(BudgetExceeded):
        lambda_average(LambdaQuery(ring, [parse_poly("y")], [ones] * 2, budget=100))


def test_main_discrepancy_trivial_and_twisted():
    ring = ring_of("zmod:7")
    ones = FunctionOnRing.constant(ring, 1.0)
    q = LambdaQuery(ring, [parse_poly("y")], [ones, ones])
    assert main_discrepancy(q) < 1e-12
    chi = characters(ring)[2]
    q2 = LambdaQuery(ring, [parse_poly("y")], [ones, ones], [parse_poly("y^2")], [chi])
    got = main_discrepancy(q2)
    direct = abs(np.mean([chi(ring.eval_poly(parse_poly("y^2"), (y,))) for y in ring.elements()]))
    assert abs(got - direct) < 1e-9


def test_base_case_bound_on_squares():
    rng = np.random.default_rng(3)
    for p in (5, 13, 29):
        ring = make_ring(ModInt(p))
        for trial in range(10):
            funcs = [FunctionOnRing.random_bounded(ring, [p, trial, i]) for i in range(2)]
            disc = main_discrepancy(LambdaQuery(ring, [parse_poly("y^2")], funcs))
            assert disc <= 2 * p**-0.25 + 1e-8


def test_base_case_bound_on_general_rings():
    # the square bound reads off lpf N, not |R|, so composite and nonprime
    # rings with odd lpf obey it too
    specs = ("zmod:15", "zmod:21", "prod:(zmod:3,zmod:9)", "pgr:3:x^2+1", "nilp:5:1")
    for si, spec in enumerate(specs):
        ring = make_ring(parse_ring_spec(spec))
        assert ring.lpf > 2
        bound = 2 * ring.lpf**-0.25
        for trial in range(5):
            funcs = [FunctionOnRing.random_bounded(ring, [si, trial, i]) for i in range(2)]
            disc = main_discrepancy(LambdaQuery(ring, [parse_poly("y^2")], funcs))
            assert disc <= bound + 1e-8


def test_hadamard_char_sum():
    for p in (5, 7, 11):
        ring = make_ring(ModInt(p))
        for chi in characters(ring)[1:3]:
            out = hadamard_char_sum(ring, chi, 2)
            assert abs(abs(out.value) - 1 / p) < 1e-9
            assert abs(out.value) <= out.bound + 1e-9
    ring = ring_of("prod:(zmod:3,zmod:9)")
    for chi in characters(ring)[1:]:
        out = hadamard_char_sum(ring, chi, 2)
        assert abs(out.value) <= 1 / 3 + 1e-9
    with pytest.raises(TrivialCharacter):
        hadamard_char_sum(ring, characters(ring)[0], 2)


def test_hadamard_m1_and_m3():
    ring = ring_of("zmod:6")
    chi = characters(ring)[1]
    out = hadamard_char_sum(ring, chi, 1)
    assert abs(out.value) < 1e-12 and out.bound == 0
    out3 = hadamard_char_sum(ring, chi, 3)
    assert abs(out3.value) <= out3.bound + 1e-9


def test_char_sum_gauss():
    for p in (5, 7, 13):
        ring = make_ring(ModInt(p))
        for chi in characters(ring)[1:]:
            out = char_sum(ring, [parse_poly("y^2")], [chi])
            assert abs(abs(out.value) - p**-0.5) < 1e-9
            assert out.bound_applies
            assert abs(out.value) <= out.bound + 1e-8


def test_char_sum_multivariate():
    ring = ring_of("zmod:5")
    family = parse_family("y1,y1*y2")
    chars5 = characters(ring)
    for i, j in [(1, 2), (2, 3), (4, 1)]:
        out = char_sum(ring, family, [chars5[i], chars5[j]])
        assert abs(out.value) <= out.bound + 1e-8


def test_char_sum_preconditions():
    ring = ring_of("zmod:7")
    trivial = characters(ring)[0]
    with pytest.raises(TrivialCharacter):
        char_sum(ring, [parse_poly("y")], [trivial])
    with pytest.raises(HypothesisViolation):
        char_sum(ring, parse_family("y,2*y"), [characters(ring)[1]] * 2)
    with pytest.raises(HypothesisViolation):
        char_sum(ring, [parse_poly("y+1")], [characters(ring)[1]])
    # small lpf: computed but flagged
    ring6 = ring_of("zmod:6")
    out = char_sum(ring6, [parse_poly("y^2")], [characters(ring6)[1]])
    assert not out.bound_applies


def test_linear_char_sum_vanishes():
    ring = ring_of("zmod:11")
    out = char_sum(ring, [parse_poly("y")], [characters(ring)[4]])
    assert abs(out.value) < 1e-12 and out.bound == 0.0


def test_count_roots():
    for p, k in [(3, 1), (3, 2), (5, 1), (5, 2)]:
        ring = ring_of(f"nilp:{p}:{k}")
        out = count_roots(ring, parse_poly("y^2"))
        assert out.count == p**k
    assert count_roots(ring_of("zmod:15"), parse_poly("y^2-1")).count == 4
    assert count_roots(ring_of("zmod:7"), parse_poly("y")).count == 1
    out = count_roots(ring_of("zmod:11"), parse_poly("y^2"))
    assert out.bound_applies and out.count <= out.bound


def test_count_roots_multivariate():
    ring = ring_of("zmod:7")
    out = count_roots(ring, parse_poly("y1*y2", n_vars=2))
    assert out.count == 2 * 7 - 1
    assert out.count <= out.bound


def test_linear_solution_count():
    assert linear_solution_count(6, 2, 0) == (2, 3.0)
    assert linear_solution_count(12, 4, 2)[0] == 0
    assert linear_solution_count(7, 3, 1) == (1, 1.0)
    with pytest.raises(DegenerateB):
        linear_solution_count(6, 12, 1)


def test_count_configurations_full_sets():
    ring = ring_of("zmod:5")
    family = parse_family("y,y^2")
    full = [np.ones(ring.size, dtype=bool)] * 3
    out = count_configurations(ring, family, full)
    assert out.M == ring.size**2
    assert out.M == out.M1 + out.M2


def test_avoidance_constructions():
    for m in (1, 2):
        ring, family, sets = avoid_3y(m)
        assert count_configurations(ring, family, sets).M1 == 0
        assert find_nontrivial_config(ring, family, sets) is None
    ring, family, sets = avoid_y_y2p1(3, 2)
    out = count_configurations(ring, family, sets)
    assert out.M == 0
    ring, family, sets = loper(3, 2)
    out = count_configurations(ring, family, sets)
    assert out.M1 == 0 and out.M2 == out.M > 0
    ring, family, sets = loper(5, 1)
    assert count_configurations(ring, family, sets).M1 == 0


def test_configuration_oracle_equivalence():
    rng = np.random.default_rng(23)
    for spec in ("zmod:7", "zmod:9", "pgr:3:x^2+1"):
        ring = ring_of(spec)
        family = parse_family("y,y^2")
        masks = [rng.uniform(size=ring.size) < 0.5 for _ in range(3)]
        funcs = [FunctionOnRing(ring, m.astype(complex), bounded_by_one=True) for m in masks]
        counts = count_configurations(ring, family, masks)
        lam = lambda_average(LambdaQuery(ring, family, funcs))
        assert abs(lam * ring.size**2 - counts.M) < 1e-6
        assert counts.S == counts.M1 / ring.size**2


def test_find_witness():
    ring = ring_of("zmod:11")
    family = parse_family("y,y^2")
    full = [np.ones(ring.size, dtype=bool)] * 3
    witness = find_nontrivial_config(ring, family, full)
    assert witness is not None
    x, y = witness
    vals = {0, ring.eval_poly(family[0], y), ring.eval_poly(family[1], y)}
    assert len(vals) == 3
    # lexicographically first: x = 0 with the smallest nondegenerate y
    assert x == 0 and y == (2,)


def test_degenerate_bound_vs_exhaustive():
    for spec in ("zmod:11", "zmod:13", "nilp:3:2"):
        ring = ring_of(spec)
        family = parse_family("y,y^2")
        full = [np.ones(ring.size, dtype=bool)] * 3
        counts = count_configurations(ring, family, full)
        bound = degenerate_bound(ring, family, ring.size)
        assert counts.M2 <= bound


def test_linear_ud_check_random():
    rng = np.random.default_rng(7)
    for d in (1, 2, 3):
        ring = ring_of("zmod:11")
        coeffs = [(int(a),) for a in (1, 2, 3)[:d]]
        funcs = [FunctionOnRing.random_bounded(ring, [d, i]) for i in range(d + 1)]
        lhs, rhs = linear_ud_check(ring, coeffs, funcs, 1)
        assert lhs <= rhs + 1e-8


def test_linear_ud_check_mean_zero():
    ring = ring_of("zmod:13")
    raw = FunctionOnRing.random_bounded(ring, 4)
    f1 = FunctionOnRing(ring, (raw.values - raw.values.mean()) / 2, bounded_by_one=True)
    f0 = FunctionOnRing.random_bounded(ring, 5)
    lhs, rhs = linear_ud_check(ring, [(1,)], [f0, f1], 1)
    # the squared average leaves sqrt-of-noise in the U^1 value
    assert rhs < 1e-6 and lhs <= rhs + 1e-8


def test_z6_invertibility_counterexample():
    ring = ring_of("zmod:6")
    f0, f1 = z6_counterexample(ring)
    with pytest.raises(InvertibilityViolation):
        linear_ud_check(ring, [(3,)], [f0, f1], 1)
    lhs = abs(linear_average(ring, [(3,)], [f0, f1], 1))
    assert abs(lhs - 1) < 1e-9
    assert lhs > gowers_norm(f1, 1) + 1e-3


def test_vdc_select_h():
    ring = ring_of("zmod:7")
    f = FunctionOnRing.random_bounded(ring, 9)
    g = np.zeros((7, 7), dtype=complex)
    table = ring.poly_table(parse_poly("y^2"), 1)
    for yi in range(7):
        g[:, yi] = f.values[ring.add_col(int(table[yi]))]
    h, lhs, rhs = vdc_select_h(ring, g, 3, {(0,)}, 1)
    assert h != (0,)
    assert lhs <= rhs + 1e-8
    with pytest.raises(EmptyAllowedSet):
        window = {(x % 7,) for x in range(-2, 3)}
        vdc_select_h(ring, g, 3, window, 1)


def test_vdc_constant_in_y():
    ring = ring_of("zmod:7")
    f = FunctionOnRing.random_bounded(ring, 1)
    g = np.repeat(f.values[:, None], 7, axis=1)
    h, lhs, rhs = vdc_select_h(ring, g, 3, set(), 1)
    expected = float(np.mean(np.abs(f.values) ** 2))
    assert abs(lhs - expected) < 1e-12
    assert lhs <= rhs + 1e-8
