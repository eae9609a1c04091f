import itertools

import numpy as np
import pytest

from ringpatterns.counting import LambdaQuery, lambda_average
from ringpatterns.errors import BudgetExceeded
from ringpatterns.fourier import (
    FunctionOnRing,
    characters,
    discrete_derivative,
    dual_function,
    fourier_transform,
    gowers_norm,
    gowers_norm_direct,
    inverse_transform,
    pel51_check,
    product_char_values,
    product_characters,
    z6_counterexample,
)
from ringpatterns.poly import parse_poly
from ringpatterns.rings import make_ring, parse_ring_spec

SMALL_SPECS = ["zmod:5", "zmod:6", "zmod:12", "pgr:2:x^2+x+1", "pgr:6:x^2-2", "prod:(zmod:3,zmod:9)", "nilp:3:2"]


@pytest.fixture(scope="module")
def rings():
    return {spec: make_ring(parse_ring_spec(spec)) for spec in SMALL_SPECS}


@pytest.mark.parametrize("spec", SMALL_SPECS)
def test_character_orthonormality(spec, rings):
    ring = rings[spec]
    chars = characters(ring)
    assert len(chars) == ring.size
    assert chars[0].is_trivial
    mat = np.array([c.values for c in chars])
    gram = (mat @ np.conj(mat.T)) / ring.size
    assert np.abs(gram - np.eye(ring.size)).max() < 1e-9


def test_characters_are_homomorphisms(rings):
    ring = rings["prod:(zmod:3,zmod:9)"]
    rng = np.random.default_rng(0)
    for chi in [characters(ring)[i] for i in (1, 5, 11)]:
        for _ in range(20):
            x, y = rng.integers(0, ring.size, 2)
            lhs = chi(ring.add(int(x), int(y)))
            assert abs(lhs - chi(int(x)) * chi(int(y))) < 1e-12


@pytest.mark.parametrize("spec", ["zmod:7", "pgr:6:x^2-2"])
def test_fourier_inversion_and_plancherel(spec):
    ring = make_ring(parse_ring_spec(spec))
    f = FunctionOnRing.random_bounded(ring, 42)
    g = FunctionOnRing.random_bounded(ring, 43)
    fhat, ghat = fourier_transform(f), fourier_transform(g)
    back = inverse_transform(ring, fhat)
    assert np.abs(back.values - f.values).max() < 1e-8 * ring.size
    inner_hat = np.mean(fhat * np.conj(ghat))
    inner = np.mean(f.values * np.conj(g.values))
    assert abs(inner_hat - ring.size * inner) < 1e-8 * ring.size


def test_transform_of_constants_and_characters():
    ring = make_ring(parse_ring_spec("zmod:8"))
    ones = FunctionOnRing.constant(ring, 1.0)
    fhat = fourier_transform(ones)
    assert abs(fhat[0] - ring.size) < 1e-9
    assert np.abs(fhat[1:]).max() < 1e-9
    chi = characters(ring)[3]
    chat = fourier_transform(FunctionOnRing(ring, np.conj(chi.values)))
    hits = np.nonzero(np.abs(chat) > 1e-6)[0]
    assert len(hits) == 1


def test_discrete_derivative_table_z6():
    ring = make_ring(parse_ring_spec("zmod:6"))
    f0, f1 = z6_counterexample(ring)
    rows = {
        1: (-1j, -1, -1j),
        2: (-1j, 1j, 1),
        3: (-1, -1j, -1j),
        4: (1j, 1, -1j),
        5: (-1j, -1j, -1),
        6: (1, -1j, 1j),
        7: (-1j, -1, -1j),
    }
    for k, expected in rows.items():
        d = discrete_derivative(f1, [1] * k)
        for cls in range(3):
            assert abs(d.values[cls] - expected[cls]) < 1e-9
            assert abs(d.values[cls + 3] - expected[cls]) < 1e-9
    d7 = discrete_derivative(f1, [1] * 7)
    d1 = discrete_derivative(f1, [1])
    assert np.abs(d7.values - d1.values).max() < 1e-12


def test_derivative_order_irrelevant_and_zero_shift():
    ring = make_ring(parse_ring_spec("zmod:9"))
    f = FunctionOnRing.random_bounded(ring, 5)
    d12 = discrete_derivative(f, [2, 5])
    d21 = discrete_derivative(f, [5, 2])
    assert np.abs(d12.values - d21.values).max() < 1e-12
    d0 = discrete_derivative(f, [0])
    assert np.abs(d0.values - np.abs(f.values) ** 2).max() < 1e-12


def test_gowers_norm_basics():
    ring = make_ring(parse_ring_spec("zmod:7"))
    c = FunctionOnRing.constant(ring, np.exp(0.7j))
    for s in (1, 2, 3):
        assert abs(gowers_norm(c, s) - 1) < 1e-9
    f = FunctionOnRing.random_bounded(ring, 8)
    assert abs(gowers_norm(f, 1) - abs(f.values.mean())) < 1e-12


def test_gowers_monotone_and_direct_agreement():
    for spec in ("zmod:6", "zmod:8"):
        ring = make_ring(parse_ring_spec(spec))
        f = FunctionOnRing.random_bounded(ring, 11)
        norms = [gowers_norm(f, s) for s in (1, 2, 3)]
        assert norms[0] <= norms[1] + 1e-8 <= norms[2] + 2e-8
        for s in (1, 2):
            assert abs(gowers_norm_direct(f, s) - norms[s - 1]) < 1e-7


def test_u1_of_z6_counterexample():
    ring = make_ring(parse_ring_spec("zmod:6"))
    _, f1 = z6_counterexample(ring)
    u1 = gowers_norm(f1, 1)
    assert u1 < 1 - 1e-3
    assert abs(u1 - 1 / 3) < 1e-12


def test_u2_l4_identity():
    ring = make_ring(parse_ring_spec("zmod:5"))
    f = FunctionOnRing.random_bounded(ring, 3)
    u2 = gowers_norm(f, 2)
    l44 = float(np.mean(np.abs(fourier_transform(f)) ** 4))
    assert abs(ring.size**3 * u2**4 - l44) <= 1e-6 * l44


def test_simple_u2_inequality():
    for seed in range(5):
        ring = make_ring(parse_ring_spec("zmod:9"))
        f = FunctionOnRing.random_bounded(ring, seed)
        u2 = gowers_norm(f, 2)
        peak = np.abs(fourier_transform(f)).max() / ring.size
        assert u2**4 <= peak**2 + 1e-8


def test_phase_modulation_invariance():
    ring = make_ring(parse_ring_spec("zmod:10"))
    f = FunctionOnRing.random_bounded(ring, 4)
    psi = characters(ring)[3]
    modulated = FunctionOnRing(ring, f.values * np.conj(psi.values))
    for s in (2, 3):
        assert abs(gowers_norm(modulated, s) - gowers_norm(f, s)) < 1e-9


def test_budget_guard():
    ring = make_ring(parse_ring_spec("zmod:60"))
    f = FunctionOnRing.random_bounded(ring, 1)
    with pytest.raises(BudgetExceeded):
        gowers_norm(f, 5, budget=10**4)


def test_config_rearrangement_identity():
    # sum over solutions of sum c_i x_i = 0 of prod f_i(x_i) equals the
    # character-side average, for k <= 2 and n <= 2
    for n in (1, 2):
        ring = make_ring(parse_ring_spec("zmod:5"))
        rng = np.random.default_rng(10 * n)
        size = ring.size**n
        fs = [rng.standard_normal(size) + 1j * rng.standard_normal(size) for _ in range(3)]
        coeffs = [(1,) * n, (2,) * n, (3,) * n]
        points = list(itertools.product(ring.elements(), repeat=n))
        index = {p: i for i, p in enumerate(points)}

        def vec_add(a, b):
            return tuple(ring.add(x, y) for x, y in zip(a, b))

        def vec_scale(c, a):
            return tuple(ring.mul(ring.embed(c[j]), a[j]) for j in range(n))

        lhs = 0.0 + 0.0j
        for xs in itertools.product(points, repeat=3):
            acc = (0,) * n
            for c, x in zip(coeffs, xs):
                acc = vec_add(acc, vec_scale(c, x))
            if acc == (0,) * n:
                lhs += fs[0][index[xs[0]]] * fs[1][index[xs[1]]] * fs[2][index[xs[2]]]
        rhs = 0.0 + 0.0j
        for chars_tuple in product_characters(ring, n):
            term = 1.0 + 0.0j
            for c, f in zip(coeffs, fs):
                powered = tuple(chi.power(cj) for chi, cj in zip(chars_tuple, c))
                vals = product_char_values(powered)
                term *= np.dot(f, vals)
            rhs += term
        rhs /= ring.size**n
        assert abs(lhs - rhs) <= 1e-6 * max(1.0, abs(lhs))


def test_fourier_dilate_trivial_bound():
    ring = make_ring(parse_ring_spec("zmod:7"))
    f = FunctionOnRing.random_bounded(ring, 6)
    fhat = fourier_transform(f)
    chars = characters(ring)
    for c in (2, 3):
        g = np.array([fhat[chars.index(chi.power(c))] for chi in chars])
        l2 = float(np.mean(np.abs(g) ** 2)) ** 0.5
        l4 = float(np.mean(np.abs(g) ** 4)) ** 0.25
        assert l2 <= ring.size**0.5 + 1e-9
        assert l4 <= ring.size**0.75 + 1e-9


def test_dual_function_identity():
    ring = make_ring(parse_ring_spec("zmod:7"))
    family = [parse_poly("y"), parse_poly("y^2")]
    rng = np.random.default_rng(2)
    funcs = [
        FunctionOnRing(ring, (rng.uniform(size=7) < 0.6).astype(complex), bounded_by_one=True)
        for _ in range(3)
    ]
    for k in (0, 1, 2):
        g = dual_function(ring, family, funcs, [], k)
        lam = lambda_average(LambdaQuery(ring, family, funcs))
        paired = np.mean(funcs[k].values * g.values)
        assert abs(lam - paired) < 1e-8


def test_dual_function_trivial_cases():
    ring = make_ring(parse_ring_spec("zmod:5"))
    ones = FunctionOnRing.constant(ring, 1.0)
    g = dual_function(ring, [parse_poly("y^2")], [ones, ones], [], 1)
    assert np.abs(g.values - 1).max() < 1e-12
    # with a character twist, constants factor through the twist average
    chi = characters(ring)[1]
    g2 = dual_function(ring, [parse_poly("y^2")], [ones, ones], [(chi, parse_poly("y"))], 1)
    assert np.abs(g2.values - np.mean(chi.values)).max() < 1e-9


def test_pel51_check():
    ring = make_ring(parse_ring_spec("zmod:5"))
    rng = np.random.default_rng(12)
    for n in (1, 2):
        size = ring.size**n
        xi = []
        for _ in range(2):
            mags = np.sqrt(rng.uniform(size=(ring.size, size)))
            phases = rng.uniform(0, 2 * np.pi, size=(ring.size, size))
            xi.append(mags * np.exp(1j * phases))
        lhs, rhs = pel51_check(ring, xi, 2, n)
        assert abs(lhs - rhs) < 1e-9  # s=2 reads as equality
        lhs, rhs = pel51_check(ring, xi, 3, n)
        assert lhs <= rhs + 1e-8
    # functions ignoring the second coordinate still satisfy the inequality
    flat = [np.repeat(rng.uniform(size=(ring.size, 1)) * np.exp(1j), ring.size, axis=1) for _ in range(2)]
    lhs, rhs = pel51_check(ring, flat, 3, 1)
    assert lhs <= rhs + 1e-8


def test_function_on_ring_validation():
    ring = make_ring(parse_ring_spec("zmod:5"))
    with pytest.raises(ValueError):
        FunctionOnRing(ring, np.ones(4))
    with pytest.raises(ValueError):
        FunctionOnRing(ring, 2 * np.ones(5), bounded_by_one=True)


def test_csv_round_trip(tmp_path):
    ring = make_ring(parse_ring_spec("zmod:5"))
    path = tmp_path / "f.csv"
    path.write_text("index,re,im\n0,1,0\n2,0.5,-0.25\n")
    f = FunctionOnRing.from_csv(ring, str(path))
    assert f.values[0] == 1 and f.values[2] == 0.5 - 0.25j and f.values[1] == 0
