"""A quick self-contained invariant suite for the CLI selftest command."""

from __future__ import annotations

import numpy as np

from .counting import LambdaQuery, count_configurations, hadamard_char_sum, lambda_average, avoid_3y
from .fourier import (
    FunctionOnRing,
    characters,
    discrete_derivative,
    fourier_transform,
    gowers_norm,
    z6_counterexample,
)
from .pet import WeightPair, max_path_length, pet_step, t_bound
from .poly import parse_poly, singmaster_canonical, function_equal_mod, weight_sequence
from .rings import make_ring, parse_ring_spec


def run_selftest(report=print) -> bool:
    """Run the invariant suite; returns True when everything passes."""
    checks = [
        ("ring axioms on PGR(6,x^2-2)", _check_ring_axioms),
        ("character orthonormality", _check_orthonormality),
        ("fourier inversion", _check_inversion),
        ("gowers norm monotonicity", _check_gowers_monotone),
        ("z6 counterexample", _check_z6),
        ("singmaster canonical form", _check_singmaster),
        ("weight sequences", _check_weights),
        ("hadamard character bound", _check_hadamard),
        ("configuration avoidance", _check_avoidance),
        ("pet step postconditions", _check_pet_step),
        ("termination bounds", _check_bounds),
    ]
    ok = True
    for name, check in checks:
        try:
            check()
            report(f"ok   {name}")
        except Exception as exc:  # pragma: no cover - failure formatting
            ok = False
            report(f"FAIL {name}: {exc}")
    return ok


def _check_ring_axioms():
    ring = make_ring(parse_ring_spec("pgr:6:x^2-2"))
    assert ring.size == 36 and ring.characteristic == 6 and ring.lpf == 2
    for x in range(0, ring.size, 5):
        for y in range(0, ring.size, 7):
            assert ring.add(x, y) == ring.add(y, x)
            assert ring.mul(x, y) == ring.mul(y, x)
            for z in (1, 17):
                lhs = ring.mul(x, ring.add(y, z))
                rhs = ring.add(ring.mul(x, y), ring.mul(x, z))
                assert lhs == rhs


def _check_orthonormality():
    ring = make_ring(parse_ring_spec("prod:(zmod:3,zmod:9)"))
    chars = characters(ring)
    mat = np.array([c.values for c in chars])
    gram = (mat @ np.conj(mat.T)) / ring.size
    assert np.abs(gram - np.eye(ring.size)).max() < 1e-9


def _check_inversion():
    from .fourier import inverse_transform

    ring = make_ring(parse_ring_spec("zmod:12"))
    f = FunctionOnRing.random_bounded(ring, 11)
    fhat = fourier_transform(f)
    back = inverse_transform(ring, fhat)
    assert np.abs(back.values - f.values).max() < 1e-8


def _check_gowers_monotone():
    ring = make_ring(parse_ring_spec("zmod:8"))
    f = FunctionOnRing.random_bounded(ring, 3)
    norms = [gowers_norm(f, s) for s in (1, 2, 3)]
    assert norms[0] <= norms[1] + 1e-8 and norms[1] <= norms[2] + 1e-8


def _check_z6():
    ring = make_ring(parse_ring_spec("zmod:6"))
    f0, f1 = z6_counterexample(ring)
    q = LambdaQuery(ring, [parse_poly("3*y")], [f0, f1])
    assert abs(lambda_average(q) - 1) < 1e-9
    assert gowers_norm(f1, 1) < 1 - 1e-3
    d1 = discrete_derivative(f1, [1])
    d7 = discrete_derivative(f1, [1] * 7)
    assert np.abs(d1.values - d7.values).max() < 1e-12


def _check_singmaster():
    p = parse_poly("5*y^3-6*y")
    q = parse_poly("14*y")
    assert singmaster_canonical(p, 15) == singmaster_canonical(q, 15)
    assert function_equal_mod(p, q, 15)


def _check_weights():
    family = [
        parse_poly(s, n_vars=2)
        for s in [
            "y1^2+3*y2^2", "8*y1^2", "2*y1^2+y1*y2", "7*y2^2+y1",
            "2*y1", "6*y2+2*y1", "y1", "4*y1+2",
        ]
    ]
    assert weight_sequence(family) == (0, 3, 1, 0, 3)
    assert weight_sequence(family, 7) == (0, 3, 0, 0, 2)


def _check_hadamard():
    for spec in ("zmod:10", "zmod:13", "nilp:3:2"):
        ring = make_ring(parse_ring_spec(spec))
        for chi in characters(ring)[1:4]:
            out = hadamard_char_sum(ring, chi, 2)
            assert abs(out.value) <= out.bound + 1e-9


def _check_avoidance():
    ring, family, sets = avoid_3y(1)
    counts = count_configurations(ring, family, sets)
    assert counts.M1 == 0


def _check_pet_step():
    ring = make_ring(parse_ring_spec("zmod:31"))
    family = [parse_poly("y"), parse_poly("y^2")]
    funcs = [FunctionOnRing.random_bounded(ring, seed) for seed in (1, 2, 3)]
    result = pet_step(ring, family, funcs, 4)
    assert result.lhs <= result.rhs + 1e-8


def _check_bounds():
    assert t_bound(1, 2).value == 6
    assert max_path_length(WeightPair(1, (0, 1)), 1) == 1
