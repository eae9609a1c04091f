import json

import pytest

from ringpatterns.diagrams import (
    Constraints,
    ParamPoly,
    ParamRegistry,
    parse_constraint,
    symbolic_diagram,
)
from ringpatterns.errors import AmbiguousSelection, ParseError
from ringpatterns.fourier import FunctionOnRing
from ringpatterns.pet import pet_step
from ringpatterns.poly import parse_family
from ringpatterns.rings import ModInt, make_ring


def test_param_poly_arithmetic():
    h1 = ParamPoly.param(0)
    h2 = ParamPoly.param(1)
    p = 2 * h1 + 3 * h2
    q = p * p
    assert q.terms[((0, 2),)] == 4
    assert q.terms[((0, 1), (1, 1))] == 12
    assert (p - p).is_zero()


def test_constraint_parsing_and_status():
    reg = ParamRegistry()
    cons = Constraints()
    parse_constraint("3*h1:=1", reg, cons)
    parse_constraint("h2:=-h1", reg, cons)
    parse_constraint("3*h3!=1", reg, cons)
    h1, h2, h3 = (ParamPoly.param(reg.index(n)) for n in ("h1", "h2", "h3"))
    assert cons.status(3 * h1 - ParamPoly.const(1)) == "zero"
    assert cons.status(h1 + h2) == "zero"
    assert cons.status(3 * h3 - ParamPoly.const(1)) == "nonzero"
    assert cons.status(3 * h3 + ParamPoly.const(5)) == "unknown"
    assert cons.status(ParamPoly.const(7)) == "nonzero"
    assert cons.status(2 * h3) == "nonzero"  # single monomial
    with pytest.raises(ParseError):
        parse_constraint("h1 + h2 := 0", reg, cons)


def test_a1_diagram():
    d = symbolic_diagram(parse_family("y,y^2"))
    assert d.step_count == 2
    assert d.final_texts() == ["2*h2*y", "2*h1*y", "(2*h2+2*h1)*y"]
    text = d.render()
    assert "[y]" in text and "introduces h1" in text


def test_a2_diagram_with_identification():
    family = parse_family("y1*y2,y1")
    d = symbolic_diagram(family, substitutions=["h2:=-h1"])
    assert d.step_count == 2
    assert d.final_texts() == [
        "h2'*y1+h2*y2",
        "h1'*y1+h1*y2",
        "(h2'+h1')*y1",
    ]


def test_a2_without_identification_keeps_both_terms():
    d = symbolic_diagram(parse_family("y1*y2,y1"))
    assert d.final_texts()[-1] == "(h2'+h1')*y1+(h2+h1)*y2"


def test_a3_step_counts():
    family = parse_family("y^3,y^3+y^2")
    assert symbolic_diagram(family, substitutions=["3*h1:=1"]).step_count == 6
    d12 = symbolic_diagram(family, substitutions=["3*h1!=1", "3*h1!=-1"])
    assert d12.step_count == 12


def test_a3_requires_constraints():
    with pytest.raises(AmbiguousSelection):
        symbolic_diagram(parse_family("y^3,y^3+y^2"))


def test_a3_fork_tree():
    d = symbolic_diagram(parse_family("y^3,y^3+y^2"), fork=True)
    constraints = {child.fork_constraint: child for child in d.forks}
    assert "3*h1:=-1" in constraints and "3*h1!=-1" in constraints
    deeper = constraints["3*h1!=-1"]
    leaves = {c.fork_constraint: c.step_count for c in deeper.forks}
    assert leaves == {"3*h1:=1": 6, "3*h1!=1": 12}
    tree = json.loads(d.to_json())
    assert tree["children"]
    assert {"family", "children", "steps", "constraints"} <= set(tree)


def test_three_member_family_forks_to_the_grammar_boundary():
    # three members force comparisons of quadratic parameter expressions,
    # which the declarable-constraint grammar cannot split; the tree reports
    # each leaf as contradictory or unresolved instead of guessing
    with pytest.raises(AmbiguousSelection):
        symbolic_diagram(parse_family("y,y^2,y^3"))
    d = symbolic_diagram(parse_family("y,y^2,y^3"), fork=True)

    def leaves(node):
        if not node.forks:
            yield node
        for child in node.forks:
            yield from leaves(child)

    collected = list(leaves(d))
    assert collected
    assert all(leaf.contradiction or leaf.unresolved for leaf in collected)


def instantiate(sym, values, registry, modulus):
    """Evaluate a symbolic family member at concrete parameter values."""
    from ringpatterns.poly import IntPoly

    terms = {}
    for alpha, coeff in sym.coeffs.items():
        total = 0
        for mono, c in coeff.terms.items():
            prod = c
            for idx, e in mono:
                prod *= values[registry.names[idx]] ** e
            total += prod
        if total % modulus:
            terms[alpha] = total % modulus
    return IntPoly(sym.n_y, terms)


def test_diagram_step_matches_numeric_pet_step():
    # run the numeric inductive step and check the symbolic family agrees at
    # the shifts the numeric step actually selected (constants dropped)
    ring = make_ring(ModInt(101))
    family = parse_family("y,y^2")
    funcs = [FunctionOnRing.random_bounded(ring, i + 20) for i in range(3)]
    step1 = pet_step(ring, family, funcs, 4)
    step2 = pet_step(ring, step1.family, step1.funcs, 4, names=step1.labels)
    d = symbolic_diagram(family)
    values = {
        "h1": step1.selected_h[0],
        "h2": step2.selected_h[0],
    }
    numeric_final = [p.drop_constant().reduce_mod(101) for p in step2.family]
    symbolic_final = [
        instantiate(p, values, d.registry, 101) for p in d.final_family
    ]
    assert numeric_final == symbolic_final


def test_diagram_prefix_matches_numeric_cubic_family():
    # the first differencing of {y^3, y^3+y^2} agrees with the numeric step
    # before any fork-relevant coincidence can occur
    ring = make_ring(ModInt(101))
    family = parse_family("y^3,y^3+y^2")
    funcs = [FunctionOnRing.random_bounded(ring, i + 40) for i in range(3)]
    step = pet_step(ring, family, funcs, 4)
    values = {"h1": step.selected_h[0]}
    sym_family, registry = _one_step_symbolic(family)
    sym = [instantiate(p, values, registry, 101) for p in sym_family]
    numeric = [p.drop_constant().reduce_mod(101) for p in step.family]
    assert numeric == sym


def test_diagram_step_matches_numeric_multivariate_first_step():
    ring = make_ring(ModInt(13))
    family = parse_family("y1,y1*y2")
    funcs = [FunctionOnRing.random_bounded(ring, i) for i in range(3)]
    step = pet_step(ring, family, funcs, 4)
    values = {"h1": step.selected_h[0], "h1'": step.selected_h[1]}
    sym_family, registry = _one_step_symbolic(parse_family("y1*y2,y1"))
    sym_after_step1 = [instantiate(p, values, registry, 13) for p in sym_family]
    numeric = [p.drop_constant().reduce_mod(13) for p in step.family]
    assert numeric == sym_after_step1


def _one_step_symbolic(family):
    from ringpatterns.diagrams import (
        Constraints,
        ParamRegistry,
        SymbolicPoly,
        _arrange,
        _difference_symbolic,
    )

    registry = ParamRegistry()
    cons = Constraints()
    current = [SymbolicPoly.from_int_poly(p).cleaned(cons) for p in family]
    arranged, _ = _arrange(current, cons)
    params = [registry.fresh(1, coord) for coord in range(family[0].n_vars)]
    return _difference_symbolic(arranged, params, cons), registry


def test_render_marks_substitutions():
    d = symbolic_diagram(parse_family("y^3,y^3+y^2"), substitutions=["3*h1:=1"])
    assert "constraints: 3*h1:=1" in d.render()
