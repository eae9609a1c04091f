"""Symbolic PET diagrams: polynomial families with formal shift parameters.

Each differencing step introduces one fresh parameter per y-variable and
produces the shifted-difference family with constant terms dropped.  Declared
constraints come in three kinds: value rewrites like ``3*h1:=1`` (applied to
the displayed coefficients), identifications like ``h2:=-h1`` (used for zero
tests only, so printed families keep their own parameters), and exclusions
like ``3*h1!=1`` (recorded facts for deciding nonvanishing).
"""

from __future__ import annotations

import json
import re
from dataclasses import dataclass, field

from .errors import AmbiguousSelection, ParseError
from .poly import IntPoly, order_key, weight_order_rank

MAX_STEPS = 64

ZERO, NONZERO, UNKNOWN = "zero", "nonzero", "unknown"


class _Contradiction(Exception):
    """The declared constraints wipe out a family member, which the shift
    exclusions never allow; the branch is vacuous."""


class ParamRegistry:
    """Names of the formal h-parameters, one per (step, coordinate)."""

    def __init__(self):
        self.names: list[str] = []

    def fresh(self, step: int, coord: int) -> int:
        return self.index(f"h{step}" + "'" * coord)

    def index(self, name: str) -> int:
        if name not in self.names:
            self.names.append(name)
        return self.names.index(name)


Monomial = tuple[tuple[int, int], ...]  # sorted ((param index, exponent), ...)


class ParamPoly:
    """Integer-coefficient polynomial in the formal parameters."""

    __slots__ = ("terms",)

    def __init__(self, terms: dict[Monomial, int] | None = None):
        clean: dict[Monomial, int] = {}
        for mono, c in (terms or {}).items():
            if c:
                clean[mono] = clean.get(mono, 0) + c
                if clean[mono] == 0:
                    del clean[mono]
        self.terms = clean

    @classmethod
    def const(cls, c: int) -> "ParamPoly":
        return cls({(): c})

    @classmethod
    def param(cls, idx: int, power: int = 1) -> "ParamPoly":
        return cls({((idx, power),): 1})

    def is_zero(self) -> bool:
        return not self.terms

    def constant_value(self) -> int | None:
        if not self.terms:
            return 0
        if len(self.terms) == 1 and () in self.terms:
            return self.terms[()]
        return None

    def __add__(self, other: "ParamPoly") -> "ParamPoly":
        terms = dict(self.terms)
        for mono, c in other.terms.items():
            terms[mono] = terms.get(mono, 0) + c
        return ParamPoly(terms)

    def __neg__(self) -> "ParamPoly":
        return ParamPoly({m: -c for m, c in self.terms.items()})

    def __sub__(self, other: "ParamPoly") -> "ParamPoly":
        return self + (-other)

    def __mul__(self, other):
        if isinstance(other, int):
            return ParamPoly({m: c * other for m, c in self.terms.items()})
        terms: dict[Monomial, int] = {}
        for m1, c1 in self.terms.items():
            for m2, c2 in other.terms.items():
                exps: dict[int, int] = {}
                for idx, e in m1 + m2:
                    exps[idx] = exps.get(idx, 0) + e
                mono = tuple(sorted(exps.items()))
                terms[mono] = terms.get(mono, 0) + c1 * c2
        return ParamPoly(terms)

    __rmul__ = __mul__

    def __eq__(self, other) -> bool:
        return isinstance(other, ParamPoly) and self.terms == other.terms

    def __hash__(self):
        return hash(tuple(sorted(self.terms.items())))

    def substituted(self, identifications: dict[int, tuple[int, int]]) -> "ParamPoly":
        """Replace identified parameters by (sign * other parameter)."""
        out = ParamPoly()
        for mono, c in self.terms.items():
            piece = ParamPoly.const(c)
            for idx, e in mono:
                if idx in identifications:
                    sign, other = identifications[idx]
                    base = ParamPoly.param(other) * sign
                else:
                    base = ParamPoly.param(idx)
                for _ in range(e):
                    piece = piece * base
            out = out + piece
        return out

    def primitive(self) -> "ParamPoly":
        """Content removed and sign normalized on the heaviest monomial."""
        if not self.terms:
            return self
        import math

        content = 0
        for c in self.terms.values():
            content = math.gcd(content, abs(c))
        top = max(self.terms, key=_mono_key)
        sign = 1 if self.terms[top] > 0 else -1
        return ParamPoly({m: sign * c // content for m, c in self.terms.items()})

    def rewritten(self, rules: list[tuple[int, int, int]]) -> "ParamPoly":
        """Apply value rewrites (a, param, v): a*h -> v while a divides."""
        terms: dict[Monomial, int] = {}
        for mono, c in self.terms.items():
            exps = dict(mono)
            changed = True
            while changed:
                changed = False
                for a, idx, v in rules:
                    while exps.get(idx, 0) >= 1 and c % a == 0:
                        c = (c // a) * v
                        exps[idx] -= 1
                        if exps[idx] == 0:
                            del exps[idx]
                        changed = True
            key = tuple(sorted(exps.items()))
            terms[key] = terms.get(key, 0) + c
        return ParamPoly(terms)

    def text(self, registry: ParamRegistry) -> str:
        if not self.terms:
            return "0"
        rendered = []
        for mono, c in sorted(
            self.terms.items(), key=lambda kv: _mono_key(kv[0]), reverse=True
        ):
            factors = []
            for idx, e in sorted(mono, key=lambda p: p[0], reverse=True):
                name = registry.names[idx]
                factors.append(name if e == 1 else f"{name}^{e}")
            if not factors:
                body = str(abs(c))
            else:
                body = "*".join(factors)
                if abs(c) != 1:
                    body = f"{abs(c)}*{body}"
            rendered.append(("-" if c < 0 else "+", body))
        sign0, body0 = rendered[0]
        out = ("-" if sign0 == "-" else "") + body0
        for sign, body in rendered[1:]:
            out += sign + body
        return out


def _mono_key(mono: Monomial):
    degree = sum(e for _, e in mono)
    exps: dict[int, int] = dict(mono)
    top = max(exps, default=-1)
    vec = tuple(exps.get(i, 0) for i in range(top, -1, -1))
    return (degree, vec)


@dataclass
class Constraints:
    rewrites: list[tuple[int, int, int]] = field(default_factory=list)
    identifications: dict[int, tuple[int, int]] = field(default_factory=dict)
    nonzero_facts: list[ParamPoly] = field(default_factory=list)
    texts: list[str] = field(default_factory=list)

    def __post_init__(self):
        self._norm_cache: dict[ParamPoly, ParamPoly] = {}
        self._fact_keys: set[ParamPoly] = set()

    def normalize(self, p: ParamPoly) -> ParamPoly:
        # rewrites and identifications are fixed once parsing ends, so the
        # normal form is cacheable even while nonzero facts accumulate
        cached = self._norm_cache.get(p)
        if cached is None:
            cached = (
                p.rewritten(self.rewrites)
                .substituted(self.identifications)
                .rewritten(self.rewrites)
            )
            self._norm_cache[p] = cached
        return cached

    def display(self, p: ParamPoly) -> ParamPoly:
        """Rewrites apply to printed coefficients; identifications do not."""
        return p.rewritten(self.rewrites)

    def status(self, p: ParamPoly) -> str:
        norm = self.normalize(p)
        if norm.is_zero():
            return ZERO
        if len(norm.terms) == 1:
            return NONZERO  # single monomial: integer coefficient times powers
        # an integer multiple of a known-nonzero quantity stays nonzero
        if norm.primitive() in self._fact_keys:
            return NONZERO
        return UNKNOWN

    def add_fact(self, p: ParamPoly):
        norm = self.normalize(p)
        if norm.is_zero() or len(norm.terms) == 1:
            return
        prim = norm.primitive()
        if prim not in self._fact_keys:
            self._fact_keys.add(prim)
            self.nonzero_facts.append(prim)


_CONSTRAINT = re.compile(
    r"^\s*(?:(\d+)\s*\*\s*)?(h\d+'*)\s*(:=|!=)\s*(-?\d+|-?h\d+'*)\s*$"
)


def parse_constraint(text: str, registry: ParamRegistry, constraints: Constraints):
    """Forms: ``3*h1:=1``, ``h2:=-h1``, ``3*h1!=1``, ``h1!=0``."""
    m = _CONSTRAINT.match(text)
    if not m:
        raise ParseError(f"bad constraint {text!r}")
    a_text, name, op, rhs = m.groups()
    a = int(a_text) if a_text else 1
    idx = registry.index(name)
    constraints.texts.append(text.strip())
    if rhs.lstrip("-").startswith("h"):
        sign = -1 if rhs.startswith("-") else 1
        other = registry.index(rhs.lstrip("-"))
        if op == ":=":
            if a != 1:
                raise ParseError("identification must have unit coefficient")
            constraints.identifications[idx] = (sign, other)
            constraints._norm_cache.clear()
        else:
            constraints.add_fact(ParamPoly.param(idx) * a - ParamPoly.param(other) * sign)
        return
    v = int(rhs)
    if op == ":=":
        constraints.rewrites.append((a, idx, v))
        constraints._norm_cache.clear()
    else:
        constraints.add_fact(ParamPoly.param(idx) * a - ParamPoly.const(v))


class SymbolicPoly:
    """Polynomial in the y-variables whose coefficients are ParamPoly values."""

    __slots__ = ("n_y", "coeffs")

    def __init__(self, n_y: int, coeffs: dict[tuple[int, ...], ParamPoly] | None = None):
        self.n_y = n_y
        self.coeffs = {a: c for a, c in (coeffs or {}).items() if not c.is_zero()}

    @classmethod
    def from_int_poly(cls, p: IntPoly) -> "SymbolicPoly":
        return cls(p.n_vars, {a: ParamPoly.const(c) for a, c in p.terms.items()})

    def __sub__(self, other: "SymbolicPoly") -> "SymbolicPoly":
        coeffs = dict(self.coeffs)
        for a, c in other.coeffs.items():
            coeffs[a] = coeffs.get(a, ParamPoly()) - c
        return SymbolicPoly(self.n_y, coeffs)

    def __neg__(self) -> "SymbolicPoly":
        return SymbolicPoly(self.n_y, {a: -c for a, c in self.coeffs.items()})

    def shifted(self, shift_params: list[int]) -> "SymbolicPoly":
        """P(y + h) for the given fresh parameter indices (one per variable)."""
        import math

        out: dict[tuple[int, ...], ParamPoly] = {}
        for alpha, c in self.coeffs.items():
            import itertools

            ranges = [range(a + 1) for a in alpha]
            for beta in itertools.product(*ranges):
                coef = c
                for ai, bi, idx in zip(alpha, beta, shift_params):
                    binom = math.comb(ai, bi)
                    if binom != 1:
                        coef = coef * binom
                    if ai - bi:
                        coef = coef * ParamPoly.param(idx, ai - bi)
                out[beta] = out.get(beta, ParamPoly()) + coef
        return SymbolicPoly(self.n_y, out)

    def cleaned(self, constraints: Constraints) -> "SymbolicPoly":
        """Drop the constant term and coefficients that vanish under constraints."""
        coeffs = {}
        for alpha, c in self.coeffs.items():
            if not any(alpha):
                continue
            if constraints.status(c) == ZERO:
                continue
            coeffs[alpha] = constraints.display(c)
        return SymbolicPoly(self.n_y, coeffs)

    def structural_degree(self) -> int:
        if not self.coeffs:
            return 0
        return max(sum(a) for a in self.coeffs)

    def weight_info(self, constraints: Constraints) -> tuple[int, ParamPoly]:
        """(weight, leading coefficient) of the heaviest surviving monomial.

        Raises AmbiguousSelection when an undecided coefficient sits on top.
        """
        ranked = sorted(self.coeffs, key=order_key, reverse=True)
        if not ranked:
            raise _Contradiction("a member vanished under the constraints")
        top = ranked[0]
        status = constraints.status(self.coeffs[top])
        if status == NONZERO or len(ranked) == 1:
            # a single surviving monomial cannot vanish: the family stays
            # essentially distinct by the step's exclusion of bad shifts
            return weight_order_rank(top), self.coeffs[top]
        raise AmbiguousSelection(
            "cannot decide the leading coefficient",
            coefficient=_linear_form(constraints.normalize(self.coeffs[top])),
        )

    def key(self, constraints: Constraints):
        return tuple(
            sorted((a, tuple(sorted(constraints.normalize(c).terms.items())))
                   for a, c in self.coeffs.items())
        )

    def text(self, registry: ParamRegistry, var: str = "y") -> str:
        if not self.coeffs:
            return "0"
        multi = self.n_y > 1
        parts = []
        for alpha in sorted(self.coeffs, key=order_key, reverse=True):
            c = self.coeffs[alpha]
            factors = []
            for j, e in enumerate(alpha):
                if e == 0:
                    continue
                name = f"{var}{j + 1}" if multi else var
                factors.append(name if e == 1 else f"{name}^{e}")
            mono = "*".join(factors) if factors else "1"
            const = c.constant_value()
            if const is not None:
                if const == 1:
                    body = mono
                elif const == -1:
                    body = f"-{mono}"
                else:
                    body = f"{const}*{mono}"
            else:
                ctext = c.text(registry)
                if len(c.terms) > 1 or ctext.startswith("-"):
                    body = f"({ctext})*{mono}"
                else:
                    body = f"{ctext}*{mono}"
            parts.append(body)
        out = parts[0]
        for p in parts[1:]:
            out += p if p.startswith("-") else "+" + p
        return out


@dataclass
class DiagramStep:
    index: int
    family_before: list[str]
    underlined: int
    params_introduced: list[str]
    family_after: list[str]


@dataclass
class Diagram:
    steps: list[DiagramStep]
    final_family: list[SymbolicPoly]
    registry: ParamRegistry
    constraints: Constraints
    forks: list["Diagram"] = field(default_factory=list)
    fork_constraint: str | None = None
    contradiction: str | None = None
    unresolved: str | None = None

    @property
    def step_count(self) -> int:
        return len(self.steps)

    def final_texts(self) -> list[str]:
        return [p.text(self.registry) for p in self.final_family]

    def render(self) -> str:
        lines = []
        if self.fork_constraint:
            lines.append(f"assuming {self.fork_constraint}:")
        if self.contradiction:
            lines.append(f"  (vacuous: {self.contradiction})")
            return "\n".join(lines)
        if self.unresolved:
            lines.append(f"  (unresolved: {self.unresolved})")
            return "\n".join(lines)
        for step in self.steps:
            marked = [
                f"[{t}]" if i == step.underlined else t
                for i, t in enumerate(step.family_before)
            ]
            lines.append("{" + ", ".join(marked) + "}")
            intro = ", ".join(step.params_introduced)
            lines.append(f"  --{step.index}-->  introduces {intro}")
        lines.append("{" + ", ".join(self.final_texts()) + "}")
        if self.constraints.texts:
            lines.append("constraints: " + "; ".join(self.constraints.texts))
        for fork in self.forks:
            lines.append("")
            lines.append(fork.render())
        return "\n".join(lines)

    def to_tree(self) -> dict:
        node = {
            "constraints": list(self.constraints.texts),
            "steps": [
                {
                    "family": s.family_before,
                    "underlined": s.underlined,
                    "params_introduced": s.params_introduced,
                }
                for s in self.steps
            ],
            "family": self.final_texts(),
            "children": [f.to_tree() for f in self.forks],
        }
        if self.fork_constraint:
            node["fork_constraint"] = self.fork_constraint
        if self.contradiction:
            node["contradiction"] = self.contradiction
        if self.unresolved:
            node["unresolved"] = self.unresolved
        return node

    def to_json(self) -> str:
        return json.dumps(self.to_tree(), indent=2)


def symbolic_diagram(
    family: list[IntPoly],
    n: int | None = None,
    substitutions: list[str] | None = None,
    underline_policy: str = "lowest-index",
    max_steps: int = MAX_STEPS,
    fork: bool = False,
    _registry: ParamRegistry | None = None,
    _depth: int = 0,
) -> Diagram:
    """Run the differencing recursion symbolically until every member is linear.

    The differencing member follows the deterministic policy: degree-one
    members first (minimal weight, lowest index), otherwise minimal weight with
    a leading coefficient differing from the last member's when possible.  With
    fork=True an undecidable comparison splits the diagram into child branches
    instead of raising AmbiguousSelection.
    """
    if underline_policy != "lowest-index":
        raise ValueError(f"unknown policy {underline_policy!r}")
    n = n or family[0].n_vars
    registry = _registry or ParamRegistry()
    constraints = Constraints()
    for text in substitutions or []:
        parse_constraint(text, registry, constraints)
    current = [SymbolicPoly.from_int_poly(p).cleaned(constraints) for p in family]
    for p in current:
        if not p.coeffs:
            raise ValueError("family members must be nonconstant")
    steps: list[DiagramStep] = []
    step_no = 0
    try:
        while True:
            if all(p.structural_degree() <= 1 for p in current):
                break
            step_no += 1
            if step_no > max_steps:
                raise AmbiguousSelection(f"no termination within {max_steps} steps")
            try:
                arranged, underline_pos = _arrange(current, constraints)
            except AmbiguousSelection as exc:
                if not fork or _depth >= 8 or exc.coefficient is None:
                    raise
                return _fork_diagram(
                    family, n, substitutions or [], exc, registry, steps, current, max_steps, _depth
                )
            before_texts = [p.text(registry) for p in current]
            marked = current.index(arranged[0]) if arranged[0] in current else underline_pos
            params = [registry.fresh(step_no, coord) for coord in range(n)]
            param_names = [registry.names[i] for i in params]
            new_family = _difference_symbolic(arranged, params, constraints)
            if any(not p.coeffs for p in new_family):
                raise _Contradiction("a member vanished under the constraints")
            _derive_nonzero_facts(new_family, constraints)
            steps.append(
                DiagramStep(
                    index=step_no,
                    family_before=before_texts,
                    underlined=marked,
                    params_introduced=param_names,
                    family_after=[p.text(registry) for p in new_family],
                )
            )
            current = new_family
    except _Contradiction as exc:
        if _depth == 0:
            raise AmbiguousSelection(str(exc)) from exc
        return Diagram(
            steps=steps,
            final_family=[],
            registry=registry,
            constraints=constraints,
            contradiction=str(exc),
        )
    return Diagram(steps=steps, final_family=current, registry=registry, constraints=constraints)


def _arrange(family: list[SymbolicPoly], constraints: Constraints):
    """Reorder so the last member has maximal weight and the differencing
    member leads.  Returns (arranged family, original index of the leader)."""
    m = len(family)
    infos = [p.weight_info(constraints) for p in family]
    weights = [w for w, _ in infos]
    w_max = max(weights)
    order = list(range(m))
    if weights[-1] != w_max:
        pivot = next(i for i in range(m) if weights[i] == w_max)
        order = [i for i in order if i != pivot] + [pivot]
    head = order[:-1]
    linear = [i for i in head if family[i].structural_degree() <= 1]
    higher = [i for i in head if family[i].structural_degree() > 1]
    if linear:
        lead = min(linear, key=lambda i: (weights[i], i))
        arranged_idx = [lead] + [i for i in linear if i != lead] + higher + [order[-1]]
        return [family[i] for i in arranged_idx], lead
    min_w = min(weights[i] for i in order)
    candidates = [i for i in head if weights[i] == min_w]
    last_lc = infos[order[-1]][1]
    distinct = []
    undecided = None
    for i in candidates:
        st = constraints.status(infos[i][1] - last_lc)
        if st == NONZERO:
            distinct.append(i)
        elif st == UNKNOWN and undecided is None:
            undecided = infos[i][1] - last_lc
    if not distinct and undecided is not None:
        raise AmbiguousSelection(
            "cannot compare leading coefficients",
            coefficient=_linear_form(undecided),
        )
    lead = (distinct or candidates)[0]
    arranged_idx = [lead] + [i for i in head if i != lead] + [order[-1]]
    return [family[i] for i in arranged_idx], lead


FACT_DERIVATION_CAP = 64


def _derive_nonzero_facts(family: list[SymbolicPoly], constraints: Constraints):
    """Record coefficients the shift exclusion guarantees are nonzero.

    The numeric step only ever selects shifts keeping the constructed family
    essentially distinct, so a member (or pairwise difference) whose single
    surviving monomial coefficient vanished would contradict that guarantee.
    Pairwise scanning is skipped on very large families: the comparisons that
    drive later selections are settled while families are still small.
    """
    if len(family) > FACT_DERIVATION_CAP:
        return
    candidates = list(family)
    for i in range(len(family)):
        for j in range(i + 1, len(family)):
            candidates.append(family[i] - family[j])
    for poly in candidates:
        surviving = [
            (alpha, c)
            for alpha, c in poly.coeffs.items()
            if any(alpha) and constraints.status(c) != ZERO
        ]
        if len(surviving) == 1 and constraints.status(surviving[0][1]) == UNKNOWN:
            constraints.add_fact(surviving[0][1])


def _linear_form(p: ParamPoly) -> str | None:
    """Serialize the forkable shapes: a*h + b, or a*(h_i +- h_j)."""
    linear: list[tuple[int, int]] = []
    b = 0
    for mono, c in p.terms.items():
        if mono == ():
            b = c
        elif len(mono) == 1 and mono[0][1] == 1:
            linear.append((mono[0][0], c))
        else:
            return None
    if len(linear) == 1:
        idx, a = linear[0]
        return f"affine|{a}|{idx}|{b}"
    if len(linear) == 2 and b == 0:
        (i, a1), (j, a2) = linear
        if a1 == -a2:
            return f"pair|{i}|{j}|+"  # vanishes when h_i = h_j
        if a1 == a2:
            return f"pair|{i}|{j}|-"  # vanishes when h_i = -h_j
    return None


def _difference_symbolic(
    arranged: list[SymbolicPoly], params: list[int], constraints: Constraints
) -> list[SymbolicPoly]:
    m = len(arranged)
    p1 = arranged[0]
    linear_count = sum(1 for p in arranged[:-1] if p.structural_degree() <= 1)
    ell = linear_count + 1 if linear_count else 1
    entries: list[SymbolicPoly] = []
    if ell >= 2:
        for i in range(2, ell):
            entries.append((arranged[i - 1] - p1).cleaned(constraints))
        start = ell
    else:
        entries.append((p1.shifted(params) - p1).cleaned(constraints))
        start = 2
    for i in range(start, m + 1):
        p = arranged[i - 1]
        entries.append((p - p1).cleaned(constraints))
        entries.append((p.shifted(params) - p1).cleaned(constraints))
    # branch (e): every leading coefficient equal and the tracked member lost
    # its weight; recenter around the first heaviest member
    try:
        infos = [p.weight_info(constraints) for p in entries]
    except AmbiguousSelection:
        return entries
    r = max(w for w, _ in infos)
    if ell == 1 and infos[-1][0] < r:
        lcs = [lc for _, lc in infos]
        i_star = next(i for i, (w, _) in enumerate(infos) if w == r)
        recentered = [
            (-q if i == i_star else q - entries[i_star]).cleaned(constraints)
            for i, q in enumerate(entries)
        ]
        return recentered
    return entries


def _fork_diagram(
    family, n, substitutions, exc, registry, steps, current, max_steps, depth
) -> Diagram:
    parts = exc.coefficient.split("|")
    if parts[0] == "affine":
        a, idx, b = int(parts[1]), int(parts[2]), int(parts[3])
        name = registry.names[idx]
        sign = -1 if a < 0 else 1
        a, b = a * sign, b * sign
        eq = f"{a}*{name}:={-b}" if a != 1 else f"{name}:={-b}"
        ne = f"{a}*{name}!={-b}" if a != 1 else f"{name}!={-b}"
    else:
        _, i_text, j_text, sign = parts
        ni, nj = registry.names[int(i_text)], registry.names[int(j_text)]
        rhs = nj if sign == "+" else f"-{nj}"
        eq = f"{ni}:={rhs}"
        ne = f"{ni}!={rhs}"
    children = []
    for extra in (eq, ne):
        try:
            child = symbolic_diagram(
                family,
                n,
                substitutions + [extra],
                max_steps=max_steps,
                fork=True,
                _depth=depth + 1,
            )
        except AmbiguousSelection as sub_exc:
            child = Diagram(
                steps=[],
                final_family=[],
                registry=registry,
                constraints=Constraints(texts=substitutions + [extra]),
                unresolved=str(sub_exc),
            )
        child.fork_constraint = extra
        children.append(child)
    base = Diagram(
        steps=steps,
        final_family=current,
        registry=registry,
        constraints=Constraints(texts=list(substitutions)),
        forks=children,
    )
    return base
