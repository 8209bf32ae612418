"""Typed AST for the theory language: terms, property/set terms, formulas, theories.

All formula and term nodes are frozen dataclasses, so they are hashable and can
be used as dict keys (the prover tracks instantiation budgets per formula).
"""
from __future__ import annotations

from dataclasses import dataclass, field
from typing import Optional, Union

BOOL = "bool"


class PetitioError(Exception):
    """Base class for all errors raised by this package."""


def _cached_hash(cls):
    """Memoize the generated dataclass hash; AST nodes are deeply nested and
    re-hashed constantly by the search layers."""
    base_hash = cls.__hash__

    def __hash__(self):
        h = self.__dict__.get("_hash")
        if h is None:
            h = base_hash(self)
            object.__setattr__(self, "_hash", h)
        return h

    cls.__hash__ = __hash__
    return cls


# ---------------------------------------------------------------------------
# object-level terms


@_cached_hash
@dataclass(frozen=True)
class Var:
    name: str
    sort: str


@_cached_hash
@dataclass(frozen=True)
class Const:
    name: str
    sort: str


@_cached_hash
@dataclass(frozen=True)
class SkolemConst:
    base: str
    index: int
    sort: str

    @property
    def name(self) -> str:
        return f"{self.base}!{self.index}"


@_cached_hash
@dataclass(frozen=True)
class ChoiceConst:
    """Constant introduced by a choice step; `var`/`defn` is the predicate it witnesses."""

    name: str
    sort: str
    var: str
    defn: "Formula"


Term = Union[Var, Const, SkolemConst, ChoiceConst]


# ---------------------------------------------------------------------------
# property-level terms (members of a declared property class)


@_cached_hash
@dataclass(frozen=True)
class PropConst:
    """A declared unary predicate used as a first-class property (e.g. re?)."""

    name: str
    sort: str


@_cached_hash
@dataclass(frozen=True)
class PropVar:
    name: str
    cls: str


@_cached_hash
@dataclass(frozen=True)
class PropSkolem:
    base: str
    index: int
    cls: str

    @property
    def name(self) -> str:
        return f"{self.base}!{self.index}"


PropTerm = Union[PropConst, PropVar, PropSkolem]


# ---------------------------------------------------------------------------
# property-set terms (subsets of a property class)


@_cached_hash
@dataclass(frozen=True)
class SetVar:
    name: str
    cls: str


@_cached_hash
@dataclass(frozen=True)
class SetSkolem:
    base: str
    index: int
    cls: str

    @property
    def name(self) -> str:
        return f"{self.base}!{self.index}"


@_cached_hash
@dataclass(frozen=True)
class SetConst:
    """Reference to a named property-set definition (e.g. jre)."""

    name: str
    cls: str


@_cached_hash
@dataclass(frozen=True)
class SetBuilder:
    """{ var : (cls) | body } -- membership beta-reduces on application."""

    var: str
    cls: str
    body: "Formula"


SetTerm = Union[SetVar, SetSkolem, SetConst, SetBuilder]


# ---------------------------------------------------------------------------
# formulas


@_cached_hash
@dataclass(frozen=True)
class Truth:
    pass


@_cached_hash
@dataclass(frozen=True)
class Falsity:
    pass


@_cached_hash
@dataclass(frozen=True)
class Atom:
    """Application of a declared predicate symbol (0-, 1- or 2-ary)."""

    pred: str
    args: tuple = ()


@_cached_hash
@dataclass(frozen=True)
class PropApply:
    prop: PropTerm
    arg: Term


@_cached_hash
@dataclass(frozen=True)
class SetApply:
    s: SetTerm
    prop: PropTerm


@_cached_hash
@dataclass(frozen=True)
class InClass:
    """Declared-class membership, written member(p, cls) in concrete syntax."""

    cls: str
    prop: PropTerm


@_cached_hash
@dataclass(frozen=True)
class PropEq:
    left: PropTerm
    right: PropTerm


@_cached_hash
@dataclass(frozen=True)
class Eq:
    left: Term
    right: Term


@_cached_hash
@dataclass(frozen=True)
class Not:
    body: "Formula"


@_cached_hash
@dataclass(frozen=True)
class And:
    args: tuple  # of Formula, len >= 2, flattened


@_cached_hash
@dataclass(frozen=True)
class Or:
    args: tuple


@_cached_hash
@dataclass(frozen=True)
class Implies:
    left: "Formula"
    right: "Formula"


@_cached_hash
@dataclass(frozen=True)
class Iff:
    left: "Formula"
    right: "Formula"


@_cached_hash
@dataclass(frozen=True)
class ForAll:
    vars: tuple  # of (name, sort) pairs
    body: "Formula"


@_cached_hash
@dataclass(frozen=True)
class Exists:
    vars: tuple
    body: "Formula"


@_cached_hash
@dataclass(frozen=True)
class ForAllProp:
    var: str
    cls: str
    body: "Formula"


@_cached_hash
@dataclass(frozen=True)
class ExistsProp:
    var: str
    cls: str
    body: "Formula"


@_cached_hash
@dataclass(frozen=True)
class ForAllSet:
    var: str
    cls: str
    body: "Formula"


@_cached_hash
@dataclass(frozen=True)
class ExistsSet:
    var: str
    cls: str
    body: "Formula"


@_cached_hash
@dataclass(frozen=True)
class DefRef:
    name: str
    args: tuple = ()  # mixed Term / PropTerm / SetTerm


Formula = Union[
    Truth, Falsity, Atom, PropApply, SetApply, InClass, PropEq, Eq,
    Not, And, Or, Implies, Iff,
    ForAll, Exists, ForAllProp, ExistsProp, ForAllSet, ExistsSet, DefRef,
]

TRUE = Truth()
FALSE = Falsity()


def mk_and(args) -> Formula:
    """Conjunction with flattening of nested And and unit/absorbing simplification."""
    flat = []
    for a in args:
        if isinstance(a, And):
            flat.extend(a.args)
        elif isinstance(a, Truth):
            continue
        elif isinstance(a, Falsity):
            return FALSE
        else:
            flat.append(a)
    if not flat:
        return TRUE
    if len(flat) == 1:
        return flat[0]
    return And(tuple(flat))


def mk_or(args) -> Formula:
    flat = []
    for a in args:
        if isinstance(a, Or):
            flat.extend(a.args)
        elif isinstance(a, Falsity):
            continue
        elif isinstance(a, Truth):
            return TRUE
        else:
            flat.append(a)
    if not flat:
        return FALSE
    if len(flat) == 1:
        return flat[0]
    return Or(tuple(flat))


def mk_not(f: Formula) -> Formula:
    if isinstance(f, Not):
        return f.body
    if isinstance(f, Truth):
        return FALSE
    if isinstance(f, Falsity):
        return TRUE
    return Not(f)


def exists_unique(var: str, sort: str, body_of) -> Formula:
    """EXISTS! x: phi(x), expanded: some x satisfies phi and any other satisfier equals it."""
    other = var + "_"
    x = Var(var, sort)
    y = Var(other, sort)
    return Exists(
        ((var, sort),),
        mk_and([
            body_of(x),
            ForAll(((other, sort),), Implies(body_of(y), Eq(y, x))),
        ]),
    )


# ---------------------------------------------------------------------------
# theories


@dataclass(frozen=True)
class Param:
    name: str
    kind: str  # "obj" | "prop" | "propset"
    sort: str  # object sort, or property-class name for prop/propset


@dataclass(frozen=True)
class Definition:
    name: str
    params: tuple  # of Param
    body: object  # Formula for bool definitions, SetBuilder for propset definitions
    opaque: bool = False
    span: Optional[tuple] = field(default=None, compare=False)

    @property
    def is_propset(self) -> bool:
        return isinstance(self.body, SetBuilder)


@dataclass(frozen=True)
class NamedFormula:
    name: str
    role: str  # "axiom" | "theorem" | "lemma"
    body: Formula
    span: Optional[tuple] = field(default=None, compare=False)


@dataclass(frozen=True)
class PropClass:
    name: str
    elem_sort: str
    members: tuple = ()  # declared member predicate names
    full: bool = False  # all-subsets extension in finite models


@dataclass
class Theory:
    name: str
    sorts: list = field(default_factory=list)
    vars: dict = field(default_factory=dict)  # declared VAR name -> sort
    consts: dict = field(default_factory=dict)  # constant name -> sort
    preds: dict = field(default_factory=dict)  # predicate name -> arg-sort tuple
    infix: set = field(default_factory=set)  # symbols printed infix (">")
    classes: dict = field(default_factory=dict)  # name -> PropClass
    defs: dict = field(default_factory=dict)  # name -> Definition, insertion order
    formulas: dict = field(default_factory=dict)  # name -> NamedFormula, insertion order
    descriptions: dict = field(default_factory=dict)  # constant name -> defining pred/def
    expects: list = field(default_factory=list)  # (goal name, verdict) annotations

    def axiom_names(self) -> list:
        return [n for n, f in self.formulas.items() if f.role == "axiom"]

    def axioms(self) -> list:
        return [f for f in self.formulas.values() if f.role == "axiom"]

    def formula(self, name: str) -> NamedFormula:
        try:
            return self.formulas[name]
        except KeyError:
            raise UnknownName(f"no formula named {name!r} in theory {self.name}") from None

    def definition(self, name: str) -> Definition:
        try:
            return self.defs[name]
        except KeyError:
            raise UnknownDefinition(f"no definition named {name!r} in theory {self.name}") from None

    def object_sort(self) -> str:
        """The principal (first declared) object sort."""
        if not self.sorts:
            raise PetitioError(f"theory {self.name} declares no sorts")
        return self.sorts[0]

    def class_membership_axioms(self) -> list:
        """Implicit facts: every declared class member belongs to its class."""
        out = []
        for cls in self.classes.values():
            for m in cls.members:
                out.append(InClass(cls.name, PropConst(m, cls.elem_sort)))
        return out

    def description_axioms(self) -> dict:
        """Defining facts for description constants: pred(c) for each c described by pred."""
        out = {}
        for cname, pname in self.descriptions.items():
            c = Const(cname, self.consts[cname])
            if pname in self.defs:
                out[cname] = DefRef(pname, (c,))
            else:
                out[cname] = Atom(pname, (c,))
        return out

    def description_obligation(self, cname: str) -> Formula:
        """EXISTS! x: pred(x) for the description constant cname."""
        pname = self.descriptions[cname]
        sort = self.consts[cname]

        def body_of(t):
            if pname in self.defs:
                return DefRef(pname, (t,))
            return Atom(pname, (t,))

        return exists_unique("x", sort, body_of)


# ---------------------------------------------------------------------------
# errors shared across modules


class ParseError(PetitioError):
    def __init__(self, message, line=None, col=None, expected=None):
        super().__init__(message)
        self.line = line
        self.col = col
        self.expected = expected or ()


class ResolveError(PetitioError):
    pass


class UnknownName(ResolveError):
    pass


class UnknownDefinition(ResolveError):
    pass


class OpaqueDefinition(PetitioError):
    pass


class NotAnImplication(PetitioError):
    pass


class NameClash(PetitioError):
    pass
