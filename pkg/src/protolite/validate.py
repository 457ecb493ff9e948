"""Static well-formedness checks and the class-hierarchy relation oracle.

``validate`` returns violations as data; callers decide whether to raise.
Checks run in a fixed order and each violation names the rule, the class, and
the offending member. The rules:

* CLASSESONCE           -- class names unique; ``Object`` may not be redefined
* FIELDONCEPERCLASS     -- no field declared twice in one class
* FIELDSUNIQUELYDEFINED -- a field may not be redeclared in a subclass
* METHODONCEPERCLASS    -- one method per selector per class, any visibility
* COMPLETECLASSES       -- every named superclass is defined
* WELLFOUNDEDCLASSES    -- the inheritance relation has no cycles
* CLASSMETHODSOK        -- overriding preserves arity
* OVERRIDINGPUBLICMETHOD    -- a public method may be overridden only publicly
* OVERRIDINGPROTECTEDMETHOD -- protected methods may be overridden by public
  or protected methods; with exactly two visibilities this cannot fail and is
  retained for completeness of the rule set
"""

from __future__ import annotations

from dataclasses import dataclass
from itertools import combinations

from .errors import UnknownClassError
from .syntax import PROTECTED, PUBLIC, ROOT_CLASS, ClassDef, MethodDef, Program

RULE_ORDER = (
    "CLASSESONCE",
    "FIELDONCEPERCLASS",
    "FIELDSUNIQUELYDEFINED",
    "METHODONCEPERCLASS",
    "COMPLETECLASSES",
    "WELLFOUNDEDCLASSES",
    "CLASSMETHODSOK",
    "OVERRIDINGPUBLICMETHOD",
    "OVERRIDINGPROTECTEDMETHOD",
)


@dataclass(frozen=True)
class Violation:
    rule: str
    class_name: str
    member: str | None = None
    detail: str = ""

    def __str__(self) -> str:
        member = f", member '{self.member}'" if self.member else ""
        detail = f": {self.detail}" if self.detail else ""
        return f"{self.rule}: class '{self.class_name}'{member}{detail}"


def _first_defs(classes: tuple[ClassDef, ...]) -> dict[str, ClassDef]:
    out: dict[str, ClassDef] = {}
    for c in classes:
        out.setdefault(c.name, c)
    return out


def _chain(by_name: dict[str, ClassDef], start: str) -> list[str]:
    """Ancestor chain from ``start`` upward, cycle- and gap-tolerant."""
    chain: list[str] = []
    seen: set[str] = set()
    cur = start
    while cur not in seen:
        seen.add(cur)
        chain.append(cur)
        if cur == ROOT_CLASS:
            break
        cdef = by_name.get(cur)
        if cdef is None:
            break
        cur = cdef.superclass
    return chain


def validate(program: Program) -> list[Violation]:
    """Check every rule; an empty report means the program is valid."""
    violations: list[Violation] = []
    classes = program.classes
    by_name = _first_defs(classes)

    # CLASSESONCE: one violation per duplicate pair, plus Object redefinition.
    names = [c.name for c in classes]
    for (i, a), (j, b) in combinations(enumerate(names), 2):
        if a == b:
            violations.append(Violation(
                "CLASSESONCE", a,
                detail=f"declared at positions {i + 1} and {j + 1}"))
    for c in classes:
        if c.name == ROOT_CLASS:
            violations.append(Violation(
                "CLASSESONCE", ROOT_CLASS, detail="redefines the built-in root class"))

    for c in classes:
        seen_fields: set[str] = set()
        for f in c.fields:
            if f in seen_fields:
                violations.append(Violation("FIELDONCEPERCLASS", c.name, f))
            seen_fields.add(f)

    for c in classes:
        inherited: set[str] = set()
        for anc in _chain(by_name, c.name)[1:]:
            anc_def = by_name.get(anc)
            if anc_def is not None:
                inherited.update(anc_def.fields)
        for f in c.fields:
            if f in inherited:
                violations.append(Violation(
                    "FIELDSUNIQUELYDEFINED", c.name, f,
                    detail="field is already defined in a superclass"))

    for c in classes:
        seen_methods: set[str] = set()
        for m in c.methods:
            if m.selector in seen_methods:
                violations.append(Violation("METHODONCEPERCLASS", c.name, m.selector))
            seen_methods.add(m.selector)

    defined = set(by_name) | {ROOT_CLASS}
    for c in classes:
        if c.superclass not in defined:
            violations.append(Violation(
                "COMPLETECLASSES", c.name,
                detail=f"extends undefined class '{c.superclass}'"))

    # A chain ending in a class whose superclass is already on that chain is
    # cyclic; a class sits on the cycle iff its own walk wraps back to it.
    for c in classes:
        chain = _chain(by_name, c.name)
        last_def = by_name.get(chain[-1])
        if chain[-1] != ROOT_CLASS and last_def is not None \
                and last_def.superclass == c.name:
            violations.append(Violation(
                "WELLFOUNDEDCLASSES", c.name,
                detail="class is part of an inheritance cycle"))

    # Arity and visibility of overrides, walking each class's ancestor chain.
    for c in classes:
        for m in c.methods:
            for anc in _chain(by_name, c.name)[1:]:
                anc_def = by_name.get(anc)
                if anc_def is None:
                    continue
                overridden = anc_def.method_named(m.selector)
                if overridden is None:
                    continue
                if len(overridden.params) != len(m.params):
                    violations.append(Violation(
                        "CLASSMETHODSOK", c.name, m.selector,
                        detail=(f"arity {len(m.params)} does not match arity "
                                f"{len(overridden.params)} in '{anc}'")))

    for c in classes:
        for m in c.methods:
            if m.visibility != PROTECTED:
                continue
            for anc in _chain(by_name, c.name)[1:]:
                anc_def = by_name.get(anc)
                if anc_def is None:
                    continue
                overridden = anc_def.method_named(m.selector)
                if overridden is not None and overridden.visibility == PUBLIC:
                    violations.append(Violation(
                        "OVERRIDINGPUBLICMETHOD", c.name, m.selector,
                        detail=f"narrows public method inherited from '{anc}'"))

    # OVERRIDINGPROTECTEDMETHOD: any override of a protected method is public
    # or protected, so no violation is possible with two visibility levels.

    order = {rule: i for i, rule in enumerate(RULE_ORDER)}
    violations.sort(key=lambda v: order[v.rule])
    return violations


class HierarchyIndex:
    """Relation oracle over a validated program.

    Answers subclass queries, method definitions per visibility, transitive
    field sets, and closest-definition lookups. Unknown class names raise
    UnknownClassError.
    """

    def __init__(self, program: Program):
        self.program = program
        self._by_name: dict[str, ClassDef] = {}
        for c in program.classes:
            self._by_name.setdefault(c.name, c)
        self._chains: dict[str, tuple[str, ...]] = {
            ROOT_CLASS: (ROOT_CLASS,)
        }
        for c in program.classes:
            self._chains[c.name] = tuple(_chain(self._by_name, c.name))
        self._fields: dict[str, tuple[str, ...]] = {}
        for name, chain in self._chains.items():
            fields: list[str] = []
            for anc in reversed(chain):
                anc_def = self._by_name.get(anc)
                if anc_def is not None:
                    fields.extend(anc_def.fields)
            self._fields[name] = tuple(fields)

    def _require(self, name: str) -> None:
        if name != ROOT_CLASS and name not in self._by_name:
            raise UnknownClassError(f"unknown class '{name}'")

    def class_names(self) -> tuple[str, ...]:
        return tuple(c.name for c in self.program.classes)

    def class_def(self, name: str) -> ClassDef | None:
        self._require(name)
        return self._by_name.get(name)

    def superclass(self, name: str) -> str | None:
        self._require(name)
        if name == ROOT_CLASS:
            return None
        return self._by_name[name].superclass

    def chain(self, name: str) -> tuple[str, ...]:
        """Ancestor chain from ``name`` up to and including Object."""
        self._require(name)
        return self._chains[name]

    def direct_subclass(self, name: str, parent: str) -> bool:
        self._require(name)
        self._require(parent)
        return name != ROOT_CLASS and self._by_name[name].superclass == parent

    def subclass_of(self, name: str, ancestor: str) -> bool:
        """Reflexive-transitive closure of direct_subclass."""
        self._require(name)
        self._require(ancestor)
        return ancestor in self._chains[name]

    def defines_public(self, name: str, selector: str) -> bool:
        cdef = self.class_def(name)
        if cdef is None:
            return False
        m = cdef.method_named(selector)
        return m is not None and m.visibility == PUBLIC

    def defines_protected(self, name: str, selector: str) -> bool:
        cdef = self.class_def(name)
        if cdef is None:
            return False
        m = cdef.method_named(selector)
        return m is not None and m.visibility == PROTECTED

    def fields_of(self, name: str) -> tuple[str, ...]:
        """All fields of a class including inherited ones, root-first."""
        self._require(name)
        return self._fields[name]

    def closest_def(self, name: str, selector: str) -> tuple[str, MethodDef] | None:
        """First definition of ``selector`` on the chain, any visibility."""
        self._require(name)
        for anc in self._chains[name]:
            anc_def = self._by_name.get(anc)
            if anc_def is not None:
                m = anc_def.method_named(selector)
                if m is not None:
                    return anc, m
        return None

    def public_lookup(self, name: str, selector: str) -> tuple[str, MethodDef] | None:
        """First public definition on the chain; protected ones are skipped."""
        self._require(name)
        for anc in self._chains[name]:
            anc_def = self._by_name.get(anc)
            if anc_def is not None:
                m = anc_def.method_named(selector)
                if m is not None and m.visibility == PUBLIC:
                    return anc, m
        return None


def hierarchy_relations(program: Program) -> HierarchyIndex:
    return HierarchyIndex(program)
