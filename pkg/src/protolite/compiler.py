"""Lowering a validated program into an executable image.

Protected visibility is enforced entirely through class method dictionaries,
so the runtime needs only one visibility-blind lookup:

* Classes that define a protected method, and all their descendants, form the
  *rewrite scope*. Inside it, protected methods are installed under their
  mangled selector (``__`` + name) only, and public methods are installed
  twice -- once plain, once mangled -- both entries sharing one compiled
  method. Classes outside the scope keep plain entries only.
* Self- and super-send sites inside the scope are retargeted to the mangled
  selector, with one exception: a site whose selector resolves only above the
  class's protection root (an ancestor region that uses no protected methods)
  stays plain, so those ancestors never need recompiling. A site whose
  selector resolves nowhere also stays plain and is recorded as *deferred*;
  installing a method with that selector later retags it.
* Object-send sites are never rewritten, so they can only ever find plain
  entries -- which is exactly the public-only lookup.

``install_method`` grows an image incrementally: the first protected method
of a class pulls the class and its descendants into the scope (recompiling
them), and every install re-examines in-scope sites that mention the new
selector. Images are never mutated; installs return a new image and leave the
old one valid.
"""

from __future__ import annotations

import enum
from dataclasses import dataclass, field, replace

from .errors import (
    AlreadyMangledError,
    ProgramInvalidError,
    ReservedSelectorError,
    UnknownClassError,
    UnknownFieldError,
)
from .syntax import (
    MANGLE_PREFIX,
    PROTECTED,
    ROOT_CLASS,
    Expr,
    FieldGet,
    FieldSet,
    IntLit,
    Let,
    MethodDef,
    New,
    NilLit,
    Program,
    SelfRef,
    Send,
    SuperSend,
    ValueLit,
    Var,
    self_and_super_selectors,
)
from .validate import HierarchyIndex, validate


class CompileMode(enum.Enum):
    NORMAL = "normal"
    # Mangling disabled entirely: visibility annotations are ignored and every
    # method is installed plain. The behaviour of the language without
    # protected-method support.
    BASELINE = "baseline"
    # Every class is treated as using protection: double registration and
    # site mangling everywhere. Upper bound for memory and lookup costs.
    WORST_CASE = "worst-case"


# --- symbols -----------------------------------------------------------------


@dataclass(frozen=True)
class Symbol:
    """An interned selector. Equality and hashing are by text."""

    text: str
    id: int = field(compare=False)

    @property
    def mangled(self) -> bool:
        return self.text.startswith(MANGLE_PREFIX)

    def __repr__(self) -> str:
        return f"#{self.text}"


class SymbolTable:
    """Interns selectors; one Symbol instance per distinct text."""

    def __init__(self) -> None:
        self._by_text: dict[str, Symbol] = {}

    def intern(self, text: str) -> Symbol:
        sym = self._by_text.get(text)
        if sym is None:
            sym = Symbol(text, len(self._by_text))
            self._by_text[text] = sym
        return sym

    def mangle(self, selector: Symbol) -> Symbol:
        """The mangled counterpart of a plain selector.

        Mangling twice is a programming error, not a silent no-op.
        """
        if selector.mangled:
            raise AlreadyMangledError(
                f"selector '{selector.text}' is already mangled")
        return self.intern(MANGLE_PREFIX + selector.text)

    def symbols(self) -> list[Symbol]:
        return list(self._by_text.values())

    def copy(self) -> "SymbolTable":
        table = SymbolTable()
        table._by_text = dict(self._by_text)
        return table

    def __len__(self) -> int:
        return len(self._by_text)

    def __contains__(self, text: str) -> bool:
        return text in self._by_text


# --- lowered bodies ----------------------------------------------------------


class LExpr:
    __slots__ = ()


@dataclass(frozen=True)
class LNil(LExpr):
    pass


@dataclass(frozen=True)
class LInt(LExpr):
    value: int


@dataclass(frozen=True)
class LSelf(LExpr):
    pass


@dataclass(frozen=True)
class LVar(LExpr):
    name: str


@dataclass(frozen=True)
class LNew(LExpr):
    class_name: str


@dataclass(frozen=True)
class LFieldGet(LExpr):
    field: str


@dataclass(frozen=True)
class LFieldSet(LExpr):
    field: str
    value: LExpr


@dataclass(frozen=True)
class SendSite:
    """One message-send site in compiled code.

    ``selector`` is the symbol the site dispatches through; for a rewritten
    self/super site that is the mangled form. ``plain_text`` keeps the source
    selector for diagnostics, which never show the prefix.
    """

    site_id: int = field(compare=False)
    kind: str  # 'object' | 'self' | 'super'
    selector: Symbol
    plain_text: str

    @property
    def mangled(self) -> bool:
        return self.selector.mangled


@dataclass(frozen=True)
class LSend(LExpr):
    receiver: LExpr
    site: SendSite
    args: tuple[LExpr, ...]


@dataclass(frozen=True)
class LSelfSend(LExpr):
    site: SendSite
    args: tuple[LExpr, ...]


@dataclass(frozen=True)
class LSuperSend(LExpr):
    site: SendSite
    args: tuple[LExpr, ...]


@dataclass(frozen=True)
class LLet(LExpr):
    var: str
    bound: LExpr
    body: LExpr


@dataclass(frozen=True)
class LValue(LExpr):
    value: object


@dataclass(eq=False, frozen=True)
class CompiledMethod:
    """A lowered method body; compared by identity so shared dictionary
    entries are observable."""

    origin_class: str
    selector: Symbol  # plain form
    visibility: str
    params: tuple[str, ...]
    body: LExpr


@dataclass(frozen=True)
class DeferredSite:
    """A self/super site whose selector resolved nowhere at compile time."""

    class_name: str
    method_selector: str
    selector: str


@dataclass
class ImageClass:
    name: str
    superclass: str | None  # None only for Object
    own_fields: tuple[str, ...]
    all_fields: tuple[str, ...]
    dictionary: dict[Symbol, CompiledMethod]
    class_id: int


@dataclass
class RuntimeImage:
    """Compiled classes plus everything needed to run and account for them.

    Immutable by convention after construction; ``install_method`` returns a
    new image sharing untouched classes with the old one.
    """

    program: Program
    mode: CompileMode
    classes: dict[str, ImageClass]
    main: LExpr
    symbols: SymbolTable
    rewrite_scope: frozenset[str]
    protection_roots: frozenset[str]
    deferred_sites: tuple[DeferredSite, ...]
    site_count: int

    def class_of(self, name: str) -> ImageClass:
        try:
            return self.classes[name]
        except KeyError:
            raise UnknownClassError(f"unknown class '{name}'") from None


# --- scope --------------------------------------------------------------------


def rewrite_scope(program: Program) -> frozenset[str]:
    """Classes that define a protected method, plus all their descendants."""
    idx = HierarchyIndex(program)
    definers = {c.name for c in program.classes
                if any(m.visibility == PROTECTED for m in c.methods)}
    if not definers:
        return frozenset()
    return frozenset(
        c.name for c in program.classes
        if any(d in idx.chain(c.name) for d in definers)
    )


def protection_roots(program: Program, scope: frozenset[str]) -> frozenset[str]:
    """Topmost in-scope class of each protected chain."""
    idx = HierarchyIndex(program)
    return frozenset(
        name for name in scope if idx.superclass(name) not in scope
    )


def _scope_for_mode(program: Program, mode: CompileMode) -> frozenset[str]:
    if mode is CompileMode.BASELINE:
        return frozenset()
    if mode is CompileMode.WORST_CASE:
        return frozenset(c.name for c in program.classes)
    return rewrite_scope(program)


# --- body lowering -------------------------------------------------------------


class _Lowerer:
    """Lowers expression trees, tagging self/super sites per the scope rules."""

    def __init__(self, idx: HierarchyIndex, scope: frozenset[str],
                 symbols: SymbolTable, next_site_id: int):
        self.idx = idx
        self.scope = scope
        self.symbols = symbols
        self.next_site_id = next_site_id
        self.deferred: list[DeferredSite] = []
        self.known_selectors = {
            m.selector for c in idx.program.classes for m in c.methods
        }

    def _site(self, kind: str, symbol: Symbol, plain: str) -> SendSite:
        site = SendSite(self.next_site_id, kind, symbol, plain)
        self.next_site_id += 1
        return site

    def _tag_selector(self, selector: str, enclosing: str | None,
                      kind: str, method_selector: str) -> Symbol:
        """Mangled symbol when the rewrite applies to this site, else plain."""
        plain = self.symbols.intern(selector)
        if enclosing is None or enclosing not in self.scope or kind == "object":
            return plain
        start = enclosing if kind == "self" else self.idx.superclass(enclosing)
        found = self.idx.closest_def(start, selector) if start else None
        if found is not None:
            if found[0] not in self.scope:
                # Resolves only above the protection root: those ancestors
                # carry no mangled entries, so the site must stay plain.
                return plain
            return self.symbols.mangle(plain)
        if kind == "self" and self._descendant_defines(enclosing, selector):
            # Unresolved here, but a subclass (necessarily in scope) answers
            # it -- possibly with a protected, mangled-only method that a
            # plain send could never see.
            return self.symbols.mangle(plain)
        if selector not in self.known_selectors:
            # No class defines the selector: assume a public send and
            # remember the site for when such a method gets installed.
            self.deferred.append(
                DeferredSite(enclosing, method_selector, selector))
        return plain

    def _descendant_defines(self, class_name: str, selector: str) -> bool:
        for cdef in self.idx.program.classes:
            if cdef.name != class_name \
                    and class_name in self.idx.chain(cdef.name) \
                    and cdef.method_named(selector) is not None:
                return True
        return False

    def lower(self, e: Expr, enclosing: str | None, method_selector: str) -> LExpr:
        # Let chains nest along the body; peel them iteratively so workload
        # mains replicated a few hundred times lower without deep recursion.
        if isinstance(e, Let):
            bindings = []
            while isinstance(e, Let):
                bindings.append(
                    (e.var, self.lower(e.bound, enclosing, method_selector)))
                e = e.body
            lowered = self.lower(e, enclosing, method_selector)
            for var, bound in reversed(bindings):
                lowered = LLet(var, bound, lowered)
            return lowered
        if isinstance(e, NilLit):
            return LNil()
        if isinstance(e, IntLit):
            return LInt(e.value)
        if isinstance(e, SelfRef):
            return LSelf()
        if isinstance(e, Var):
            return LVar(e.name)
        if isinstance(e, New):
            return LNew(e.class_name)
        if isinstance(e, ValueLit):
            return LValue(e.value)
        if isinstance(e, FieldGet):
            self._check_field(e.field, enclosing)
            return LFieldGet(e.field)
        if isinstance(e, FieldSet):
            self._check_field(e.field, enclosing)
            return LFieldSet(e.field, self.lower(e.value, enclosing, method_selector))
        if isinstance(e, Send):
            args = tuple(self.lower(a, enclosing, method_selector) for a in e.args)
            if isinstance(e.receiver, SelfRef):
                sym = self._tag_selector(e.selector, enclosing, "self",
                                         method_selector)
                return LSelfSend(self._site("self", sym, e.selector), args)
            recv = self.lower(e.receiver, enclosing, method_selector)
            sym = self.symbols.intern(e.selector)
            return LSend(recv, self._site("object", sym, e.selector), args)
        if isinstance(e, SuperSend):
            args = tuple(self.lower(a, enclosing, method_selector) for a in e.args)
            sym = self._tag_selector(e.selector, enclosing, "super",
                                     method_selector)
            return LSuperSend(self._site("super", sym, e.selector), args)
        if isinstance(e, Let):
            return LLet(e.var, self.lower(e.bound, enclosing, method_selector),
                        self.lower(e.body, enclosing, method_selector))
        raise TypeError(f"not an expression: {e!r}")

    def _check_field(self, field_name: str, enclosing: str | None) -> None:
        fields = self.idx.fields_of(enclosing) if enclosing else ()
        if field_name not in fields:
            raise UnknownFieldError(enclosing or ROOT_CLASS, field_name)


def rewrite_body(body: Expr, enclosing_class: str, program: Program,
                 method_selector: str = "",
                 symbols: SymbolTable | None = None,
                 ) -> tuple[LExpr, tuple[DeferredSite, ...]]:
    """Lower one method body of an in-scope class; mainly a test surface.

    ``compile_program`` drives the same machinery across the whole program.
    """
    idx = HierarchyIndex(program)
    scope = rewrite_scope(program)
    lowerer = _Lowerer(idx, scope, symbols or SymbolTable(), 0)
    lowered = lowerer.lower(body, enclosing_class, method_selector)
    return lowered, tuple(lowerer.deferred)


# --- whole-program compilation ---------------------------------------------------


def _compile_method(lowerer: _Lowerer, class_name: str,
                    mdef: MethodDef) -> CompiledMethod:
    if mdef.selector.startswith(MANGLE_PREFIX):
        raise ReservedSelectorError(
            f"selector {mdef.selector!r} uses the reserved prefix", 0, 0)
    body = lowerer.lower(mdef.body, class_name, mdef.selector)
    plain = lowerer.symbols.intern(mdef.selector)
    return CompiledMethod(class_name, plain, mdef.visibility, mdef.params, body)


def _install(dictionary: dict[Symbol, CompiledMethod], method: CompiledMethod,
             in_scope: bool, symbols: SymbolTable) -> None:
    plain = method.selector
    if method.visibility == PROTECTED and in_scope:
        dictionary[symbols.mangle(plain)] = method
        return
    dictionary[plain] = method
    if in_scope:
        dictionary[symbols.mangle(plain)] = method


def compile_program(program: Program,
                    mode: CompileMode = CompileMode.NORMAL) -> RuntimeImage:
    """Validate, lower, and register every class of a program."""
    violations = validate(program)
    if violations:
        raise ProgramInvalidError(violations)
    idx = HierarchyIndex(program)
    scope = _scope_for_mode(program, mode)
    symbols = SymbolTable()
    lowerer = _Lowerer(idx, scope, symbols, 0)

    classes: dict[str, ImageClass] = {
        ROOT_CLASS: ImageClass(ROOT_CLASS, None, (), (), {}, 0)
    }
    for i, cdef in enumerate(program.classes, start=1):
        in_scope = cdef.name in scope
        dictionary: dict[Symbol, CompiledMethod] = {}
        for mdef in cdef.methods:
            method = _compile_method(lowerer, cdef.name, mdef)
            _install(dictionary, method, in_scope and mode is not CompileMode.BASELINE,
                     symbols)
        classes[cdef.name] = ImageClass(
            cdef.name, cdef.superclass, cdef.fields,
            idx.fields_of(cdef.name), dictionary, i)

    main = lowerer.lower(program.main, None, "")
    # Deferral only applies inside the scope; main has no enclosing class.
    return RuntimeImage(
        program=program,
        mode=mode,
        classes=classes,
        main=main,
        symbols=symbols,
        rewrite_scope=scope,
        protection_roots=protection_roots(program, scope),
        deferred_sites=tuple(lowerer.deferred),
        site_count=lowerer.next_site_id,
    )


# --- incremental method installation ----------------------------------------------


def install_method(image: RuntimeImage, class_name: str,
                   mdef: MethodDef) -> RuntimeImage:
    """Install one method into an existing image, returning a new image.

    Rejects anything that would invalidate the program (duplicate selector,
    narrowing an inherited public method, reserved prefix). The first
    protected method of a class recompiles the class and its descendants;
    afterwards, in-scope methods mentioning the new selector in self/super
    position are re-examined so their site tags match a from-scratch compile.
    """
    if mdef.selector.startswith(MANGLE_PREFIX):
        raise ReservedSelectorError(
            f"selector {mdef.selector!r} uses the reserved prefix", 0, 0)
    if class_name == ROOT_CLASS or image.program.class_named(class_name) is None:
        raise UnknownClassError(f"cannot install into '{class_name}'")

    new_classes = tuple(
        replace(c, methods=c.methods + (mdef,)) if c.name == class_name else c
        for c in image.program.classes
    )
    new_program = replace(image.program, classes=new_classes)
    violations = validate(new_program)
    if violations:
        raise ProgramInvalidError(violations)

    idx = HierarchyIndex(new_program)
    new_scope = _scope_for_mode(new_program, image.mode)
    symbols = image.symbols.copy()
    lowerer = _Lowerer(idx, new_scope, symbols, image.site_count)

    # Classes needing a full recompile: the target itself, plus everything
    # newly pulled into the rewrite scope.
    expansion = set(new_scope) - set(image.rewrite_scope)
    full: set[str] = {class_name} | expansion
    # Sites whose tag can change: those sending the new selector, and -- when
    # classes just entered the scope -- those sending anything such a class
    # defines, since their resolution class may have flipped into the scope.
    affected_selectors = {mdef.selector}
    for cdef in new_program.classes:
        if cdef.name in expansion:
            affected_selectors.update(m.selector for m in cdef.methods)
    retag: dict[str, set[str]] = {}
    for cdef in new_program.classes:
        if cdef.name in full or cdef.name not in new_scope:
            continue
        for m in cdef.methods:
            if affected_selectors & self_and_super_selectors(m.body):
                retag.setdefault(cdef.name, set()).add(m.selector)

    def in_scope_of(name: str) -> bool:
        return name in new_scope and image.mode is not CompileMode.BASELINE

    classes = dict(image.classes)
    dropped_deferred: set[tuple[str, str]] = set()
    for name in sorted(full | set(retag)):
        cdef = new_program.class_named(name)
        assert cdef is not None
        old = image.classes[name]
        if name in full:
            dictionary = {}
            rebuilt = set(m.selector for m in cdef.methods)
        else:
            dictionary = dict(old.dictionary)
            rebuilt = retag[name]
        for m in cdef.methods:
            if m.selector not in rebuilt:
                continue
            if name not in full:
                for sym in [s for s, cm in dictionary.items()
                            if cm.selector.text == m.selector]:
                    del dictionary[sym]
            method = _compile_method(lowerer, name, m)
            _install(dictionary, method, in_scope_of(name), symbols)
            dropped_deferred.add((name, m.selector))
        classes[name] = ImageClass(name, old.superclass, cdef.fields,
                                   idx.fields_of(name), dictionary, old.class_id)
        if name in full:
            dropped_deferred.update((name, m.selector) for m in cdef.methods)

    deferred = tuple(
        d for d in image.deferred_sites
        if (d.class_name, d.method_selector) not in dropped_deferred
    ) + tuple(lowerer.deferred)

    return RuntimeImage(
        program=new_program,
        mode=image.mode,
        classes=classes,
        main=image.main,
        symbols=symbols,
        rewrite_scope=new_scope,
        protection_roots=protection_roots(new_program, new_scope),
        deferred_sites=deferred,
        site_count=lowerer.next_site_id,
    )


# --- textual image dump -------------------------------------------------------------


def pretty_lowered(e: LExpr) -> str:
    """Render a lowered body; rewritten sites show their mangled selector."""
    def go(node: LExpr, prec: int) -> str:
        if isinstance(node, LNil):
            return "nil"
        if isinstance(node, LInt):
            return str(node.value)
        if isinstance(node, LSelf):
            return "self"
        if isinstance(node, (LVar, LFieldGet)):
            return node.name if isinstance(node, LVar) else node.field
        if isinstance(node, LValue):
            return repr(node.value)
        if isinstance(node, LNew):
            s = f"new {node.class_name}"
            return f"({s})" if prec >= 1 else s
        if isinstance(node, LFieldSet):
            s = f"{node.field} := {go(node.value, 0)}"
            return f"({s})" if prec > 0 else s
        if isinstance(node, LSend):
            if node.site.selector.text == "+" and len(node.args) == 1:
                s = f"{go(node.receiver, 1)} + {go(node.args[0], 2)}"
                return f"({s})" if prec > 1 else s
            args = ", ".join(go(a, 0) for a in node.args)
            return f"{go(node.receiver, 2)}.{node.site.selector.text}({args})"
        if isinstance(node, LSelfSend):
            args = ", ".join(go(a, 0) for a in node.args)
            return f"self.{node.site.selector.text}({args})"
        if isinstance(node, LSuperSend):
            args = ", ".join(go(a, 0) for a in node.args)
            return f"super.{node.site.selector.text}({args})"
        if isinstance(node, LLet):
            s = f"let {node.var} = {go(node.bound, 0)} in {go(node.body, 0)}"
            return f"({s})" if prec > 0 else s
        raise TypeError(f"not a lowered expression: {node!r}")

    return go(e, 0)


def desugar_dump(image: RuntimeImage) -> str:
    """Deterministic textual dump of dictionaries and lowered bodies."""
    out: list[str] = []
    shared_ids = _shared_method_ids(image)
    for name in sorted(image.classes):
        icls = image.classes[name]
        sup = icls.superclass or "(root)"
        out.append(f"class {name} extends {sup}")
        out.append("  dictionary:")
        if not icls.dictionary:
            out.append("    (empty)")
        for sym in sorted(icls.dictionary, key=lambda s: s.text):
            cm = icls.dictionary[sym]
            shared = " shared" if id(cm) in shared_ids[name] else ""
            out.append(f"    {sym.text} -> {cm.origin_class}#{cm.selector.text} "
                       f"{cm.visibility}{shared}")
        seen: set[int] = set()
        for sym in sorted(icls.dictionary, key=lambda s: s.text):
            cm = icls.dictionary[sym]
            if id(cm) in seen:
                continue
            seen.add(id(cm))
            params = ", ".join(cm.params)
            out.append(f"  body {cm.selector.text}({params}) [{cm.visibility}]: "
                       f"{pretty_lowered(cm.body)}")
    out.append(f"main: {pretty_lowered(image.main)}")
    scope = ", ".join(sorted(image.rewrite_scope)) or "(none)"
    roots = ", ".join(sorted(image.protection_roots)) or "(none)"
    out.append(f"rewrite scope: {scope}")
    out.append(f"protection roots: {roots}")
    if image.deferred_sites:
        for d in sorted(image.deferred_sites,
                        key=lambda d: (d.class_name, d.method_selector, d.selector)):
            out.append(f"deferred site: {d.class_name}#{d.method_selector} "
                       f"-> {d.selector}")
    else:
        out.append("deferred sites: (none)")
    return "\n".join(out) + "\n"


def _shared_method_ids(image: RuntimeImage) -> dict[str, set[int]]:
    """Per class: ids of compiled methods registered under two selectors."""
    result: dict[str, set[int]] = {}
    for name, icls in image.classes.items():
        counts: dict[int, int] = {}
        for cm in icls.dictionary.values():
            counts[id(cm)] = counts.get(id(cm), 0) + 1
        result[name] = {mid for mid, n in counts.items() if n > 1}
    return result
