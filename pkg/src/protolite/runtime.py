"""Image execution with one visibility-blind method lookup and two caches.

The lookup walks the superclass chain and returns the first dictionary entry
for the requested selector; protection is entirely a matter of which symbols
exist in which dictionaries, so no visibility logic appears here.

Two optional layers sit in front of it:

* a global lookup cache -- a fixed table of 1024 slots keyed by
  (receiver class, selector), probed at most three times per consultation;
  a miss falls back to the chain walk and installs the result
* per-send-site inline caches that memoise receiver class -> method and grow
  monomorphic -> polymorphic -> megamorphic

Failed lookups are never cached at either level, because installing a method
later may change them. Caches affect statistics only, never outcomes.

Step accounting deliberately matches the reference evaluator event for event
(allocations, field reads/writes, sends, let bindings), so a fuel budget
means the same thing to both and fuel-bounded runs stay comparable.
"""

from __future__ import annotations

from dataclasses import dataclass, field

from .compiler import (
    CompiledMethod,
    LExpr,
    LFieldGet,
    LFieldSet,
    LInt,
    LLet,
    LNew,
    LNil,
    LSelf,
    LSelfSend,
    LSend,
    LSuperSend,
    LValue,
    LVar,
    RuntimeImage,
    SendSite,
    Symbol,
)
from .outcomes import (
    ArityMismatch,
    Completed,
    DoesNotUnderstand,
    Errored,
    FuelExhausted,
    NilReceiver,
    PrimitiveFailure,
    StuckReason,
    UnknownClass,
    UnknownField,
    UnknownVariable,
)
from .syntax import ROOT_CLASS
from .values import INT_CLASS, NIL, IntVal, Nil, Oid, Value

DEFAULT_FUEL = 1_000_000

GLOBAL_CACHE_SIZE = 1024
GLOBAL_CACHE_PROBES = 3
INLINE_CACHE_LIMIT = 6  # polymorphic entries before a site goes megamorphic

_HASH_A = 0x9E3779B1
_HASH_B = 0x85EBCA77


def probe_index(class_id: int, symbol_id: int, probe: int) -> int:
    """Slot inspected at the given probe (0-based) for a lookup key."""
    h0 = ((class_id * _HASH_A) ^ (symbol_id * _HASH_B)) & 0xFFFFFFFF
    return (h0 + probe) % GLOBAL_CACHE_SIZE


@dataclass
class GlobalCache:
    """Fixed-size (class, selector) -> method table with linear re-probing.

    A consultation checks up to three slots; on a triple miss the result of
    the slow lookup is installed at the first free probed slot, or evicts the
    first one when all three are taken.
    """

    slots: list = field(
        default_factory=lambda: [None] * GLOBAL_CACHE_SIZE)
    probe_hits: list[int] = field(default_factory=lambda: [0, 0, 0])
    misses: int = 0
    installs: int = 0

    def consult(self, class_id: int, sym: Symbol, class_name: str):
        for probe in range(GLOBAL_CACHE_PROBES):
            slot = self.slots[probe_index(class_id, sym.id, probe)]
            if slot is not None and slot[0] == class_name and slot[1] == sym:
                self.probe_hits[probe] += 1
                return slot[2], slot[3]
        self.misses += 1
        return None

    def install(self, class_id: int, sym: Symbol, class_name: str,
                method: CompiledMethod, defining: str) -> None:
        indices = [probe_index(class_id, sym.id, p)
                   for p in range(GLOBAL_CACHE_PROBES)]
        target = indices[0]
        for i in indices:
            if self.slots[i] is None:
                target = i
                break
        self.slots[target] = (class_name, sym, method, defining)
        self.installs += 1

    def flush(self) -> None:
        self.slots = [None] * GLOBAL_CACHE_SIZE


class _Megamorphic:
    def __repr__(self) -> str:
        return "<megamorphic>"


MEGAMORPHIC = _Megamorphic()


@dataclass
class CacheStats:
    """Counters gathered by one runtime instance."""

    probe_hits: tuple[int, int, int] = (0, 0, 0)
    misses: int = 0
    installs: int = 0
    ic_hits: int = 0
    ic_fills: int = 0
    distinct_keys: int = 0
    ic_monomorphic: int = 0
    ic_polymorphic: int = 0
    ic_megamorphic: int = 0

    @property
    def consultations(self) -> int:
        return sum(self.probe_hits) + self.misses

    def to_json(self) -> dict:
        return {
            "probe1": self.probe_hits[0],
            "probe2": self.probe_hits[1],
            "probe3": self.probe_hits[2],
            "misses": self.misses,
            "distinctKeys": self.distinct_keys,
            "ic": {
                "mono": self.ic_monomorphic,
                "poly": self.ic_polymorphic,
                "mega": self.ic_megamorphic,
            },
        }


def default_lookup(class_name: str, selector: Symbol,
                   image: RuntimeImage) -> tuple[CompiledMethod, str] | None:
    """Walk the superclass chain for the first dictionary hit; None if absent.

    The one and only lookup algorithm: no visibility logic, no special cases.
    """
    cursor: str | None = class_name
    while cursor is not None:
        icls = image.class_of(cursor)
        method = icls.dictionary.get(selector)
        if method is not None:
            return method, cursor
        cursor = icls.superclass
    return None


def cached_lookup(class_name: str, selector: Symbol, cache: GlobalCache,
                  image: RuntimeImage) -> tuple[CompiledMethod, str] | None:
    """Global-cache-fronted lookup. Failures are not cached."""
    class_id = image.class_of(class_name).class_id
    hit = cache.consult(class_id, selector, class_name)
    if hit is not None:
        return hit
    found = default_lookup(class_name, selector, image)
    if found is not None:
        cache.install(class_id, selector, class_name, found[0], found[1])
    return found


class _Stop(Exception):
    """Internal control flow for stuck states and fuel exhaustion."""

    def __init__(self, outcome):
        self.outcome = outcome


@dataclass
class RunResult:
    outcome: object
    steps: int
    stats: CacheStats


class Interpreter:
    """One evaluation of an image's main expression.

    Instances own their store, caches, and statistics; nothing is shared, so
    separate instances can run in parallel.
    """

    def __init__(self, image: RuntimeImage, *, global_cache_on: bool = True,
                 inline_cache_on: bool = True, fuel: int = DEFAULT_FUEL,
                 shadow_lookup_check: bool = False):
        self.image = image
        self.global_cache_on = global_cache_on
        self.inline_cache_on = inline_cache_on
        self.fuel = fuel
        self.shadow_lookup_check = shadow_lookup_check
        self.global_cache = GlobalCache()
        self.site_caches: dict[int, object] = {}
        self.records: dict[int, tuple[str, dict[str, Value]]] = {}
        self.next_oid = 1
        self.steps = 0
        self.distinct_keys: set[tuple[str, str]] = set()
        self.ic_hits = 0
        self.ic_fills = 0

    # -- bookkeeping ---------------------------------------------------------

    def _tick(self) -> None:
        if self.steps >= self.fuel:
            raise _Stop(FuelExhausted())
        self.steps += 1

    def _stuck(self, reason: StuckReason):
        raise _Stop(Errored(reason))

    def _allocate(self, class_name: str) -> Oid:
        icls = self.image.classes.get(class_name)
        if icls is None:
            self._stuck(UnknownClass(class_name))
        self._tick()
        oid = self.next_oid
        self.next_oid += 1
        self.records[oid] = (class_name, {f: NIL for f in icls.all_fields})
        return Oid(oid)

    def class_of_oid(self, oid: int) -> str:
        return self.records[oid][0]

    # -- lookup stack ----------------------------------------------------------

    def _lookup(self, class_name: str, sym: Symbol,
                site: SendSite | None) -> tuple[CompiledMethod, str] | None:
        """Inline cache, then global cache, then the chain walk.

        ``site`` is None for super-sends: their start class is static, so
        only the global cache applies.
        """
        self.distinct_keys.add((class_name, sym.text))
        found = None
        filled_from_ic = False
        if site is not None and self.inline_cache_on:
            entry = self.site_caches.get(site.site_id)
            if entry is MEGAMORPHIC:
                pass
            elif entry is not None:
                for cached_class, cached in entry:
                    if cached_class == class_name:
                        self.ic_hits += 1
                        found = cached
                        filled_from_ic = True
                        break
        if found is None:
            if self.global_cache_on:
                found = cached_lookup(class_name, sym, self.global_cache,
                                      self.image)
            else:
                found = default_lookup(class_name, sym, self.image)
        if self.shadow_lookup_check:
            shadow = default_lookup(class_name, sym, self.image)
            if shadow != found:
                raise AssertionError(
                    f"cached lookup diverged for ({class_name}, {sym.text}): "
                    f"{found} != {shadow}")
        if (found is not None and site is not None and self.inline_cache_on
                and not filled_from_ic):
            self._ic_fill(site, class_name, found)
        return found

    def _ic_fill(self, site: SendSite, class_name: str,
                 found: tuple[CompiledMethod, str]) -> None:
        entry = self.site_caches.get(site.site_id)
        if entry is MEGAMORPHIC:
            return
        self.ic_fills += 1
        if entry is None:
            self.site_caches[site.site_id] = [(class_name, found)]
        elif len(entry) < INLINE_CACHE_LIMIT:
            entry.append((class_name, found))
        else:
            self.site_caches[site.site_id] = MEGAMORPHIC

    # -- evaluation ---------------------------------------------------------------
    #
    # The evaluator runs on an explicit control stack so activation depth is
    # bounded by fuel and memory, never by the host's recursion limit. Each
    # control entry is either an expression to evaluate in some context or a
    # pending combiner that consumes results from the value stack. A method
    # activation just schedules its body; nothing stays behind on the control
    # stack for it, so self-recursive loops run in constant space.

    def run(self) -> RunResult:
        if self.fuel <= 0:
            return RunResult(FuelExhausted(), 0, self._stats())
        try:
            value = self._eval(self.image.main, {}, NIL, ROOT_CLASS)
            return RunResult(Completed(value), self.steps, self._stats())
        except _Stop as stop:
            return RunResult(stop.outcome, self.steps, self._stats())

    def _eval(self, root: LExpr, env: dict[str, Value], owner: Value,
              defining: str) -> Value:
        control: list[tuple] = [("eval", root, env, owner, defining)]
        values: list[Value] = []
        while control:
            op = control.pop()
            tag = op[0]
            if tag == "eval":
                _, node, env, owner, defining = op
                if isinstance(node, LNil):
                    values.append(NIL)
                elif isinstance(node, LInt):
                    values.append(IntVal(node.value))
                elif isinstance(node, LSelf):
                    values.append(owner)
                elif isinstance(node, LValue):
                    values.append(node.value)  # type: ignore[arg-type]
                elif isinstance(node, LVar):
                    try:
                        values.append(env[node.name])
                    except KeyError:
                        self._stuck(UnknownVariable(node.name))
                elif isinstance(node, LNew):
                    values.append(self._allocate(node.class_name))
                elif isinstance(node, LFieldGet):
                    values.append(self._field_read(owner, node.field))
                elif isinstance(node, LFieldSet):
                    control.append(("set", node.field, owner))
                    control.append(("eval", node.value, env, owner, defining))
                elif isinstance(node, LLet):
                    control.append(("let", node.var, node.body, env, owner,
                                    defining))
                    control.append(("eval", node.bound, env, owner, defining))
                elif isinstance(node, LSend):
                    control.append(("send", node.site, len(node.args)))
                    for a in reversed(node.args):
                        control.append(("eval", a, env, owner, defining))
                    control.append(("eval", node.receiver, env, owner, defining))
                elif isinstance(node, LSelfSend):
                    control.append(("self-send", node.site, len(node.args),
                                    owner))
                    for a in reversed(node.args):
                        control.append(("eval", a, env, owner, defining))
                elif isinstance(node, LSuperSend):
                    control.append(("super-send", node.site, len(node.args),
                                    owner, defining))
                    for a in reversed(node.args):
                        control.append(("eval", a, env, owner, defining))
                else:
                    raise TypeError(f"not a lowered expression: {node!r}")
            elif tag == "let":
                _, var, body, env, owner, defining = op
                bound = values.pop()
                self._tick()
                env = dict(env)
                env[var] = bound
                control.append(("eval", body, env, owner, defining))
            elif tag == "set":
                _, field_name, owner = op
                value = values[-1]  # a field write reduces to its value
                self._field_write(owner, field_name, value)
            elif tag == "send":
                _, site, nargs = op
                args = tuple(values[len(values) - nargs:])
                del values[len(values) - nargs:]
                receiver = values.pop()
                self._dispatch(control, values, receiver, site, args)
            elif tag == "self-send":
                _, site, nargs, owner = op
                args = tuple(values[len(values) - nargs:])
                del values[len(values) - nargs:]
                self._dispatch(control, values, owner, site, args)
            else:  # super-send
                _, site, nargs, owner, defining = op
                args = tuple(values[len(values) - nargs:])
                del values[len(values) - nargs:]
                self._super_dispatch(control, values, owner, defining, site,
                                     args)
        assert len(values) == 1
        return values[0]

    def _field_read(self, owner: Value, field_name: str) -> Value:
        if not isinstance(owner, Oid):
            self._stuck(UnknownField("<nil>", field_name))
        class_name, fields = self.records[owner.oid]
        if field_name not in fields:
            self._stuck(UnknownField(class_name, field_name))
        self._tick()
        return fields[field_name]

    def _field_write(self, owner: Value, field_name: str, value: Value) -> None:
        if not isinstance(owner, Oid):
            self._stuck(UnknownField("<nil>", field_name))
        class_name, fields = self.records[owner.oid]
        if field_name not in fields:
            self._stuck(UnknownField(class_name, field_name))
        self._tick()
        fields[field_name] = value

    def _dispatch(self, control: list, values: list, receiver: Value,
                  site: SendSite, args: tuple[Value, ...]) -> None:
        if isinstance(receiver, Nil):
            self._stuck(NilReceiver(site.plain_text))
        if isinstance(receiver, IntVal):
            values.append(self._int_builtin(receiver, site.plain_text, args))
            return
        class_name = self.records[receiver.oid][0]
        found = self._lookup(class_name, site.selector, site)
        if found is None:
            # Diagnostics always show the unmangled selector.
            self._stuck(DoesNotUnderstand(class_name, site.plain_text))
        self._activate(control, found, receiver, args, class_name,
                       site.plain_text)

    def _super_dispatch(self, control: list, values: list, receiver: Value,
                        defining: str, site: SendSite,
                        args: tuple[Value, ...]) -> None:
        start = self.image.class_of(defining).superclass
        if start is None:
            self._stuck(DoesNotUnderstand(ROOT_CLASS, site.plain_text))
        found = self._lookup(start, site.selector, None)
        if found is None:
            self._stuck(DoesNotUnderstand(start, site.plain_text))
        self._activate(control, found, receiver, args, start, site.plain_text)

    def _int_builtin(self, receiver: IntVal, selector: str,
                     args: tuple[Value, ...]) -> Value:
        # Integer receivers bypass both caches; '+' is the only primitive.
        if selector != "+":
            self._stuck(DoesNotUnderstand(INT_CLASS, selector))
        if len(args) != 1:
            self._stuck(ArityMismatch(INT_CLASS, "+", 1, len(args)))
        arg = args[0]
        if not isinstance(arg, IntVal):
            self._stuck(PrimitiveFailure("+", "argument must be an integer"))
        self._tick()
        return IntVal(receiver.n + arg.n)

    def _activate(self, control: list, found: tuple[CompiledMethod, str],
                  receiver: Value, args: tuple[Value, ...], lookup_class: str,
                  selector: str) -> None:
        method, defining = found
        if len(method.params) != len(args):
            self._stuck(ArityMismatch(lookup_class, selector,
                                      len(method.params), len(args)))
        self._tick()
        env = dict(zip(method.params, args))
        control.append(("eval", method.body, env, receiver, defining))

    def _stats(self) -> CacheStats:
        mono = poly = mega = 0
        for entry in self.site_caches.values():
            if entry is MEGAMORPHIC:
                mega += 1
            elif len(entry) == 1:  # type: ignore[arg-type]
                mono += 1
            else:
                poly += 1
        return CacheStats(
            probe_hits=tuple(self.global_cache.probe_hits),  # type: ignore[arg-type]
            misses=self.global_cache.misses,
            installs=self.global_cache.installs,
            ic_hits=self.ic_hits,
            ic_fills=self.ic_fills,
            distinct_keys=len(self.distinct_keys),
            ic_monomorphic=mono,
            ic_polymorphic=poly,
            ic_megamorphic=mega,
        )


def run_image(image: RuntimeImage, *, global_cache_on: bool = True,
              inline_cache_on: bool = True, fuel: int = DEFAULT_FUEL,
              shadow_lookup_check: bool = False) -> RunResult:
    """Evaluate an image's main expression under the given cache config."""
    interp = Interpreter(image, global_cache_on=global_cache_on,
                         inline_cache_on=inline_cache_on, fuel=fuel,
                         shadow_lookup_check=shadow_lookup_check)
    return interp.run()
