import pytest

from protolite.compiler import CompileMode, compile_program
from protolite.metrics import run_all_configs
from protolite.outcomes import (
    Completed,
    DoesNotUnderstand,
    Errored,
    FuelExhausted,
)
from protolite.parser import parse
from protolite.runtime import (
    GLOBAL_CACHE_PROBES,
    GLOBAL_CACHE_SIZE,
    INLINE_CACHE_LIMIT,
    GlobalCache,
    Interpreter,
    cached_lookup,
    default_lookup,
    probe_index,
    run_image,
)
from protolite.values import IntVal


@pytest.fixture()
def image(two_level_program):
    return compile_program(two_level_program)


# -- default lookup ------------------------------------------------------------


def test_default_lookup_skips_protected_plain(image):
    sym = image.symbols.intern("protectedMethod")
    assert default_lookup("B", sym, image) is None


def test_default_lookup_finds_mangled_override(image):
    sym = image.symbols.intern("__protectedMethod")
    method, defining = default_lookup("B", sym, image)
    assert defining == "B"
    assert method.visibility == "protected"


def test_default_lookup_walks_chain_for_double_registered(image):
    sym = image.symbols.intern("__callProtected")
    method, defining = default_lookup("B", sym, image)
    assert defining == "A"
    assert method.origin_class == "A"


# -- global cache ------------------------------------------------------------------


def test_cached_lookup_miss_then_probe1_hit(image):
    cache = GlobalCache()
    sym = image.symbols.intern("sum")
    first = cached_lookup("B", sym, cache, image)
    assert first is not None
    assert cache.misses == 1 and cache.installs == 1
    second = cached_lookup("B", sym, cache, image)
    assert second == first
    assert cache.probe_hits[0] == 1


def test_cached_lookup_does_not_cache_failures(image):
    cache = GlobalCache()
    sym = image.symbols.intern("protectedMethod")
    assert cached_lookup("B", sym, cache, image) is None
    assert cached_lookup("B", sym, cache, image) is None
    assert cache.misses == 2
    assert cache.installs == 0


def test_probe2_hit_after_slot_collision(image):
    # Force two keys onto the same home slot; the second installs one slot
    # over and must be found by the second probe.
    cache = GlobalCache()
    sym = image.symbols.intern("sum")
    entry = default_lookup("B", sym, image)
    home = probe_index(7, sym.id, 0)
    cache.slots[home] = ("Other", sym, entry[0], entry[1])
    cache.install(7, sym, "B", entry[0], entry[1])
    assert cache.slots[(home + 1) % GLOBAL_CACHE_SIZE][0] == "B"
    hit = cache.consult(7, sym, "B")
    assert hit == entry
    assert cache.probe_hits == [0, 1, 0]


def test_eviction_when_all_probes_foreign(image):
    cache = GlobalCache()
    sym = image.symbols.intern("sum")
    entry = default_lookup("B", sym, image)
    home = probe_index(7, sym.id, 0)
    for i in range(GLOBAL_CACHE_PROBES):
        cache.slots[(home + i) % GLOBAL_CACHE_SIZE] = \
            (f"Foreign{i}", sym, entry[0], entry[1])
    cache.install(7, sym, "B", entry[0], entry[1])
    assert cache.slots[home][0] == "B"


# -- dispatch and inline caches -----------------------------------------------------


def test_monomorphic_site_one_fill_then_hits():
    # hop's body holds the one send site of interest; driving it through n
    # fresh instances of one class fills its inline cache once and hits
    # every time after.
    from protolite.bench import repeat_main

    n = 1000
    base = parse("""
        class C extends Object {
          method hop() { self.probe() }
          method probe() { 1 }
        }
        main { (new C).hop() }
    """)
    image = compile_program(repeat_main(base, n))
    result = Interpreter(image).run()
    assert result.outcome == Completed(IntVal(1))
    # probe stays monomorphic across all n activations: the whole run fills
    # each site exactly once and every other dispatch is an IC hit.
    assert result.stats.ic_megamorphic == 0
    assert result.stats.ic_polymorphic == 0
    hop_sites = n  # one per replica in main
    probe_sites = 1
    assert result.stats.ic_fills == hop_sites + probe_sites
    assert result.stats.ic_hits == (n - 1) * probe_sites
    assert result.stats.consultations == result.stats.ic_fills


def test_polymorphic_and_megamorphic_transitions():
    n_classes = INLINE_CACHE_LIMIT + 2
    classes = "\n".join(
        f"class P{i} extends Object {{ method probe() {{ {i} }} }}"
        for i in range(n_classes))
    # One shared send site: the receiver is a method parameter.
    p = parse(f"""
        {classes}
        class Driver extends Object {{
          method hit(x) {{ x.probe() }}
          method go() {{
            {' '.join(f'let d{i} = self.hit(new P{i}) in' for i in range(n_classes))}
            0
          }}
        }}
        main {{ (new Driver).go() }}
    """)
    image = compile_program(p)
    result = run_image(image)
    assert result.outcome == Completed(IntVal(0))
    assert result.stats.ic_megamorphic == 1


def test_dnu_diagnostics_strip_mangling(image):
    # A mangled self-send that misses must not leak the prefix.
    p = parse("""
        class A extends Object {
          protected method seed() { 1 }
          method go() { self.ghost() }
        }
        class B extends A { protected method ghost() { 2 } }
        main { (new A).go() }
    """)
    result = run_image(compile_program(p))
    assert result.outcome == Errored(DoesNotUnderstand("A", "ghost"))


def test_golden_outcomes_under_all_cache_configs(programs_dir):
    expected = {
        "golden_call_on_a.stl": Completed(IntVal(11)),
        "golden_call_on_b.stl": Completed(IntVal(42)),
        "golden_sum.stl": Completed(IntVal(84)),
        "golden_public_in_subclass.stl": Completed(IntVal(36)),
        "golden_protected_object_send.stl":
            Errored(DoesNotUnderstand("A", "protectedMethod")),
        "golden_raise_error.stl":
            Errored(DoesNotUnderstand("A", "protectedMethod")),
    }
    for name, want in expected.items():
        image = compile_program(parse((programs_dir / name).read_text()))
        for result in run_all_configs(image):
            assert result.outcome == want, name


def test_zero_fuel_is_exhausted_immediately(image):
    assert run_image(image, fuel=0).outcome == FuelExhausted()


def test_protected_free_image_runs_like_baseline():
    p = parse("""
        class A extends Object { method m() { self.n() } method n() { 4 } }
        main { (new A).m() }
    """)
    normal = run_image(compile_program(p))
    baseline = run_image(compile_program(p, CompileMode.BASELINE))
    assert normal.outcome == baseline.outcome
    assert normal.steps == baseline.steps


def test_shadow_lookup_check_runs_clean(image):
    result = run_image(image, shadow_lookup_check=True)
    assert result.outcome == Completed(IntVal(84))


def test_super_dispatch_uses_static_start():
    # The inherited method activates with its origin as the defining class,
    # so super starts above that origin, not above the receiver's class --
    # otherwise this program would loop on B's own override.
    p = parse("""
        class A extends Object { method m() { 1 } }
        class B extends A { method m() { super.m() + 10 } }
        class C extends B { }
        main { (new C).m() }
    """)
    result = run_image(compile_program(p))
    assert result.outcome == Completed(IntVal(11))


def test_distinct_keys_tracked_without_global_cache(image):
    with_cache = run_image(image)
    without = run_image(image, global_cache_on=False)
    assert with_cache.stats.distinct_keys == without.stats.distinct_keys > 0


def test_consultations_match_dispatch_count(image):
    # golden sum performs five object-class dispatches; with inline caches
    # off every one consults the global cache exactly once.
    result = run_image(image, inline_cache_on=False)
    assert result.outcome == Completed(IntVal(84))
    assert result.stats.consultations == 5
    assert sum(result.stats.probe_hits) + result.stats.misses == 5


def test_install_into_worst_case_image_keeps_doubling():
    from protolite.compiler import install_method
    from protolite.syntax import MethodDef, SelfRef

    p = parse("class A extends Object { method m() { 1 } } main { nil }")
    image = compile_program(p, CompileMode.WORST_CASE)
    image2 = install_method(image, "A", MethodDef("n", (), SelfRef()))
    texts = {sym.text for sym in image2.classes["A"].dictionary}
    assert texts == {"m", "__m", "n", "__n"}
