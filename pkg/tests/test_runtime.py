import random

import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from mvsl import (
    GenConfig,
    RuntimeTrap,
    check_program,
    execute,
    generate_program,
    parse_source,
    serialize_array_layout,
)
from mvsl.ir import apply_move_optimization, lower_program
from mvsl.types import INT
from mvsl.vm import VM, ArrayVal, Location, StructVal, check_dynamic_overlap, format_value

from conftest import corpus_sources, lower_source, run_source

PAIR = "struct Pair { var fs: Int; var sn: Int } in "


def fresh_vm(cow=True):
    return VM(lower_source("0"), cow=cow)


# -- store primitives ----------------------------------------------------------


def test_copy_retains_under_cow():
    vm = fresh_vm(cow=True)
    sid = vm.alloc(INT, [1, 2])
    a = ArrayVal(INT, sid)
    b = vm.copy_value(a)
    assert b.sid == sid
    assert vm.store[sid].r == 2
    assert vm.stats.retains == 1 and vm.stats.deep_copies == 0
    vm.destroy_value(b)
    assert vm.store[sid].r == 1
    vm.destroy_value(a)
    assert sid not in vm.store
    assert vm.stats.allocs == vm.stats.frees == 1


def test_copy_duplicates_without_cow():
    vm = fresh_vm(cow=False)
    a = ArrayVal(INT, vm.alloc(INT, [1, 2]))
    b = vm.copy_value(a)
    assert b.sid != a.sid
    assert vm.store[a.sid].r == vm.store[b.sid].r == 1
    assert vm.stats.deep_copies == 1 and vm.stats.retains == 0
    vm.destroy_value(a)
    vm.destroy_value(b)
    assert not vm.store


def test_nested_destroy_releases_inner_blocks():
    vm = fresh_vm()
    inner = ArrayVal(INT, vm.alloc(INT, [7]))
    outer = ArrayVal(None, vm.alloc(None, [inner]))
    vm.destroy_value(outer)
    assert not vm.store
    assert vm.stats.frees == 2


def test_trivial_copy_touches_no_counters():
    vm = fresh_vm()
    v = vm.copy_value(4)
    assert v == 4
    s = vm.copy_value(StructVal("Pair", [4, 2]))
    assert s.fields == [4, 2]
    assert vm.stats.retains == vm.stats.deep_copies == 0


def test_cow_dup_on_shared_mutation():
    # q = p then q[0] = 9: the write duplicates the shared block lazily
    out, stats = run_source("var p: [Int] = [1, 2] in var q: [Int] = p in q[0] = 9 in p[0] + q[0]")
    assert out == "10"
    assert stats.cow_copies == 1
    assert stats.retains >= 1


def test_unshared_mutation_stays_in_place():
    out, stats = run_source("var p: [Int] = [1, 2] in p[0] = 9 in p[0]")
    assert out == "9"
    assert stats.cow_copies == 0


# -- serialization ---------------------------------------------------------------


def test_layout_frozen_values():
    assert serialize_array_layout([42, 1337], 2, "little") == (1, 2, 4, bytes([42, 0, 57, 5]))
    assert serialize_array_layout([], 2, "little") == (1, 0, 0, b"")
    assert serialize_array_layout([1], 8, "little") == (1, 1, 8, bytes([1, 0, 0, 0, 0, 0, 0, 0]))
    assert serialize_array_layout([42, 1337], 2, "big") == (1, 2, 4, bytes([0, 42, 5, 57]))


def byte_oracle(values, size, order):
    # Independent re-derivation: two's complement by hand, byte at a time.
    out = []
    for v in values:
        u = v + (1 << (8 * size)) if v < 0 else v
        chunk = [(u >> (8 * i)) & 0xFF for i in range(size)]
        out.extend(chunk if order == "little" else chunk[::-1])
    return bytes(out)


def test_layout_random_arrays_against_byte_oracle():
    rng = random.Random(2026)
    for _ in range(100):
        size = rng.choice([1, 2, 4, 8])
        lo, hi = -(1 << (8 * size - 1)), (1 << (8 * size - 1)) - 1
        values = [rng.randint(lo, hi) for _ in range(rng.randint(0, 6))]
        order = rng.choice(["little", "big"])
        r, n, k, payload = serialize_array_layout(values, size, order)
        assert (r, n, k) == (1, len(values), len(values) * size)
        assert payload == byte_oracle(values, size, order)


def test_layout_rejects_misfit():
    with pytest.raises(ValueError):
        serialize_array_layout([128], 1, "little")
    with pytest.raises(ValueError):
        serialize_array_layout([-129], 1, "little")
    with pytest.raises(ValueError):
        serialize_array_layout([1], 2, "middle")


# -- formatting -------------------------------------------------------------------


def test_format_examples():
    out, _ = run_source(PAIR + "var p: Pair = Pair(4, 2) in p")
    assert out == "Pair(4, 2)"
    out, _ = run_source("var a: [Int] = [1, 2] in a")
    assert out == "[1, 2]"
    out, _ = run_source(PAIR + "let a: [Pair] = [Pair(4, 2), Pair(5, 3)] in a")
    assert out == "[Pair(4, 2), Pair(5, 3)]"
    out, _ = run_source("var f: () -> Int = () -> Int { 4 } in f")
    assert out == "<function>"
    out, _ = run_source("1.5 + 0.25")
    assert out == "1.75"


def test_format_floats_round_trip():
    assert format_value(0.1) == "0.1"
    assert format_value(2.0) == "2.0"
    assert format_value(float("inf")) == "inf"


# -- traps -----------------------------------------------------------------------


def trap_code(source, **kw):
    with pytest.raises(RuntimeTrap) as e:
        run_source(source, **kw)
    return e.value.code


def test_index_out_of_bounds():
    assert trap_code("var a: [Int] = [1, 2] in a[5]") == "IndexOutOfBounds"
    assert trap_code("var a: [Int] = [1, 2] in a[0 - 1]") == "IndexOutOfBounds"
    assert trap_code("var a: [Int] = [1] in a[1] = 0 in a") == "IndexOutOfBounds"


def test_division_by_zero_int_only():
    assert trap_code("var z: Int = 0 in 1 / z") == "DivisionByZero"
    assert trap_code("var z: Int = 0 in 1 % z") == "DivisionByZero"
    out, _ = run_source("var z: Float = 0.0 in 1.0 / z")
    assert out == "inf"
    out, _ = run_source("var z: Float = 0.0 in (0.0 - 1.0) / z")
    assert out == "-inf"
    out, _ = run_source("var z: Float = 0.0 in z / z")
    assert out == "nan"


def test_integer_overflow():
    assert trap_code("var b: Int = 9223372036854775807 in b + 1") == "IntegerOverflow"
    assert trap_code("var b: Int = 9223372036854775807 in 0 - b - 2") == "IntegerOverflow"
    assert trap_code("var b: Int = 4611686018427387904 in b * 2") == "IntegerOverflow"
    # INT_MIN / -1 is the remaining overflow corner
    assert (
        trap_code("var b: Int = 0 - 9223372036854775807 - 1 in var m: Int = 0 - 1 in b / m")
        == "IntegerOverflow"
    )


def test_truncating_division():
    out, _ = run_source("var a: Int = 0 - 7 in a / 2")
    assert out == "-3"
    out, _ = run_source("var a: Int = 0 - 7 in a % 2")
    assert out == "-1"
    out, _ = run_source("var a: Int = 7 in var b: Int = 0 - 2 in a % b")
    assert out == "1"


def test_trap_carries_position():
    with pytest.raises(RuntimeTrap) as e:
        run_source("var a: [Int] = [1] in\na[3]")
    rendered = e.value.render("var a: [Int] = [1] in\na[3]")
    assert rendered.startswith("2:1: trap[IndexOutOfBounds]")


# -- dynamic overlap ---------------------------------------------------------------


SWAP_ARR = (
    "struct U {} in "
    "let swap: (inout Int, inout Int) -> U = (a: inout Int, b: inout Int) -> U "
    "{ let t = a in a = b in b = t in U() } in "
)


def test_same_element_traps():
    src = SWAP_ARR + "var a: [Int] = [1, 2] in var i: Int = 0 in var j: Int = 0 in _ = swap(&a[i], &a[j]) in a"
    assert trap_code(src) == "OverlapViolation"


def test_distinct_elements_ok():
    src = SWAP_ARR + "var a: [Int] = [1, 2] in var i: Int = 0 in var j: Int = 1 in _ = swap(&a[i], &a[j]) in a"
    out, _ = run_source(src)
    assert out == "[2, 1]"


def test_containment_traps():
    src = (
        "struct U {} in "
        "let f: (inout [Int], inout Int) -> U = (a: inout [Int], b: inout Int) -> U { U() } in "
        "var m: [[Int]] = [[1, 2], [3, 4]] in var i: Int = 0 in "
        "_ = f(&m[i], &m[0][1]) in m"
    )
    assert trap_code(src) == "OverlapViolation"


def test_disjoint_rows_ok():
    src = (
        "struct U {} in "
        "let f: (inout [Int], inout Int) -> U = (a: inout [Int], b: inout Int) -> U { U() } in "
        "var m: [[Int]] = [[1, 2], [3, 4]] in var i: Int = 1 in "
        "_ = f(&m[i], &m[0][1]) in m"
    )
    out, _ = run_source(src)
    assert out == "[[1, 2], [3, 4]]"


def test_check_dynamic_overlap_unit():
    same = Location((("slot", 0, 3), ("elem", 7, 2)))
    sibling = Location((("slot", 0, 3), ("elem", 7, 1)))
    deeper = Location((("slot", 0, 3), ("elem", 7, 2), ("field", "fs")))
    check_dynamic_overlap(same, sibling)  # distinct elements: fine
    with pytest.raises(RuntimeTrap):
        check_dynamic_overlap(same, same)
    with pytest.raises(RuntimeTrap):
        check_dynamic_overlap(same, deeper)  # prefix containment
    check_dynamic_overlap(sibling, deeper)


# -- whole-run invariants -----------------------------------------------------------


def test_leak_freedom_on_corpus():
    for name, source in corpus_sources():
        try:
            ir = lower_source(source)
        except Exception:
            continue
        try:
            _, stats = execute(ir, cow=True)
        except RuntimeTrap:
            continue
        assert stats.allocs == stats.frees, name
        assert stats.retains == stats.releases, name


def test_refcount_audit_debug_mode():
    # the store-scan audit runs after every instruction in debug mode
    for name, source in corpus_sources():
        try:
            ir = lower_source(source)
        except Exception:
            continue
        try:
            execute(ir, cow=True, debug=True)
            execute(ir, cow=False, debug=True)
        except RuntimeTrap:
            continue


def test_refcount_audit_generated():
    for seed in range(40):
        ir = apply_move_optimization(
            lower_program(check_program(generate_program(GenConfig(seed, size_budget=35))))
        )
        try:
            execute(ir, cow=True, debug=True)
        except RuntimeTrap:
            pass


def test_cow_transparency_on_corpus():
    for name, source in corpus_sources():
        try:
            ir = lower_source(source)
        except Exception:
            continue
        try:
            on = execute(ir, cow=True)[0]
        except RuntimeTrap as t:
            on = t.code
        try:
            off = execute(ir, cow=False)[0]
        except RuntimeTrap as t:
            off = t.code
        assert on == off, name


# -- value independence ---------------------------------------------------------------


MUTATIONS = [
    "q[0] = 99",
    "q[1] = q[0] + 7",
    "q = [5, 6, 7]",
    "q[0] = q[1]",
]


@settings(deadline=None, max_examples=40)
@given(
    muts=st.lists(st.sampled_from(MUTATIONS), min_size=1, max_size=4),
    elems=st.lists(st.integers(-50, 50), min_size=2, max_size=5),
)
def test_value_independence_arrays(muts, elems):
    lit = "[" + ", ".join(f"0 - {-v}" if v < 0 else str(v) for v in elems) + "]"
    baseline, _ = run_source(f"var p: [Int] = {lit} in p")
    chain = " in ".join(muts)
    out, _ = run_source(f"var p: [Int] = {lit} in var q: [Int] = p in {chain} in p")
    assert out == baseline


def test_value_independence_structs():
    src = (
        PAIR
        + "var p: Pair = Pair(4, 2) in var q: Pair = p in q.sn = 8 in q.fs = 9 in p"
    )
    out, _ = run_source(src)
    assert out == "Pair(4, 2)"


def test_closure_value_independence():
    # copying a closure copies its environment; the copy counts alone
    src = (
        "var n: Int = 0 in "
        "var f: () -> Int = () -> Int { n = n + 1 in n } in "
        "var g: () -> Int = f in "
        "_ = f() in _ = f() in g() * 100 + f()"
    )
    out, _ = run_source(src)
    assert out == "103"


def test_closure_env_persists_across_calls():
    src = "var n: Int = 10 in var f: () -> Int = () -> Int { n = n + 1 in n } in _ = f() in f()"
    out, _ = run_source(src)
    assert out == "12"
    # and in every configuration
    for cow in (True, False):
        for opt in (True, False):
            assert run_source(src, cow=cow, move_opt=opt)[0] == "12"
