import pytest

from mvsl import (
    GenConfig,
    RuntimeTrap,
    check_program,
    differential_run,
    differential_seed_run,
    execute,
    generate_program,
    interpret_eager,
    parse_source,
    pretty_program,
)
from mvsl.ast import IntLit
from mvsl.ir import apply_move_optimization, lower_program

from conftest import corpus_sources

PAIR = "struct Pair { var fs: Int; var sn: Int } in "


def oracle(source):
    return interpret_eager(check_program(parse_source(source)))


# -- the eager interpreter ----------------------------------------------------


def test_copy_listing():
    assert oracle(PAIR + "var p: Pair = Pair(4, 2) in var q: Pair = p in q.sn = 8 in p") == "Pair(4, 2)"


def test_swap_listing():
    src = (
        PAIR + "struct U {} in "
        "let swap: (inout Int, inout Int) -> U = (a: inout Int, b: inout Int) -> U "
        "{ let tmp = a in a = b in b = tmp in U() } in "
        "var p = Pair(4, 2) in _ = swap(&p.fs, &p.sn) in p"
    )
    assert oracle(src) == "Pair(2, 4)"


def test_oracle_traps_match_vm_trap_set():
    with pytest.raises(RuntimeTrap) as e:
        oracle("var a: [Int] = [1] in a[5]")
    assert e.value.code == "IndexOutOfBounds"
    with pytest.raises(RuntimeTrap) as e:
        oracle("var z: Int = 0 in 1 / z")
    assert e.value.code == "DivisionByZero"


def test_oracle_enforces_overlap():
    src = (
        "struct U {} in "
        "let swap: (inout Int, inout Int) -> U = (a: inout Int, b: inout Int) -> U "
        "{ let t = a in a = b in b = t in U() } in "
        "var a: [Int] = [1, 2] in var i: Int = 0 in var j: Int = 0 in "
        "_ = swap(&a[i], &a[j]) in a"
    )
    with pytest.raises(RuntimeTrap) as e:
        oracle(src)
    assert e.value.code == "OverlapViolation"


def test_oracle_closure_persistence():
    src = "var n: Int = 10 in var f: () -> Int = () -> Int { n = n + 1 in n } in _ = f() in f()"
    assert oracle(src) == "12"


# -- the generator ------------------------------------------------------------


def test_budget_one_is_a_literal():
    p = generate_program(GenConfig(0, size_budget=1))
    assert p.structs == []
    assert isinstance(p.entry, IntLit)


def test_determinism():
    for seed in (0, 3, 77, 4242):
        cfg = GenConfig(seed, size_budget=50)
        assert pretty_program(generate_program(cfg)) == pretty_program(generate_program(cfg))


def test_distinct_seeds_differ():
    texts = {pretty_program(generate_program(GenConfig(s, size_budget=50))) for s in range(30)}
    assert len(texts) > 25


def test_generated_programs_type_check():
    for seed in range(300):
        check_program(generate_program(GenConfig(seed, size_budget=50)))


def test_generator_exercises_language_features():
    # Inspect a window of seeds for coverage of the constructs the
    # differential harness is supposed to stress.
    winners = {"closure": 0, "inout": 0, "struct": 0, "array_write": 0, "cond": 0}
    for seed in range(60):
        text = pretty_program(generate_program(GenConfig(seed, size_budget=50)))
        winners["closure"] += "->" in text
        winners["inout"] += "&" in text
        winners["struct"] += "struct" in text
        winners["array_write"] += "] =" in text
        winners["cond"] += "if " in text
    for feature, count in winners.items():
        assert count >= 5, (feature, count)


def test_flag_gates():
    for seed in range(40):
        # inout helpers are function values too, so both gates must be
        # off before arrows disappear entirely
        plain = pretty_program(
            generate_program(
                GenConfig(seed, 40, enable_closures=False, enable_inout=False)
            )
        )
        assert "->" not in plain and "&" not in plain
        no_inout = pretty_program(generate_program(GenConfig(seed, 40, enable_inout=False)))
        assert "&" not in no_inout
        bare = pretty_program(generate_program(GenConfig(seed, 40, struct_count=0)))
        assert "struct" not in bare


# -- differential harness -------------------------------------------------------


def test_report_shape():
    r = differential_seed_run(5)
    assert r["status"] == "PASS"
    assert [x["config"] for x in r["results"]] == [
        "oracle",
        "vm cow=off move_opt=off",
        "vm cow=on move_opt=off",
        "vm cow=off move_opt=on",
        "vm cow=on move_opt=on",
    ]
    assert r["results"][0]["stats"] is None
    for row in r["results"][1:]:
        if row["trap"] is None:
            assert set(row["stats"]) == {
                "deep_copies",
                "retains",
                "releases",
                "moves",
                "cow_copies",
                "allocs",
                "frees",
            }


def test_corpus_differential():
    for name, source in corpus_sources():
        try:
            program = parse_source(source)
            check_program(program)
        except Exception:
            continue
        assert differential_run(program)["status"] == "PASS", name


def test_trap_parity():
    r = differential_run(parse_source("var a: [Int] = [1] in a[5]"))
    assert r["status"] == "PASS"
    assert all(row["trap"] == "IndexOutOfBounds" for row in r["results"])


def test_seed_sample_passes():
    for seed in range(120):
        assert differential_seed_run(seed)["status"] == "PASS", seed


def run_stats(tp, cow, opt):
    ir = lower_program(tp)
    if opt:
        ir = apply_move_optimization(ir)
    try:
        return execute(ir, cow=cow)[1]
    except RuntimeTrap:
        return None


def test_optimization_monotonicity():
    for seed in range(120):
        tp = check_program(generate_program(GenConfig(seed, size_budget=50)))
        for cow in (False, True):
            with_opt = run_stats(tp, cow, True)
            without = run_stats(tp, cow, False)
            if with_opt is None or without is None:
                continue
            assert with_opt.deep_copies <= without.deep_copies, seed


def test_cow_laziness():
    for seed in range(120):
        tp = check_program(generate_program(GenConfig(seed, size_budget=50)))
        stats = run_stats(tp, True, True)
        if stats is not None:
            assert stats.cow_copies <= stats.retains, seed
