import json
import subprocess
import sys

import pytest

import mvsl.cli as cli

from conftest import CORPUS, corpus_files


def run_cli(capsys, *argv):
    code = cli.main(list(argv))
    captured = capsys.readouterr()
    return code, captured.out, captured.err


@pytest.fixture()
def pair_file(tmp_path):
    f = tmp_path / "pair.mvs"
    f.write_text(
        "struct Pair { var fs: Int; var sn: Int } in var p: Pair = Pair(4, 2) in p\n"
    )
    return str(f)


@pytest.fixture()
def trap_file(tmp_path):
    f = tmp_path / "oob.mvs"
    f.write_text("var a: [Int] = [1, 2] in a[5]\n")
    return str(f)


@pytest.fixture()
def bad_file(tmp_path):
    f = tmp_path / "bad.mvs"
    f.write_text("let x: Int = 4 in x = 5 in x\n")
    return str(f)


# -- run ------------------------------------------------------------------------


def test_run_value_only_on_stdout(capsys, pair_file):
    code, out, err = run_cli(capsys, "run", pair_file)
    assert code == 0
    assert out == "Pair(4, 2)\n"
    assert err == ""


def test_run_stats_go_to_stderr(capsys, pair_file):
    code, out, err = run_cli(capsys, "run", pair_file, "--stats")
    assert code == 0
    assert out == "Pair(4, 2)\n"
    stats = json.loads(err)
    assert list(stats) == [
        "deep_copies",
        "retains",
        "releases",
        "moves",
        "cow_copies",
        "allocs",
        "frees",
    ]


def test_run_flag_combinations_same_value(capsys, pair_file):
    for flags in ([], ["--no-cow"], ["--no-move-opt"], ["--no-cow", "--no-move-opt"], ["--oracle"]):
        code, out, _ = run_cli(capsys, "run", pair_file, *flags)
        assert code == 0 and out == "Pair(4, 2)\n", flags


def test_run_trap_exit_2(capsys, trap_file):
    code, out, err = run_cli(capsys, "run", trap_file)
    assert code == 2
    assert out == ""
    assert "trap[IndexOutOfBounds]" in err
    assert err.startswith(trap_file + ":")


def test_run_type_error_exit_1(capsys, bad_file):
    code, out, err = run_cli(capsys, "run", bad_file)
    assert code == 1
    assert out == ""
    assert "error[ImmutableTarget]" in err


def test_run_syntax_error_exit_1(capsys, tmp_path):
    f = tmp_path / "syn.mvs"
    f.write_text("var = 4")
    code, _, err = run_cli(capsys, "run", str(f))
    assert code == 1 and "error[" in err


def test_dump_modes(capsys, pair_file):
    code, ast_out, _ = run_cli(capsys, "run", pair_file, "--dump=ast")
    assert code == 0 and "struct Pair" in ast_out
    code, ir_out, _ = run_cli(capsys, "run", pair_file, "--dump=ir")
    assert code == 0 and "routine @entry" in ir_out
    code, ty_out, _ = run_cli(capsys, "run", pair_file, "--dump=types")
    assert code == 0
    assert "p: Pair" in ty_out and "result: Pair" in ty_out


def test_dump_does_not_execute(capsys, trap_file):
    # a program that would trap still dumps cleanly
    code, out, _ = run_cli(capsys, "run", trap_file, "--dump=ir")
    assert code == 0 and "routine" in out


def test_oracle_ignores_stats(capsys, pair_file):
    code, out, err = run_cli(capsys, "run", pair_file, "--oracle", "--stats")
    assert code == 0 and out == "Pair(4, 2)\n"
    assert err == ""  # the eager interpreter keeps no counters


# -- check ----------------------------------------------------------------------


def test_check_ok(capsys, pair_file):
    code, out, _ = run_cli(capsys, "check", pair_file)
    assert code == 0 and out == "ok\n"


def test_check_reports_diagnostic(capsys, bad_file):
    code, out, err = run_cli(capsys, "check", bad_file)
    assert code == 1 and out == ""
    assert "error[ImmutableTarget]" in err


# -- diff -----------------------------------------------------------------------


def test_diff_file(capsys, pair_file):
    code, out, _ = run_cli(capsys, "diff", pair_file)
    assert code == 0
    report = json.loads(out)
    assert report["status"] == "PASS"
    assert len(report["results"]) == 5


def test_diff_seeds(capsys):
    code, out, _ = run_cli(capsys, "diff", "--seed=10", "--trials=4")
    assert code == 0
    lines = out.strip().splitlines()
    assert len(lines) == 4
    assert all(json.loads(l)["status"] == "PASS" for l in lines)


def test_diff_fail_exit_3(capsys, monkeypatch):
    monkeypatch.setattr(
        cli,
        "differential_seed_run",
        lambda seed: {"program": "0", "results": [], "status": "FAIL"},
    )
    code, out, _ = run_cli(capsys, "diff", "--seed=0", "--trials=2")
    assert code == 3
    assert all(json.loads(l)["status"] == "FAIL" for l in out.strip().splitlines())


def test_diff_type_error_exit_1(capsys, bad_file):
    code, _, err = run_cli(capsys, "diff", bad_file)
    assert code == 1 and "error[" in err


# -- usage errors ------------------------------------------------------------------


@pytest.mark.parametrize(
    "argv",
    [
        [],
        ["frobnicate"],
        ["run"],
        ["run", "nonexistent.mvs"],
        ["diff"],
        ["diff", "--trials=0"],
        ["run", "x.mvs", "--dump=tokens"],
        ["check"],
    ],
)
def test_usage_errors_exit_4(capsys, argv):
    code, _, err = run_cli(capsys, *argv)
    assert code == 4
    assert "usage" in err.lower() or "error" in err.lower()


# -- corpus golden ------------------------------------------------------------------


def test_corpus_golden(capsys):
    for f in corpus_files():
        expected = (CORPUS / f.name.replace(".mvs", ".expected")).read_text().strip()
        code, out, err = run_cli(capsys, "run", str(f))
        if expected.startswith("error["):
            assert code == 1, f.name
            assert expected in err, f.name
            assert out == ""
        elif expected.startswith("trap["):
            assert code == 2, f.name
            assert expected in err, f.name
            assert out == ""
        else:
            assert code == 0, f.name
            assert out == expected + "\n", f.name


def test_console_entry_point():
    # one end-to-end spawn through the installed script path
    proc = subprocess.run(
        [sys.executable, "-m", "mvsl", "run", str(CORPUS / "swap.mvs")],
        capture_output=True,
        text=True,
    )
    assert proc.returncode == 0
    assert proc.stdout == "Pair(2, 4)\n"
