import json

import pytest

from protolite.cli import main
from tests.conftest import program_path


def run_cli(capsys, *argv):
    code = main(list(argv))
    captured = capsys.readouterr()
    return code, captured.out, captured.err


def test_run_prints_value(capsys):
    code, out, _ = run_cli(capsys, "run", program_path("golden_sum.stl"))
    assert code == 0
    assert out.strip() == "84"


def test_run_runtime_error_exit_code(capsys):
    code, _, err = run_cli(capsys, "run", program_path("golden_raise_error.stl"))
    assert code == 1
    assert "DoesNotUnderstand" in err
    assert "protectedMethod" in err
    assert "__" not in err


def test_run_validation_failure_exit_code(capsys):
    with pytest.raises(SystemExit) as exc:
        run_cli(capsys, "run", program_path("narrowing_rejected.stl"))
    assert exc.value.code == 2
    err = capsys.readouterr().err
    assert "OVERRIDINGPUBLICMETHOD" in err


def test_run_missing_file_exit_code(capsys):
    with pytest.raises(SystemExit) as exc:
        run_cli(capsys, "run", "no/such/file.stl")
    assert exc.value.code == 3


def test_run_json_output(capsys):
    code, out, _ = run_cli(capsys, "run", "--json",
                           program_path("golden_call_on_b.stl"))
    assert code == 0
    payload = json.loads(out)
    assert payload["outcome"] == "value"
    assert payload["value"] == 42


def test_run_fuel_flag(capsys):
    code, _, err = run_cli(capsys, "run", "--fuel", "1",
                           program_path("golden_sum.stl"))
    assert code == 1
    assert "fuel exhausted" in err


def test_fuel_env_override(capsys, monkeypatch):
    monkeypatch.setenv("PROTOLITE_FUEL", "1")
    code, _, err = run_cli(capsys, "run", program_path("golden_sum.stl"))
    assert code == 1
    assert "fuel" in err
    # explicit flag beats the environment
    monkeypatch.setenv("PROTOLITE_FUEL", "1")
    code, out, _ = run_cli(capsys, "run", "--fuel", "100000",
                           program_path("golden_sum.stl"))
    assert code == 0
    assert out.strip() == "84"


def test_check_ok_and_violations(capsys):
    code, out, _ = run_cli(capsys, "check", program_path("golden_sum.stl"))
    assert code == 0
    assert out.strip() == "ok"
    code, out, _ = run_cli(capsys, "check",
                           program_path("narrowing_rejected.stl"))
    assert code == 2
    assert "OVERRIDINGPUBLICMETHOD" in out


def test_desugar_golden_fragments(capsys):
    code, out, _ = run_cli(capsys, "desugar", program_path("golden_sum.stl"))
    assert code == 0
    assert "__protectedMethod -> A#protectedMethod protected" in out
    assert "callProtected -> A#callProtected public shared" in out
    assert "self.__callProtected() + (new B).callProtected()" in out


def test_diff_seed_range(capsys):
    code, out, _ = run_cli(capsys, "diff", "--seeds", "0..19")
    assert code == 0
    assert out.strip() == "20/20 agree"


def test_diff_single_file(capsys):
    code, out, _ = run_cli(capsys, "diff", program_path("golden_sum.stl"))
    assert code == 0
    assert out.strip() == "1/1 agree"


def test_worst_case_and_no_protect_exclusive(capsys):
    with pytest.raises(SystemExit) as exc:
        main(["run", "--worst-case", "--no-protect",
              program_path("golden_sum.stl")])
    assert exc.value.code == 2


def test_stats_output(capsys):
    code, out, _ = run_cli(capsys, "stats", program_path("golden_sum.stl"))
    assert code == 0
    assert "probe 1 hits:" in out
    assert "probe 2 hits:" in out
    assert "probe 3 hits:" in out
    assert "misses:" in out
    assert "worst-case ratios" in out


def test_stats_json_schema(capsys):
    code, out, _ = run_cli(capsys, "stats", "--json",
                           program_path("golden_sum.stl"))
    assert code == 0
    payload = json.loads(out)
    cache = payload["cache"]
    assert set(cache) == {"probe1", "probe2", "probe3", "misses",
                          "distinctKeys", "ic"}
    assert set(cache["ic"]) == {"mono", "poly", "mega"}
    assert payload["memory"]["totalEntries"] == 11
    assert "worstCaseRatios" in payload


def test_bench_command_smoke(capsys):
    code, out, _ = run_cli(
        capsys, "bench", program_path("golden_sum.stl"),
        "--invocations", "2", "--iterations", "3", "--warmup", "1",
        "--repeat", "20")
    assert code == 0
    assert "[baseline] median" in out
    assert "overhead vs baseline" in out


def test_worst_case_run_same_result(capsys):
    code, out, _ = run_cli(capsys, "run", "--worst-case",
                           program_path("golden_sum.stl"))
    assert code == 0
    assert out.strip() == "84"


def test_no_protect_changes_visibility(capsys):
    # Without mangling, protected methods are plainly visible: the
    # object-send that must fail under protection now succeeds.
    code, out, _ = run_cli(capsys, "run", "--no-protect",
                           program_path("golden_protected_object_send.stl"))
    assert code == 0
    assert out.strip() == "11"


def test_run_renders_object_values(capsys, tmp_path):
    source = "class A extends Object { }\nmain { new A }\n"
    path = tmp_path / "object_result.stl"
    path.write_text(source)
    code, out, _ = run_cli(capsys, "run", str(path))
    assert code == 0
    assert out.strip() == "<A#1>"


def test_parse_error_exits_2(capsys, tmp_path):
    path = tmp_path / "broken.stl"
    path.write_text("class A extends { }\nmain { nil }\n")
    with pytest.raises(SystemExit) as exc:
        run_cli(capsys, "run", str(path))
    assert exc.value.code == 2
    assert "broken.stl:1" in capsys.readouterr().err
