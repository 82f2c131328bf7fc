import json

import pytest

from bayesexact.cli import EXIT_INPUT, EXIT_NUMERIC, EXIT_OK, main

SMALL = "3 1 0\n2 2 1\n0 2 4\n"
STRATIFIED = "19 132\n11 52\n\n0 9\n6 97\n"


@pytest.fixture
def write(tmp_path):
    def _write(name, text):
        path = tmp_path / name
        path.write_text(text)
        return str(path)
    return _write


def _run(capsys, argv):
    code = main(argv)
    out = capsys.readouterr().out
    return code, (json.loads(out) if out else None)


def test_gamma_exact_report(capsys, write):
    code, rep = _run(capsys, ["test", "--test", "gamma-exact", "--seed", "1", write("t.txt", SMALL)])
    assert code == EXIT_OK
    assert rep["method"] == "exact-enumeration" and rep["p_value_se"] == 0
    assert 0 <= rep["p_value"] <= 1 and rep["qualifying_count"] >= 1
    assert rep["config"]["n_posterior"] == 100_000 and rep["config"]["prior"] == 0.5


def test_reports_identical_modulo_wall_clock(capsys, write):
    path = write("t.txt", SMALL)
    argv = ["test", "--test", "concordance", "--seed", "4", "--n-posterior", "500", "--n-null", "300", path]
    _, a = _run(capsys, argv)
    _, b = _run(capsys, argv)
    a.pop("wall_clock_seconds"), b.pop("wall_clock_seconds")
    assert a == b
    assert a["method"] == "mc-significance"


def test_empty_file_is_parse_error(capsys, write):
    code = main(["test", "--test", "gamma-exact", "--seed", "1", write("e.txt", "")])
    assert code == EXIT_INPUT
    assert "ParseError" in capsys.readouterr().err


def test_missing_file_and_bad_flags(capsys, tmp_path):
    assert main(["test", "--test", "gamma-exact", "--seed", "1", str(tmp_path / "nope")]) == EXIT_INPUT
    assert main(["test", "--test", "gamma-exact", "x"]) == EXIT_INPUT  # seed is required
    assert main(["test", "--test", "gamma-exact", "--seed", "1", "--prior", "0", "x"]) == EXIT_INPUT


def test_unsupported_combinations(capsys, write):
    strat = write("s.txt", STRATIFIED)
    assert main(["test", "--test", "simpson", "--mode", "mc", "--seed", "1", strat]) == EXIT_INPUT
    assert main(["test", "--test", "gamma-exact", "--seed", "1", strat]) == EXIT_INPUT
    job = write("j.txt", "1 3 10 6\n2 3 10 7\n1 6 14 12\n0 1 9 11\n")
    code = main(["test", "--test", "positive-dependence", "--mode", "exact", "--seed", "1", job])
    assert code == EXIT_INPUT
    assert "UnsupportedCombination" in capsys.readouterr().err


def test_exact_posterior_on_small_space(capsys, write):
    code, rep = _run(capsys, ["test", "--test", "concordance", "--mode", "exact", "--seed", "1",
                              "--n-posterior", "200", write("t.txt", "2 1\n1 2\n")])
    assert code == EXIT_OK and rep["method"] == "exact-enumeration"


def test_simpson_and_region(capsys, write):
    strat = write("s.txt", STRATIFIED)
    code, rep = _run(capsys, ["test", "--test", "simpson-ratio", "--seed", "2", "--n-posterior", "300", strat])
    assert code == EXIT_OK and rep["details"]["space_size"] == 217
    code, rep = _run(capsys, ["region", "--seed", "2", "--n-posterior", "300", "--alpha", "0.2", strat])
    assert code == EXIT_OK and rep["region_null_probability"] <= 0.2 + 1e-12


def test_enumerate(capsys, write):
    code, rep = _run(capsys, ["enumerate", write("s.txt", STRATIFIED)])
    assert code == EXIT_OK and rep["n_points"] == 217


def test_power_with_config_and_numeric_error(capsys, write, tmp_path):
    cfg = write("c.json", json.dumps({"rows": [4, 5], "cols": [3, 6], "alternative": [0.1, 0.3, 0.2, 0.4],
                                      "n_proposals": 500, "n_resample": 50, "n_null_reference": 50,
                                      "n_posterior": 50}))
    out = tmp_path / "r.json"
    assert main(["power", "--seed", "3", "--config", cfg, "--output", str(out)]) == EXIT_OK
    rep = json.loads(out.read_text())
    assert set(rep["arms"]) == {"gamma_hat", "posterior_concordance"}
    assert rep["study"]["n_proposals"] == 500
    bad = write("b.json", json.dumps({"rows": [1, 1], "cols": [1, 1], "alternative": [1, 0, 0, 0],
                                      "n_proposals": 50, "n_resample": 5, "n_null_reference": 5,
                                      "n_posterior": 5}))
    assert main(["power", "--seed", "3", "--config", bad]) == EXIT_NUMERIC
    assert main(["power", "--seed", "3", "--config", write("u.json", '{"foo": 1}')]) == EXIT_INPUT


def test_demo(capsys):
    code, rep = _run(capsys, ["demo", "--seed", "1", "--n-mc", "20000"])
    assert code == EXIT_OK
    assert abs(rep["bayes_power"] - rep["bayes_power_exact"]) < 0.02


def test_bad_config_value(capsys, write):
    cfg = write("v.json", json.dumps({"n_proposals": "many"}))
    assert main(["power", "--seed", "1", "--config", cfg]) == EXIT_INPUT
    assert "ParseError" in capsys.readouterr().err
