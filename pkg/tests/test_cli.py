import io
import json

import pandas as pd
import pytest
from index import main

from main import RunConfig
from utils.data import write_eval_set

FAST = ["--perms", "100"]


@pytest.fixture()
def self_dir(tmp_path, self_eval_set):
    directory = tmp_path / "self"
    write_eval_set(self_eval_set, directory)
    return str(directory)


def _run(capsys, argv):
    code = main(argv)
    captured = capsys.readouterr()
    return code, captured.out, captured.err


def _error(err: str) -> dict:
    return json.loads(err.strip().splitlines()[-1])


class TestScore:
    def test_copy_of_humans_on_top(self, capsys, self_dir):
        code, out, _ = _run(capsys, ["score", "--evalset", self_dir, "--format", "json", *FAST])
        assert code == 0
        report = json.loads(out)
        assert report["meta"]["command"] == "score"
        assert report["meta"]["evalset"] == "self"
        assert report["meta"]["perms"] == 100
        assert report["scores"][0]["metric"] == "human_copy"
        assert report["scores"][0]["spa"] == 1.0

    def test_meta_both(self, capsys, evalset_dir):
        code, out, _ = _run(capsys, ["score", "--evalset", str(evalset_dir), "--meta", "both", *FAST])
        assert code == 0
        assert "# seed=0\n" in out
        table = pd.read_csv(io.StringIO(out), sep="\t", comment="#")
        assert list(table.columns) == ["metric", "spa", "pa", "tau"]
        assert len(table) == 3
        for _, row in table.iterrows():
            assert row["tau"] == pytest.approx(2 * row["pa"] - 1, abs=1e-12)

    def test_meta_pa_only(self, capsys, evalset_dir):
        _, out, _ = _run(capsys, ["score", "--evalset", str(evalset_dir), "--meta", "pa", "--format", "json", *FAST])
        report = json.loads(out)
        assert set(report["scores"][0]) == {"metric", "pa", "tau"}
        assert report["distinct_pa"] <= report["max_distinct_pa"]

    def test_reproducible(self, capsys, evalset_dir):
        argv = ["score", "--evalset", str(evalset_dir), "--breakdown", *FAST]
        _, first, _ = _run(capsys, argv)
        _, second, _ = _run(capsys, [*argv, "--threads", "3"])
        assert first == second

    def test_breakdown_file(self, capsys, evalset_dir, tmp_path):
        output = tmp_path / "scores.tsv"
        code, out, _ = _run(
            capsys, ["score", "--evalset", str(evalset_dir), "--breakdown", "--output", str(output), *FAST]
        )
        assert code == 0
        assert out == ""
        breakdown = pd.read_csv(f"{output}.breakdown.csv", comment="#")
        assert list(breakdown.columns) == ["metric", "system_i", "system_j", "p_h", "p_m", "spa_term", "pa_term"]
        # 3 metrics x C(6, 2) pairs
        assert len(breakdown) == 45
        scores = pd.read_csv(output, sep="\t", comment="#")
        for metric, rows in breakdown.groupby("metric"):
            assert rows["spa_term"].mean() == pytest.approx(scores.set_index("metric").loc[metric, "spa"])


class TestCompare:
    def test_duplicated_metric(self, capsys, tmp_path, small_eval_set):
        from utils.data import EvalSet

        metric = small_eval_set.metric("metric00")
        directory = tmp_path / "dup"
        write_eval_set(EvalSet("dup", small_eval_set.human, {"a": metric, "a_copy": metric}), directory)
        code, out, _ = _run(
            capsys,
            ["compare", "--evalset", str(directory), "--meta", "spa", "--resamples", "50", "--format", "json", *FAST],
        )
        assert code == 0
        report = json.loads(out)
        assert report["p_values_spa"][0] == {"metric": "a", "a": 1.0, "a_copy": 0.5}
        assert report["n_clusters_spa"] == 1
        assert report["n_significant_spa"] == 0
        assert report["max_comparisons"] == 1
        assert [row["cluster"] for row in report["ranking"]] == [1, 1]

    def test_tsv_sections(self, capsys, evalset_dir):
        code, out, _ = _run(capsys, ["compare", "--evalset", str(evalset_dir), "--resamples", "20", *FAST])
        assert code == 0
        for section in ("# [ranking]", "# [p_values_spa]", "# [p_values_pa]"):
            assert section in out


class TestRobustnessCommands:
    def test_stability_full_set(self, capsys, evalset_dir):
        code, out, _ = _run(
            capsys,
            ["stability", "--evalset", str(evalset_dir), "--meta", "spa", "--k", "4", "6", "--trials", "10", *FAST],
        )
        assert code == 0
        table = pd.read_csv(io.StringIO(out), comment="#")
        assert list(table["systems_kept"]) == [4, 6]
        assert (table[table["systems_kept"] == 6]["mean_pearson_r"] == 1.0).all()

    def test_ci_rows(self, capsys, self_dir):
        argv = ["ci", "--evalset", self_dir, "--metrics", "human_copy", "--sample-sizes", "10", "20", "30"]
        code, out, _ = _run(capsys, [*argv, "--trials", "100", "--perms", "50"])
        assert code == 0
        table = pd.read_csv(io.StringIO(out), comment="#")
        assert len(table) == 3 * 2
        assert ((table["lower"] <= table["point"]) & (table["point"] <= table["upper"])).all()


class TestChecks:
    def test_oracle_check(self, capsys):
        code, out, _ = _run(capsys, ["oracle-check", "--instances", "5", "--format", "json"])
        assert code == 0
        report = json.loads(out)
        assert report["n_pairs"] == 30
        assert report["n_outside"] == 0
        assert report["meta"]["perms"] == 4096

    def test_oracle_check_too_many_segments(self, capsys, evalset_dir):
        code, _, err = _run(capsys, ["oracle-check", "--evalset", str(evalset_dir)])
        assert code == 1
        assert "at most" in _error(err)["message"]

    def test_benchmark(self, capsys):
        code, out, _ = _run(
            capsys, ["benchmark", "--systems", "4", "--segments", "50", "--perms", "100", "--format", "json"]
        )
        assert code == 0
        report = json.loads(out)
        assert [row["engine"] for row in report["timings"]] == ["cached", "naive"]
        assert report["speedup"] > 0


class TestErrors:
    def test_missing_evalset(self, capsys, tmp_path):
        code, _, err = _run(capsys, ["score", "--evalset", str(tmp_path / "nope")])
        assert code == 1
        payload = _error(err)
        assert payload["error"] == "EvalDataError"
        assert payload["file"].endswith("nope")

    def test_invalid_utf8(self, capsys, evalset_dir):
        humans = evalset_dir / "humans.tsv"
        humans.write_bytes(humans.read_bytes() + b"\xff\n")
        code, _, err = _run(capsys, ["score", "--evalset", str(evalset_dir), *FAST])
        assert code == 1
        payload = _error(err)
        assert payload["error"] == "EvalDataError"
        assert payload["file"] == str(humans)
        assert "UTF-8" in payload["message"]

    def test_bad_flag_value(self, capsys, evalset_dir):
        code, _, err = _run(capsys, ["score", "--evalset", str(evalset_dir), "--perms", "0"])
        assert code == 1
        assert "--perms" in _error(err)["message"]

    def test_usage_error(self, capsys):
        with pytest.raises(SystemExit) as e:
            main(["score", "--evalset", "x", "--meta", "tau"])
        assert e.value.code == 2

    @pytest.mark.parametrize(
        "kwargs",
        [{"alpha": 0.0}, {"alpha": 1.0}, {"trials": 0}, {"format": "xml"}, {"meta": "tau"}, {"command": "plot"}],
    )
    def test_run_config(self, kwargs):
        with pytest.raises(ValueError):
            RunConfig(**{"command": "score", "evalset": "x", **kwargs})

    def test_run_config_defaults(self):
        assert RunConfig("stability", "x").format == "csv"
        assert RunConfig("score", "x").format == "tsv"
        assert RunConfig("score", "x", meta="both").metas == ("spa", "pa")
        with pytest.raises(ValueError, match="--evalset"):
            RunConfig("score")
