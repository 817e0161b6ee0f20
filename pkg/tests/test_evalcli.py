"""Experiment runner, judge parsing, purge, and report tabulation."""

from __future__ import annotations

import json

import pytest

from conftest import mock_endpoint
from semgate import evalcli
from semgate.backends.client import ChatClient
from semgate.core.config import parse_config
from semgate.core.store import SessionStore
from semgate.core.types import SessionQuadruple
from semgate.errors import JobAbortedError, SemgateError


def eval_config(tmp_path, cloud="mock:arith_solver", encoder="mock:context_swap",
                decoder="mock:context_swap_inverse"):
    return parse_config(
        {
            "endpoints": {
                "cloud": {"base_url": cloud},
                "encoder": {"base_url": encoder},
                "decoder": {"base_url": decoder},
                "judge": {"base_url": "mock:judge_const"},
            },
            "store": {"path": str(tmp_path / "sessions.jsonl")},
        },
        base_dir=tmp_path,
    )


class TestRunExperiment:
    def test_utility_mode_mock_corpus_accuracy_one(self, tmp_path, corpus_file):
        result = evalcli.run_experiment(
            eval_config(tmp_path), corpus_file, "utility", task="math",
            client=ChatClient(),
        )
        assert result.accuracy_report.accuracy == 1.0
        assert result.n_failed == 0
        assert result.to_dict()["accuracy"]["n"] == 100

    def test_privacy_mode_below_one_with_numeral_overlap(self, tmp_path, corpus_file):
        result = evalcli.run_experiment(
            eval_config(tmp_path), corpus_file, "privacy", client=ChatClient(),
        )
        agg = result.metric_report.aggregates
        assert 0.0 < agg["rouge_1"] < 1.0
        assert result.metric_report.direction == "lower_better"

    def test_experience_mode_identity_mocks_collapse_to_utility(self, tmp_path, corpus_file):
        # Identity encoder (echo) and identity decoder (response extraction;
        # the inverse table is a no-op on vocabulary-free answers): the user
        # sees exactly the cloud answer, which equals the label, so the
        # experience scores collapse to the utility path's perfect score.
        config = eval_config(tmp_path, encoder="mock:echo",
                             decoder="mock:context_swap_inverse")
        result = evalcli.run_experiment(config, corpus_file, "experience",
                                        client=ChatClient())
        agg = result.metric_report.aggregates
        assert agg["rouge_1"] == pytest.approx(1.0)
        assert agg["rouge_l"] == pytest.approx(1.0)
        # labels tokenize to a single numeral, so only order-1 BLEU is meaningful
        assert agg["bleu_1"] == pytest.approx(1.0)
        utility = evalcli.run_experiment(
            eval_config(tmp_path / "u", encoder="mock:echo",
                        decoder="mock:context_swap_inverse"),
            corpus_file, "utility", client=ChatClient(),
        )
        assert utility.accuracy_report.accuracy == 1.0

    def test_experience_mode_full_stack_restores_labels(self, tmp_path, corpus_file):
        result = evalcli.run_experiment(
            eval_config(tmp_path), corpus_file, "experience", client=ChatClient(),
        )
        assert result.metric_report.aggregates["rouge_1"] == pytest.approx(1.0)

    def test_report_determinism(self, tmp_path, corpus_file):
        paths = []
        for run in range(2):
            out = tmp_path / f"r{run}.json"
            result = evalcli.run_experiment(
                eval_config(tmp_path / f"store{run}"), corpus_file, "privacy",
                client=ChatClient(),
            )
            evalcli.write_report(result.to_dict(), out)
            paths.append(out)
        assert paths[0].read_bytes() == paths[1].read_bytes()

    def test_missing_labels_rejected_for_utility(self, tmp_path):
        data = tmp_path / "d.jsonl"
        data.write_text('{"question": "how many?"}\n', "utf-8")
        with pytest.raises(SemgateError):
            evalcli.run_experiment(eval_config(tmp_path), data, "utility",
                                   client=ChatClient())

    def test_unknown_mode_rejected(self, tmp_path, corpus_file):
        with pytest.raises(SemgateError):
            evalcli.run_experiment(eval_config(tmp_path), corpus_file, "stealth",
                                   client=ChatClient())


class TestJudge:
    def test_constant_judge_aggregates_five(self, tmp_path):
        config = eval_config(tmp_path)
        pairs = [(f"p{i}", f"clinic text {i}", f"depot text {i}") for i in range(10)]
        report = evalcli.judge(pairs, mock_endpoint("judge_const"), config,
                               client=ChatClient())
        assert report.unscored == 0
        assert len(report.rows) == 10
        for dim in evalcli.DEFAULT_JUDGE_DIMENSIONS:
            assert report.means[dim] == 5.0

    def test_prose_judge_marked_unscored_after_retry(self, tmp_path, monkeypatch):
        from semgate.backends import mock as mock_mod

        calls = []

        def prose(content):
            calls.append(1)
            return "This transformation is quite lovely, well done."

        monkeypatch.setitem(mock_mod._RULES, "prose_judge", prose)
        config = eval_config(tmp_path)
        report = evalcli.judge([("p0", "a", "b")], mock_endpoint("prose_judge"), config,
                               client=ChatClient())
        assert report.unscored == 1
        assert len(calls) == 2  # retried once
        assert report.rows[0]["scores"] is None

    def test_labeled_score_line_parsed(self):
        text = "SCORES: logical_structure=4 privacy_coverage=5 logical_reasonableness=3"
        assert evalcli.parse_judge_scores(text) == {
            "logical_structure": 4,
            "privacy_coverage": 5,
            "logical_reasonableness": 3,
        }

    def test_slash_format_parsed_in_dimension_order(self):
        assert evalcli.parse_judge_scores("5/5/5") == {
            "logical_structure": 5,
            "privacy_coverage": 5,
            "logical_reasonableness": 5,
        }

    def test_judge_unavailable_aborts_with_partial(self, tmp_path):
        from semgate.errors import BackendUnavailableError

        class DeadJudge(ChatClient):
            def complete(self, ep, req):
                raise BackendUnavailableError(ep.base_url, 1, "judge down")

        config = eval_config(tmp_path)
        with pytest.raises(JobAbortedError):
            evalcli.judge([("p0", "a", "b")], mock_endpoint("judge_const"), config,
                          client=DeadJudge())

    def test_shape_three_dims_ten_rows(self, tmp_path):
        config = eval_config(tmp_path)
        pairs = [(f"p{i}", "x", "y") for i in range(10)]
        report = evalcli.judge(pairs, mock_endpoint("judge_const"), config,
                               client=ChatClient()).to_dict()
        assert len(report["means"]) == 3
        assert len(report["rows"]) == 10


class TestPurge:
    def _fill(self, tmp_path, n=5):
        store = SessionStore(tmp_path / "s.jsonl")
        for i in range(n):
            store.put(SessionQuadruple(
                session_id=f"s{i}", t_o=f"text {i}", created_at=1000 + i,
            ))
        return store

    def test_purge_all(self, tmp_path):
        store = self._fill(tmp_path, 5)
        assert evalcli.purge_sessions(store, older_than_ms=None) == 5
        assert len(store) == 0

    def test_purge_older_than_zero_removes_all(self, tmp_path):
        store = self._fill(tmp_path, 4)
        assert evalcli.purge_sessions(store, older_than_ms=0) == 4

    def test_purge_empty_store(self, tmp_path):
        store = SessionStore(tmp_path / "s.jsonl")
        assert evalcli.purge_sessions(store, older_than_ms=None) == 0

    def test_parse_duration(self):
        assert evalcli.parse_duration_ms("0") == 0
        assert evalcli.parse_duration_ms("90s") == 90_000
        assert evalcli.parse_duration_ms("15m") == 900_000
        assert evalcli.parse_duration_ms("24h") == 86_400_000
        assert evalcli.parse_duration_ms("7d") == 604_800_000
        with pytest.raises(SemgateError):
            evalcli.parse_duration_ms("next tuesday")


class TestReports:
    def test_direction_tags_in_report_json(self, tmp_path, corpus_file):
        result = evalcli.run_experiment(
            eval_config(tmp_path), corpus_file, "privacy", client=ChatClient(),
        )
        data = result.to_dict()
        assert data["similarity"]["direction"] == "lower_better"
        result2 = evalcli.run_experiment(
            eval_config(tmp_path / "x"), corpus_file, "experience", client=ChatClient(),
        )
        assert result2.to_dict()["similarity"]["direction"] == "higher_better"

    def test_merge_reports_side_by_side(self, tmp_path):
        a = {"name": "ours", "mode": "privacy",
             "similarity": {"aggregates": {"bleu_avg": 0.2, "rouge_1": 0.5}}}
        b = {"name": "baseline-x", "mode": "privacy",
             "similarity": {"aggregates": {"bleu_avg": 0.1, "rouge_1": 0.4}}}
        pa, pb = tmp_path / "a.json", tmp_path / "b.json"
        pa.write_text(json.dumps(a))
        pb.write_text(json.dumps(b))
        table = evalcli.merge_reports([pa, pb])
        assert "ours" in table and "baseline-x" in table
        assert "0.2000" in table and "0.4000" in table

    def test_format_table_alignment(self):
        rows = [{"method": "a", "score": 0.5}, {"method": "longer-name", "score": 1.0}]
        table = evalcli.format_table(rows, ["method", "score"])
        lines = table.splitlines()
        assert len({len(l) for l in lines}) <= 2  # header rule + aligned rows
