"""End-to-end smoke tests for the python bindings."""

import json
from pathlib import Path

import pytest

import screenthreads as st

DATA = Path(__file__).resolve().parent.parent / "data"

METRICS = [
    "link_accuracy",
    "ari",
    "one_minus_vi",
    "shen_f1",
    "one_to_one",
    "exact_match_f1",
]


@pytest.fixture(scope="module")
def breakfast():
    return st.parse((DATA / "breakfast.txt").read_text(), "breakfast")


@pytest.fixture(scope="module")
def harbor():
    return st.parse((DATA / "harbor.txt").read_text(), "harbor")


def test_parse_reports_structure(breakfast):
    assert breakfast["title"] == "breakfast"
    assert breakfast["stats"]["scenes"] >= 1
    assert breakfast["stats"]["utterances"] >= breakfast["stats"]["dialogue_lines"]
    assert breakfast["canonical"].endswith("\n")
    assert breakfast["warnings"] == []


def test_parse_rejects_headerless_text():
    with pytest.raises(st.UnparsableDocument):
        st.parse("just prose\nno scene header\n", "nothing")
    assert issubclass(st.UnparsableDocument, st.Error)


def test_annotations_round_trip_matches_fixture():
    result = st.annotations_to_gold((DATA / "breakfast_gold.tsv").read_text())
    assert result["gold"] == (DATA / "breakfast_gold.jsonl").read_text()
    assert result["warnings"] == []


def test_gold_scores_perfectly_against_itself():
    gold = (DATA / "harbor_gold.jsonl").read_text()
    report = st.evaluate(gold, gold)
    for name in METRICS:
        assert report[name]["point"] == 100.0
        assert report[name]["lo"] is None


def test_baseline_predictions_evaluate(breakfast):
    gold = (DATA / "breakfast_gold.jsonl").read_text()
    pred = st.previous_baseline(breakfast["canonical"])
    report = st.evaluate(pred, gold)
    for name in METRICS:
        assert 0.0 <= report[name]["point"] <= 100.0


def test_evaluate_rejects_mismatched_scenes(breakfast):
    pred = st.previous_baseline(breakfast["canonical"])
    with pytest.raises(st.ScenesMismatch):
        st.evaluate(pred, (DATA / "harbor_gold.jsonl").read_text())


def test_training_is_deterministic(breakfast, harbor):
    kwargs = dict(
        train_corpus=[breakfast["canonical"]],
        train_gold=[(DATA / "breakfast_gold.jsonl").read_text()],
        dev_corpus=[harbor["canonical"]],
        dev_gold=[(DATA / "harbor_gold.jsonl").read_text()],
        epochs=3,
    )
    first = st.train(**kwargs)
    second = st.train(**kwargs)
    assert first["model"] == second["model"]
    assert len(first["log"]["epochs"]) == 3
    assert first["log"]["best_epoch"] in (1, 2, 3)
    assert all(e["dev_accuracy"] is not None for e in first["log"]["epochs"])


def test_predictions_form_valid_threads(breakfast, harbor):
    trained = st.train(
        train_corpus=[breakfast["canonical"]],
        train_gold=[(DATA / "breakfast_gold.jsonl").read_text()],
        epochs=2,
    )
    pred = st.predict(trained["model"], harbor["canonical"])

    scenes = {}
    for line in pred.splitlines():
        record = json.loads(line)
        scene = scenes.setdefault(
            record["scene_id"], {"order": [], "parent": {}, "labels": {}}
        )
        scene["order"].append(record["utt_id"])
        scene["parent"][record["utt_id"]] = record["parent_id"]
        scene["labels"][record["utt_id"]] = record["thread_label"]
    assert scenes

    for scene_id, scene in scenes.items():
        partition = st.links_to_partition(
            {"scene_id": scene_id, "order": scene["order"], "parent": scene["parent"]}
        )
        assert partition["assignment"] == scene["labels"]


def test_train_rejects_bad_architecture(breakfast):
    with pytest.raises(ValueError):
        st.train(
            train_corpus=[breakfast["canonical"]],
            train_gold=[(DATA / "breakfast_gold.jsonl").read_text()],
            architecture="three_hidden",
        )


def test_self_agreement_is_total():
    tsv = (DATA / "breakfast_gold.tsv").read_text()
    report = st.agreement(tsv, tsv)
    for view in ("a_as_reference", "b_as_reference", "average"):
        for name in METRICS:
            assert report[view][name]["point"] == 100.0


def test_era_analysis_matches_hand_computation(breakfast, harbor):
    # breakfast: 13 utterances over 4 threads; harbor: 11 over 4.
    buckets = st.analyze_era(
        corpus=[breakfast["canonical"], harbor["canonical"]],
        links=[
            (DATA / "breakfast_gold.jsonl").read_text(),
            (DATA / "harbor_gold.jsonl").read_text(),
        ],
        meta_csv=(DATA / "cli_meta.csv").read_text(),
        resamples=200,
    )
    assert len(buckets) == 1
    bucket = buckets[0]
    assert bucket["start_year"] == 1990
    assert bucket["mean_thread_length"] == pytest.approx(3.0)
    assert bucket["n_movies"] == 2
    assert bucket["lo"] <= 3.0 <= bucket["hi"]


def test_floor_analysis_matches_hand_computation(breakfast, harbor):
    report = st.analyze_floor(
        corpus=[breakfast["canonical"], harbor["canonical"]],
        links=[
            (DATA / "breakfast_gold.jsonl").read_text(),
            (DATA / "harbor_gold.jsonl").read_text(),
        ],
        meta_csv=(DATA / "cli_meta.csv").read_text(),
        resamples=200,
    )
    by_year = {r["year"]: r for r in report["by_year"]}
    # breakfast (1994): women start 2 of 3 gendered threads, speak 6 of 12
    # gendered lines.
    assert by_year[1994]["pct_threads_started_by_women"] == pytest.approx(200 / 3)
    assert by_year[1994]["pct_lines_by_women"] == pytest.approx(50.0)
    assert by_year[1994]["delta"] == pytest.approx(50 / 3)
    # harbor (1991): one of four thread starts, half the gendered lines.
    assert by_year[1991]["delta"] == pytest.approx(-25.0)
    assert report["pooled"]["delta_fraction"] == pytest.approx(
        report["pooled"]["delta_points"] / 100.0
    )
    assert report["warnings"] == []
