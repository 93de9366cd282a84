import math

import numpy as np
import pytest

import zsca


def test_stage_names_match_cli():
    assert zsca.stage_names() == [
        "build-graph", "train-heads", "train-gcn", "train-affordance", "train-mapper", "evaluate",
    ]


def test_make_split_against_sorted_counts():
    rng = np.random.default_rng(3)
    verbs = {f"v{i:02d}": int(c) for i, c in enumerate(rng.integers(10, 500, size=30))}
    nouns = {f"n{i:02d}": int(c) for i, c in enumerate(rng.integers(10, 500, size=20))}
    protect = {"v00", "v01"}
    s = zsca.make_split(verbs, nouns, protected_verbs=protect, unseen_fraction=0.25, min_count=10)

    pool = sorted((t for t in verbs if t not in protect), key=lambda t: (-verbs[t], t))
    want = sorted(pool[len(pool) - math.ceil(0.25 * len(pool)):])
    assert s["verbs_unseen"] == want
    assert protect <= set(s["verbs_seen"])
    assert len(s["nouns_unseen"]) == math.ceil(0.25 * 20)


def test_errors_carry_code_and_category():
    with pytest.raises(zsca.ZscaError) as info:
        zsca.make_split({"a": 20}, {"b": 20}, protected_verbs={"a"})
    assert info.value.code == "AllClassesProtected"
    assert info.value.category == "data"
    with pytest.raises(zsca.ZscaError) as info:
        zsca.canonical_config(overrides={"no.such.key": "1"})
    assert info.value.code == "UnknownConfigKey"
    assert info.value.category == "config"


def test_topk_matches_argmax():
    rng = np.random.default_rng(0)
    verb_seen = [True, True, False]
    noun_seen = [True, False, True, False]
    train = [(0, 0), (1, 2)]
    test = [(v, n) for v in range(3) for n in range(4)] * 2
    vs = rng.random((len(test), 3))
    ns = rng.random((len(test), 4))
    out = zsca.evaluate_scores(vs, ns, verb_seen, noun_seen, train, test, protocol="open", ks=[1])

    cands = out["candidate_pairs"]
    scores = out["scores"]
    assert scores.shape == (len(test), len(cands))
    for row, (v, n) in enumerate(test):
        assert scores[row] == pytest.approx([vs[row, cv] * ns[row, cn] for cv, cn in cands])
    hits = [cands[int(np.argmax(scores[i]))] == test[i] for i in range(len(test))]
    assert out["topk"][0] == pytest.approx(100.0 * np.mean(hits))
    assert 0.0 <= out["auc"][0] <= 100.0


def test_uniform_affordance_changes_nothing():
    rng = np.random.default_rng(1)
    test = [(v, n) for v in range(3) for n in range(3)]
    vs, ns = rng.random((9, 3)), rng.random((9, 3))
    args = (vs, ns, [True, True, False], [True, False, True], [(0, 0)], test)
    plain = zsca.evaluate_scores(*args)
    flat = zsca.evaluate_scores(*args, affordance="per_pair", affordance_values=np.full((3, 3), 0.5))
    assert plain["auc"] == flat["auc"]
    assert plain["topk"] == flat["topk"]


def test_synth_run_all_and_resume(tmp_path):
    cfg = zsca.make_synth(tmp_path / "data", seed=0)
    rows = zsca.run_all(cfg, tmp_path / "run", overrides={"protocol": "macro_open", "topk": "1"})
    auc = {(p, m, k): v for p, m, k, v in rows}
    assert auc[("macro_open", "auc", "1")] >= 10 * auc[("macro_open", "chance_auc", "1")]
    assert zsca.read_report(tmp_path / "run" / "report.tsv") == rows
    # everything matches, so resume skips the training stages
    assert not zsca.run_stage("train-heads", cfg, tmp_path / "run",
                              overrides={"protocol": "macro_open", "topk": "1"}, resume=True)
