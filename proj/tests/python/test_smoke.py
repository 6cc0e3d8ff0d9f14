import math

import pytest

import mutadelta as md


def test_import():
    assert hasattr(md, "Config")


def test_mutation_helpers():
    assert md.parse_mutation("A205D") == ("A", 205, "D")
    assert md.format_mutation("A", 205, "D") == "A205D"
    assert md.apply_mutation("ACDEF", "C2G") == "AGDEF"
    with pytest.raises(ValueError):
        md.parse_mutation("A1A")


def test_text_metrics():
    assert md.bleu("the cat sat", "the cat ran", n=2) == pytest.approx(
        57.735026918962575, abs=1e-9
    )
    scores = md.rouge_l("a b c", "a x c")
    assert scores["f1"] == pytest.approx(66.666666666666671, abs=1e-9)


def test_config_attributes():
    cfg = md.Config(steps=50, warmup=5)
    assert cfg.steps == 50
    cfg.batch = 3
    assert cfg.batch == 3
    assert cfg.to_dict()["batch"] == 3
    with pytest.raises(AttributeError):
        cfg.unknown_field = 1
    with pytest.raises(ValueError):
        md.Config(steps="many")
    with pytest.raises(ValueError):
        md.Config(steps=0).validate()


def test_corpus_round_trip(tmp_path):
    records_path = str(tmp_path / "records.jsonl")
    pairs_path = str(tmp_path / "pairs.jsonl")
    corpus = md.generate_corpus(
        seed=7,
        n_proteins=3,
        muts_per_protein=2,
        min_len=10,
        max_len=14,
        records_path=records_path,
        pairs_path=pairs_path,
    )
    assert len(corpus["records"]) == 6
    assert len(corpus["pairs"]) == 3
    stats = md.dataset_stats(records_path)
    assert stats["n_records"] == 6
    assert stats["n_proteins"] == 3


def test_training_and_inference(tmp_path):
    records_path = str(tmp_path / "records.jsonl")
    pairs_path = str(tmp_path / "pairs.jsonl")
    corpus = md.generate_corpus(
        seed=7,
        n_proteins=3,
        muts_per_protein=2,
        min_len=10,
        max_len=14,
        records_path=records_path,
        pairs_path=pairs_path,
    )
    cfg = md.Config(
        d_plm=16,
        d_llm=16,
        plm_layers=1,
        llm_layers=1,
        heads=2,
        k=2,
        max_protein_len=32,
        max_context_len=96,
        batch=2,
        steps=4,
        warmup=2,
        log_every=2,
        pairs=pairs_path,
        out=str(tmp_path / "pre"),
    )
    pre = md.pretrain(cfg)
    assert pre["final_step"] == 4
    assert math.isfinite(pre["final_loss"])

    cfg.pairs = ""
    cfg.records = records_path
    cfg.ckpt = pre["checkpoint"]
    cfg.out = str(tmp_path / "fine")
    fine = md.finetune(cfg)
    assert fine["final_step"] == 4

    model = md.Model(fine["checkpoint"])
    assert model.config.d_plm == 16

    record = corpus["records"][0]
    function_text, effect_text = model.explain(record["wt"], record["mutation"])
    assert isinstance(function_text, str)
    assert isinstance(effect_text, str)

    ranked = model.rank_mutations(record["wt"], record["effect"], top=5)
    assert len(ranked) == 5
    assert all(score <= ranked[0][1] for _, score in ranked)
    wt = record["wt"]
    for code, _ in ranked:
        pos = int(code[1:-1])
        assert wt[pos - 1] == code[0]
        assert code[-1] != code[0]

    report = model.evaluate(records_path)
    assert report["engineering"]["overall"]["count"] == 6
    assert 0.0 <= report["explanation"]["overall"]["metrics"]["rougeL_f"] <= 100.0


def test_optimize_and_cli(tmp_path):
    trace_path = str(tmp_path / "trace.csv")
    out = md.optimize(
        "ACDEFGHIKLMNPQRSTVWY", seed=3, beams=4, rounds=3, runs=2, trace_path=trace_path
    )
    assert len(out["traces"]) == 2
    assert all(len(t) == 3 for t in out["traces"])
    assert out["best_fitness"] >= out["wildtype_fitness"]
    header = open(trace_path).readline().strip()
    assert header == "run_id,round,best_fitness,mean_fitness,std_fitness"

    assert md.run_cli(["data", "gen", "--out", str(tmp_path / "d")]) == 0
    assert md.run_cli(["data", "stats", "--records", str(tmp_path / "d/records.jsonl")]) == 0
    assert md.run_cli(["nonsense"]) != 0
