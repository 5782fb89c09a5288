import csv
import json

import numpy as np
import pytest

from abeclip import synthetic
from abeclip.bundle import (
    write_concept_pool,
    write_image_bundle,
    write_phrase_table,
    write_text_bundle,
)
from abeclip.cli import main
from conftest import TRACE_EXPECTED


@pytest.fixture
def trace_dataset(tmp_path, trace_fixture):
    image, text, structure, pool, table, _ = trace_fixture
    write_image_bundle(tmp_path / "images", [image], 2)
    write_text_bundle(tmp_path / "texts", [text], 2)
    write_concept_pool(tmp_path / "pool", pool)
    write_phrase_table(tmp_path / "table", table, 2)
    pairs_path = tmp_path / "pairs.jsonl"
    record = {
        "caption_id": structure.caption_id,
        "caption": structure.caption,
        "pairs": [
            {
                "attribute": p.attribute,
                "object": p.object,
                "attr_char_span": list(p.attr_char_span),
                "obj_char_span": list(p.obj_char_span),
            }
            for p in structure.pairs
        ],
    }
    pairs_path.write_text(json.dumps(record) + "\n")
    return tmp_path


def trace_args(root, *extra):
    return [
        "--images", str(root / "images"),
        "--texts", str(root / "texts"),
        "--pool", str(root / "pool"),
        "--table", str(root / "table"),
        "--pairs", str(root / "pairs.jsonl"),
        "--k", "1",
        "--omega", "0.3",
        "--p-neighbors", "2",
        *extra,
    ]


@pytest.fixture
def synthetic_dataset(tmp_path):
    return synthetic.generate(tmp_path / "synth", n_cases=12, seed=7)


def synth_args(paths, *extra):
    return [
        "--images", str(paths.images),
        "--texts", str(paths.texts),
        "--pool", str(paths.pool),
        "--table", str(paths.table),
        "--pairs", str(paths.pairs),
        "--cases", str(paths.cases),
        *extra,
    ]


class TestScore:
    def test_matches_hand_trace_through_files(self, trace_dataset, capsys):
        code = main(["score", "--image-id", "img", "--text-id", "txt", *trace_args(trace_dataset)])
        assert code == 0
        report = json.loads(capsys.readouterr().out)
        # float32 storage rounds the inputs, so compare at bundle precision
        for name, expected in TRACE_EXPECTED.items():
            assert report[name] == pytest.approx(expected, abs=1e-6), name

    def test_omega_one_final_equals_global(self, trace_dataset, capsys):
        code = main(
            ["score", "--image-id", "img", "--text-id", "txt",
             *trace_args(trace_dataset), "--omega", "1.0"]
        )
        assert code == 0
        report = json.loads(capsys.readouterr().out)
        assert report["s_final"] == report["s_global"]

    def test_missing_phrase_entries_exit_3(self, trace_dataset, capsys):
        # empty the phrase table
        write_phrase_table(trace_dataset / "table2", __import__("abeclip").PhraseEmbeddingTable({}), 2)
        args = trace_args(trace_dataset)
        args[args.index(str(trace_dataset / "table"))] = str(trace_dataset / "table2")
        code = main(["score", "--image-id", "img", "--text-id", "txt", *args])
        assert code == 3
        out = capsys.readouterr().out
        lines = [json.loads(l) for l in out.splitlines() if l.strip()]
        assert {"attribute": "red", "object": "cube"} in lines

    def test_config_error_exit_2(self, capsys):
        code = main(["score", "--image-id", "a", "--text-id", "b"])
        assert code == 2
        assert "error:" in capsys.readouterr().err

    def test_unknown_id_exit_2(self, trace_dataset, capsys):
        code = main(["score", "--image-id", "ghost", "--text-id", "txt", *trace_args(trace_dataset)])
        assert code == 2


class TestRequests:
    def test_writes_deduplicated_requests(self, trace_dataset, capsys, tmp_path):
        out = tmp_path / "requests.jsonl"
        code = main(
            ["requests", "--texts", str(trace_dataset / "texts"),
             "--pool", str(trace_dataset / "pool"),
             "--pairs", str(trace_dataset / "pairs.jsonl"),
             "--p-neighbors", "2", "--out", str(out)]
        )
        assert code == 0
        lines = [json.loads(l) for l in out.read_text().splitlines()]
        assert lines == [
            {"attribute": "red", "object": "cube"},
            {"attribute": "red", "object": "ball"},
        ]
        assert "2 request(s)" in capsys.readouterr().out


class TestBench:
    def test_pairwise_prints_accuracy(self, synthetic_dataset, capsys, tmp_path):
        out = tmp_path / "results"
        code = main(
            ["bench", "pairwise", *synth_args(synthetic_dataset), "--out", str(out),
             "--no-timestamp"]
        )
        assert code == 0
        assert "1.0000" in capsys.readouterr().out
        rows = list(csv.DictReader(open(out / "results.csv")))
        assert len(rows) == 1
        assert rows[0]["value"] == "1.0"
        assert rows[0]["correct"] == "12"
        items = [json.loads(l) for l in (out / "items.jsonl").read_text().splitlines()]
        assert len(items) == 12

    def test_ablation_four_modes(self, synthetic_dataset, capsys, tmp_path):
        out = tmp_path / "results"
        code = main(
            ["bench", "ablation", *synth_args(synthetic_dataset), "--out", str(out),
             "--no-timestamp"]
        )
        assert code == 0
        rows = list(csv.DictReader(open(out / "results.csv")))
        assert [row["mode"] for row in rows] == [
            "global-only", "base-local", "refined", "full",
        ]

    def test_sweep_grid_rows(self, synthetic_dataset, tmp_path):
        out = tmp_path / "results"
        code = main(
            ["bench", "sweep", *synth_args(synthetic_dataset),
             "--k-grid", "1,3,5,8,10", "--omega-grid", "0.3",
             "--out", str(out), "--no-timestamp"]
        )
        assert code == 0
        rows = list(csv.DictReader(open(out / "results.csv")))
        assert len(rows) == 5
        assert [row["k"] for row in rows] == ["1", "3", "5", "8", "10"]

    def test_retrieval(self, synthetic_dataset, tmp_path, capsys):
        queries = tmp_path / "queries.jsonl"
        gallery = tmp_path / "gallery.txt"
        queries.write_text(
            json.dumps({"text_id": "txt0000p", "gold_image_ids": ["img0000"]}) + "\n"
        )
        gallery.write_text("".join(f"img{i:04d}\n" for i in range(12)))
        code = main(
            ["bench", "retrieval", *synth_args(synthetic_dataset),
             "--queries", str(queries), "--gallery", str(gallery),
             "--recall-ks", "1,5"]
        )
        assert code == 0
        out = capsys.readouterr().out
        assert "recall@1" in out and "recall@5" in out

    def test_worker_counts_give_identical_files(self, synthetic_dataset, tmp_path):
        outs = []
        for workers in ("1", "4"):
            out = tmp_path / f"w{workers}"
            code = main(
                ["bench", "ablation", *synth_args(synthetic_dataset),
                 "--workers", workers, "--out", str(out), "--no-timestamp"]
            )
            assert code == 0
            outs.append(out)
        assert (outs[0] / "results.csv").read_bytes() == (outs[1] / "results.csv").read_bytes()
        assert (outs[0] / "items.jsonl").read_bytes() == (outs[1] / "items.jsonl").read_bytes()


class TestInspect:
    def test_csv_columns(self, trace_dataset, capsys):
        code = main(["inspect", "--image-id", "img", "--text-id", "txt", *trace_args(trace_dataset)])
        assert code == 0
        lines = capsys.readouterr().out.strip().splitlines()
        assert lines[0] == "token_index,token_text,phi,patch_indices"
        assert len(lines) == 3  # two content tokens
        first = lines[1].split(",")
        assert first[0] == "0" and first[1] == "red"

    def test_refined_flag_changes_scores(self, trace_dataset, capsys):
        main(["inspect", "--image-id", "img", "--text-id", "txt", *trace_args(trace_dataset)])
        plain = capsys.readouterr().out
        main(
            ["inspect", "--image-id", "img", "--text-id", "txt", "--refined",
             *trace_args(trace_dataset)]
        )
        refined = capsys.readouterr().out
        assert plain != refined


class TestConfig:
    def test_dump_config(self, capsys):
        code = main(["score", "--image-id", "a", "--text-id", "b", "--k", "7", "--dump-config"])
        assert code == 0
        out = capsys.readouterr().out
        assert "k = 7" in out
        assert "omega = 0.3" in out

    def test_toml_config_with_flag_override(self, trace_dataset, tmp_path, capsys):
        config = tmp_path / "run.toml"
        config.write_text(
            "\n".join(
                [
                    f'images = "{trace_dataset / "images"}"',
                    f'texts = "{trace_dataset / "texts"}"',
                    f'pool = "{trace_dataset / "pool"}"',
                    f'table = "{trace_dataset / "table"}"',
                    f'pairs = "{trace_dataset / "pairs.jsonl"}"',
                    "k = 1",
                    "omega = 0.9",
                    "p_neighbors = 2",
                ]
            )
        )
        code = main(
            ["score", "--image-id", "img", "--text-id", "txt",
             "--config", str(config), "--omega", "0.3"]
        )
        assert code == 0
        report = json.loads(capsys.readouterr().out)
        assert report["omega"] == 0.3  # flag beats config file

    def test_unknown_config_key_rejected(self, tmp_path, capsys):
        config = tmp_path / "run.toml"
        config.write_text('bogus = 1\n')
        code = main(["score", "--image-id", "a", "--text-id", "b", "--config", str(config)])
        assert code == 2
