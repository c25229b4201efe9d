"""End-to-end command-line flows, exit codes, and manifests."""

import json

import numpy as np
import pytest

from sldm.cli import EXIT_DATA, EXIT_OK, EXIT_USAGE, main
from sldm.graph import read_graph, write_graph

from conftest import two_camp_graph


@pytest.fixture()
def camp_file(tmp_path):
    g = two_camp_graph(n=40, seed=2)
    path = tmp_path / "camp.graph"
    write_graph(path, g)
    return str(path)


@pytest.fixture()
def raw_edges(tmp_path):
    path = tmp_path / "raw.txt"
    path.write_text(
        "# raw directed votes with timestamps\n"
        "a b 1 100\n"
        "a b 1 200\n"
        "b a 1 300\n"
        "b c -1 400\n"
        "c b -1 500\n"
        "d e 1 600\n")
    return str(path)


class TestIngest:
    def test_undirected_lcc_flow(self, raw_edges, tmp_path, capsys):
        out = str(tmp_path / "g.graph")
        rc = main(["ingest", raw_edges, "-o", out, "--undirected",
                   "--aggregate", "--lcc"])
        assert rc == EXIT_OK
        g = read_graph(out)
        # a-b aggregates to 3, b-c to -2; d-e drops with the LCC
        assert g.n_nodes == 3
        assert sorted(g.weight.tolist()) == [-2, 3]
        stats_out = capsys.readouterr().out
        assert "n_nodes=3" in stats_out
        manifest = json.loads((tmp_path / "g.graph.manifest.json").read_text())
        assert manifest["command"] == "ingest"
        assert raw_edges in manifest["inputs"]

    def test_json_stats(self, raw_edges, tmp_path, capsys):
        out = str(tmp_path / "g.graph")
        rc = main(["ingest", raw_edges, "-o", out, "--directed", "--aggregate",
                   "--stats-format", "json"])
        assert rc == EXIT_OK
        doc = json.loads(capsys.readouterr().out)
        assert doc["n_nodes"] == 5

    def test_idempotent_on_normalized(self, camp_file, tmp_path):
        out1 = str(tmp_path / "a.graph")
        out2 = str(tmp_path / "b.graph")
        assert main(["ingest", camp_file, "-o", out1, "--undirected", "--lcc"]) == EXIT_OK
        assert main(["ingest", out1, "-o", out2, "--undirected", "--lcc"]) == EXIT_OK
        g1 = read_graph(out1)
        g2 = read_graph(out2)
        assert np.array_equal(g1.weight, g2.weight)
        assert np.array_equal(g1.src, g2.src)

    def test_missing_file_is_data_error(self, tmp_path):
        rc = main(["ingest", str(tmp_path / "nope.txt"), "-o",
                   str(tmp_path / "x"), "--directed"])
        assert rc == EXIT_DATA

    def test_empty_file_is_data_error(self, tmp_path):
        src = tmp_path / "empty.txt"
        src.write_text("")
        rc = main(["ingest", str(src), "-o", str(tmp_path / "x"), "--directed"])
        assert rc == EXIT_DATA

    def test_usage_error_exit_code(self):
        assert main(["ingest"]) == EXIT_USAGE

    def test_unknown_command_usage(self):
        assert main(["frobnicate"]) == EXIT_USAGE


class TestFit:
    def test_fit_writes_checkpoint_trace_manifest(self, camp_file, tmp_path):
        ckpt = str(tmp_path / "m.ckpt")
        trace = str(tmp_path / "m.trace.csv")
        rc = main(["fit", camp_file, "-o", ckpt, "--model", "slim", "--k", "2",
                   "--iters", "40", "--sample-size", "30", "--seed", "3",
                   "--trace", trace, "--trace-every", "20"])
        assert rc == EXIT_OK
        from sldm.model import load_checkpoint
        params, config, _ = load_checkpoint(ckpt)
        assert config.k == 2 and config.model == "slim"
        lines = open(trace).read().splitlines()
        assert lines[0] == "iteration,block_loss,full_loss"
        manifest = json.loads((tmp_path / "m.ckpt.manifest.json").read_text())
        assert manifest["config"]["iters"] == 40

    def test_iters_zero_is_initialization(self, camp_file, tmp_path):
        ckpt = str(tmp_path / "init.ckpt")
        rc = main(["fit", camp_file, "-o", ckpt, "--model", "sldm", "--k", "2",
                   "--iters", "0", "--seed", "1"])
        assert rc == EXIT_OK
        from sldm.model import load_checkpoint
        from sldm.init import init_params
        params, config, _ = load_checkpoint(ckpt)
        expected = init_params(read_graph(camp_file), config)
        assert np.array_equal(params.Z, expected.Z)

    def test_same_seed_identical_checkpoints(self, camp_file, tmp_path):
        a = str(tmp_path / "a.ckpt")
        b = str(tmp_path / "b.ckpt")
        args = ["fit", camp_file, "--model", "slim", "--k", "2", "--iters", "30",
                "--sample-size", "25", "--seed", "7", "--deterministic"]
        assert main(args + ["-o", a]) == EXIT_OK
        assert main(args + ["-o", b]) == EXIT_OK
        assert open(a, "rb").read() == open(b, "rb").read()

    def test_variant_graph_mismatch(self, camp_file, tmp_path):
        rc = main(["fit", camp_file, "-o", str(tmp_path / "x.ckpt"),
                   "--variant", "directed", "--iters", "1"])
        assert rc == EXIT_DATA

    def test_config_file_with_flag_override(self, camp_file, tmp_path):
        cfg_path = tmp_path / "fit.json"
        cfg_path.write_text(json.dumps(
            {"model": "slim", "k": 3, "iters": 25, "sample_size": 20, "seed": 6}))
        ckpt = str(tmp_path / "c.ckpt")
        rc = main(["fit", camp_file, "-o", ckpt, "--config", str(cfg_path),
                   "--k", "2"])  # flag beats the file
        assert rc == EXIT_OK
        from sldm.model import load_checkpoint
        _, config, _ = load_checkpoint(ckpt)
        assert config.model == "slim" and config.k == 2 and config.iters == 25

    def test_config_file_unknown_key(self, camp_file, tmp_path):
        cfg_path = tmp_path / "fit.json"
        cfg_path.write_text(json.dumps({"learning_rate": 0.1}))
        rc = main(["fit", camp_file, "-o", str(tmp_path / "x.ckpt"),
                   "--config", str(cfg_path)])
        assert rc == EXIT_DATA

    def test_directed_flow(self, raw_edges, tmp_path):
        gpath = str(tmp_path / "d.graph")
        assert main(["ingest", raw_edges, "-o", gpath, "--directed",
                     "--aggregate", "--lcc"]) == EXIT_OK
        ckpt = str(tmp_path / "d.ckpt")
        rc = main(["fit", gpath, "-o", ckpt, "--model", "sldm",
                   "--variant", "directed-expressive", "--k", "2",
                   "--iters", "15", "--sample-size", "3", "--seed", "1"])
        assert rc == EXIT_OK
        from sldm.model import load_checkpoint
        params, config, _ = load_checkpoint(ckpt)
        assert params.U is not None
        out = str(tmp_path / "dregen.graph")
        assert main(["generate", "--from-checkpoint", ckpt, "-o", out,
                     "--seed", "2"]) == EXIT_OK
        assert read_graph(out).directed


class TestGenerate:
    def test_from_config_with_stats_line(self, tmp_path, capsys):
        cfg = {"n_nodes": 80, "k_archetypes": 3, "alpha": 0.5, "mu_gamma": -1.5,
               "sigma_gamma": 0.1, "mu_delta": -2.5, "sigma_delta": 0.1,
               "mu_a": 0.0, "sigma_a": 1.5, "seed": 4}
        cfg_path = tmp_path / "gen.json"
        cfg_path.write_text(json.dumps(cfg))
        out = str(tmp_path / "gen.graph")
        gt = str(tmp_path / "gt.json")
        rc = main(["generate", "--config", str(cfg_path), "-o", out,
                   "--ground-truth", gt, "--seed", "4"])
        assert rc == EXIT_OK
        printed = capsys.readouterr().out.strip()
        assert printed.startswith("(") and printed.endswith("%)")
        g = read_graph(out)
        assert g.n_nodes == 80
        assert json.loads(open(gt).read())["Z"]

    def test_calibrated_config(self, tmp_path, capsys):
        cfg = {"n_nodes": 150, "k_archetypes": 3, "alpha": 1.0, "sigma_gamma": 0.1,
               "sigma_delta": 0.1, "mu_a": 0.0, "sigma_a": 2.0, "seed": 5,
               "calibrate": {"density": 0.05, "neg_share": 0.3}}
        cfg_path = tmp_path / "gen.json"
        cfg_path.write_text(json.dumps(cfg))
        out = str(tmp_path / "gen.graph")
        rc = main(["generate", "--config", str(cfg_path), "-o", out, "--seed", "5"])
        assert rc == EXIT_OK
        from sldm.graph import degree_stats
        s = degree_stats(read_graph(out))
        assert abs(s.density - 0.05) < 0.02

    def test_from_checkpoint(self, camp_file, tmp_path):
        ckpt = str(tmp_path / "m.ckpt")
        main(["fit", camp_file, "-o", ckpt, "--model", "sldm", "--k", "2",
              "--iters", "50", "--sample-size", "30", "--seed", "2"])
        out = str(tmp_path / "regen.graph")
        rc = main(["generate", "--from-checkpoint", ckpt, "-o", out, "--seed", "6"])
        assert rc == EXIT_OK
        g = read_graph(out)
        assert g.n_nodes == 40

    def test_requires_exactly_one_source(self, tmp_path):
        rc = main(["generate", "-o", str(tmp_path / "x.graph")])
        assert rc == EXIT_DATA

    def test_tiny_config(self, tmp_path):
        cfg = {"n_nodes": 2, "k_archetypes": 2, "alpha": 1.0, "mu_gamma": 0.0,
               "sigma_gamma": 0.1, "mu_delta": 0.0, "sigma_delta": 0.1,
               "mu_a": 0.0, "sigma_a": 1.0, "seed": 0}
        cfg_path = tmp_path / "tiny.json"
        cfg_path.write_text(json.dumps(cfg))
        rc = main(["generate", "--config", str(cfg_path), "-o",
                   str(tmp_path / "tiny.graph"), "--seed", "0"])
        assert rc == EXIT_OK
        g = read_graph(str(tmp_path / "tiny.graph"))
        assert g.n_edges <= 1


class TestEval:
    def test_eval_writes_reports(self, tmp_path, capsys):
        g = two_camp_graph(n=80, seed=6)
        gpath = str(tmp_path / "g.graph")
        write_graph(gpath, g)
        out = str(tmp_path / "report")
        rc = main(["eval", gpath, "-o", out, "--model", "sldm", "--k", "2",
                   "--iters", "150", "--sample-size", "80", "--seed", "1",
                   "--holdout", "0.2"])
        assert rc == EXIT_OK
        doc = json.loads(open(out + ".json").read())
        assert set(doc["tasks"]) == {"p@n", "p@z", "n@z"}
        table = capsys.readouterr().out
        assert "AUC-ROC" in table and "p@z" in table
        csv_lines = open(out + ".csv").read().splitlines()
        assert len(csv_lines) == 2

    def test_holdout_zero_rejected(self, camp_file, tmp_path):
        rc = main(["eval", camp_file, "-o", str(tmp_path / "r"), "--holdout", "0",
                   "--iters", "1"])
        assert rc == EXIT_DATA

    def test_same_seed_identical_reports(self, tmp_path):
        g = two_camp_graph(n=50, seed=8)
        gpath = str(tmp_path / "g.graph")
        write_graph(gpath, g)
        args = ["eval", gpath, "--model", "sldm", "--k", "2", "--iters", "60",
                "--sample-size", "40", "--seed", "5"]
        assert main(args + ["-o", str(tmp_path / "r1")]) == EXIT_OK
        assert main(args + ["-o", str(tmp_path / "r2")]) == EXIT_OK
        assert open(tmp_path / "r1.json").read() == open(tmp_path / "r2.json").read()


class TestExportViz:
    def test_pca_export(self, camp_file, tmp_path):
        ckpt = str(tmp_path / "m.ckpt")
        main(["fit", camp_file, "-o", ckpt, "--model", "sldm", "--k", "2",
              "--iters", "30", "--sample-size", "30", "--seed", "1"])
        out = str(tmp_path / "layout.json")
        rc = main(["export-viz", ckpt, "-o", out, "--mode", "pca",
                   "--graph", camp_file])
        assert rc == EXIT_OK
        doc = json.loads(open(out).read())
        assert doc["mode"] == "pca"
        assert len(doc["nodes"]) == 40
        assert len(doc["edges"]) > 0

    def test_circular_needs_slim(self, camp_file, tmp_path):
        ckpt = str(tmp_path / "m.ckpt")
        main(["fit", camp_file, "-o", ckpt, "--model", "sldm", "--k", "2",
              "--iters", "5", "--sample-size", "20", "--seed", "1"])
        rc = main(["export-viz", ckpt, "-o", str(tmp_path / "x.json"),
                   "--mode", "circular"])
        assert rc == EXIT_DATA

    def test_circular_slim_anchors(self, camp_file, tmp_path):
        ckpt = str(tmp_path / "m.ckpt")
        main(["fit", camp_file, "-o", ckpt, "--model", "slim", "--k", "3",
              "--iters", "20", "--sample-size", "25", "--seed", "2"])
        out = str(tmp_path / "layout.json")
        csv = str(tmp_path / "layout.csv")
        rc = main(["export-viz", ckpt, "-o", out, "--mode", "circular", "--csv", csv])
        assert rc == EXIT_OK
        doc = json.loads(open(out).read())
        for arch in doc["archetypes"]:
            assert arch["x"] ** 2 + arch["y"] ** 2 == pytest.approx(1.0, abs=1e-9)
        assert open(csv).read().startswith("id,x,y")

    def test_malformed_checkpoint(self, tmp_path):
        bad = tmp_path / "bad.ckpt"
        bad.write_bytes(b"garbage")
        rc = main(["export-viz", str(bad), "-o", str(tmp_path / "x.json")])
        assert rc == EXIT_DATA
