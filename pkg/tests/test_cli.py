"""CLI surface: happy paths, exit codes, and byte-level determinism."""

import filecmp
import os

import numpy as np
import pytest

from causalvox.cli import main
from causalvox.volio import read_map_csv, read_stimulus, read_volume

TINY_PHANTOM = [
    "phantom",
    "--dims",
    "3,3,1",
    "--n-active",
    "2",
    "--cnr",
    "2.0",
    "--seed",
    "7",
]
FAST_GC = ["--stim-lags", "4", "--bootstrap", "40", "--seed", "11"]


@pytest.fixture(scope="module")
def fixture_dir(tmp_path_factory):
    """A small phantom written once for the whole module."""
    root = tmp_path_factory.mktemp("cli_fixture")
    prefix = str(root / "ph")
    assert main(TINY_PHANTOM + ["--out-prefix", prefix]) == 0
    return root


def ph(fixture_dir, name="ph"):
    return str(fixture_dir / name)


class TestPhantomCommand:
    def test_outputs_are_mutually_consistent(self, fixture_dir):
        prefix = ph(fixture_dir)
        grid = read_volume(prefix + ".bvol")
        samples, tr = read_stimulus(prefix + "_stim.txt")
        assert grid.dims == (3, 3, 1)
        assert grid.n_timepoints == samples.size == 362
        assert tr == grid.tr_seconds == 2.0
        truth_lines = open(prefix + "_truth.csv").read().strip().split("\n")
        assert len(truth_lines) == 10  # header + 9 voxels
        n_active = sum(int(line.split(",")[-1]) for line in truth_lines[1:])
        assert n_active == 2

    def test_volume_round_trip_bit_exact(self, fixture_dir, tmp_path):
        prefix = ph(fixture_dir)
        grid = read_volume(prefix + ".bvol")
        from causalvox.volio import write_volume

        rewritten = tmp_path / "again.bvol"
        write_volume(rewritten, grid)
        assert rewritten.read_bytes() == open(prefix + ".bvol", "rb").read()

    def test_parsed_volume_reproduces_generated_grid(self, fixture_dir):
        # rebuild the same phantom the CLI generated and confirm the file
        # parses back to the exact in-memory grid the command wrote
        import numpy as np

        from causalvox.phantom import PhantomSpec, beta_for_cnr, generate
        from causalvox.volio import quantized

        base = PhantomSpec(dims=(3, 3, 1), rng_seed=7)
        beta = beta_for_cnr(base, 2.0)
        placement = np.random.default_rng([7, 2**63])
        mask = np.zeros(9, dtype=bool)
        mask[placement.choice(9, size=2, replace=False)] = True
        spec = PhantomSpec(
            dims=(3, 3, 1), active_mask=mask, beta_true=beta, rng_seed=7
        )
        expected = quantized(generate(spec).grid)
        parsed = read_volume(ph(fixture_dir) + ".bvol")
        np.testing.assert_array_equal(parsed.values, expected.values)

    def test_explicit_active_placement(self, tmp_path):
        prefix = str(tmp_path / "p")
        code = main(
            [
                "phantom",
                "--dims",
                "2,2,1",
                "--active",
                "1,0,0",
                "--seed",
                "3",
                "--out-prefix",
                prefix,
            ]
        )
        assert code == 0
        lines = open(prefix + "_truth.csv").read().strip().split("\n")[1:]
        flags = {tuple(line.split(",")[:3]): line.split(",")[3] for line in lines}
        assert flags[("1", "0", "0")] == "1"
        assert sum(int(v) for v in flags.values()) == 1

    def test_zero_dims_rejected(self, tmp_path):
        code = main(
            ["phantom", "--dims", "0,2,1", "--out-prefix", str(tmp_path / "x")]
        )
        assert code == 3

    def test_deterministic_per_seed(self, tmp_path):
        a = str(tmp_path / "a")
        b = str(tmp_path / "b")
        for prefix in (a, b):
            assert main(TINY_PHANTOM + ["--out-prefix", prefix]) == 0
        for suffix in (".bvol", "_stim.txt", "_truth.csv"):
            assert filecmp.cmp(a + suffix, b + suffix, shallow=False)


class TestMapCommands:
    def test_glm_outputs(self, fixture_dir, tmp_path, capsys):
        prefix = str(tmp_path / "glm")
        code = main(["glm", ph(fixture_dir) + ".bvol", ph(fixture_dir) + "_stim.txt", "--out-prefix", prefix])
        assert code == 0
        out = capsys.readouterr().out
        assert out.startswith("glm: voxels=9 active=")
        assert "gini=" in out
        rows = read_map_csv(prefix + ".csv")
        assert len(rows) == 9
        assert os.path.exists(prefix + "_z000.pgm")
        assert os.path.exists(prefix + "_map.png")

    def test_gc_outputs_and_determinism(self, fixture_dir, tmp_path, capsys):
        vol = ph(fixture_dir) + ".bvol"
        stim = ph(fixture_dir) + "_stim.txt"
        a = str(tmp_path / "a")
        b = str(tmp_path / "b")
        for prefix in (a, b):
            assert main(["gc", vol, stim, *FAST_GC, "--out-prefix", prefix]) == 0
        capsys.readouterr()
        for suffix in (".csv", "_z000.pgm", "_map.png"):
            assert filecmp.cmp(a + suffix, b + suffix, shallow=False), suffix

    def test_gc_no_figures_skips_png(self, fixture_dir, tmp_path):
        prefix = str(tmp_path / "nofig")
        code = main(
            [
                "gc",
                ph(fixture_dir) + ".bvol",
                ph(fixture_dir) + "_stim.txt",
                *FAST_GC,
                "--no-figures",
                "--out-prefix",
                prefix,
            ]
        )
        assert code == 0
        assert os.path.exists(prefix + ".csv")
        assert not os.path.exists(prefix + "_map.png")

    def test_compare_report(self, fixture_dir, tmp_path, capsys):
        prefix = str(tmp_path / "cmp")
        code = main(
            [
                "compare",
                ph(fixture_dir) + ".bvol",
                ph(fixture_dir) + "_stim.txt",
                *FAST_GC,
                "--out-prefix",
                prefix,
            ]
        )
        assert code == 0
        stdout = capsys.readouterr().out
        report = open(prefix + "_report.txt").read()
        assert stdout.strip() == report.strip()
        fields = dict(line.split("=", 1) for line in report.strip().split("\n"))
        assert set(fields) == {
            "voxels",
            "glm_active",
            "gc_active",
            "jaccard",
            "glm_gini",
            "gc_gini",
        }
        assert 0.0 <= float(fields["jaccard"]) <= 1.0
        scatter = open(prefix + "_scatter.csv").read().strip().split("\n")
        assert len(scatter) == 10
        assert scatter[0].startswith("x,y,z,glm_statistic")
        assert os.path.exists(prefix + "_glm.csv")
        assert os.path.exists(prefix + "_gc.csv")
        assert os.path.exists(prefix + "_compare.png")

    def test_both_maps_recover_phantom_truth(self, tmp_path, capsys):
        # high-contrast white-noise fixture; both detectors' active sets must
        # equal the generated ground truth
        import csv

        prefix = str(tmp_path / "t")
        assert (
            main(
                [
                    "phantom",
                    "--dims",
                    "3,3,1",
                    "--n-active",
                    "4",
                    "--cnr",
                    "2.0",
                    "--ar1",
                    "0.0",
                    "--seed",
                    "3",
                    "--out-prefix",
                    prefix + "ph",
                ]
            )
            == 0
        )
        assert main(["glm", prefix + "ph.bvol", prefix + "ph_stim.txt", "--no-figures", "--out-prefix", prefix + "glm"]) == 0
        assert (
            main(
                [
                    "gc",
                    prefix + "ph.bvol",
                    prefix + "ph_stim.txt",
                    "--seed",
                    "3",
                    "--no-figures",
                    "--out-prefix",
                    prefix + "gc",
                ]
            )
            == 0
        )
        capsys.readouterr()

        def active_set(path):
            return {
                (row["x"], row["y"], row["z"])
                for row in csv.DictReader(open(path))
                if row["active"] == "1"
            }

        truth = active_set(prefix + "ph_truth.csv")
        assert len(truth) == 4
        assert active_set(prefix + "glm.csv") == truth
        assert active_set(prefix + "gc.csv") == truth

    def test_compare_methods_overlap_on_strong_phantom(self, tmp_path, capsys):
        # high-contrast white-noise phantom: the two detectors should agree
        # on most of the active set (Jaccard >= 0.8)
        for seed in ("0", "1", "2"):
            prefix = str(tmp_path / f"s{seed}")
            assert (
                main(
                    [
                        "phantom",
                        "--dims",
                        "3,3,1",
                        "--n-active",
                        "4",
                        "--cnr",
                        "2.0",
                        "--ar1",
                        "0.0",
                        "--seed",
                        seed,
                        "--out-prefix",
                        prefix + "ph",
                    ]
                )
                == 0
            )
            assert (
                main(
                    [
                        "compare",
                        prefix + "ph.bvol",
                        prefix + "ph_stim.txt",
                        "--seed",
                        seed,
                        "--no-figures",
                        "--out-prefix",
                        prefix + "cmp",
                    ]
                )
                == 0
            )
            capsys.readouterr()
            report = open(prefix + "cmp_report.txt").read()
            fields = dict(line.split("=", 1) for line in report.strip().split("\n"))
            assert float(fields["jaccard"]) >= 0.8, f"seed {seed}: {report}"

    def test_alpha_zero_rejected(self, fixture_dir, tmp_path):
        code = main(
            [
                "glm",
                ph(fixture_dir) + ".bvol",
                ph(fixture_dir) + "_stim.txt",
                "--alpha",
                "0",
                "--out-prefix",
                str(tmp_path / "x"),
            ]
        )
        assert code == 3

    def test_bootstrap_zero_rejected(self, fixture_dir, tmp_path):
        code = main(
            [
                "gc",
                ph(fixture_dir) + ".bvol",
                ph(fixture_dir) + "_stim.txt",
                "--bootstrap",
                "0",
                "--out-prefix",
                str(tmp_path / "x"),
            ]
        )
        assert code == 3

    def test_malformed_volume_is_format_error(self, fixture_dir, tmp_path):
        bad = tmp_path / "bad.bvol"
        bad.write_bytes(b"not a volume\n")
        code = main(
            ["glm", str(bad), ph(fixture_dir) + "_stim.txt", "--out-prefix", str(tmp_path / "x")]
        )
        assert code == 2

    def test_missing_volume_is_format_error(self, fixture_dir, tmp_path):
        code = main(
            [
                "glm",
                str(tmp_path / "absent.bvol"),
                ph(fixture_dir) + "_stim.txt",
                "--out-prefix",
                str(tmp_path / "x"),
            ]
        )
        assert code == 2

    def test_stimulus_length_mismatch_rejected(self, fixture_dir, tmp_path):
        stim = tmp_path / "short.txt"
        stim.write_text("# tr=2.0\n" + "0\n" * 10)
        code = main(
            ["glm", ph(fixture_dir) + ".bvol", str(stim), "--out-prefix", str(tmp_path / "x")]
        )
        assert code == 3

    def test_unknown_flag_is_parameter_error(self, fixture_dir, tmp_path, capsys):
        code = main(
            [
                "glm",
                ph(fixture_dir) + ".bvol",
                ph(fixture_dir) + "_stim.txt",
                "--frobnicate",
                "--out-prefix",
                str(tmp_path / "x"),
            ]
        )
        assert code == 3
        capsys.readouterr()


class TestConnectivityCommand:
    def test_record_and_determinism(self, fixture_dir, tmp_path, capsys):
        import json

        vol = ph(fixture_dir) + ".bvol"
        args = [
            "connectivity",
            vol,
            "--source",
            "0,0,0",
            "--target",
            "1,1,0",
            "--stim-lags",
            "3",
            "--bootstrap",
            "30",
            "--seed",
            "5",
        ]
        out_a = str(tmp_path / "a.json")
        out_b = str(tmp_path / "b.json")
        assert main(args + ["--out", out_a]) == 0
        first_stdout = capsys.readouterr().out
        assert main(args + ["--out", out_b]) == 0
        capsys.readouterr()
        assert filecmp.cmp(out_a, out_b, shallow=False)

        record = json.loads(first_stdout)
        assert record["source"] == [0, 0, 0]
        assert record["target"] == [1, 1, 0]
        assert 0.0 <= record["strength"] < 1.0
        assert len(record["null_distribution"]) == 30
        assert record["statistic"] == (
            record["strength"] if record["significant"] else 0.0
        )

    def test_source_equals_target_rejected(self, fixture_dir):
        code = main(
            [
                "connectivity",
                ph(fixture_dir) + ".bvol",
                "--source",
                "1,1,0",
                "--target",
                "1,1,0",
            ]
        )
        assert code == 3

    def test_out_of_bounds_voxel_rejected(self, fixture_dir):
        code = main(
            [
                "connectivity",
                ph(fixture_dir) + ".bvol",
                "--source",
                "9,0,0",
                "--target",
                "0,0,0",
            ]
        )
        assert code == 3


class TestGiniCommand:
    def test_one_hot_csv(self, tmp_path, capsys):
        path = tmp_path / "map.csv"
        path.write_text(
            "x,y,z,statistic,p_value,active\n"
            "0,0,0,0.0,1.0,0\n"
            "1,0,0,0.0,1.0,0\n"
            "2,0,0,0.0,1.0,0\n"
            "3,0,0,2.0,0.001,1\n"
        )
        assert main(["gini", str(path)]) == 0
        assert capsys.readouterr().out.strip() == "0.75"

    def test_uniform_map_is_zero(self, tmp_path, capsys):
        path = tmp_path / "map.csv"
        path.write_text(
            "x,y,z,statistic,p_value,active\n"
            + "".join(f"{i},0,0,3.0,0.001,1\n" for i in range(4))
        )
        assert main(["gini", str(path)]) == 0
        assert float(capsys.readouterr().out.strip()) == 0.0

    def test_all_zero_map_exits_3_with_message(self, tmp_path, capsys):
        path = tmp_path / "map.csv"
        path.write_text(
            "x,y,z,statistic,p_value,active\n"
            "0,0,0,0.0,1.0,0\n"
            "1,0,0,0.0,1.0,0\n"
        )
        assert main(["gini", str(path)]) == 3
        assert "parameter error" in capsys.readouterr().err

    def test_statistic_mode(self, tmp_path, capsys):
        path = tmp_path / "map.csv"
        path.write_text(
            "x,y,z,statistic,p_value,active\n"
            "0,0,0,1.0,0.5,0\n"
            "1,0,0,1.0,0.5,0\n"
        )
        assert main(["gini", str(path), "--mode", "statistic"]) == 0
        assert float(capsys.readouterr().out.strip()) == 0.0

    def test_malformed_csv_is_format_error(self, tmp_path):
        path = tmp_path / "map.csv"
        path.write_text("nope\n")
        assert main(["gini", str(path)]) == 2


class TestJobsFlag:
    def test_jobs_do_not_change_results(self, fixture_dir, tmp_path, capsys):
        vol = ph(fixture_dir) + ".bvol"
        stim = ph(fixture_dir) + "_stim.txt"
        a = str(tmp_path / "j1")
        b = str(tmp_path / "j4")
        assert main(["gc", vol, stim, *FAST_GC, "--jobs", "1", "--no-figures", "--out-prefix", a]) == 0
        assert main(["gc", vol, stim, *FAST_GC, "--jobs", "4", "--no-figures", "--out-prefix", b]) == 0
        capsys.readouterr()
        assert filecmp.cmp(a + ".csv", b + ".csv", shallow=False)

    def test_bad_jobs_rejected(self, fixture_dir, tmp_path):
        code = main(
            [
                "glm",
                ph(fixture_dir) + ".bvol",
                ph(fixture_dir) + "_stim.txt",
                "--jobs",
                "0",
                "--out-prefix",
                str(tmp_path / "x"),
            ]
        )
        assert code == 3
