import csv
import json
import subprocess
import sys

import pytest

from vppsim import cli


def run_cli(args):
    return cli.main(args)


@pytest.fixture(scope="module")
def sim_dirs(tmp_path_factory):
    """One greedy and one uncontrolled run on the same seed, reused below."""
    root = tmp_path_factory.mktemp("cli")
    greedy = root / "greedy"
    uncontrolled = root / "uncontrolled"
    base = ["simulate", "--synthetic-seed", "0", "--seed", "5"]
    assert run_cli(base + ["--policy", "greedy", "--out", str(greedy)]) == 0
    assert run_cli(base + ["--policy", "uncontrolled", "--out", str(uncontrolled)]) == 0
    return greedy, uncontrolled


class TestSimulate:
    def test_writes_all_artifacts(self, sim_dirs):
        greedy, _ = sim_dirs
        for name in (
            "trace.csv",
            "metrics.txt",
            "metrics.json",
            "reward_breakdown.json",
            "histogram.csv",
            "manifest.json",
        ):
            assert (greedy / name).exists(), name

    def test_manifest_reproduces_run(self, sim_dirs):
        greedy, _ = sim_dirs
        manifest = json.loads((greedy / "manifest.json").read_text())
        assert manifest["seeds"] == [5]
        assert manifest["command"] == "simulate"
        assert "config_hash" in manifest

    def test_uncontrolled_policy_fills_batteries(self, sim_dirs):
        # adaptive charging throttles to the compensating power on small
        # surpluses, so a handful of long-stay EVs miss the 99.9 ceiling;
        # nearly everything still departs pinned at it
        _, uncontrolled = sim_dirs
        report = json.loads((uncontrolled / "metrics.json").read_text())
        assert report["avg_departure_energy_kwh"] >= 99.5

    def test_greedy_beats_uncontrolled_on_balanced_band(self, sim_dirs):
        greedy, uncontrolled = sim_dirs
        g = json.loads((greedy / "metrics.json").read_text())
        u = json.loads((uncontrolled / "metrics.json").read_text())
        assert g["balanced_steps_within_0.1_kw"] > u["balanced_steps_within_0.1_kw"]

    def test_byte_identical_reruns(self, tmp_path):
        out_a, out_b = tmp_path / "a", tmp_path / "b"
        args = ["simulate", "--synthetic-seed", "3", "--seed", "9", "--policy", "greedy"]
        assert run_cli(args + ["--out", str(out_a)]) == 0
        assert run_cli(args + ["--out", str(out_b)]) == 0
        for name in ("trace.csv", "metrics.txt", "manifest.json", "histogram.csv"):
            assert (out_a / name).read_bytes() == (out_b / name).read_bytes(), name


class TestBaseline:
    def test_baseline_outputs(self, tmp_path):
        out = tmp_path / "base"
        code = run_cli(
            ["baseline", "--synthetic-seed", "0", "--seed", "4", "--out", str(out)]
        )
        assert code == 0
        report = json.loads((out / "metrics.json").read_text())
        assert report["avg_departure_energy_kwh"] >= 99.9
        assert (out / "events.csv").exists()
        with open(out / "events.csv") as fh:
            header = next(csv.reader(fh))
        assert header == ["ev_id", "arrival_step", "departure_step", "arrival_energy_kwh"]


class TestEventConfigFile:
    def test_elvis_style_keys_accepted(self, tmp_path):
        config = tmp_path / "events.yaml"
        config.write_text(
            "num_charging_events: 5\n"
            "mean_park: 20.0\n"
            "std_deviation_park: 0.5\n"
            "mean_soc: 0.4\n"
            "std_deviation_soc: 0.05\n"
        )
        parsed = cli.load_event_config(config)
        assert parsed.weekly_arrivals == 5
        assert parsed.mean_park == 20.0
        assert parsed.std_park == 0.5
        assert parsed.mean_soc == 0.4
        assert parsed.std_soc == 0.05


class TestSweep:
    def test_single_cell_sweep(self, tmp_path):
        out = tmp_path / "sweep"
        code = run_cli(
            [
                "sweep-arrivals",
                "--synthetic-seed", "0",
                "--arrivals", "20",
                "--episodes", "1",
                "--seed", "2",
                "--out", str(out),
            ]
        )
        assert code == 0
        with open(out / "sweep.csv") as fh:
            rows = list(csv.DictReader(fh))
        assert len(rows) == 1
        row = rows[0]
        assert row["weekly_arrivals"] == "20"
        assert float(row["median_kwh"]) > 0
        bands = [
            float(row["pct_below_22_5"]),
            float(row["pct_22_5_to_52_5"]),
            float(row["pct_52_5_to_97_5"]),
            float(row["pct_above_97_5"]),
        ]
        assert sum(bands) == pytest.approx(1.0, abs=1e-9)


class TestSearch:
    def test_search_writes_history_and_params(self, tmp_path):
        out = tmp_path / "search"
        code = run_cli(
            [
                "search",
                "--synthetic-seed", "0",
                "--generations", "2",
                "--population", "4",
                "--horizon", "800",
                "--seed", "1",
                "--out", str(out),
            ]
        )
        assert code == 0
        best = json.loads((out / "best_params.json").read_text())
        assert {"discharge_reserve", "charge_target", "surplus_deadband"} <= set(best)
        with open(out / "history.csv") as fh:
            rows = list(csv.DictReader(fh))
        assert [r["generation"] for r in rows] == ["0", "1"]
        bests = [float(r["best"]) for r in rows]
        assert bests[1] >= bests[0]


class TestRewardShapeDump:
    def test_dump_emits_csv_anchors(self, capsys):
        assert run_cli(["dump-reward-shapes"]) == 0
        lines = capsys.readouterr().out.strip().splitlines()
        reader = csv.reader(lines)
        header = next(reader)
        assert header == ["shape_name", "x", "value"]
        rows = list(reader)
        assert any(r[0] == "step_load_kw" and float(r[1]) == 0.0 for r in rows)


class TestUsageErrors:
    def test_unknown_subcommand_exits_2(self):
        assert run_cli(["frobnicate"]) == 2

    def test_conflicting_scenario_flags_exit_2(self):
        assert (
            run_cli(
                [
                    "simulate",
                    "--scenario", "x.csv",
                    "--synthetic-seed", "3",
                ]
            )
            == 2
        )

    def test_missing_scenario_file_is_runtime_error(self, tmp_path):
        code = run_cli(
            ["simulate", "--scenario", str(tmp_path / "nope.csv"), "--out", str(tmp_path)]
        )
        assert code == 1

    def test_serve_rejects_both_transports(self, capsys):
        code = run_cli(["serve", "--stdio", "--socket", "0", "--synthetic-seed", "0"])
        assert code == 1


class TestServeSmoke:
    def test_socket_zero_prints_port_and_serves_one_session(self):
        import socket as socketlib

        proc = subprocess.Popen(
            [
                sys.executable, "-m", "vppsim.cli", "serve",
                "--socket", "0", "--synthetic-seed", "0", "--max-sessions", "1",
            ],
            stdout=subprocess.PIPE,
            text=True,
        )
        try:
            line = proc.stdout.readline()
            port = int(line.strip().split()[-1])
            with socketlib.create_connection(("127.0.0.1", port), timeout=30) as conn:
                fh = conn.makefile("rw", encoding="utf-8")
                fh.write(json.dumps({"op": "spec"}) + "\n")
                fh.flush()
                reply = json.loads(fh.readline())
                assert reply["info"]["action_space"] == [3, 3, 3, 3]
                fh.write(json.dumps({"op": "close"}) + "\n")
                fh.flush()
                fh.readline()
            assert proc.wait(timeout=60) == 0
        finally:
            if proc.poll() is None:
                proc.kill()
