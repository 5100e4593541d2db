import csv
import hashlib
import json

import numpy as np
import pytest

from modcontract.cli import EXIT_FAIL, EXIT_OK, EXIT_USAGE, fmt, main, write_json
from modcontract.config import SCHEMA_VERSION, load_config, parse_config
from modcontract.errors import ConfigError

LTI = {"kind": "lti", "horizon": 0.5}
FAST_PEG = {"kind": "peg", "horizon": 0.2}
FAST_VERIFY = {"samples": 8, "pairs": 2, "contraction_horizon": 0.5}


def write_cfg(path, **sections):
    cfg = {"schema_version": SCHEMA_VERSION, **sections}
    path.write_text(json.dumps(cfg))
    return str(path)


def digests(directory):
    return {p.name: hashlib.sha256(p.read_bytes()).hexdigest() for p in sorted(directory.iterdir())}


def run_twice(tmp_path, argv_for):
    outs = []
    for k in range(2):
        out = tmp_path / f"run{k}"
        code = main(argv_for(out))
        outs.append((code, digests(out)))
    return outs


class TestConfigLoading:
    def test_defaults(self, tmp_path):
        cfg = load_config(write_cfg(tmp_path / "c.json"))
        assert cfg.env.kind == "peg" and cfg.env.dt == 5e-4

    def test_digest_stable(self):
        a = parse_config({"schema_version": 1, "seed": 3})
        b = parse_config({"seed": 3, "schema_version": 1})
        assert a.digest() == b.digest() != parse_config({"schema_version": 1, "seed": 4}).digest()
        assert parse_config({"schema_version": 1, "seed": 3, "out_dir": "elsewhere"}).digest() == a.digest()

    @pytest.mark.parametrize("data", [{"schema_version": 1, "foo": 1}, {"schema_version": 2},
                                      {"schema_version": 1, "env": {"kind": "lti", "a": [1.0]}},
                                      {"schema_version": 1, "verify": {"checks": ["nope"]}},
                                      {"schema_version": 1, "env": {"kind": "peg", "dt": 0}}])
    def test_rejects(self, data):
        with pytest.raises(ConfigError):
            parse_config(data)


class TestExitCodes:
    def test_malformed_json(self, tmp_path):
        p = tmp_path / "bad.json"
        p.write_text("{bad")
        assert main(["verify", str(p)]) == EXIT_USAGE

    def test_unknown_key(self, tmp_path):
        assert main(["verify", write_cfg(tmp_path / "c.json", foo=1)]) == EXIT_USAGE

    def test_missing_config(self, tmp_path):
        assert main(["verify", str(tmp_path / "absent.json")]) == EXIT_USAGE

    def test_unknown_subcommand(self):
        assert main(["fly", "x.json"]) == EXIT_USAGE

    def test_odd_population(self, tmp_path):
        cfg = write_cfg(tmp_path / "c.json", env=LTI, train={"population": 3}, out_dir=str(tmp_path / "o"))
        assert main(["train", cfg]) == EXIT_USAGE

    def test_missing_policy(self, tmp_path):
        cfg = write_cfg(tmp_path / "c.json", env=LTI, out_dir=str(tmp_path / "o"))
        assert main(["rollout", cfg, "--policy", str(tmp_path / "none.json")]) == EXIT_USAGE

    @pytest.mark.parametrize("param,values", [("k_sur", ""), ("mass", "1,2"), ("k_sur", "a,b")])
    def test_bad_sweep(self, tmp_path, param, values):
        cfg = write_cfg(tmp_path / "c.json", env=FAST_PEG, out_dir=str(tmp_path / "o"))
        assert main(["sweep", cfg, "--param", param, "--values", values]) == EXIT_USAGE

    def test_sweep_needs_peg(self, tmp_path):
        cfg = write_cfg(tmp_path / "c.json", env=LTI, out_dir=str(tmp_path / "o"))
        assert main(["sweep", cfg, "--param", "k_sur", "--values", "1"]) == EXIT_USAGE

    def test_verify_fails_without_flips(self, tmp_path):
        cfg = write_cfg(tmp_path / "c.json", env=FAST_PEG, verify={**FAST_VERIFY, "checks": ["margins"]},
                        policy={"flips": False}, out_dir=str(tmp_path / "o"))
        assert main(["verify", cfg]) == EXIT_FAIL
        report = json.loads((tmp_path / "o" / "verify_report.json").read_text())
        assert report["checks"][0]["failing_dims"]


class TestVerify:
    def test_report_schema(self, tmp_path):
        cfg = write_cfg(tmp_path / "c.json", env=LTI, verify=FAST_VERIFY, out_dir=str(tmp_path / "o"))
        assert main(["verify", cfg]) == EXIT_OK
        report = json.loads((tmp_path / "o" / "verify_report.json").read_text())
        assert set(report) == {"config_digest", "checks", "transforms", "timing"}
        assert [c["name"] for c in report["checks"]] == ["margins", "char_roots", "hierarchical",
                                                        "empirical_contraction", "robustness"]
        for c in report["checks"]:
            assert {"name", "pass", "worst_value", "threshold"} <= set(c)
        assert report["timing"]["samples"] == FAST_VERIFY["samples"]
        assert report["config_digest"] == load_config(cfg).digest()
        with open(tmp_path / "o" / "verify_samples.csv") as fh:
            assert len(list(csv.reader(fh))) == FAST_VERIFY["samples"] + 1

    def test_deterministic(self, tmp_path):
        cfg = write_cfg(tmp_path / "c.json", env=FAST_PEG, verify=FAST_VERIFY)
        (c0, d0), (c1, d1) = run_twice(tmp_path, lambda o: ["verify", cfg, "--out-dir", str(o)])
        assert c0 == c1 == EXIT_OK and d0 == d1

    def test_seed_changes_output(self, tmp_path):
        cfg = write_cfg(tmp_path / "c.json", env=LTI, verify=FAST_VERIFY)
        main(["verify", cfg, "--out-dir", str(tmp_path / "a")])
        main(["verify", cfg, "--out-dir", str(tmp_path / "b"), "--seed", "9"])
        assert digests(tmp_path / "a") != digests(tmp_path / "b")


class TestRollout:
    def test_zero_policy_closed_form(self, tmp_path):
        cfg = write_cfg(tmp_path / "c.json", env=LTI, policy={"zero": True}, out_dir=str(tmp_path / "o"))
        assert main(["rollout", cfg]) == EXIT_OK
        with open(tmp_path / "o" / "trajectory.csv") as fh:
            rows = list(csv.DictReader(fh))
        t = np.array([float(r["t"]) for r in rows])
        y = np.array([[float(r["y0"]), float(r["y1"])] for r in rows])
        rate = np.array([1.0 / 1.0, 2.0 / 0.5])
        np.testing.assert_allclose(y, y[0] * np.exp(-np.outer(t, rate)), rtol=1e-10, atol=1e-14)
        assert t[-1] == pytest.approx(0.5)

    def test_deterministic_with_plot(self, tmp_path):
        cfg = write_cfg(tmp_path / "c.json", env=FAST_PEG)

        def argv(o):
            o.mkdir()
            return ["rollout", cfg, "--out-dir", str(o), "--plot", str(o / "plot.svg")]

        (c0, d0), (c1, d1) = run_twice(tmp_path, argv)
        assert c0 == c1 == EXIT_OK and d0 == d1 and "plot.svg" in d0
        assert (tmp_path / "run0" / "plot.svg").read_text().startswith("<svg")

    def test_policy_round_trip(self, tmp_path):
        cfg = write_cfg(tmp_path / "c.json", env=LTI, train={"population": 2, "iterations": 1,
                                                              "episodes_per_eval": 1, "eval_episodes": 1})
        assert main(["train", cfg, "--out-dir", str(tmp_path / "t")]) == EXIT_OK
        policy = str(tmp_path / "t" / "bank.json")
        assert main(["rollout", cfg, "--out-dir", str(tmp_path / "r"), "--policy", policy]) == EXIT_OK
        assert main(["verify", cfg, "--out-dir", str(tmp_path / "v"), "--policy", policy]) in (EXIT_OK, EXIT_FAIL)

    def test_policy_dim_mismatch(self, tmp_path):
        cfg = write_cfg(tmp_path / "c.json", env=LTI, train={"population": 2, "iterations": 1,
                                                              "episodes_per_eval": 1, "eval_episodes": 1})
        main(["train", cfg, "--out-dir", str(tmp_path / "t")])
        so = write_cfg(tmp_path / "s.json", env={"kind": "second_order"})
        assert main(["rollout", so, "--out-dir", str(tmp_path / "r"),
                     "--policy", str(tmp_path / "t" / "bank.json")]) == EXIT_USAGE


class TestTrain:
    def test_deterministic(self, tmp_path):
        cfg = write_cfg(tmp_path / "c.json", env={**FAST_PEG, "horizon": 0.1},
                        train={"population": 2, "iterations": 2, "episodes_per_eval": 1, "eval_episodes": 2})
        (c0, d0), (c1, d1) = run_twice(tmp_path, lambda o: ["train", cfg, "--out-dir", str(o)])
        assert c0 == c1 == EXIT_OK and d0 == d1
        assert set(d0) == {"train_log.csv", "bank.json", "train_eval.json"}
        ev = json.loads((tmp_path / "run0" / "train_eval.json").read_text())
        assert ev["total_violations"] == 0 and ev["constrained"] is True


class TestSweep:
    def test_deterministic(self, tmp_path):
        cfg = write_cfg(tmp_path / "c.json", env=FAST_PEG, verify={"samples": 8}, train={"eval_episodes": 2})
        argv = lambda o: ["sweep", cfg, "--out-dir", str(o), "--param", "tau_x", "--values", "0.03,0.06"]  # noqa: E731
        (c0, d0), (c1, d1) = run_twice(tmp_path, argv)
        assert c0 == c1 == EXIT_OK and d0 == d1
        summary = json.loads((tmp_path / "run0" / "sweep_summary.json").read_text())
        assert summary["pass_rate"] == 1.0 and summary["values"] == [0.03, 0.06]
        with open(tmp_path / "run0" / "sweep.csv") as fh:
            assert len(list(csv.reader(fh))) == 3


class TestFormatting:
    def test_fmt_round_trips(self):
        for x in (0.1, 1 / 3, -2.5e-300, 1e16 + 2):
            assert float(fmt(x)) == x
        assert fmt(np.int64(3)) == "3" and fmt("free") == "free"

    def test_json_non_finite(self, tmp_path):
        write_json(tmp_path / "x.json", {"a": np.inf, "b": np.float64(1.5), "c": np.array([1, 2])})
        assert json.loads((tmp_path / "x.json").read_text()) == {"a": None, "b": 1.5, "c": [1, 2]}
