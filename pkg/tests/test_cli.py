import hashlib
import os

import numpy as np
import pytest

from deconfound import cli, data
from deconfound.seeds import rng_for


def _hash_dir(path):
    out = {}
    for name in sorted(os.listdir(path)):
        with open(os.path.join(path, name), "rb") as fh:
            out[name] = hashlib.sha256(fh.read()).hexdigest()
    return out


@pytest.fixture(scope="module")
def toy_inputs(tmp_path_factory):
    """Small confounded dataset where the net can still fit in seconds."""
    root = tmp_path_factory.mktemp("toy")
    rng = rng_for(77, "cli-toy")
    n = 240
    h = rng.standard_normal(n)
    t = (0.8 * h + rng.standard_normal(n) > 0).astype(np.int64)
    y = 2.0 * t + 3.0 * h + 0.1 * rng.standard_normal(n)
    B = rng.standard_normal((3, 12))
    R = np.column_stack([t * 0.1, h, rng.standard_normal(n)]) @ B
    R = R + 0.01 * rng.standard_normal((n, 12))
    ids = [f"doc{i}" for i in range(n)]
    rep = str(root / "reps.bin")
    lab = str(root / "labels.csv")
    data.write_representations(R, rep)
    data.write_labels(lab, ids, y, t, t_tilde=t)
    return rep, lab


def _fast_flags(rep, lab, out, extra=()):
    return [
        "--representations", rep, "--labels", lab, "--out", out,
        "--seed", "5", "--head-hidden", "32", "--max-epochs", "60",
        "--patience", "10", "--batch-size", "16", "--clip-eps", "0.02",
        *extra,
    ]


class TestEstimateSmoke:
    def test_estimate_ate_outputs(self, toy_inputs, tmp_path):
        rep, lab = toy_inputs
        out = str(tmp_path / "ate")
        rc = cli.main(["estimate-ate", *_fast_flags(rep, lab, out)])
        assert rc == cli.EXIT_OK
        names = set(os.listdir(out))
        assert {"estimate.txt", "scores.csv", "estimate.png", "manifest.ini"} <= names
        text = (tmp_path / "ate" / "estimate.txt").read_text()
        fields = dict(line.split("=", 1) for line in text.strip().splitlines())
        assert fields["estimand"] == "ATE"
        est = float(fields["estimate"])
        assert np.isfinite(est)
        assert float(fields["ci_low"]) <= est <= float(fields["ci_high"])

    def test_baseline_matches_library(self, toy_inputs, tmp_path):
        from deconfound import dml

        rep, lab = toy_inputs
        out = str(tmp_path / "dim")
        rc = cli.main(["baseline", "--representations", rep, "--labels", lab,
                       "--out", out])
        assert rc == cli.EXIT_OK
        text = (tmp_path / "dim" / "estimate.txt").read_text()
        fields = dict(line.split("=", 1) for line in text.strip().splitlines())
        ds = data.load_dataset(rep, lab)
        ref = dml.difference_in_means(ds, 0.95)
        assert float(fields["estimate"]) == ref.estimate

    def test_diagnose_outputs(self, toy_inputs, tmp_path):
        rep, lab = toy_inputs
        out = str(tmp_path / "diag")
        rc = cli.main(["diagnose", *_fast_flags(rep, lab, out)])
        assert rc == cli.EXIT_OK
        names = set(os.listdir(out))
        assert {"diagnostics.txt", "propensity_hist.csv", "overlap.png",
                "manifest.ini"} <= names


class TestErrors:
    def test_missing_inputs_is_config_error(self, tmp_path):
        rc = cli.main(["estimate-ate", "--out", str(tmp_path / "x")])
        assert rc == cli.EXIT_CONFIG

    def test_late_without_t_tilde(self, tmp_path):
        rng = rng_for(9, "cli-late")
        n = 120
        t = rng.integers(0, 2, n)
        rep = str(tmp_path / "r.bin"); lab = str(tmp_path / "l.csv")
        data.write_representations(rng.standard_normal((n, 8)), rep)
        data.write_labels(lab, [f"d{i}" for i in range(n)],
                          rng.standard_normal(n), t)
        rc = cli.main(["estimate-late",
                       *_fast_flags(rep, lab, str(tmp_path / "o"))])
        assert rc == cli.EXIT_VALIDATION

    def test_bad_representation_file(self, tmp_path):
        rep = tmp_path / "r.bin"; lab = tmp_path / "l.csv"
        rep.write_bytes(b"not a representation file")
        data.write_labels(str(lab), ["a"], [1.0], [1])
        rc = cli.main(["estimate-ate", "--representations", str(rep),
                       "--labels", str(lab), "--out", str(tmp_path / "o")])
        assert rc == cli.EXIT_IO

    def test_bad_config_key(self, tmp_path):
        cfgf = tmp_path / "c.ini"
        cfgf.write_text("[run]\nbogus = 1\n")
        rc = cli.main(["estimate-ate", "--config", str(cfgf)])
        assert rc == cli.EXIT_CONFIG


class TestConfigPrecedence:
    def test_flags_override_file(self, tmp_path):
        cfgf = tmp_path / "c.ini"
        cfgf.write_text("[run]\nseed = 3\nci_level = 0.9\n")
        parser = cli.build_parser()
        args = parser.parse_args(["simulate", "--config", str(cfgf),
                                  "--seed", "11"])
        cfg = cli.resolve_config(args)
        assert cfg["run.seed"] == 11          # flag wins
        assert cfg["run.ci_level"] == 0.9     # file beats default
        assert cfg["folds.k"] == 2            # untouched default

    def test_bool_flag_round_trip(self):
        parser = cli.build_parser()
        args = parser.parse_args(["simulate", "--redraw-design"])
        assert cli.resolve_config(args)["simulate.redraw_design"] is True
        args = parser.parse_args(["simulate", "--no-redraw-design"])
        assert cli.resolve_config(args)["simulate.redraw_design"] is False


class TestReplay:
    def test_estimate_replay_byte_identical(self, toy_inputs, tmp_path):
        rep, lab = toy_inputs
        first = str(tmp_path / "first")
        rc = cli.main(["estimate-ate", *_fast_flags(rep, lab, first)])
        assert rc == cli.EXIT_OK
        second = str(tmp_path / "second")
        rc = cli.main(["replay", os.path.join(first, "manifest.ini"),
                       "--out", second])
        assert rc == cli.EXIT_OK
        assert _hash_dir(first) == _hash_dir(second)

    def test_replay_in_place(self, toy_inputs, tmp_path):
        rep, lab = toy_inputs
        out = str(tmp_path / "run")
        cli.main(["diagnose", *_fast_flags(rep, lab, out)])
        before = _hash_dir(out)
        rc = cli.main(["replay", os.path.join(out, "manifest.ini")])
        assert rc == cli.EXIT_OK
        assert _hash_dir(out) == before

    def test_inputs_not_mutated(self, toy_inputs, tmp_path):
        rep, lab = toy_inputs
        pre = [hashlib.sha256(open(p, "rb").read()).hexdigest()
               for p in (rep, lab)]
        cli.main(["estimate-ate", *_fast_flags(rep, lab, str(tmp_path / "o"))])
        post = [hashlib.sha256(open(p, "rb").read()).hexdigest()
                for p in (rep, lab)]
        assert pre == post


class TestSimulateCommand:
    def test_simulate_deterministic(self, tmp_path):
        flags = ["simulate", "--preset", "weak-separable", "--method", "oracle",
                 "--trials", "50", "--n", "300", "--d-r", "16", "--seed", "21"]
        a = str(tmp_path / "a"); b = str(tmp_path / "b")
        assert cli.main([*flags, "--out", a]) == cli.EXIT_OK
        assert cli.main([*flags, "--out", b]) == cli.EXIT_OK
        ha, hb = _hash_dir(a), _hash_dir(b)
        assert ha == hb
        assert {"summary.txt", "trials.csv", "sampling.png", "manifest.ini"} <= set(ha)

    def test_bad_preset(self, tmp_path):
        rc = cli.main(["simulate", "--preset", "gentle", "--out",
                       str(tmp_path / "o")])
        assert rc == cli.EXIT_CONFIG
