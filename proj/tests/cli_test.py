import csv
import io
import json
import math
import os
import pathlib
import subprocess
import sys
import tempfile
import unittest

CLI = None


def run(*args, env=None, check=True):
    full_env = dict(os.environ)
    full_env.pop("VLSF_SEED", None)
    if env:
        full_env.update(env)
    p = subprocess.run([CLI, *args], capture_output=True, text=True, env=full_env)
    if check and p.returncode != 0:
        raise AssertionError(f"exit {p.returncode}: {p.stderr}")
    return p


def rows(text):
    return list(csv.DictReader(io.StringIO(text)))


class Cdf(unittest.TestCase):
    def test_single_row_exact(self):
        out = rows(run("cdf", "--channel", "bec:delta=0.5", "--n", "10", "--gamma", "3.5",
                       "--oracle", "exact").stdout)
        self.assertEqual(len(out), 1)
        self.assertEqual(float(out[0]["p_oracle"]), 0.171875)

    def test_monte_carlo_agreement(self):
        trials = 1000000
        text = run("cdf", "--channel", "awgn:snr=1", "--n", "100", "--gamma-grid", "auto",
                   "--oracle", "mc", "--trials", str(trials), "--seed", "7").stdout
        out = rows(text)
        self.assertEqual(len(out), 200)
        for r in out:
            p = float(r["p_saddle_lower"])
            # Binomial standard error under the model probability.
            se = math.sqrt(p * (1.0 - p) / trials)
            self.assertLessEqual(abs(p - float(r["p_oracle"])), 4.0 * se, r)
        again = run("cdf", "--channel", "awgn:snr=1", "--n", "100", "--gamma-grid", "auto",
                    "--oracle", "mc", "--trials", str(trials), "--seed", "7").stdout
        self.assertEqual(text, again)


class CdfBracketing(unittest.TestCase):
    def test_exact_between_overshoot_extremes(self):
        out = rows(run("cdf", "--channel", "bsc:delta=0.11", "--n", "100", "--gamma-grid",
                       "20:60:200", "--oracle", "exact").stdout)
        self.assertEqual(len(out), 200)
        for r in out:
            lo, hi, ex = (float(r[k]) for k in ("p_saddle_lower", "p_saddle_upper", "p_oracle"))
            self.assertLessEqual(lo, ex, r)
            self.assertLessEqual(ex, hi, r)


class Optimize(unittest.TestCase):
    def test_certified(self):
        rec = json.loads(run("optimize", "--channel", "awgn:snr=1", "--bits", "100", "--eps",
                             "1e-3", "--t", "3", "--rule", "p2", "--certify").stdout)
        self.assertLessEqual(rec["certify"]["rate_gap"], 0.005)
        self.assertLessEqual(rec["residual"], 1e-9)

    def test_single_attempt(self):
        with tempfile.TemporaryDirectory() as d:
            path = os.path.join(d, "r.json")
            run("optimize", "--channel", "awgn:snr=1", "--bits", "100", "--eps", "1e-3", "--t",
                "1", "--rule", "p1", "-o", path)
            rec = json.loads(pathlib.Path(path).read_text())
        self.assertEqual(len(rec["schedule"]["instants"]), 1)
        self.assertEqual(rec["objective"], rec["schedule"]["instants"][0])

    def test_both_rules(self):
        with tempfile.TemporaryDirectory() as d:
            path = os.path.join(d, "r.json")
            run("optimize", "--channel", "bsc:delta=0.11", "--bits", "60", "--eps", "1e-3",
                "--t", "3", "--rule", "both", "-o", path)
            first = pathlib.Path(path).read_text()
            recs = json.loads(first)
            run("optimize", "--channel", "bsc:delta=0.11", "--bits", "60", "--eps", "1e-3",
                "--t", "3", "--rule", "both", "-o", path)
            self.assertEqual(first, pathlib.Path(path).read_text())
        self.assertEqual([r["rule"] for r in recs], ["p1", "p2"])
        self.assertGreaterEqual(recs[1]["rate_bits"], recs[0]["rate_bits"])

    def test_config_file_and_override(self):
        with tempfile.TemporaryDirectory() as d:
            cfg = os.path.join(d, "cfg.json")
            pathlib.Path(cfg).write_text(json.dumps(
                {"channel": "awgn:snr=1", "bits": 100, "eps": 1e-3, "t": 1, "rule": "p1"}))
            a = json.loads(run("optimize", "--config", cfg, "-o", "-").stdout)
            b = json.loads(run("optimize", "--config", cfg, "--bits", "30", "-o", "-").stdout)
        self.assertEqual(a["bits"], 100)
        self.assertEqual(b["bits"], 30)


class Sweep(unittest.TestCase):
    def test_gain_in_message_size(self):
        text = run("sweep", "--channel", "awgn:snr=1", "--bits", "30:120:10", "--eps", "1e-3",
                   "--t", "3", "--rule", "both").stdout
        out = rows(text)
        self.assertEqual(len(out), 20)
        rate = {(float(r["bits"]), r["rule"]): float(r["rate_bits"]) for r in out}
        gains = []
        for k in range(30, 121, 10):
            self.assertGreaterEqual(rate[(k, "p2")], rate[(k, "p1")])
            gains.append(rate[(k, "p2")] / rate[(k, "p1")] - 1.0)
        self.assertGreater(gains[0], gains[-1])
        self.assertEqual(list(out[0].keys()),
                         "channel,param,bits,eps,t,rule,rate_bits,objective,gamma,"
                         "n1,n2,n3,n4,n5,n6,n7,n8,feasible".split(","))

    def test_attempts_and_dense_reference(self):
        text = run("sweep", "--channel", "awgn:snr=1", "--bits", "30,100", "--t", "1:8",
                   "--rule", "both", "--dense-ref").stdout
        out = rows(text)
        self.assertEqual(len(out), 32)
        for k in ("30", "100"):
            for rule in ("p1", "p2"):
                cells = sorted((r for r in out if r["bits"] == k and r["rule"] == rule),
                               key=lambda r: int(r["t"]))
                rates = [float(r["rate_bits"]) for r in cells]
                for a, b in zip(rates, rates[1:]):
                    self.assertGreaterEqual(b, a - 1e-9)
                if rule == "p1":
                    for r in cells:
                        self.assertGreaterEqual(float(r["dense_rate_bits"]), float(r["rate_bits"]))

    def test_infeasible_cells(self):
        p = run("sweep", "--channel", "awgn:snr=1", "--bits", "30,40000", "--t", "2", "--rule",
                "p1")
        out = rows(p.stdout)
        self.assertEqual([r["feasible"] for r in out], ["1", "0"])
        self.assertIn("warning", p.stderr)
        p = run("sweep", "--channel", "awgn:snr=1", "--bits", "40000", "--t", "2", "--rule",
                "p1", check=False)
        self.assertEqual(p.returncode, 4)


class Simulate(unittest.TestCase):
    def test_schedule_file(self):
        with tempfile.TemporaryDirectory() as d:
            sched = os.path.join(d, "sched.json")
            run("optimize", "--channel", "bsc:delta=0.11", "--bits", "14", "--eps", "1e-2",
                "--t", "3", "--rule", "p1", "-o", sched)
            args = ("simulate", "--schedule", sched, "--msim", "1024", "--trials", "100000",
                    "--seed", "3")
            text = run(*args).stdout
            self.assertEqual(text, run(*args).stdout)
            self.assertEqual(text, run(*args, "--workers", "3").stdout)
            rec = json.loads(text)
            emp, bound = rec["empirical"], rec["bound"]
            self.assertLessEqual(emp["err_rate"], bound["error"] + 3.0 * emp["err_stderr"])
            self.assertTrue(bound["err_within"])
            self.assertTrue(bound["tau_within"])

            env_run = run("simulate", "--schedule", sched, "--msim", "64", "--trials", "5000",
                          env={"VLSF_SEED": "11"}).stdout
            flag_run = run("simulate", "--schedule", sched, "--msim", "64", "--trials", "5000",
                           "--seed", "11").stdout
            both = run("simulate", "--schedule", sched, "--msim", "64", "--trials", "5000",
                       "--seed", "12", env={"VLSF_SEED": "11"}).stdout
            self.assertEqual(env_run, flag_run)
            self.assertEqual(json.loads(both)["seed"], 12)


class Errors(unittest.TestCase):
    def check_exit(self, code, *args):
        p = run(*args, check=False)
        self.assertEqual(p.returncode, code, p.stderr)
        self.assertEqual(p.stdout, "")
        self.assertEqual(len(p.stderr.strip().splitlines()), 1, p.stderr)

    def test_codes(self):
        self.check_exit(2, "cdf", "--channel", "qam:snr=1", "--n", "10", "--gamma", "1")
        self.check_exit(2, "cdf", "--channel", "awgn:snr=1", "--n", "10", "--bogus")
        self.check_exit(2, "optimize", "--channel", "awgn:snr=1", "--bits", "30", "--rule", "p3")
        self.check_exit(3, "cdf", "--channel", "awgn:snr=1", "--n", "10", "--gamma", "1",
                        "--oracle", "exact")
        self.check_exit(4, "optimize", "--channel", "awgn:snr=1", "--bits", "40000", "--t", "2")
        self.check_exit(5, "optimize", "--channel", "awgn:snr=1", "--bits", "30", "--t", "2",
                        "-o", "/nonexistent/dir/r.json")
        self.check_exit(5, "simulate", "--schedule", "/nonexistent/sched.json")


if __name__ == "__main__":
    CLI = sys.argv.pop(1)
    unittest.main(verbosity=2)
