import json

import pytest

from noisysum.cli import main

SIM_CSV = "index,x,p,q\n1,1.0,0.5,0.75\n2,0.0,0.5,0.25\n"
ID_CSV = "index,x,p,q\n1,1.0,0.5,0.5\n2,0.0,0.5,0.5\n"
NO_Q_CSV = "index,x,p\n1,1.0,0.5\n2,0.0,0.5\n"
ONES_CSV = "index,x\n1,1.0\n2,1.0\n"


@pytest.fixture
def files(tmp_path):
    paths = {}
    for name, text in (("sim.csv", SIM_CSV), ("id.csv", ID_CSV),
                       ("noq.csv", NO_Q_CSV), ("ones.csv", ONES_CSV)):
        p = tmp_path / name
        p.write_text(text)
        paths[name] = str(p)
    paths["dir"] = tmp_path
    return paths


def run(files, *argv, out="out"):
    target = files["dir"] / out
    rc = main([*argv, "--output", str(target)])
    text = target.read_text() if target.exists() else None
    return rc, text


class TestEstimate:
    def test_golden_identity_pair(self, files):
        # pinned seed, q = p: frozen full output; estimate within
        # 5*sqrt(var_hh/m) = 0.05 of mu = 1
        rc, text = run(files, "estimate", "--input", files["id.csv"],
                       "--k", "1", "--m", "10000", "--t", "100", "--seed", "123")
        assert rc == 0
        got = json.loads(text)
        assert got == {
            "estimate": 1.0002,
            "k": 1,
            "m": 10000,
            "t": 100,
            "pilot_W": 1.16,
            "xi_values": [-0.15979999999999994],
            "seed": 123,
        }
        assert abs(got["estimate"] - 1.0) <= 0.05

    def test_reruns_are_byte_identical(self, files):
        argv = ("estimate", "--input", files["sim.csv"],
                "--k", "2", "--m", "500", "--seed", "9")
        _, a = run(files, *argv, out="a.json")
        _, b = run(files, *argv, out="b.json")
        assert a == b

    def test_plan_from_accuracy_targets(self, files):
        # measured gamma 0.5, n_tilde 2, var_hh 1 -> k=2, m=6, t=17
        rc, text = run(files, "estimate", "--input", files["sim.csv"],
                       "--eps1", "0.25", "--eps2", "1.0", "--seed", "0")
        assert rc == 0
        got = json.loads(text)
        assert (got["k"], got["m"], got["t"]) == (2, 6, 17)

    def test_gamma_flag_loosens_the_plan(self, files):
        rc, text = run(files, "estimate", "--input", files["sim.csv"],
                       "--gamma", "0.6", "--eps1", "0.25", "--eps2", "1.0")
        assert rc == 0
        got = json.loads(text)
        assert (got["k"], got["m"], got["t"]) == (3, 7, 17)

    def test_gamma_below_measured_rejected(self, files):
        rc, text = run(files, "estimate", "--input", files["sim.csv"],
                       "--gamma", "0.3", "--k", "1", "--m", "10")
        assert rc == 2
        assert text is None

    def test_no_sampling_source_is_infeasible(self, files):
        rc, text = run(files, "estimate", "--input", files["noq.csv"],
                       "--k", "1", "--m", "10")
        assert rc == 3
        assert text is None

    def test_needs_plan_or_explicit_sizes(self, files):
        rc, _ = run(files, "estimate", "--input", files["sim.csv"])
        assert rc == 2

    def test_stdout_when_no_output_flag(self, files, capsys):
        rc = main(["estimate", "--input", files["sim.csv"],
                   "--k", "1", "--m", "50", "--seed", "1"])
        assert rc == 0
        assert json.loads(capsys.readouterr().out)["k"] == 1


class TestEstimateOffline:
    @pytest.fixture
    def samples(self, files):
        p = files["dir"] / "samples.txt"
        p.write_text("1\n1\n2\n1\n2\n2\n1\n1\n")
        return str(p)

    def test_single_stage_frozen(self, files, samples):
        # Y=(5,3), m=8, pilot 0: A_1 = 10/8 * ... = 1.25,
        # A_2 = C(5,2)*4 / C(8,2) = 10/7; zeta_2 = 2.5 - 10/7
        rc, text = run(files, "estimate", "--input", files["noq.csv"],
                       "--samples", samples, "--k", "2")
        assert rc == 0
        got = json.loads(text)
        assert got["t"] == 0 and got["m"] == 8
        assert got["estimate"] == pytest.approx(2.5 - 10.0 / 7.0, rel=1e-12)

    def test_pilot_split(self, files, samples):
        rc, text = run(files, "estimate", "--input", files["noq.csv"],
                       "--samples", samples, "--k", "2", "--t", "3")
        assert rc == 0
        got = json.loads(text)
        assert got["t"] == 3 and got["m"] == 5
        # pilot from (1,1,2): mean of (2,2,0) = 4/3
        assert got["pilot_W"] == pytest.approx(4.0 / 3.0, rel=1e-12)

    def test_order_from_accuracy_flags(self, files, samples):
        rc, text = run(files, "estimate", "--input", files["noq.csv"],
                       "--samples", samples, "--gamma", "0.5", "--eps1", "0.25")
        assert rc == 0
        assert json.loads(text)["k"] == 2

    def test_needs_k_or_targets(self, files, samples):
        rc, _ = run(files, "estimate", "--input", files["noq.csv"],
                    "--samples", samples)
        assert rc == 2

    def test_pilot_cannot_eat_all_samples(self, files, samples):
        rc, _ = run(files, "estimate", "--input", files["noq.csv"],
                    "--samples", samples, "--k", "1", "--t", "8")
        assert rc == 2


class TestSimulate:
    def test_zero_one_csv_schema(self, files):
        rc, text = run(files, "simulate", "--exp", "zero-one", "--n", "100",
                       "--trials", "30", "--gamma", "0.5", "--eps1", "0.25",
                       "--seed", "5")
        assert rc == 0
        header, row = text.strip().split("\n")
        assert header == ("exp,n,gamma,eps1,eps2,k,m,t,T,seed,"
                          "mean,var,q50,q90,q99,success_rate")
        fields = row.split(",")
        assert fields[0] == "zero-one"
        assert fields[5] == "2" and fields[6] == "160"  # k, m
        assert 0.0 <= float(fields[-1]) <= 1.0

    def test_thread_count_never_changes_bytes(self, files):
        argv = ("simulate", "--exp", "zero-one", "--n", "100", "--trials", "40",
                "--gamma", "0.5", "--eps1", "0.25", "--seed", "5")
        _, one = run(files, *argv, "--threads", "1", out="t1.csv")
        _, eight = run(files, *argv, "--threads", "8", out="t8.csv")
        assert one == eight

    def test_threads_from_environment(self, files, monkeypatch):
        argv = ("simulate", "--exp", "zero-one", "--n", "50", "--trials", "20",
                "--gamma", "0.5", "--eps1", "0.25", "--seed", "1")
        monkeypatch.delenv("NOISYSUM_THREADS", raising=False)
        _, plain = run(files, *argv, out="a.csv")
        monkeypatch.setenv("NOISYSUM_THREADS", "6")
        _, via_env = run(files, *argv, out="b.csv")
        assert plain == via_env

    def test_bad_thread_values(self, files, monkeypatch):
        argv = ("simulate", "--exp", "zero-one", "--n", "50", "--trials", "20",
                "--gamma", "0.5", "--eps1", "0.25")
        rc, _ = run(files, *argv, "--threads", "0")
        assert rc == 2
        monkeypatch.setenv("NOISYSUM_THREADS", "many")
        rc, _ = run(files, *argv)
        assert rc == 2

    def test_trials_mode(self, files):
        rc, text = run(files, "simulate", "--exp", "trials", "--input",
                       files["sim.csv"], "--k", "2", "--m", "50", "--t", "20",
                       "--trials", "25", "--seed", "4",
                       "--functional", "positive_sum", "--eps1", "0.3",
                       "--eps2", "0.3", "--format", "json")
        assert rc == 0
        (row,) = json.loads(text)
        assert row["exp"] == "trials"
        assert (row["k"], row["m"], row["t"], row["T"]) == (2, 50, 20, 25)

    def test_trials_mode_requires_q(self, files):
        rc, text = run(files, "simulate", "--exp", "trials", "--input",
                       files["noq.csv"], "--k", "1", "--m", "10",
                       "--trials", "5")
        assert rc == 2
        assert text is None  # nothing written on failure

    def test_bias_decay_frozen_table(self, files):
        rc, text = run(files, "simulate", "--exp", "bias-decay", "--input",
                       files["ones.csv"], "--gamma", "0.5", "--kmax", "4")
        assert rc == 0
        assert text == (
            "k,exact_bias,bound,ratio\n"
            "1,0.0,1.0,0.0\n"
            "2,0.5,0.5,1.0\n"
            "3,0.0,0.25,0.0\n"
            "4,0.125,0.125,1.0\n"
        )

    def test_distinguish_json(self, files):
        rc, text = run(files, "simulate", "--exp", "distinguish", "--k", "1",
                       "--gamma", "1/2", "--n0", "30", "--m-grid", "10,40",
                       "--trials", "30", "--seed", "2", "--format", "json")
        assert rc == 0
        rows = json.loads(text)
        assert [r["m"] for r in rows] == [10, 40]
        for r in rows:
            assert set(r) == {"m", "mean_ones_large", "mean_other", "separation_z"}

    def test_distinguish_rejects_empty_grid(self, files):
        rc, _ = run(files, "simulate", "--exp", "distinguish", "--k", "1",
                    "--gamma", "1/2", "--n0", "30", "--m-grid", ",",
                    "--trials", "30")
        assert rc == 2


class TestOracle:
    def test_frozen_moments(self, files):
        rc, text = run(files, "oracle", "--input", files["sim.csv"],
                       "--m", "2", "--k", "1")
        assert rc == 0
        got = json.loads(text)
        assert got["expectation"] == pytest.approx(1.5, abs=1e-12)
        assert got["variance"] == pytest.approx(0.375, abs=1e-12)
        assert got["outcome_count"] == 4
        assert got["total_prob"] == pytest.approx(1.0, abs=1e-12)

    def test_budget_exceeded_is_exit_3(self, files, tmp_path):
        big = tmp_path / "big.csv"
        lines = ["index,x,q"] + [f"{i},1.0,0.1" for i in range(1, 11)]
        big.write_text("\n".join(lines) + "\n")
        rc, _ = run(files, "oracle", "--input", str(big), "--m", "10", "--k", "1")
        assert rc == 3

    def test_requires_q_column(self, files):
        rc, _ = run(files, "oracle", "--input", files["noq.csv"],
                    "--m", "2", "--k", "1")
        assert rc == 2


class TestIdentities:
    def test_clean_run(self, files):
        rc, text = run(files, "identities", "--kmax", "8", "--trials", "20")
        assert rc == 0
        got = json.loads(text)
        assert got["ok"] is True
        assert got["collision_coefficient_mismatches"] == 0
        assert got["tolerance"] == 1e-9
        for key in ("bias_cancellation_max_residual",
                    "centered_product_max_residual",
                    "centered_sum_max_residual"):
            assert got[key] <= 1e-9

    def test_violation_maps_to_exit_1(self, files, monkeypatch):
        def fake(kmax, seed=0, trials=100):
            return {
                "kmax": kmax, "seed": seed, "trials": trials,
                "collision_coefficient_mismatches": 0,
                "bias_cancellation_max_residual": 1e-3,
                "centered_product_max_residual": 0.0,
                "centered_sum_max_residual": 0.0,
            }

        monkeypatch.setattr("noisysum.cli.identity_report", fake)
        rc, text = run(files, "identities", "--kmax", "4")
        assert rc == 1
        assert json.loads(text)["ok"] is False  # report still written


class TestLowerbound:
    def test_exact_strings(self, files):
        rc, text = run(files, "lowerbound", "--k", "2", "--gamma", "1/2",
                       "--n0", "60")
        assert rc == 0
        got = json.loads(text)
        assert (got["n1"], got["n2"], got["gap"]) == ("50", "48", "2")
        assert got["closed_form_gap"] == "2"
        equal_flags = [m["equal"] for m in got["moments"]]
        assert equal_flags == [True, True, False]
        assert got["d1"]["levels"][0]["prob_den"] == 60

    def test_realize_and_instance(self, files):
        rc, text = run(files, "lowerbound", "--k", "2", "--gamma", "1/2",
                       "--n0", "60", "--realize", "--scenario", "ones-large",
                       "--seed", "3")
        assert rc == 0
        got = json.loads(text)
        assert got["realized"]["moment_error"] == 0.0
        assert (got["realized"]["n1"], got["realized"]["n2"]) == (50, 48)
        inst = got["instance"]
        assert inst["N"] == 98
        assert inst["true_sum"] == 50
        assert inst["closeness"] == pytest.approx(0.225)

    def test_float_gamma_string_must_be_exact(self, files):
        # Fraction("0.5") is exact; arbitrary text is not
        rc, _ = run(files, "lowerbound", "--k", "1", "--gamma", "0.5",
                    "--n0", "4")
        assert rc == 0
        rc, _ = run(files, "lowerbound", "--k", "1", "--gamma", "half",
                    "--n0", "4")
        assert rc == 2

    def test_gamma_domain(self, files):
        rc, _ = run(files, "lowerbound", "--k", "2", "--gamma", "3/4",
                    "--n0", "60")
        assert rc == 2


class TestArgumentErrors:
    def test_unknown_flag(self, files):
        assert main(["estimate", "--input", files["sim.csv"], "--bogus"]) == 2

    def test_unknown_subcommand(self):
        assert main(["frobnicate"]) == 2

    def test_help_exits_zero(self, capsys):
        assert main(["--help"]) == 0
        assert "estimate" in capsys.readouterr().out
