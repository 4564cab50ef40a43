"""Raw-data ingestion formulas and the batch CLI (exit codes, artifacts,
manifest determinism)."""

import json

import numpy as np
import pandas as pd
import pytest

from prefbounds.cli import run_experiment
from prefbounds.data import (attach_var_share, inflation, ingest, real_return,
                             shf_annual_consumption, shf_variance_recipe,
                             weighted_variance)
from prefbounds.errors import ValidationError
from prefbounds.inference import synthetic_wedge_panel


class TestTransforms:
    def test_inflation_is_log_price_ratio(self):
        P = np.array([100.0, 102.0, 101.0])
        pi = inflation(P)
        assert np.isnan(pi[0])
        np.testing.assert_allclose(pi[1:], [np.log(1.02),
                                            np.log(101.0 / 102.0)])

    def test_real_return_alignment(self):
        # R[t+1] = (1 + i[t]) / (1 + pi[t+1])
        i = np.array([0.02, 0.03, 0.01])
        pi = np.array([np.nan, 0.01, 0.02])
        R = real_return(i, pi)
        assert np.isnan(R[0])
        assert R[1] == pytest.approx(1.02 / 1.01)
        assert R[2] == pytest.approx(1.03 / 1.02)

    def test_rejects_nonpositive_deflator(self):
        with pytest.raises(ValidationError):
            inflation(np.array([100.0, -1.0]))


class TestIngestion:
    def test_per_capita_real_consumption_formula(self, synthetic_macro_raw):
        panel = ingest(synthetic_macro_raw, rate_columns={"R_g": "i_g"})
        raw = synthetic_macro_raw
        oracle = (raw["C_tot"].to_numpy()
                  / (raw["Pop"].to_numpy() * raw["P"].to_numpy()) * 100.0)
        np.testing.assert_allclose(panel.frame["C"], oracle, atol=0.0)

    def test_hours_and_wage_transforms(self, synthetic_macro_raw):
        panel = ingest(synthetic_macro_raw, rate_columns={},
                       hours_column="H_tot", wage_column="W_tot")
        raw = synthetic_macro_raw
        np.testing.assert_allclose(
            panel.frame["L"], raw["H_tot"] / raw["Pop"], atol=0.0)
        np.testing.assert_allclose(
            panel.frame["W"], raw["W_tot"] / raw["H_tot"], atol=0.0)

    def test_return_columns_registered(self, synthetic_macro_raw):
        panel = ingest(synthetic_macro_raw,
                       rate_columns={"R_g": "i_g", "R_e": "i_e"})
        assert set(panel.return_columns) == {"R_g", "R_e"}
        assert "R_g" in panel.frame.columns

    def test_noncontiguous_dates_rejected(self, synthetic_macro_raw):
        raw = synthetic_macro_raw.drop(index=3).reset_index(drop=True)
        with pytest.raises(ValidationError):
            ingest(raw, rate_columns={"R_g": "i_g"})

    def test_missing_raw_column_rejected(self, synthetic_macro_raw):
        with pytest.raises(ValidationError):
            ingest(synthetic_macro_raw.drop(columns=["P"]))

    def test_attach_var_share_is_constant_column(self, synthetic_macro_raw):
        panel = ingest(synthetic_macro_raw, rate_columns={"R_g": "i_g"})
        out = attach_var_share(panel, 0.04)
        assert np.all(out.frame["var_share"] == 0.04)
        assert "var_share" not in panel.frame.columns  # original untouched


class TestSurveyRecipe:
    def test_annual_consumption_components(self):
        survey = pd.DataFrame({
            "rent_monthly": [500.0], "cars_annual": [1200.0],
            "durables_annual": [600.0], "nondurables_monthly": [300.0]})
        c = shf_annual_consumption(survey)
        assert c[0] == pytest.approx(12.0 * (500.0 + 100.0 + 50.0 + 300.0))

    def test_weighted_variance_two_point_hand_value(self):
        # equal weights on {a, b}: variance = (b - a)^2 / 4
        assert weighted_variance([1.0, 3.0], [2.0, 2.0]) == pytest.approx(1.0)

    def test_weights_rescale_invariant(self, rng):
        v = rng.random(30)
        w = rng.random(30)
        assert weighted_variance(v, w) == pytest.approx(
            weighted_variance(v, 10.0 * w))

    def test_variance_recipe_share_normalization(self):
        survey = pd.DataFrame({
            "weight": [1.0, 1.0],
            "rent_monthly": [500.0, 1000.0], "cars_annual": [0.0, 0.0],
            "durables_annual": [0.0, 0.0],
            "nondurables_monthly": [0.0, 0.0]})
        out = shf_variance_recipe(survey)
        c = np.array([6000.0, 12000.0])
        mean = 9000.0
        assert out["mean"] == pytest.approx(mean)
        assert out["var_share"] == pytest.approx(
            np.mean((c / mean - 1.0) ** 2))
        assert out["n_households"] == 2


@pytest.fixture()
def cli_env(tmp_path):
    """Config file plus the small input artifacts the commands read."""
    panel = synthetic_wedge_panel(T=120, B=0.1, seed=3)
    panel_path = tmp_path / "panel.csv"
    panel.to_csv(panel_path, index=False)

    rng = np.random.default_rng(0)
    T = 160
    b = np.zeros(T)
    z = np.zeros(T)
    for t in range(1, T):
        b[t] = 0.9 * b[t - 1] + 0.1 * rng.standard_normal()
        z[t] = 0.4 * z[t - 1] + 0.1 * rng.standard_normal()
    b_obs = np.full(T, np.nan)
    for t in range(7, T, 8):
        b_obs[t] = b[t - 7:t + 1].mean()
    series_path = tmp_path / "series.csv"
    pd.DataFrame({"pi_obs": b + z, "b_obs": b_obs}).to_csv(
        series_path, index=False)

    ap = panel.copy()
    ap["R_e"] = ap["R"] * np.exp(0.02 * rng.standard_normal(len(ap)))
    ap = ap.rename(columns={"R": "R_g"})
    ap_path = tmp_path / "ap_panel.csv"
    ap.to_csv(ap_path, index=False)

    cfg = tmp_path / "cfg.ini"
    cfg.write_text(f"""
[moments]
panel = {panel_path}
attach_capital_return = false
instruments = C:1, C:2
returns = R
use_intratemporal = false
positivity_transform = exp

[estimator]
free = omega, beta
fixed_eta = 1.0
fixed_h = 0.0

[inference]
draws = 2000
level = 0.95

[mixed_freq]
series = {series_path}
n_avg = 8
obs_var_b = 1e-6

[analytic_bounds]
beta = 0.9
omega = 2.0
r = 0.05
y_vals = 0.99, 1.01
y_probs = 0.5, 0.5
x_max = 40.0

[asset_pricing]
panel = {ap_path}
equity_return = R_e
bond_return = R_g

[theta]
omega = 2.0
eta = 1.0
h = 0.0
beta = 0.97
""")
    return tmp_path, cfg


class TestCLI:
    def test_estimate_writes_estimates_and_manifest(self, cli_env):
        tmp, cfg = cli_env
        out = tmp / "est"
        code = run_experiment(["estimate", "--config", str(cfg),
                               "--out-dir", str(out)])
        assert code == 0
        est = json.loads((out / "estimates.json").read_text())
        assert set(est) == {"with_B", "without_B"}
        assert est["without_B"]["Q_min"] < 1e-6
        manifest = json.loads((out / "manifest_estimate.json").read_text())
        assert manifest["command"] == "estimate"
        assert manifest["backend"] in ("numba", "numpy")

    def test_infer_reports_containment(self, cli_env):
        tmp, cfg = cli_env
        out = tmp / "inf"
        code = run_experiment(["infer", "--config", str(cfg),
                               "--out-dir", str(out)])
        assert code == 0
        sets = json.loads((out / "confidence_sets.json").read_text())
        assert set(sets) == {"with_B", "without_B", "containment"}
        for tag in ("with_B", "without_B"):
            assert set(sets[tag]) == {"criterion_level", "quantile"}

    def test_single_margin_flag(self, cli_env):
        tmp, cfg = cli_env
        out = tmp / "inf1"
        code = run_experiment(["infer", "--config", str(cfg),
                               "--out-dir", str(out), "--without-B"])
        assert code == 0
        sets = json.loads((out / "confidence_sets.json").read_text())
        assert set(sets) == {"without_B"}

    def test_filter_b_writes_extraction_and_gain(self, cli_env):
        tmp, cfg = cli_env
        out = tmp / "fb"
        code = run_experiment(["filter-b", "--config", str(cfg),
                               "--out-dir", str(out)])
        assert code == 0
        report = json.loads((out / "gain_report.json").read_text())
        assert 0.5 <= report["steady_gain"] <= 1.0
        ex = pd.read_csv(out / "extraction.csv")
        assert len(ex) == 160

    def test_bounds_artifacts(self, cli_env):
        tmp, cfg = cli_env
        out = tmp / "bd"
        code = run_experiment(["bounds", "--config", str(cfg),
                               "--out-dir", str(out)])
        assert code == 0
        summary = json.loads((out / "bounds.json").read_text())
        assert summary["lambda1"] == pytest.approx(-summary["rho"])
        assert (out / "toy_policy.csv").exists()
        assert (out / "refinement_curve.csv").exists()

    def test_premium_artifacts(self, cli_env):
        tmp, cfg = cli_env
        out = tmp / "pr"
        code = run_experiment(["premium", "--config", str(cfg),
                               "--out-dir", str(out)])
        assert code == 0
        pred = json.loads((out / "premium.json").read_text())
        assert {"observed", "predicted", "counterfactual"} <= set(pred)

    def test_report_collects_manifests(self, cli_env):
        tmp, cfg = cli_env
        out = tmp / "bd2"
        run_experiment(["bounds", "--config", str(cfg),
                        "--out-dir", str(out)])
        code = run_experiment(["report", "--config", str(cfg),
                               "--out-dir", str(out)])
        assert code == 0
        report = json.loads((out / "report.json").read_text())
        assert "bounds.json" in report["artifacts"]
        assert "manifest_bounds" in report

    def test_missing_config_exits_2(self, tmp_path):
        code = run_experiment(["bounds", "--config",
                               str(tmp_path / "absent.ini")])
        assert code == 2

    def test_missing_config_key_exits_2(self, cli_env, tmp_path):
        _, cfg = cli_env
        text = cfg.read_text().replace("omega = 2.0\n", "", 1)
        bad = tmp_path / "bad.ini"
        bad.write_text(text)
        code = run_experiment(["bounds", "--config", str(bad),
                               "--out-dir", str(tmp_path / "o")])
        assert code == 2

    def test_missing_input_file_exits_2(self, cli_env, tmp_path):
        _, cfg = cli_env
        text = cfg.read_text().replace("panel.csv", "nope.csv")
        bad = tmp_path / "bad2.ini"
        bad.write_text(text)
        code = run_experiment(["estimate", "--config", str(bad),
                               "--out-dir", str(tmp_path / "o")])
        assert code == 2

    def test_manifest_is_deterministic(self, cli_env):
        tmp, cfg = cli_env
        a, b = tmp / "m1", tmp / "m2"
        run_experiment(["bounds", "--config", str(cfg), "--out-dir", str(a)])
        run_experiment(["bounds", "--config", str(cfg), "--out-dir", str(b)])
        assert (a / "manifest_bounds.json").read_bytes() == \
            (b / "manifest_bounds.json").read_bytes()
        assert (a / "bounds.json").read_bytes() == \
            (b / "bounds.json").read_bytes()
