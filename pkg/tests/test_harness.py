import json
import math
import subprocess
import sys

import numpy as np
import pytest

from conftest import FIXTURES
from mflab.cli import main
from mflab.errors import ConfigError, InvalidArgumentError
from mflab.harness import (CSV_COLUMNS, OutputError, compare_baseline, config_from_dict, emit_outputs,
                           fit_rate, initial_data, load_config, parse_csv, reference_preset, render_csv,
                           replot, run_single, run_sweep)
from mflab.harness.output import manifest_without_timestamp
from mflab.harness.runner import sweep_trends


def small(**over):
    cfg = {
        "grid": {"M_per_particle": 3, "M_offset": 1, "spacing": 1.0},
        "particles": [2, 3],
        "interaction": {"kind": "gaussian", "sigma": 1.0, "strength": 1.0},
        "external_field": {"preset": "cosine_trap", "amplitude": 0.4},
        "horizon": 0.4,
        "samples": 3,
    }
    for k, v in over.items():
        cfg[k] = v
    return cfg


class TestConfig:
    def test_defaults(self):
        cfg = config_from_dict({"grid": {"M": 6}, "particles": [2], "interaction": {"kind": "zero"}})
        assert cfg.raw["grid"]["boundary"] == "periodic"
        assert cfg.sample_times == [0.0, 0.25, 0.5, 0.75, 1.0]
        assert cfg.mf_cfg.scheme == "rk4" and cfg.exact_cfg.krylov_dim == 20
        assert [w["kind"] for w in cfg.weights] == ["n", "m"]
        assert cfg.grid(2).spacing == 1.0

    @pytest.mark.parametrize("bad,key", [
        ({"colour": 1}, "colour"),
        ({"grid": {"M": 6, "pts": 3}}, "grid.pts"),
        ({"meanfield": {"order": 4}}, "meanfield.order"),
        ({"weights": [{"kind": "m", "gamma": 0.5, "beta": 1}]}, "weights.beta"),
    ])
    def test_unknown_key_named(self, bad, key):
        data = {"grid": {"M": 6}, "particles": [2], "interaction": {"kind": "zero"}}
        for k, v in bad.items():
            data[k] = {**data.get(k, {}), **v} if isinstance(v, dict) and k in data else v
        with pytest.raises(ConfigError, match=f"'{key}'"):
            config_from_dict(data)

    @pytest.mark.parametrize("patch", [
        {"particles": []}, {"particles": [2, 2]}, {"particles": [0]},
        {"grid": {"M": 6, "boundary": "open"}}, {"regime": {"name": "fast"}},
        {"horizon": -1}, {"sample_times": [0.5, 0.2]}, {"sample_times": [2.0]},
        {"initial": {"kind": "perturbed", "epsilon": 2}}, {"initial": {"kind": "magic"}},
        {"weights": [{"kind": "m", "gamma": 0}]}, {"interaction": {"kind": "power_law", "s": 3}},
        {"external_field": {"values": [1, 2]}}, {"external_field": {"preset": "box"}},
        {"meanfield": {"scheme": "strang_split", "exchange": True}},
        {"particles": [7]},
    ])
    def test_invalid(self, patch):
        data = {"grid": {"M": 6}, "particles": [2], "interaction": {"kind": "zero"}, **patch}
        with pytest.raises(ConfigError):
            config_from_dict(data)

    def test_missing_required(self):
        with pytest.raises(ConfigError, match="interaction"):
            config_from_dict({"grid": {"M": 6}, "particles": [2]})

    def test_affine_rule_cap_checked(self):
        cfg = config_from_dict({"grid": {"M_per_particle": 4}, "particles": [2, 3], "interaction": {"kind": "zero"}})
        assert cfg.points(3) == 12
        with pytest.raises(ConfigError, match="basis_cap"):
            config_from_dict({"grid": {"M_per_particle": 4}, "particles": [10], "interaction": {"kind": "zero"}})

    def test_load_and_echo(self, tmp_path, monkeypatch):
        monkeypatch.setenv("MFLAB_OUT", str(tmp_path / "out"))
        p = tmp_path / "c.json"
        p.write_text(json.dumps(small()))
        cfg = load_config(p, echo=True)
        echoed = json.loads((tmp_path / "out" / "config.resolved.json").read_text())
        assert echoed == cfg.raw

    def test_load_errors(self, tmp_path):
        with pytest.raises(ConfigError, match="not found"):
            load_config(tmp_path / "missing.json")
        p = tmp_path / "bad.json"
        p.write_text("{")
        with pytest.raises(ConfigError, match="invalid JSON"):
            load_config(p)

    def test_field_presets(self, tmp_path):
        cfg = config_from_dict(small(external_field={"preset": "harmonic", "amplitude": 2.0}))
        w = cfg.external_field(2)
        assert w.shape == (7,) and np.argmin(w) == 3
        csv = tmp_path / "w.csv"
        csv.write_text("x,value\n0,0\n10,5\n")
        cfg = config_from_dict(small(external_field={"csv": str(csv)}))
        np.testing.assert_allclose(cfg.external_field(2), 0.5 * cfg.grid(2).coords)

    def test_regimes(self):
        cfg = config_from_dict(small(regime={"name": "semiclassical"}))
        assert cfg.regime(8).hbar_eff == pytest.approx(0.5)
        assert cfg.interaction(8).beta == 1.0
        cfg = config_from_dict(small(regime={"name": "dilute", "beta": 0.25}))
        assert cfg.interaction(3).scale == pytest.approx(3 ** -0.25)


class TestRuns:
    def test_free_run_stays_uncorrelated(self):
        cfg = config_from_dict(small(interaction={"kind": "zero"}, initial={"kind": "packets", "momenta": 0.5}))
        res = run_single(cfg, 3)
        assert max(res.alpha["n"]) <= 1e-8 and max(res.tr_norm) <= 1e-7
        assert res.samples == 3 and len(res.energy_exact) == 3

    def test_perturbed_initial_alpha(self):
        cfg = config_from_dict(small(initial={"kind": "perturbed", "epsilon": 0.1}, horizon=0.0, samples=1))
        for n in (2, 3):
            res = run_single(cfg, n)
            assert res.alpha["n"][0] == pytest.approx(0.01 / n, abs=1e-10)

    def test_series_invariants(self):
        res = run_single(config_from_dict(small(initial={"kind": "correlated", "mix": 0.3})), 3)
        for series in res.alpha.values():
            assert all(0 <= a <= 1 for a in series)
        assert all(0 <= t <= 2 for t in res.tr_norm)
        assert {r.check_id for r in res.reports} >= {"density_lemma", "alpha_m_vs_n", "meanfield_sup",
                                                     "assumption", "lt_ratio", "sc_condition"}
        assert all(r.verdict != "fail" for r in res.reports)

    def test_kinetic_bound_flag(self):
        res = run_single(config_from_dict(small(kinetic_bound=1e-6)), 2)
        assert res.flags and "exceeds bound" in res.flags[0]

    def test_unknown_mode(self):
        with pytest.raises(InvalidArgumentError):
            run_single(config_from_dict(small()), 2, mode="vlasov")

    def test_initial_packets_even(self):
        cfg = config_from_dict(small(initial={"kind": "packets"}))
        orb, psi = initial_data(cfg, 2)
        assert orb.count == 2 and psi.norm() == pytest.approx(1)

    def test_reference_fixture(self):
        data = json.loads((FIXTURES / "reference_run.json").read_text())
        res = run_single(config_from_dict(reference_preset()), 2)
        np.testing.assert_allclose(res.alpha["n"], data["alpha_n"], rtol=0, atol=1e-6)
        np.testing.assert_allclose(res.tr_norm, data["tr_norm"], rtol=0, atol=1e-6)


class TestBaselines:
    def test_free_equals_hartree_without_interaction(self):
        cfg = config_from_dict(small(interaction={"kind": "zero"}))
        cmp = compare_baseline(cfg, 2, "free")
        assert max(abs(x) for x in cmp.tr_gap) < 1e-10

    def test_static_identical_at_zero(self):
        cmp = compare_baseline(config_from_dict(small()), 2, "static")
        assert cmp.tr_gap[0] == 0 and cmp.alpha_gap[0] == 0

    def test_reference_direction_recorded(self):
        cmp = compare_baseline(config_from_dict(reference_preset()), 2, "free")
        assert isinstance(cmp.hartree_better_at_end, bool)
        assert len(cmp.tr_gap) == 5

    def test_bad_baseline(self):
        with pytest.raises(InvalidArgumentError):
            compare_baseline(config_from_dict(small()), 2, "vlasov")


class TestFit:
    def test_exact_power(self):
        f = fit_rate([(n, 1 / n) for n in (2, 3, 4, 8)])
        assert f.exponent == pytest.approx(1.0, abs=1e-12) and f.residual < 1e-12

    def test_prefactor(self):
        f = fit_rate([(n, 2 * n**-0.5) for n in (2, 3, 5)])
        assert f.exponent == pytest.approx(0.5, abs=1e-12)
        assert f.intercept == pytest.approx(math.log(2), abs=1e-12)

    def test_constant(self):
        f = fit_rate([(2, 0.1), (3, 0.1), (4, 0.1)])
        assert f.exponent == pytest.approx(0, abs=1e-12) and f.residual == pytest.approx(0, abs=1e-12)

    def test_flags(self):
        assert fit_rate([(2, 0.1), (3, 0.05)]).flag == "insufficient points"
        f = fit_rate([(2, 0.0), (3, 0.1), (4, 0.1)])
        assert f.flag == "no signal" and math.isnan(f.exponent)

    def test_free_sweep_no_signal(self):
        cfg = config_from_dict(small(interaction={"kind": "zero"}, particles=[2, 3, 4]))
        res = run_sweep(cfg)
        assert res.fits["n"].flag == "no signal"


class TestOutputs:
    def test_csv_roundtrip_and_format(self):
        res = run_sweep(config_from_dict(small()))
        text = render_csv(res.runs)
        assert text.splitlines()[0].split(",") == CSV_COLUMNS
        assert "\r" not in text
        rows = parse_csv(text)
        assert len(rows) == 6
        for run in res.runs:
            sel = [r for r in rows if r["N"] == run.N]
            assert [r["alpha_n"] for r in sel] == run.alpha["n"]
            assert [r["energy_exact"] for r in sel] == run.energy_exact
        assert render_csv([]) == ",".join(CSV_COLUMNS) + "\n"

    def test_empty_samples(self, tmp_path):
        cfg = config_from_dict(small(samples=0))
        res = run_sweep(cfg)
        emit_outputs(res, tmp_path, cfg)
        assert (tmp_path / "results.csv").read_text() == ",".join(CSV_COLUMNS) + "\n"

    def test_files_and_manifest(self, tmp_path):
        cfg = config_from_dict(small())
        res = run_sweep(cfg)
        paths = emit_outputs(res, tmp_path, cfg)
        assert set(paths) == {"results.csv", "reports.jsonl", "manifest.json",
                              "plots/alpha_vs_t.svg", "plots/rate_fit.svg"}
        man = json.loads((tmp_path / "manifest.json").read_text())
        assert set(man) >= {"config", "digests", "versions", "fits", "verdicts", "timestamp"}
        lines = (tmp_path / "reports.jsonl").read_text().splitlines()
        assert all(json.loads(x)["verdict"] in ("pass", "fail", "informational") for x in lines)
        assert replot(tmp_path).keys() == {"alpha_vs_t.svg", "rate_fit.svg"}

    def test_manifest_identical_modulo_timestamp(self, tmp_path):
        cfg = config_from_dict(small())
        emit_outputs(run_sweep(cfg), tmp_path / "a", cfg)
        emit_outputs(run_sweep(cfg), tmp_path / "b", cfg)
        a = (tmp_path / "a" / "manifest.json").read_text()
        b = (tmp_path / "b" / "manifest.json").read_text()
        assert manifest_without_timestamp(a) == manifest_without_timestamp(b)
        for name in ("results.csv", "reports.jsonl", "plots/alpha_vs_t.svg"):
            assert (tmp_path / "a" / name).read_bytes() == (tmp_path / "b" / name).read_bytes()

    def test_unwritable_keeps_buffers(self, tmp_path):
        blocker = tmp_path / "file"
        blocker.write_text("x")
        cfg = config_from_dict(small())
        with pytest.raises(OutputError) as info:
            emit_outputs(run_sweep(cfg), blocker / "out", cfg)
        assert b"alpha_n" in info.value.buffers["results.csv"]

    def test_trends_need_two_runs(self):
        res = run_sweep(config_from_dict(small(particles=[2])))
        assert sweep_trends(res.runs) == []


class TestSweepFixtures:
    def test_semiclassical_sc_window(self):
        from scenarios import sc_ratios, semiclassical_sweep

        data = json.loads((FIXTURES / "diagnostic_trends.json").read_text())["sc_condition"]
        res = semiclassical_sweep(tuple(data["N"]))
        vals = sc_ratios(res)
        for key in ("exp_ratio_N23", "grad_ratio_N"):
            np.testing.assert_allclose(vals[key], data[key], rtol=0, atol=1e-10)
            assert max(vals[key]) <= 2 * min(vals[key])
        verdicts = {t.check_id: t.verdict for t in res.trends}
        assert verdicts["trend:sc_exp_ratio_N23"] == "pass"
        assert verdicts["trend:sc_grad_ratio_N"] == "pass"


class TestCli:
    def _cfg(self, tmp_path, **over):
        p = tmp_path / "cfg.json"
        p.write_text(json.dumps(small(**over)))
        return str(p)

    def test_simulate_and_plot(self, tmp_path, monkeypatch, capsys):
        monkeypatch.setenv("MFLAB_OUT", str(tmp_path / "out"))
        assert main(["simulate", "--config", self._cfg(tmp_path), "--n", "2"]) == 0
        assert (tmp_path / "out" / "results.csv").exists()
        assert main(["plot", "--from", str(tmp_path / "out")]) == 0
        assert "alpha_vs_t.svg" in capsys.readouterr().out

    def test_simulate_unknown_n(self, tmp_path, monkeypatch):
        monkeypatch.setenv("MFLAB_OUT", str(tmp_path / "out"))
        assert main(["simulate", "--config", self._cfg(tmp_path), "--n", "9"]) == 2

    def test_config_error_exit(self, tmp_path):
        p = tmp_path / "bad.json"
        p.write_text(json.dumps({"grid": {"M": 6}, "particles": [2], "interaction": {"kind": "zero"}, "oops": 1}))
        assert main(["sweep", "--config", str(p)]) == 2

    def test_runtime_error_exit(self, tmp_path, monkeypatch):
        monkeypatch.setenv("MFLAB_OUT", str(tmp_path / "out"))
        cfg = self._cfg(tmp_path, exact={"max_substeps": 1}, horizon=1.0)
        assert main(["sweep", "--config", cfg]) == 3

    def test_sweep_serial_equals_parallel(self, tmp_path, monkeypatch):
        cfg = self._cfg(tmp_path)
        monkeypatch.setenv("MFLAB_OUT", str(tmp_path / "a"))
        assert main(["sweep", "--config", cfg, "--workers", "1"]) == 0
        monkeypatch.setenv("MFLAB_OUT", str(tmp_path / "b"))
        assert main(["sweep", "--config", cfg, "--workers", "2"]) == 0
        assert (tmp_path / "a" / "results.csv").read_bytes() == (tmp_path / "b" / "results.csv").read_bytes()

    def test_orbitals(self, tmp_path):
        out = tmp_path / "orb.json"
        assert main(["orbitals", "--config", self._cfg(tmp_path), "--out", str(out)]) == 0
        sets = json.loads(out.read_text())["orbital_sets"]
        assert [s["N"] for s in sets] == [2, 3]
        v = np.array(sets[0]["re"]) + 1j * np.array(sets[0]["im"])
        np.testing.assert_allclose(v.conj() @ v.T, np.eye(2), atol=1e-12)

    def test_check_algebra(self, tmp_path, monkeypatch, capsys):
        monkeypatch.setenv("MFLAB_OUT", str(tmp_path / "chk"))
        assert main(["check", "--suite", "algebra", "--seed", "3"]) == 0
        rows = [json.loads(x) for x in (tmp_path / "chk" / "reports.jsonl").read_text().splitlines()]
        assert rows and all(r["verdict"] != "fail" for r in rows)
        assert "checks passed" in capsys.readouterr().out

    def test_check_failure_exit(self, tmp_path, monkeypatch):
        from mflab.diagnostics import CheckReport
        import mflab.harness.suites as suites

        monkeypatch.setenv("MFLAB_OUT", str(tmp_path / "chk"))
        monkeypatch.setattr(suites, "run_suite", lambda name, seed: [CheckReport("x", "d", {}, "fail", -1.0)])
        assert main(["check"]) == 1

    def test_module_entry_point(self, tmp_path):
        proc = subprocess.run([sys.executable, "-m", "mflab", "--help"], capture_output=True, text=True)
        assert proc.returncode == 0 and "simulate" in proc.stdout
        proc = subprocess.run([sys.executable, "-m", "mflab", "sweep", "--config", str(tmp_path / "none.json")],
                              capture_output=True, text=True)
        assert proc.returncode == 2 and "not found" in proc.stderr
