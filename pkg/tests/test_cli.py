"""Command-line interface: outputs, manifests, overrides, error paths."""

import numpy as np
import pytest

from specswap.cli import OUTDIR_ENV, _Sink, main
from specswap.io import MANIFEST_NAME, file_digest, read_matrix, read_table

FAST_MC = """
pulses = 20000
block_pulses = 8192
eta_1 = 0.05
eta_2 = 0.05
seed = 11
herald_cells = 64
signal_cells = 128
"""

TOFS_LINES = """
tofs_channels = c,d
tofs_dispersion_ps_nm = 1000
tofs_tdc_bin_ps = 100
tofs_window_nm = 10
"""


def run(tmp_path, *argv):
    return main([*argv, "--out", str(tmp_path)])


def write_cfg(tmp_path, text):
    path = tmp_path / "run.cfg"
    path.write_text(text)
    return str(path)


def manifest_lines(tmp_path):
    return (tmp_path / MANIFEST_NAME).read_text().splitlines()


class TestModelCommands:
    def test_jsa(self, tmp_path):
        assert run(tmp_path, "jsa", "--grid", "65") == 0
        header, rows, cols, m = read_matrix(tmp_path / "jsi.txt")
        assert header["model"] == "gaussian"
        assert m.shape == (65, 65)
        assert (tmp_path / "marginal_signal.txt").exists()
        assert (tmp_path / "marginal_idler.txt").exists()
        names = [l.split(" sha256")[0] for l in manifest_lines(tmp_path)
                 if l.startswith("file = ")]
        assert "file = jsi.txt" in names

    def test_schmidt_prints_k(self, tmp_path, capsys):
        assert run(tmp_path, "schmidt", "--grid", "257") == 0
        out = capsys.readouterr().out
        assert out.startswith("K = 4.998")
        header, data = read_table(tmp_path / "schmidt.txt")
        assert header["schmidt_number"] == pytest.approx(4.998207, abs=1e-4)
        assert header["schmidt_number_closed"] == pytest.approx(4.998207, abs=1e-6)
        assert np.all(np.diff(data["coefficient"]) <= 0)

    def test_pjk_map_folds_tau_override(self, tmp_path):
        assert run(tmp_path, "pjk-map", "--grid", "65", "--tau-i", "0.15") == 0
        header, _, _, m = read_matrix(tmp_path / "pjk.txt")
        assert header["tau_i"] == 0.15
        assert m.sum() == pytest.approx(1.0, abs=1e-9)
        assert np.allclose(np.diag(m), 0.0, atol=1e-12)

    def test_herald_jsi(self, tmp_path):
        assert run(tmp_path, "herald-jsi", "--grid", "129",
                   "--bins", "1,-1") == 0
        header, _, _, m = read_matrix(tmp_path / "fjk.txt")
        assert header["bin_j"] == 1 and header["bin_k"] == -1
        assert header["degenerate"] is False
        assert m.min() >= 0.0

    def test_summed_jsi_writes_both_routes(self, tmp_path):
        assert run(tmp_path, "summed-jsi", "--grid", "65") == 0
        _, _, _, quad = read_matrix(tmp_path / "fsum.txt")
        _, _, _, closed = read_matrix(tmp_path / "fsum_closed.txt")
        assert np.max(np.abs(quad - closed)) < 1e-6 * quad.max()

    def test_fringes_with_fit(self, tmp_path):
        assert run(tmp_path, "fringes", "--grid", "129", "--bins", "4,-4",
                   "--tau-s", "-3:3:121", "--emit-fit") == 0
        header, data = read_table(tmp_path / "fringes.txt")
        assert header["fit_converged"] is True
        assert header["fit_baseline"] == pytest.approx(0.5, abs=1e-3)
        assert np.max(np.abs(data["fit"] - data["probability"])) < 1e-3

    def test_peak_and_negative_range(self, tmp_path):
        # regression: a range value starting with '-' must survive argparse
        assert run(tmp_path, "peak", "--tau-s", "-4:4:33", "--grid", "65") == 0
        header, data = read_table(tmp_path / "peak.txt")
        assert data["tau_s"][0] == -4.0
        assert header["p_zero_closed"] == pytest.approx(0.39996, abs=1e-4)
        mid = data["probability"][16]
        assert mid == pytest.approx(header["p_zero_closed"], abs=1e-4)

    def test_peak2d(self, tmp_path):
        assert run(tmp_path, "peak2d", "--tau-s", "-2:2:9",
                   "--tau-i", "-2:2:7", "--grid", "65") == 0
        _, rows, cols, m = read_matrix(tmp_path / "peak2d.txt")
        assert m.shape == (9, 7)

    def test_waterfall(self, tmp_path):
        assert run(tmp_path, "waterfall", "--bins", "2,-2", "--grid", "65",
                   "--tau-s", "-2:2:21", "--tau-i", "-0.2:0.2:3") == 0
        _, data = read_table(tmp_path / "waterfall.txt")
        assert data["tau_i"].size == 21 * 3

    def test_purity(self, tmp_path, capsys):
        assert run(tmp_path, "purity") == 0
        assert "full-band purity bound" in capsys.readouterr().out
        header, data = read_table(tmp_path / "purity.txt")
        assert header["inverse_schmidt"] == pytest.approx(0.2001, abs=1e-3)
        assert np.all(np.diff(data["purity_gauss"]) < 0)

    def test_distinguishability(self, tmp_path, capsys):
        cfg = write_cfg(tmp_path, "delta_s = 0.6\ndelta_i = -0.4\n")
        assert run(tmp_path, "distinguishability", "--config", cfg) == 0
        assert "source overlap" in capsys.readouterr().out
        header, _, _, vmap = read_matrix(tmp_path / "vjk.txt")
        # per-bin visibility must dominate the squared source overlap
        assert vmap.min() >= header["overlap_sq"] - 1e-12
        assert (tmp_path / "twofold.txt").exists()
        assert (tmp_path / "fourfold.txt").exists()

    def test_orthomodes(self, tmp_path, capsys):
        assert run(tmp_path, "orthomodes", "--grid", "129",
                   "--bin-range", "1", "--threshold", "0.15") == 0
        assert "maximal subsets" in capsys.readouterr().out
        _, data = read_table(tmp_path / "subsets.txt")
        assert data["size"][0] >= 1
        _, _, _, om = read_matrix(tmp_path / "overlaps.txt")
        assert np.allclose(np.diag(om), 1.0)

    def test_calibration(self, tmp_path):
        cfg = write_cfg(tmp_path, TOFS_LINES)
        assert run(tmp_path, "calibration", "--config", cfg) == 0
        header, data = read_table(tmp_path / "calibration.txt")
        assert header["pixel_nm"] == 0.1
        assert data["pixel"].size == 101
        assert data["wavelength_nm"][50] == 830.0


class TestMonteCarloCommands:
    def test_simulate_writes_tags_and_pixelmap(self, tmp_path):
        cfg = write_cfg(tmp_path, FAST_MC + TOFS_LINES + "measurement = jsi\n")
        assert run(tmp_path, "simulate", "--config", cfg) == 0
        header, data = read_table(tmp_path / "tags.txt")
        assert header["pulses"] == 20000
        assert set(np.unique(data["channel"])) <= {"c", "d", "x", "y"}
        _, summary = read_table(tmp_path / "summary.txt")
        keys = list(summary["key"])
        assert "fourfold" in keys and "pulses_swap" in keys
        assert (tmp_path / "pixelmap.txt").exists()

    def test_simulate_deterministic_across_threads(self, tmp_path):
        cfg = write_cfg(tmp_path, FAST_MC)
        one, four = tmp_path / "one", tmp_path / "four"
        assert main(["simulate", "--config", cfg, "--out", str(one)]) == 0
        assert main(["simulate", "--config", cfg, "--out", str(four),
                     "--threads", "4"]) == 0
        assert file_digest(one / "tags.txt") == file_digest(four / "tags.txt")
        assert (one / MANIFEST_NAME).read_text() == \
               (four / MANIFEST_NAME).read_text()

    def test_seed_override_changes_stream(self, tmp_path):
        cfg = write_cfg(tmp_path, FAST_MC)
        a, b = tmp_path / "a", tmp_path / "b"
        assert main(["simulate", "--config", cfg, "--out", str(a)]) == 0
        assert main(["simulate", "--config", cfg, "--out", str(b),
                     "--seed", "99"]) == 0
        assert "seed = 99" in (b / MANIFEST_NAME).read_text()
        assert file_digest(a / "tags.txt") != file_digest(b / "tags.txt")

    def test_subtract_background(self, tmp_path):
        cfg = write_cfg(tmp_path, FAST_MC)
        assert run(tmp_path, "subtract-background", "--config", cfg,
                   "--tau-s", "-2:2:5") == 0
        _, data = read_table(tmp_path / "background.txt")
        assert data["tau_s"].size == 5
        assert np.all(data["subtracted"] <= data["total"] + 1e-12)
        assert np.all(data["error"] > 0)


class TestErrorsAndPlumbing:
    def test_unknown_command(self):
        with pytest.raises(SystemExit):
            main(["warp"])

    def test_missing_bins(self, tmp_path, capsys):
        assert run(tmp_path, "fringes") == 1
        assert "requires --bins" in capsys.readouterr().err

    def test_bad_range(self, tmp_path, capsys):
        assert run(tmp_path, "peak", "--tau-s", "1:2") == 1
        assert "range" in capsys.readouterr().err

    def test_bad_config_path(self, tmp_path, capsys):
        assert run(tmp_path, "jsa", "--config",
                   str(tmp_path / "nope.cfg")) == 1
        assert "error:" in capsys.readouterr().err

    def test_invalid_threads(self, tmp_path, capsys):
        assert run(tmp_path, "jsa", "--threads", "0") == 1
        assert "--threads" in capsys.readouterr().err

    def test_calibration_without_tofs(self, tmp_path, capsys):
        assert run(tmp_path, "calibration") == 1
        assert "tofs_channels" in capsys.readouterr().err

    def test_outdir_env(self, tmp_path, monkeypatch):
        target = tmp_path / "fromenv"
        monkeypatch.setenv(OUTDIR_ENV, str(target))
        assert main(["peak", "--tau-s", "0:2:5", "--grid", "65"]) == 0
        assert (target / "peak.txt").exists()
        assert (target / MANIFEST_NAME).exists()

    def test_sink_discard_removes_partial_output(self, tmp_path):
        sink = _Sink(tmp_path)
        path = sink.path("partial.txt")
        path.write_text("half-written")
        sink.discard()
        assert not path.exists()

    def test_manifest_covers_all_outputs(self, tmp_path):
        assert run(tmp_path, "jsa", "--grid", "65") == 0
        listed = {l.split(" ")[2] for l in manifest_lines(tmp_path)
                  if l.startswith("file = ")}
        produced = {p.name for p in tmp_path.iterdir()} - {MANIFEST_NAME, "run.cfg"}
        assert listed == produced
        for line in manifest_lines(tmp_path):
            if line.startswith("file = "):
                name, digest = line.split(" sha256 = ")
                assert file_digest(tmp_path / name.split(" = ")[1]) == digest
