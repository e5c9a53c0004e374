"""Render every kind from the golden CSVs and check the error paths."""

import os
from pathlib import Path

import numpy as np
import pytest

from plotkit import (
    EmptyTableError,
    SchemaError,
    load_table,
    render,
    render_figure,
)
from plotkit.cli import main
from plotkit.render import fit_powerlaw, fit_window

GOLD = Path(__file__).parent / "golden"

CASES = {
    "density": ["density.csv", "density_ref.csv"],
    "trap-greens": ["greens_trap.csv"],
    "critical": ["greens_critical.csv"],
    "above-critical": ["greens_above.csv"],
    "ideal-gas": ["greens_ideal.csv"],
    "momentum": ["momentum_cold.csv", "momentum_mid.csv", "momentum_hot.csv"],
}


def paths(kind):
    return [str(GOLD / name) for name in CASES[kind]]


class TestRendering:
    @pytest.mark.parametrize("kind", sorted(CASES))
    def test_all_kinds_render(self, kind, tmp_path):
        out = tmp_path / f"{kind}.png"
        render(kind, paths(kind), str(out))
        assert out.exists() and out.stat().st_size > 1000

    def test_cli_roundtrip(self, tmp_path, capsys):
        out = tmp_path / "fig.png"
        rc = main(["critical", *paths("critical"), "-o", str(out)])
        assert rc == 0 and out.exists()
        assert "eta" in capsys.readouterr().out

    def test_critical_annotation_and_fit(self):
        fig, meta = render_figure("critical", paths("critical"))
        texts = [t.get_text() for ax in fig.axes for t in ax.texts]
        assert any("fitted exponent" in t for t in texts)
        # golden curve is 0.638 r^-0.27 with 1% noise
        assert meta["eta"] == pytest.approx(0.27, abs=0.03)
        assert meta["a"] == pytest.approx(0.638, rel=0.05)

    def test_density_overlay_legend(self):
        fig, _ = render_figure("density", paths("density"))
        labels = [t.get_text() for t in fig.axes[0].get_legend().get_texts()]
        assert labels == ["density", "density_ref"]

    def test_deterministic_output(self, tmp_path):
        a, b = tmp_path / "a.png", tmp_path / "b.png"
        render("momentum", paths("momentum"), str(a))
        render("momentum", paths("momentum"), str(b))
        assert a.read_bytes() == b.read_bytes()


class TestErrorPaths:
    def test_empty_csv_no_image(self, tmp_path):
        empty = tmp_path / "empty.csv"
        empty.write_text("# manifest=000000000000\nr,G,stderr\n")
        out = tmp_path / "fig.png"
        with pytest.raises(EmptyTableError):
            render("critical", [str(empty)], str(out))
        assert not out.exists()

    def test_headerless_csv(self, tmp_path):
        blank = tmp_path / "blank.csv"
        blank.write_text("# manifest=000000000000\n")
        with pytest.raises(EmptyTableError):
            load_table(str(blank))

    def test_schema_mismatch_names_columns(self, tmp_path):
        out = tmp_path / "fig.png"
        with pytest.raises(SchemaError) as err:
            render("momentum", paths("critical"), str(out))
        msg = str(err.value)
        assert "p" in msg and "G" in msg and "momentum" in msg
        assert not out.exists()

    def test_ragged_row_rejected(self, tmp_path):
        bad = tmp_path / "bad.csv"
        bad.write_text("r,G,stderr\n0.1,1.0\n")
        with pytest.raises(SchemaError):
            load_table(str(bad))

    def test_unknown_kind(self):
        with pytest.raises(SchemaError):
            render_figure("contour", paths("critical"))

    def test_cli_reports_and_fails(self, tmp_path, capsys):
        missing = tmp_path / "nope.csv"
        rc = main(["critical", str(missing), "-o", str(tmp_path / "x.png")])
        assert rc == 1
        assert "plotkit:" in capsys.readouterr().err


class TestFit:
    def test_recovers_pure_powerlaw(self):
        r = np.linspace(0.05, 2.0, 40)
        a, eta = fit_powerlaw(r, 0.5 * r**-0.31, *fit_window(r))
        assert a == pytest.approx(0.5, rel=1e-6)
        assert eta == pytest.approx(0.31, abs=1e-6)

    def test_window_convention(self):
        r = np.array([0.1, 0.2, 0.3, 1.414])
        lo, hi = fit_window(r)
        assert lo == pytest.approx(0.2)
        assert hi == pytest.approx(1.414 / np.sqrt(2))
