import sys

import numpy as np
import pytest

from surfviz import formats, plots

PROFILES = ("jump_m05_stationary.csv", "jump_000_stationary.csv", "jump_p05_stationary.csv")


def test_15_figure_reproduction(acceptance, data_dir, tmp_path):
    acceptance.seed(15)

    # shape taxonomy from the committed profiles, second difference at x=0
    d2 = {}
    center = {}
    for name in PROFILES:
        cols = formats.read_profile(str(data_dir / name))
        d2[name] = plots.second_difference_at_center(cols["x"], cols["h_s"])
        i = int(np.argmin(np.abs(cols["x"])))
        center[name] = cols["h_s"][i]
    concave = d2[PROFILES[0]] < -1e-6
    flat = abs(d2[PROFILES[1]]) <= 1e-12
    convex = d2[PROFILES[2]] > 1e-6
    ordered = center[PROFILES[0]] > center[PROFILES[1]] > center[PROFILES[2]]

    overlay = plots.plot_stationary_shapes(
        [str(data_dir / n) for n in PROFILES], str(tmp_path / "shapes")
    )
    svg = next(p for p in overlay if p.endswith(".svg"))
    text = open(svg).read()
    labeled = "(concave)" in text and "(flat)" in text and "(convex)" in text

    decay = plots.plot_decay(
        str(data_dir / "sample.csv"), str(tmp_path / "decay"), window=(2.5, 5.0)
    )
    dtext = open(next(p for p in decay if p.endswith(".svg"))).read()
    annotated = "lambda = " in dtext and "r^2" in dtext

    decoupled = "muskat" not in sys.modules

    ok = concave and flat and convex and ordered and labeled and annotated and decoupled
    acceptance.check(
        15,
        ok,
        f"d2(0) signs ({d2[PROFILES[0]]:+.1e}, {d2[PROFILES[1]]:+.1e}, "
        f"{d2[PROFILES[2]]:+.1e}), overlay labeled, lambda annotated, "
        f"no solver import",
    )


def test_decay_fit_matches_report(data_dir, tmp_path):
    rate, r2, window, _ = plots._fit_tail(
        formats.read_trajectory(str(data_dir / "sample.csv"), ("t", "E_par"))["t"],
        formats.read_trajectory(str(data_dir / "sample.csv"), ("t", "E_par"))["E_par"],
        (2.5, 5.0),
    )
    rep = formats.read_summary(str(data_dir / "sample_report.json"))["decay"]
    assert rate == pytest.approx(rep["lambda"], rel=1e-6)
    assert r2 >= 0.99

    paths = plots.plot_decay(
        str(data_dir / "sample.csv"),
        str(tmp_path / "decay_rep"),
        report_path=str(data_dir / "sample_report.json"),
        window=(2.5, 5.0),
    )
    text = open(next(p for p in paths if p.endswith(".svg"))).read()
    assert f"lambda = {rep['lambda']:.4g}" in text


def test_decay_window_too_small(data_dir, tmp_path):
    with pytest.raises(formats.FormatError, match="fewer than 3"):
        plots.plot_decay(
            str(data_dir / "sample.csv"), str(tmp_path / "x"), window=(4.999, 5.0)
        )


def test_evolution_renders(data_dir, tmp_path):
    paths = plots.plot_evolution(
        str(data_dir / "sample_summary.json"), str(tmp_path / "evo"), max_curves=6
    )
    assert len(paths) == 2
    text = open(next(p for p in paths if p.endswith(".svg"))).read()
    assert "t = 0" in text and "t = 5" in text


def test_residuals_renders(data_dir, tmp_path):
    paths = plots.plot_residuals(str(data_dir / "sample.csv"), str(tmp_path / "res"))
    for p in paths:
        assert (tmp_path / p.split("/")[-1]).stat().st_size > 0


def test_suffix_selects_single_format(data_dir, tmp_path):
    only_png = plots.plot_residuals(
        str(data_dir / "sample.csv"), str(tmp_path / "one.png")
    )
    assert only_png == [str(tmp_path / "one.png")]
    assert not (tmp_path / "one.svg").exists()


def test_render_deterministic(data_dir, tmp_path):
    a = plots.plot_decay(str(data_dir / "sample.csv"), str(tmp_path / "a"))
    b = plots.plot_decay(str(data_dir / "sample.csv"), str(tmp_path / "b"))
    for pa, pb in zip(a, b):
        assert open(pa, "rb").read() == open(pb, "rb").read()


def test_classify_shape_tolerance():
    assert plots.classify_shape(0.0) == "flat"
    assert plots.classify_shape(-1e-3) == "concave"
    assert plots.classify_shape(+1e-3) == "convex"
    assert plots.classify_shape(5e-11) == "flat"
