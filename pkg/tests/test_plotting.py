import xml.etree.ElementTree as ET

import numpy as np
import pytest

from prospective.evaluation import RiskCurve, curves_to_csv
from prospective.plotting import Frame, Series, plot, plot_curves_csv, svg_plot

NS = "{http://www.w3.org/2000/svg}"


def _parse(svg):
    return ET.fromstring(svg)


def _points(el):
    return np.array([[float(v) for v in p.split(",")] for p in el.get("points").split()])


def test_flat_curve_at_half():
    root = _parse(svg_plot([Series("a", [1, 2, 3], [0.5, 0.5, 0.5], [0, 0, 0])], bayes=None, chance=None))
    lines = root.findall(f"{NS}polyline")
    assert len(lines) == 1
    ys = _points(lines[0])[:, 1]
    f = Frame()
    assert np.all(ys == ys[0])
    assert (f.top + f.plot_h - ys[0]) / f.plot_h == pytest.approx(0.5, abs=1e-3)
    assert not root.findall(f"{NS}polygon")


def test_band_half_width_is_stderr():
    curves = []
    for seed, vals in enumerate([[0.2, 0.4], [0.3, 0.6], [0.4, 0.5]]):
        c = RiskCurve("m", seed, "h")
        for t, v in zip((10, 20), vals):
            c.add(t, v, v)
        curves.append(c)
    root = _parse(plot_curves_csv(curves_to_csv(curves)))
    band = _points(root.find(f"{NS}polygon"))
    mean = _points(root.find(f"{NS}polyline"))
    f = Frame()
    upper = band[:2, 1]
    lower = band[2:, 1][::-1]
    half = (lower - upper) / 2 / f.plot_h
    expected = [np.std([0.2, 0.3, 0.4], ddof=1) / np.sqrt(3), np.std([0.4, 0.6, 0.5], ddof=1) / np.sqrt(3)]
    np.testing.assert_allclose(half, expected, atol=1e-3)
    np.testing.assert_allclose((upper + lower) / 2, mean[:, 1], atol=0.02)


def test_reference_lines_dashed():
    root = _parse(svg_plot([Series("a", [1, 2], [0.3, 0.2], [0.01, 0.02])], bayes=0.0, chance=0.5))
    refs = {el.get("data-name"): el for el in root.findall(f"{NS}line") if el.get("class") == "reference"}
    assert set(refs) == {"Bayes", "chance"}
    f = Frame()
    assert float(refs["Bayes"].get("y1")) == pytest.approx(f.top + f.plot_h)
    assert float(refs["chance"].get("y1")) == pytest.approx(f.top + f.plot_h / 2)
    assert all(el.get("stroke-dasharray") for el in refs.values())


def test_empty_input_errors(tmp_path):
    with pytest.raises(ValueError):
        svg_plot([])
    with pytest.raises(ValueError):
        plot_curves_csv("learner,seed,t,inst_risk,prosp_risk\n")
    empty = tmp_path / "c.csv"
    empty.write_text("learner,seed,t,inst_risk,prosp_risk\n")
    with pytest.raises(ValueError):
        plot(empty, tmp_path / "out.svg")


def test_plot_writes_file(tmp_path):
    c = RiskCurve("x<&>", 0, "h")
    c.add(1, 0.1, 0.2)
    src = tmp_path / "curves.csv"
    src.write_text(curves_to_csv([c]))
    out = plot(src, tmp_path / "fig.svg", title="a & b")
    _parse(out.read_text())  # well-formed despite markup characters in names
