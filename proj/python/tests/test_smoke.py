import json
import math

import pytest

import hkends


def test_list_and_describe():
    names = hkends.list_scenarios()
    assert len(names) == 6
    assert "fig4_strip" in names
    text = hkends.describe("fig4_strip")
    assert "strip" in text and "cone" in text


def test_unknown_scenario():
    with pytest.raises(hkends.Error) as info:
        hkends.describe("no_such_scenario")
    assert info.value.kind == "NotFound"


def test_round_trip():
    s = hkends.load_scenario("fig2_cones")
    again = hkends.parse_scenario(s.to_json())
    assert again.to_json() == s.to_json()
    assert [v.name for v in s.variants()] == ["fig2_cones", "fig2_cones_b"]


def test_fit_decay():
    t = [10 ** (2 + k / 10) for k in range(21)]
    fit = hkends.fit_decay(t, [3.0 * x ** -1.5 for x in t])
    assert fit.a == pytest.approx(1.5)
    logs = hkends.fit_decay(t, [1 / (x * math.log(x) ** 2) for x in t], "auto")
    assert logs.log_residual < logs.power_residual


def test_closed_forms():
    assert hkends.cone_profile(math.pi, 0.0, "DD", 1.0, math.pi / 2) == pytest.approx(1.0)
    assert hkends.exterior_parabola_profile(0.0, -2.0) == pytest.approx(2.0)


def test_pipeline_fig4(tmp_path):
    report = hkends.run_pipeline(hkends.load_scenario("fig4_strip"), str(tmp_path))
    assert report.predicted_exponent == pytest.approx(1.5)
    oo = next(s for s in report.series if s.name == "oo")
    assert abs(oo.fit.a - 1.5) <= 0.15
    assert report.passed
    assert (tmp_path / "summary.txt").exists()
    header = (tmp_path / "series_oo.csv").read_text().splitlines()[0]
    assert header == "t,p,stderr"


def test_stage_error():
    doc = json.loads(hkends.load_scenario("fig4_strip").to_json())
    doc["series"][0]["x"] = {"x": 1e6, "y": 0.0}
    bad = hkends.parse_scenario(json.dumps(doc))
    with pytest.raises(hkends.StageError) as info:
        hkends.run_pipeline(bad)
    assert info.value.stage == "geometry"
    assert info.value.kind == "OutsideDomain"
