import json

import numpy as np
import pytest

from amfcc import charting, io, simgen
from amfcc.errors import DataError, ModelFormatError
from amfcc.io import load_model, load_samples, save_model, save_samples


def write(tmp_path, text):
    p = tmp_path / "s.csv"
    p.write_text(text)
    return p


def test_header_only(tmp_path):
    assert load_samples(write(tmp_path, "obs_id,component,t,value\n")) == []


def test_round_trip_simgen_output(tmp_path):
    samples = simgen.generate(simgen.ScenarioSpec(seed=4, p=3, n_points=17), 6)
    path = tmp_path / "x.csv"
    save_samples(samples, path)
    back = load_samples(path)
    assert [s.obs_id for s in back] == [s.obs_id for s in samples]
    for a, b in zip(samples, back):
        for k in range(3):
            assert np.array_equal(a.grids[k], b.grids[k])
            assert np.array_equal(a.values[k], b.values[k])


def test_grouping_and_sorting(tmp_path):
    text = "obs_id,component,t,value\nb,1,0.5,2\na,1,1,3\na,1,0,1\nb,1,0.1,4\n"
    s = load_samples(write(tmp_path, text))
    assert [o.obs_id for o in s] == ["b", "a"]
    assert s[1].grids[0].tolist() == [0.0, 1.0] and s[1].values[0].tolist() == [1.0, 3.0]


@pytest.mark.parametrize("body,msg", [
    ("a,1,0.5\n", "line 2"),
    ("a,1,0.5,x\n", "line 2"),
    ("a,1,0.5,1\na,1,0.5,2\n", "duplicate"),
    ("a,1,1.5,1\n", "outside"),
    ("a,0,0.5,1\n", "component"),
    ("a,1,0.5,nan\n", "non-finite"),
    ("a,1,0.5,1\na,2,0.5,1\nb,1,0.5,1\n", "missing component"),
])
def test_malformed(tmp_path, body, msg):
    with pytest.raises(DataError, match=msg):
        load_samples(write(tmp_path, "obs_id,component,t,value\n" + body))


def test_bad_header(tmp_path):
    with pytest.raises(DataError, match="header"):
        load_samples(write(tmp_path, "id,comp,t,v\n"))


def test_model_round_trip(tmp_path, small_chart):
    chart, _, _ = small_chart
    path = tmp_path / "m.json"
    save_model(chart, path)
    back = load_model(path)
    obs = simgen.generate(simgen.ScenarioSpec(seed=71, shift="D", severity=1), 50)
    a = charting.score_batch(chart, obs)
    b = charting.score_batch(back, obs)
    assert np.max(np.abs(a.combined - b.combined)) <= 1e-12
    assert np.array_equal(a.signal, b.signal) and np.array_equal(a.flagged, b.flagged)
    assert back.control_limit == chart.control_limit and back.grid.cells == chart.grid.cells


def test_corrupt_and_version(tmp_path, small_chart):
    chart, _, _ = small_chart
    path = tmp_path / "m.json"
    save_model(chart, path)
    text = path.read_text()
    path.write_text(text[: len(text) // 2])
    with pytest.raises(ModelFormatError):
        load_model(path)
    doc = io.chart_to_dict(chart)
    doc["format_version"] = 99
    path.write_text(json.dumps(doc))
    with pytest.raises(ModelFormatError, match="version"):
        load_model(path)
    doc = io.chart_to_dict(chart)
    del doc["models"][0]["eigenvalues"]
    with pytest.raises(ModelFormatError):
        io.chart_from_dict(doc)
