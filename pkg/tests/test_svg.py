import xml.etree.ElementTree as ET

import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from mfg_broker.svg import Figure, Panel, _thin, nice_ticks


@given(lo=st.floats(-1e6, 1e6), span=st.floats(1e-6, 1e6))
def test_ticks_cover_range(lo, span):
    hi = lo + span
    ticks = nice_ticks(lo, hi)
    assert 2 <= len(ticks) <= 12
    assert all(lo - 1e-9 * span <= t <= hi + 1e-9 * span for t in ticks)
    assert all(b > a for a, b in zip(ticks, ticks[1:]))


def test_ticks_are_round():
    assert nice_ticks(0.0, 1.0) == pytest.approx([0.0, 0.2, 0.4, 0.6, 0.8, 1.0])
    assert nice_ticks(0.95, 1.0) == pytest.approx([0.95, 0.96, 0.97, 0.98, 0.99, 1.0])


def test_thinning_keeps_extremes():
    x = np.linspace(0, 1, 100_001)
    y = np.sin(40 * x)
    y[31_337] = 50.0
    xt, yt = _thin(x, y, 1000)
    assert xt.size <= 1002
    assert yt.max() == 50.0 and yt.min() == y.min()
    assert xt[0] == 0.0 and xt[-1] == 1.0


def test_data_limits_follow_window():
    p = Panel(xlim=(0.5, 1.0)).line([0, 0.5, 1.0], [100.0, 1.0, 2.0])
    (x0, x1), (y0, y1) = p.data_limits()
    assert (x0, x1) == (0.5, 1.0)
    assert (y0, y1) == (1.0, 2.0)


def test_flat_series_gets_padding():
    (x0, x1), (y0, y1) = Panel().line([0, 1], [3.0, 3.0]).data_limits()
    assert y0 < 3.0 < y1


def test_render_is_valid_and_deterministic():
    fig = Figure("title & <things>", 1, 2)
    fig.panel(0).line([0, 1, 2], [1, 4, 9], label="squares")
    fig.panel(1).line([0, 1, 2], [0, -1, np.nan], label="with nan", dashed=True)
    a, b = fig.render(), fig.render()
    assert a == b
    root = ET.fromstring(a)
    assert root.tag.endswith("svg")
    assert "squares" in a and "&amp;" in a
    assert len(root.findall(".//{http://www.w3.org/2000/svg}polyline")) == 2
