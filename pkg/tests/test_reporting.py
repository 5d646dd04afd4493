import json
from dataclasses import dataclass

import numpy as np

from grushin.grid import TensorGrid
from grushin.reporting import dumps, plain, write_csv, write_field, write_json, write_trace


def test_plain_rounds_and_maps_specials():
    out = plain({"a": np.float64(1 / 3), "b": float("nan"), "c": -np.inf, "d": np.arange(2), "e": (np.bool_(True),)})
    assert out == {"a": 0.333333333333, "b": None, "c": "-inf", "d": [0, 1], "e": [True]}


def test_plain_uses_to_dict():
    @dataclass
    class Thing:
        x: float

        def to_dict(self):
            return {"doubled": 2 * self.x}

    assert plain(Thing(1.5)) == {"doubled": 3.0}


def test_dumps_sorted_and_stable():
    text = dumps({"b": 1, "a": 2.0})
    assert text.index('"a"') < text.index('"b"')
    assert dumps({"b": 1, "a": 2.0}) == text
    assert json.loads(text) == {"a": 2.0, "b": 1}


def test_writers(tmp_path):
    write_json(tmp_path / "sub" / "r.json", {"x": 1})
    assert json.loads((tmp_path / "sub" / "r.json").read_text()) == {"x": 1}
    write_csv(tmp_path / "t.csv", ["a", "b"], [[1, 0.5], [2, np.float64(0.25)]])
    assert (tmp_path / "t.csv").read_text() == "a,b\n1,0.5\n2,0.25\n"
    grid = TensorGrid(((-1, 1), (-1, 1)), (5, 5))
    write_field(tmp_path / "u.csv", grid, np.zeros(grid.size))
    assert len((tmp_path / "u.csv").read_text().splitlines()) == grid.size + 1
    write_trace(tmp_path / "tr.csv", [(1.0, 0.1, 0.0)])
    assert (tmp_path / "tr.csv").read_text().splitlines()[0] == "iteration,energy,residual,tau"
