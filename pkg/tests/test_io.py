import numpy as np

from fiducial import io as fio
from fiducial.density import tabulate_gfd
from fiducial.grid import ParameterGrid
from fiducial.model import make_location


def test_density_json_roundtrip():
    fd = tabulate_gfd(make_location(1), [0.2], ParameterGrid((-8.0,), (8.0,), (101,)), check_refinement=False)
    back = fio.read_density_json(fio.density_json(fd, ["theta"]))
    assert back.grid == fd.grid
    np.testing.assert_array_equal(back.values, fd.values)


def test_json_replaces_non_finite_with_null():
    assert fio.json_text({"a": float("nan"), "b": np.array([1.0, np.inf])}) == \
        '{\n  "a": null,\n  "b": [\n    1.0,\n    null\n  ]\n}\n'


def test_csv_cells():
    text = fio.csv_text(["a", "b", "c", "d"], [(0.1, np.int64(3), True, None)])
    assert text == "a,b,c,d\n0.1,3,true,\n"


def test_write_atomic(tmp_path):
    path = tmp_path / "sub" / "out.txt"
    fio.write_atomic(str(path), "hello\n")
    assert path.read_text() == "hello\n"
    assert [p.name for p in path.parent.iterdir()] == ["out.txt"]
