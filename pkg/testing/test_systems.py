import numpy as np
import pytest

from cchardy.frames import HTypeGroup
from cchardy.oracles import BoxDistanceOracle, EuclideanOracle, NswVolume
from cchardy.systems import (
    SystemSpecError,
    builtin_names,
    default_r0,
    geometry_for,
    get_system,
    grushin_paper_example,
    load_system_file,
    parse_htype,
    parse_system_text,
)

GRUSHIN_TEXT = """
# X1 = d1, X2 = d2, X3 = x1 d3
1, 0, 0
0, 1, 0
0, 0, x1
"""


def test_builtin_systems_resolve():
    for name in ("euclidean3", "grushin-paper-example", "heisenberg1", "htype(2,1)"):
        assert get_system(name).ambient_dim in (3, 5)
    assert "htype(k,q)" in builtin_names()


def test_unknown_system_lists_known_names():
    with pytest.raises(SystemSpecError, match="euclidean3"):
        get_system("sphere")


def test_parse_htype():
    assert parse_htype("heisenberg1") == HTypeGroup(1, 1)
    assert parse_htype("htype( 2 , 3 )") == HTypeGroup(2, 3)
    assert parse_htype("euclidean3") is None


def test_default_r0():
    assert default_r0("grushin-paper-example") == 0.5
    assert default_r0("custom") == 1.0


def test_system_text_matches_builtin():
    parsed = parse_system_text(GRUSHIN_TEXT, name="grushin")
    x = np.array([[0.7, -0.1, 0.4]])
    assert np.allclose(parsed.frame_at(x), grushin_paper_example().frame_at(x))


def test_system_file_named_after_stem(tmp_path):
    path = tmp_path / "grushin.txt"
    path.write_text(GRUSHIN_TEXT)
    assert load_system_file(path).name == "grushin"


@pytest.mark.parametrize("text", [
    "",
    "1, 0\n0, 1, 0",
    "sin(x1), 0",
    "x1, x3",
    "1, 0\n0, x1 +",
])
def test_bad_system_text(text):
    with pytest.raises(SystemSpecError):
        parse_system_text(text)


def test_euclidean_geometry(euclidean_geometry):
    assert isinstance(euclidean_geometry.oracle, EuclideanOracle)
    assert euclidean_geometry.group is None
    assert euclidean_geometry.volume(np.zeros(3), 1.0) == pytest.approx(4.0 * np.pi / 3.0)


def test_grushin_geometry_uses_box_distance():
    geometry = geometry_for("grushin-paper-example")
    assert isinstance(geometry.oracle, BoxDistanceOracle)
    assert isinstance(geometry.volume, NswVolume)
    assert geometry.r0 == 0.5
    assert geometry.basis.max_step == 2
