import pytest

from drivebench import fixtures
from drivebench.worldmap import (
    Lane,
    MapError,
    RoadMap,
    TrafficLight,
    load_map,
    map_from_dict,
    map_to_dict,
    save_map,
)


def test_lane_validation():
    with pytest.raises(MapError):
        Lane(id="x", centerline=[[0, 0], [1, 0]], width=-1.0)
    with pytest.raises(MapError):
        Lane(id="x", centerline=[[0, 0], [1, 0]], width=3.5,
             left_boundary_kind="zigzag")


def test_neighbor_symmetry_enforced():
    lanes = [
        Lane(id="a", centerline=[[0, 0], [10, 0]], width=3.5, left_neighbor="b"),
        Lane(id="b", centerline=[[0, 3.5], [10, 3.5]], width=3.5),  # no right_neighbor back
    ]
    with pytest.raises(MapError, match="symmetric"):
        RoadMap("m", lanes)


def test_light_must_cross_controlled_lane():
    lanes = [Lane(id="a", centerline=[[0, 0], [100, 0]], width=3.5)]
    tl = TrafficLight(id="t", controlled_lane_ids=["a"],
                      stop_line=[[50, 50], [50, 60]],  # nowhere near the lane
                      phases=[("red", 10.0), ("green", 10.0)])
    with pytest.raises(MapError, match="misses"):
        RoadMap("m", lanes, [tl])


def test_light_phase_cycle():
    tl = TrafficLight(id="t", controlled_lane_ids=[],
                      stop_line=[[0, -2], [0, 2]],
                      phases=[("red", 25.0), ("green", 30.0), ("yellow", 3.0)])
    assert tl.state_at(0.0) == "red"
    assert tl.state_at(24.999) == "red"
    assert tl.state_at(25.0) == "green"
    assert tl.state_at(54.999) == "green"
    assert tl.state_at(55.0) == "yellow"
    assert tl.state_at(58.0) == "red"  # wrapped into the next cycle
    assert tl.state_at(58.0 + 116.0) == "red"


def test_builtin_maps_valid_and_roundtrip(tmp_path):
    for name, builder in fixtures.BUILTIN_MAPS.items():
        m = builder()
        doc = map_to_dict(m)
        m2 = map_from_dict(doc)
        assert map_to_dict(m2) == doc
        path = tmp_path / f"{name}.json"
        save_map(m, path)
        assert map_to_dict(load_map(path)) == doc


def test_map_from_dict_rejects_unknown_fields(highway3):
    doc = map_to_dict(highway3)
    doc["extra_field"] = 1
    with pytest.raises(MapError, match="unknown map fields"):
        map_from_dict(doc)
    doc2 = map_to_dict(highway3)
    doc2["lanes"][0]["surprise"] = True
    with pytest.raises(MapError, match="unknown lane fields"):
        map_from_dict(doc2)


def test_map_version_check(highway3):
    doc = map_to_dict(highway3)
    doc["format_version"] = 99
    with pytest.raises(MapError, match="format_version"):
        map_from_dict(doc)


def test_nearest_lane(highway3):
    assert highway3.nearest_lane((100.0, 0.1)) == "h0"
    assert highway3.nearest_lane((100.0, 3.4)) == "h1"
    assert highway3.nearest_lane((100.0, 7.2)) == "h2"
    assert highway3.nearest_lane((100.0, 100.0), max_lateral=5.0) is None


def test_stop_line_distance(junction4):
    # the light's stop line sits at x=300 across the approach lanes
    d = junction4.stop_line_distance("a0", 250.0)
    assert d == pytest.approx(50.0, abs=0.5)
    assert junction4.stop_line_distance("e0", 10.0) is None


def test_distance_to_junction(junction4):
    d = junction4.distance_to_junction("a0", 200.0)
    assert d == pytest.approx(100.0, abs=0.5)
    # already inside
    assert junction4.distance_to_junction("j0", 1.0) == pytest.approx(0.0, abs=1e-9)
