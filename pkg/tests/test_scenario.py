"""Event tables, rainfall rasters, climate scaling, scenario files."""

import datetime as dt
import json

import numpy as np
import pytest

from mudflow import fixtures
from mudflow.errors import AlignmentError, DomainError, ScenarioError
from mudflow.scenario import (DEFAULT_CLIMATE_MULTIPLIERS, ClimateScenario,
                              LandslideEvent, RainfallRaster, check_aligned,
                              filter_events, load_events, load_scenario, save_events,
                              scale_scenario, susceptibility_layer)
from mudflow.terrain import TerrainGrid


def write_events(path, rows):
    path.write_text("id,date,x,y,scale,description\n" + "\n".join(rows) + ("\n" if rows else ""))
    return path


class TestEvents:
    def test_header_only_is_empty(self, tmp_path):
        path = write_events(tmp_path / "e.csv", [])
        assert load_events(path) == []

    def test_year_filter_retrieves_2006_event(self, tmp_path):
        path = write_events(tmp_path / "e.csv", ["a,2006-06-01,1,2,300,storm"])
        events = load_events(path)
        assert filter_events(events, 1984, 2021) == events
        assert events[0].date == dt.date(2006, 6, 1)

    def test_bad_date_names_line(self, tmp_path):
        path = write_events(tmp_path / "e.csv",
                            ["a,2006-06-01,1,2,300,ok", "b,bad,1,2,300,broken"])
        with pytest.raises(ScenarioError, match="line 3.*'bad'"):
            load_events(path)

    def test_malformed_header(self, tmp_path):
        path = tmp_path / "e.csv"
        path.write_text("id,when,x,y,scale,description\n")
        with pytest.raises(ScenarioError, match="malformed header"):
            load_events(path)

    def test_non_positive_numeric_scale_rejected(self, tmp_path):
        path = write_events(tmp_path / "e.csv", ["a,2006-06-01,1,2,-5,bad"])
        with pytest.raises(ScenarioError, match="positive"):
            load_events(path)

    def test_categorical_scale_allowed(self, tmp_path):
        path = write_events(tmp_path / "e.csv", ["a,2006-06-01,1,2,major,desc"])
        events = load_events(path)
        assert events[0].scale == "major"
        assert events[0].numeric_scale is None

    def test_rfc4180_quoting(self, tmp_path):
        path = write_events(tmp_path / "e.csv", ['a,2006-06-01,1,2,300,"hello, world"'])
        assert load_events(path)[0].description == "hello, world"

    def test_round_trip_exact(self, tmp_path):
        events = fixtures.sample_events()
        path = tmp_path / "round.csv"
        save_events(path, events)
        assert load_events(path) == events


class TestFilter:
    def events(self):
        return [LandslideEvent(id=str(y), date=dt.date(y, 6, 1), x=0, y=0, scale=1.0)
                for y in (2005, 2006, 2008)]

    def test_full_range_identity(self):
        ev = self.events()
        assert filter_events(ev, 1984, 2021) == ev

    def test_empty_range_between_events(self):
        assert filter_events(self.events(), 2007, 2007) == []

    def test_subrange_by_hand(self):
        # oracle: enumeration by hand, [2006, 2008] keeps the last two
        out = filter_events(self.events(), 2006, 2008)
        assert [e.id for e in out] == ["2006", "2008"]

    def test_inverted_range_rejected(self):
        with pytest.raises(DomainError, match="inverted"):
            filter_events(self.events(), 2010, 2005)

    def test_order_preserved(self):
        ev = list(reversed(self.events()))
        out = filter_events(ev, 1984, 2021)
        assert [e.id for e in out] == ["2008", "2006", "2005"]

    def test_shared_fixture_parity_counts(self):
        # the browser client pins the same counts on scenarios/events.csv
        events = fixtures.sample_events()
        assert len(filter_events(events, 1984, 2021)) == 6
        assert [e.id for e in filter_events(events, 2006, 2006)] == ["e2006a"]
        assert [e.id for e in filter_events(events, 2006, 2008)] == ["e2006a", "e2008a"]
        assert filter_events(events, 2009, 2020) == []
        assert [e.id for e in filter_events(events, "2005-08-20", "2005-08-20")] == ["e2005a"]

    def test_committed_fixture_matches_generator(self):
        from pathlib import Path
        path = Path(__file__).resolve().parents[1] / "scenarios" / "events.csv"
        if path.exists():
            assert load_events(path) == fixtures.sample_events()


class TestClimate:
    def test_identity_multiplier_hash_equal(self):
        s = fixtures.v_channel_scenario()
        assert scale_scenario(s, 1.0).content_hash() == s.content_hash()

    def test_volume_scales_linearly(self):
        s = fixtures.plane_scenario(volume=10.0)
        assert scale_scenario(s, 2.0).release_volume == pytest.approx(20.0)

    def test_default_multipliers(self):
        assert DEFAULT_CLIMATE_MULTIPLIERS == (1.5, 2.5, 3.0)
        for m in DEFAULT_CLIMATE_MULTIPLIERS:
            ClimateScenario(base_id="x", multiplier=m)

    def test_rainfall_scaled_per_cell(self):
        s = fixtures.v_channel_scenario()
        scaled = scale_scenario(s, 2.5)
        np.testing.assert_allclose(scaled.rainfall.grid.heights,
                                   2.5 * s.rainfall.grid.heights)

    def test_non_positive_multiplier_rejected(self):
        with pytest.raises(DomainError):
            scale_scenario(fixtures.plane_scenario(), 0.0)
        with pytest.raises(DomainError):
            ClimateScenario(base_id="x", multiplier=-1.0)

    def test_composition_associative(self):
        s = fixtures.plane_scenario(volume=7.0)
        ab = scale_scenario(scale_scenario(s, 1.5), 2.0).release_volume
        once = scale_scenario(s, 3.0).release_volume
        assert ab == pytest.approx(once, rel=1e-9)

    def test_provenance_tagged(self):
        s = fixtures.plane_scenario()
        scaled = scale_scenario(s, 1.5)
        assert scaled.provenance["climate_multiplier"] == 1.5
        assert scaled.provenance["volume_scaling"] == "linear-in-multiplier"


class TestSusceptibility:
    def flat(self, n=6, cell=2.0):
        return TerrainGrid(n_cols=n, n_rows=n, cell_size=cell, origin_x=0, origin_y=0,
                           heights=np.zeros((n, n)))

    def test_zero_rainfall_proxy_is_zero(self):
        s = fixtures.v_channel_scenario()
        rain = RainfallRaster(grid=s.terrain.with_heights(np.zeros_like(s.terrain.heights)))
        layer, meta = susceptibility_layer(s, rain)
        assert np.all(layer == 0.0) and meta["proxy"] is True

    def test_flat_terrain_proxy_is_zero(self):
        import dataclasses
        terrain = self.flat(8)
        s = dataclasses.replace(fixtures.plane_scenario(), terrain=terrain, rainfall=None,
                                release_polygon=((2, 2), (6, 2), (6, 6), (2, 6)))
        rain = RainfallRaster(grid=terrain.with_heights(np.full((8, 8), 30.0)))
        layer, _ = susceptibility_layer(s, rain)
        assert np.all(layer == 0.0)

    def test_single_sloped_cell_peaks(self):
        # oracle: proxy formula by hand; only the sloped cell is nonzero
        n = 7
        heights = np.zeros((n, n))
        heights[3, 3] = 2.0  # a bump makes the steepest gradients near (3, 3)
        terrain = TerrainGrid(n_cols=n, n_rows=n, cell_size=2.0, origin_x=0, origin_y=0,
                              heights=heights)
        import dataclasses
        s = dataclasses.replace(fixtures.plane_scenario(), terrain=terrain, rainfall=None,
                                release_polygon=((2, 2), (6, 2), (6, 6), (2, 6)))
        rain = RainfallRaster(grid=terrain.with_heights(np.full((n, n), 10.0)))
        layer, meta = susceptibility_layer(s, rain)
        assert meta["proxy"] is True
        assert layer.max() == pytest.approx(1.0)
        peak = np.unravel_index(np.argmax(layer), layer.shape)
        assert abs(peak[0] - 3) <= 1 and abs(peak[1] - 3) <= 1

    def test_attached_raster_returned_normalized(self):
        import dataclasses
        s = fixtures.plane_scenario()
        sus = s.terrain.with_heights(np.full((48, 48), 4.0))
        s = dataclasses.replace(s, susceptibility=sus)
        layer, meta = susceptibility_layer(s)
        assert meta["proxy"] is False
        assert np.all(layer == 1.0)

    def test_misaligned_raster_rejected(self):
        s = fixtures.plane_scenario()
        other = self.flat(5)
        with pytest.raises(AlignmentError):
            susceptibility_layer(s, RainfallRaster(grid=other))

    def test_negative_rainfall_rejected(self):
        with pytest.raises(ScenarioError):
            RainfallRaster(grid=self.flat().with_heights(np.full((6, 6), -1.0)))


class TestAlignment:
    def test_aligned_ok(self):
        a = fixtures.make_plane()
        check_aligned(a, a.with_heights(a.heights * 2))

    def test_cell_size_mismatch(self):
        a = fixtures.make_plane(cell=2.0)
        b = fixtures.make_plane(cell=2.0 + 1e-6)
        with pytest.raises(AlignmentError):
            check_aligned(a, b)

    def test_every_fixture_scenario_aligned(self):
        for scn in (fixtures.v_channel_scenario(), fixtures.plane_scenario(),
                    fixtures.two_ridge_scenario(), fixtures.island_scenario()):
            if scn.rainfall is not None:
                check_aligned(scn.terrain, scn.rainfall.grid)


class TestScenarioFiles:
    def test_fixture_tree_round_trip(self, tmp_path):
        manifest = fixtures.write_fixture_tree(tmp_path)
        assert set(manifest) >= {"vchannel", "plane", "two_ridge", "island", "events"}
        scn = load_scenario(tmp_path / manifest["vchannel"])
        mem = fixtures.v_channel_scenario()
        assert scn.id == "vchannel"
        assert scn.release_volume == mem.release_volume
        assert scn.params.dt == mem.params.dt
        assert scn.seed == mem.seed
        np.testing.assert_allclose(scn.terrain.heights, mem.terrain.heights, atol=1e-12)
        assert len(scn.buildings) == len(mem.buildings)
        np.testing.assert_allclose(scn.rainfall.grid.heights, mem.rainfall.grid.heights,
                                   atol=1e-12)

    def test_missing_file(self, tmp_path):
        with pytest.raises(ScenarioError, match="not found"):
            load_scenario(tmp_path / "nope.json")

    def test_invalid_json(self, tmp_path):
        path = tmp_path / "bad.json"
        path.write_text("{not json")
        with pytest.raises(ScenarioError, match="invalid JSON"):
            load_scenario(path)

    def test_missing_required_key(self, tmp_path):
        path = tmp_path / "x.json"
        path.write_text(json.dumps({"id": "x"}))
        with pytest.raises(ScenarioError, match="terrain"):
            load_scenario(path)

    def test_unknown_param_rejected(self, tmp_path):
        fixtures.write_fixture_tree(tmp_path)
        doc = json.loads((tmp_path / "plane.json").read_text())
        doc["params"]["viscosity"] = 1.0
        (tmp_path / "plane.json").write_text(json.dumps(doc))
        with pytest.raises(ScenarioError, match="viscosity"):
            load_scenario(tmp_path / "plane.json")

    def test_buildings_need_height(self, tmp_path):
        fixtures.write_fixture_tree(tmp_path)
        geo = json.loads((tmp_path / "vchannel_buildings.geojson").read_text())
        del geo["features"][0]["properties"]["height"]
        (tmp_path / "vchannel_buildings.geojson").write_text(json.dumps(geo))
        with pytest.raises(ScenarioError, match="height"):
            load_scenario(tmp_path / "vchannel.json")

    def test_build_sim_deterministic(self):
        scn = fixtures.plane_scenario()
        a, b = scn.build_sim(), scn.build_sim()
        assert a.state_hash() == b.state_hash()
