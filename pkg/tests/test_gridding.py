import io

import numpy as np
import pytest

from fploc.gridding import GridSpec, RawRFM, grid_interpolate, ingest, read_polygon
from fploc.model import Fingerprint, Rect, ReferenceRecord

L_POLYGON = [(0.0, 0.0), (16.0, 0.0), (16.0, 6.0), (10.0, 6.0), (10.0, 10.0), (0.0, 10.0)]


def record(pairs, pos):
    return ReferenceRecord(Fingerprint.from_pairs(pairs), np.array(pos))


class TestGridSpec:
    def test_divisibility_enforced(self):
        GridSpec(2.0, 0.2)
        GridSpec(2.0, 2.0)
        with pytest.raises(ValueError, match="integer multiple"):
            GridSpec(2.0, 0.3)
        with pytest.raises(ValueError, match="positive"):
            GridSpec(0.0, 0.2)
        with pytest.raises(ValueError, match="integer multiple"):
            GridSpec(0.2, 2.0)

    def test_points_per_edge(self):
        assert GridSpec(2.0, 0.2).points_per_edge == 10


class TestIngest:
    def test_empty_file_is_no_reference_data(self):
        with pytest.raises(ValueError, match="no reference data"):
            ingest(io.StringIO(""))

    def test_single_line(self):
        raw = ingest(io.StringIO("1.0,2.0 5:-60.0\n"))
        assert len(raw.records) == 1
        assert raw.roi_bounds.contains(np.array([[1.0, 2.0]])).all()

    def test_duplicate_key_propagates(self):
        with pytest.raises(ValueError, match="duplicate feature key 5"):
            ingest(io.StringIO("1.0,2.0 5:-60.0 5:-61.0\n"))

    def test_raw_rfm_rejects_outside_positions(self):
        with pytest.raises(ValueError, match="inside roi_bounds"):
            RawRFM((record([(1, -60.0)], (5.0, 5.0)),), Rect(0.0, 0.0, 1.0, 1.0))


class TestGridInterpolate:
    def test_single_record_fills_everything(self):
        fp_pairs = [(1, -60.0), (9, -70.0)]
        raw = RawRFM((record(fp_pairs, (1.0, 1.0)),), Rect(0.0, 0.0, 4.0, 2.0))
        rfm = grid_interpolate(raw, GridSpec(2.0, 0.5))
        assert rfm.n_sub_regions == 2
        assert rfm.points_per_region == 16
        for region in rfm.sub_regions:
            for point in region.reference_points:
                assert point.fingerprint.keys.tolist() == [1, 9]
                assert point.fingerprint.values.tolist() == [-60.0, -70.0]

    def test_two_records_split_at_bisector(self):
        """Brute-force nearest-neighbor oracle over every lattice point."""
        left = record([(1, -50.0)], (0.3, 0.5))
        right = record([(2, -55.0)], (7.1, 0.5))
        raw = RawRFM((left, right), Rect(0.0, 0.0, 8.0, 1.0))
        rfm = grid_interpolate(raw, GridSpec(1.0, 0.25))
        raw_pos = np.array([left.position, right.position])
        for region in rfm.sub_regions:
            for point in region.reference_points:
                d2 = np.sum((raw_pos - point.position) ** 2, axis=1)
                expected = raw.records[int(np.argmin(d2))]
                assert np.array_equal(
                    point.fingerprint.keys, expected.fingerprint.keys
                )
                assert np.array_equal(
                    point.fingerprint.values, expected.fingerprint.values
                )

    def test_tie_breaks_to_lowest_record_index(self):
        a = record([(1, -50.0)], (0.0, 0.5))
        b = record([(2, -55.0)], (2.0, 0.5))
        raw = RawRFM((a, b), Rect(0.0, 0.0, 2.0, 1.0))
        # Single cell, single lattice point at (1.0, 1.0): exactly
        # equidistant from both records at y=0.5.
        rfm = grid_interpolate(raw, GridSpec(2.0, 2.0))
        point = rfm.sub_regions[0].reference_points[0]
        assert np.array_equal(point.position, [1.0, 1.0])
        assert point.fingerprint.keys.tolist() == [1]

    def test_paper_scale_l_shape(self):
        """34 cells of 2x2 m, 100 lattice points each, on the L-shaped RoI."""
        rng = np.random.default_rng(3)
        positions = []
        while len(positions) < 60:
            xy = rng.uniform((0, 0), (16, 10))
            if xy[0] <= 10 or xy[1] <= 6:
                positions.append(xy)
        records = tuple(record([(1, -60.0)], xy) for xy in positions)
        raw = RawRFM(records, Rect(0.0, 0.0, 16.0, 10.0))
        rfm = grid_interpolate(raw, GridSpec(2.0, 0.2), mask_polygon=L_POLYGON)
        assert rfm.n_sub_regions == 34
        assert rfm.points_per_region == 100

    def test_partition_property(self):
        rng = np.random.default_rng(5)
        records = tuple(
            record([(int(i), -60.0)], rng.uniform((0, 0), (4, 4))) for i in range(7)
        )
        raw = RawRFM(records, Rect(0.0, 0.0, 4.0, 4.0))
        rfm = grid_interpolate(raw, GridSpec(2.0, 0.5))
        all_points = [tuple(p.position) for s in rfm.sub_regions for p in s.reference_points]
        assert len(all_points) == len(set(all_points))
        assert len(all_points) == rfm.n_sub_regions * rfm.points_per_region
        for region in rfm.sub_regions:
            for point in region.reference_points:
                others = [
                    s
                    for s in rfm.sub_regions
                    if s.index != region.index
                    and s.bounds.xmin < point.position[0] < s.bounds.xmax
                    and s.bounds.ymin < point.position[1] < s.bounds.ymax
                ]
                assert not others

    def test_lattice_fingerprints_are_raw_fingerprints(self):
        rng = np.random.default_rng(11)
        records = tuple(
            record([(int(k), float(rng.normal(-60, 5))) for k in range(3)],
                   rng.uniform((0, 0), (2, 2)))
            for _ in range(5)
        )
        raw = RawRFM(records, Rect(0.0, 0.0, 2.0, 2.0))
        rfm = grid_interpolate(raw, GridSpec(2.0, 0.5))
        raw_values = {tuple(r.fingerprint.values.tolist()) for r in records}
        for region in rfm.sub_regions:
            for point in region.reference_points:
                assert tuple(point.fingerprint.values.tolist()) in raw_values

    def test_idempotence(self):
        """Regridding an already-gridded map with the same spec reproduces it."""
        rng = np.random.default_rng(7)
        records = tuple(
            record([(int(i), float(rng.normal(-60, 5)))], rng.uniform((0, 0), (4, 2)))
            for i in range(6)
        )
        bounds = Rect(0.0, 0.0, 4.0, 2.0)
        spec = GridSpec(2.0, 0.5)
        first = grid_interpolate(RawRFM(records, bounds), spec)
        regridded = grid_interpolate(
            RawRFM(tuple(p for s in first.sub_regions for p in s.reference_points), bounds),
            spec,
        )
        for s1, s2 in zip(first.sub_regions, regridded.sub_regions):
            assert s1.bounds == s2.bounds
            for p1, p2 in zip(s1.reference_points, s2.reference_points):
                assert np.array_equal(p1.position, p2.position)
                assert np.array_equal(p1.fingerprint.keys, p2.fingerprint.keys)
                assert np.array_equal(p1.fingerprint.values, p2.fingerprint.values)

    def test_key_unions_match_definition(self):
        rng = np.random.default_rng(13)
        records = tuple(
            record(
                [(int(k), -60.0) for k in rng.choice(20, size=4, replace=False)],
                rng.uniform((0, 0), (4, 4)),
            )
            for _ in range(10)
        )
        rfm = grid_interpolate(RawRFM(records, Rect(0, 0, 4, 4)), GridSpec(2.0, 1.0))
        for region in rfm.sub_regions:
            manual = sorted({int(k) for p in region.reference_points for k in p.fingerprint.keys})
            assert region.key_union.tolist() == manual
        roi_manual = sorted({int(k) for s in rfm.sub_regions for k in s.key_union})
        assert rfm.roi_key_union.tolist() == roi_manual

    def test_mask_keeps_equal_point_counts(self):
        records = (record([(1, -60.0)], (1.0, 1.0)),)
        raw = RawRFM(records, Rect(0.0, 0.0, 16.0, 10.0))
        rfm = grid_interpolate(raw, GridSpec(2.0, 1.0), mask_polygon=L_POLYGON)
        counts = {len(s.reference_points) for s in rfm.sub_regions}
        assert counts == {4}
        assert rfm.n_sub_regions == 34

    def test_mask_excluding_everything_errors(self):
        records = (record([(1, -60.0)], (1.0, 1.0)),)
        raw = RawRFM(records, Rect(0.0, 0.0, 4.0, 4.0))
        with pytest.raises(ValueError, match="excludes every grid cell"):
            grid_interpolate(
                raw, GridSpec(2.0, 1.0), mask_polygon=[(90, 90), (91, 90), (91, 91)]
            )


def test_read_polygon(tmp_path):
    path = tmp_path / "roi.poly"
    path.write_text("0 0\n4,0\n4 4\n# comment\n\n0 4\n")
    assert read_polygon(path) == [(0.0, 0.0), (4.0, 0.0), (4.0, 4.0), (0.0, 4.0)]
    path.write_text("0 0\n1 1\n")
    with pytest.raises(ValueError, match="three vertices"):
        read_polygon(path)
