import numpy as np
import pytest

from radiant import io
from radiant.core_math import Aabb, Intrinsics, Pose, rotation_about
from radiant.errors import BadMagic, BadVersion, FileFormatError, TruncatedFile
from radiant.grids import VoxelGrid4D
from radiant.metrics import OrientedBox3, PoseRecord
from radiant.octree import SurfaceSample


def f32_grid(rng, dims=(8, 8, 8), channels=4):
    # values representable in f32 so the file round trip is lossless
    data = rng.uniform(0, 1, size=(*dims, channels)).astype(np.float32)
    return VoxelGrid4D(data.astype(np.float64), Aabb([-1, -2, -3], [4, 5, 6]))


class TestNfvg:
    def test_round_trip_bit_identical(self, tmp_path):
        grid = f32_grid(np.random.default_rng(0))
        path = tmp_path / "g.nfvg"
        io.write_nfvg(path, grid)
        back = io.read_nfvg(path)
        assert np.array_equal(back.data, grid.data)
        assert np.array_equal(back.bounds.min, grid.bounds.min)
        assert np.array_equal(back.bounds.max, grid.bounds.max)

    def test_file_level_round_trip(self, tmp_path):
        grid = f32_grid(np.random.default_rng(1), dims=(3, 4, 5), channels=2)
        p1, p2 = tmp_path / "a.nfvg", tmp_path / "b.nfvg"
        io.write_nfvg(p1, grid)
        io.write_nfvg(p2, io.read_nfvg(p1))
        assert p1.read_bytes() == p2.read_bytes()

    def test_bad_magic(self, tmp_path):
        p = tmp_path / "bad.nfvg"
        grid = f32_grid(np.random.default_rng(2))
        io.write_nfvg(p, grid)
        raw = bytearray(p.read_bytes())
        raw[:4] = b"JUNK"
        p.write_bytes(bytes(raw))
        with pytest.raises(BadMagic):
            io.read_nfvg(p)

    def test_bad_version(self, tmp_path):
        p = tmp_path / "v9.nfvg"
        grid = f32_grid(np.random.default_rng(3))
        io.write_nfvg(p, grid)
        raw = bytearray(p.read_bytes())
        raw[4] = 9
        p.write_bytes(bytes(raw))
        with pytest.raises(BadVersion):
            io.read_nfvg(p)

    def test_truncated_payload(self, tmp_path):
        p = tmp_path / "cut.nfvg"
        io.write_nfvg(p, f32_grid(np.random.default_rng(4)))
        raw = p.read_bytes()
        p.write_bytes(raw[:-10])
        with pytest.raises(TruncatedFile):
            io.read_nfvg(p)

    def test_trailing_garbage(self, tmp_path):
        p = tmp_path / "fat.nfvg"
        io.write_nfvg(p, f32_grid(np.random.default_rng(5)))
        p.write_bytes(p.read_bytes() + b"xx")
        with pytest.raises(FileFormatError):
            io.read_nfvg(p)

    def test_random_shapes_round_trip(self, tmp_path):
        rng = np.random.default_rng(6)
        for i in range(10):
            dims = tuple(int(d) for d in rng.integers(1, 7, size=3))
            channels = int(rng.integers(1, 6))
            grid = f32_grid(rng, dims=dims, channels=channels)
            p = tmp_path / f"g{i}.nfvg"
            io.write_nfvg(p, grid)
            back = io.read_nfvg(p)
            assert back.dims == dims and back.channels == channels
            assert np.array_equal(back.data, grid.data)


class TestPly:
    def samples(self, rng, n=20):
        pos = rng.normal(size=(n, 3)).astype(np.float32).astype(np.float64)
        nrm = rng.normal(size=(n, 3))
        nrm /= np.linalg.norm(nrm, axis=1, keepdims=True)
        nrm = nrm.astype(np.float32).astype(np.float64)
        return [SurfaceSample(p, v, 0.0) for p, v in zip(pos, nrm)]

    def test_round_trip(self, tmp_path):
        samples = self.samples(np.random.default_rng(0))
        p = tmp_path / "pts.ply"
        io.write_ply(p, samples)
        back = io.read_ply(p)
        assert len(back) == len(samples)
        for a, b in zip(samples, back):
            assert np.array_equal(a.position, b.position)
            assert np.array_equal(a.normal, b.normal)

    def test_file_level_round_trip(self, tmp_path):
        samples = self.samples(np.random.default_rng(1))
        p1, p2 = tmp_path / "a.ply", tmp_path / "b.ply"
        io.write_ply(p1, samples)
        io.write_ply(p2, io.read_ply(p1))
        assert p1.read_bytes() == p2.read_bytes()

    def test_header(self, tmp_path):
        p = tmp_path / "h.ply"
        io.write_ply(p, self.samples(np.random.default_rng(2), n=3))
        lines = p.read_text().splitlines()
        assert lines[0] == "ply"
        assert lines[1] == "format ascii 1.0"
        assert "element vertex 3" in lines
        assert lines[:2] + ["end_header"] == ["ply", "format ascii 1.0", "end_header"][:3]

    def test_version_rejected(self, tmp_path):
        p = tmp_path / "v2.ply"
        io.write_ply(p, self.samples(np.random.default_rng(3), n=1))
        text = p.read_text().replace("format ascii 1.0", "format ascii 2.0")
        p.write_text(text)
        with pytest.raises(BadVersion):
            io.read_ply(p)

    def test_truncated(self, tmp_path):
        p = tmp_path / "cut.ply"
        io.write_ply(p, self.samples(np.random.default_rng(4), n=5))
        lines = p.read_text().splitlines()
        p.write_text("\n".join(lines[:-2]) + "\n")
        with pytest.raises(TruncatedFile):
            io.read_ply(p)


class TestPpm:
    def test_round_trip(self, tmp_path):
        rng = np.random.default_rng(0)
        img = np.round(rng.uniform(0, 1, size=(6, 9, 3)) * 255) / 255
        p = tmp_path / "img.ppm"
        io.write_ppm(p, img)
        back = io.read_ppm(p)
        assert np.abs(back - img).max() < 1e-12
        assert p.read_bytes().startswith(b"P6\n9 6\n255\n")

    def test_bad_magic(self, tmp_path):
        p = tmp_path / "x.ppm"
        p.write_bytes(b"P5\n1 1\n255\n\x00")
        with pytest.raises(BadMagic):
            io.read_ppm(p)


class TestMapEncodings:
    def test_semantic_map_round_trip(self, tmp_path):
        from radiant.projmaps import SemanticMap

        rng = np.random.default_rng(0)
        smap = SemanticMap(6, 0.25, rng.random((12, 12, 3)) > 0.7)
        p = tmp_path / "map.nfvg"
        io.write_nfvg(p, io.semantic_map_to_grid(smap))
        back = io.grid_to_semantic_map(io.read_nfvg(p))
        assert back.half_extent == 6
        assert back.cell_size == pytest.approx(0.25)
        assert np.array_equal(back.occupancy, smap.occupancy)

    def test_heatmap_round_trip(self, tmp_path):
        rng = np.random.default_rng(1)
        heat = np.round(rng.random((7, 9)) * 1e4) / 1e4  # f32-exact values
        heat = heat.astype(np.float32).astype(np.float64)
        p = tmp_path / "heat.nfvg"
        io.write_nfvg(p, io.heatmap_to_grid(heat))
        grid = io.read_nfvg(p)
        assert grid.dims == (7, 9, 1) and grid.channels == 1
        assert np.array_equal(io.grid_to_heatmap(grid), heat)

    def test_wrong_layout_rejected(self):
        from radiant.core_math import Aabb
        from radiant.grids import VoxelGrid4D

        grid = VoxelGrid4D(np.zeros((2, 2, 2, 1)), Aabb([0, 0, 0], [1, 1, 1]))
        with pytest.raises(FileFormatError):
            io.grid_to_heatmap(grid)
        with pytest.raises(FileFormatError):
            io.grid_to_semantic_map(grid)


class TestJsonSchemas:
    def test_pose_round_trip(self):
        pose = Pose(rotation_about([0.3, 0.5, 0.8], 1.1), (1, 2, 3))
        back = io.pose_from_json(io.pose_to_json(pose))
        assert np.abs(back.rotation - pose.rotation).max() < 1e-15
        assert np.array_equal(back.translation, pose.translation)

    def test_intrinsics_round_trip(self):
        k = Intrinsics(fx=100, fy=90, cx=32, cy=24, width=64, height=48)
        assert io.intrinsics_from_json(io.intrinsics_to_json(k)) == k

    def test_box_round_trip(self):
        b = OrientedBox3((1, 2, 3), (0.5, 0.6, 0.7), yaw=0.3, label="car", score=0.8)
        back = io.box_from_json(io.box_to_json(b))
        assert np.array_equal(back.center, b.center)
        assert back.label == "car" and back.score == 0.8

    def test_pose_record_round_trip(self):
        r = PoseRecord(rotation_about([0, 0, 1], 0.4), (0.1, 0.2, 0.3),
                       scale=1.5, label="mug", score=0.7)
        back = io.pose_record_from_json(io.pose_record_to_json(r))
        assert np.abs(back.rotation - r.rotation).max() < 1e-15
        assert back.scale == 1.5

    def test_versioned_json_rejects_unknown(self, tmp_path):
        p = tmp_path / "doc.json"
        p.write_text('{"version": 2, "boxes": []}')
        with pytest.raises(BadVersion):
            io.load_versioned_json(p)
