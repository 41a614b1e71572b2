import numpy as np
import pytest

from pose2image.data import (
    Intrinsics,
    RGBDFrame,
    SplitPlan,
    TrajectoryDataset,
    load_dataset,
    make_split,
    normalize_frame,
    denormalize_frame,
    read_depth_png,
    write_depth_png,
)
from pose2image.errors import DataFormatError, SplitError
from pose2image.oracle import OracleScene, generate_dataset, make_trajectory
from pose2image.pose import Pose7, SceneBounds, pose_distance


def dummy_dataset(lengths, hw=4) -> TrajectoryDataset:
    """In-memory dataset with tiny frames; only ids and poses matter."""
    sequences = []
    for seq_id, n in enumerate(lengths):
        frames = [
            RGBDFrame(
                rgb=np.zeros((hw, hw, 3), dtype=np.uint8),
                depth=np.full((hw, hw), 1000, dtype=np.uint16),
                pose=Pose7.identity(),
                seq_id=seq_id,
                frame_id=i,
            )
            for i in range(1, n + 1)
        ]
        sequences.append(frames)
    return TrajectoryDataset(
        sequences=sequences,
        intrinsics=Intrinsics.square(hw),
        bounds=SceneBounds(np.zeros(3), np.ones(3)),
        depth_max_m=2.0,
    )


def brute_force_missing_frames(length: int, N: int) -> set[int]:
    """Independent enumeration of the held-out ids: frames 100m+1 .. 100m+N
    for every m >= 1 with 100m + N <= length."""
    held = set()
    m = 1
    while 100 * m + N <= length:
        for j in range(1, N + 1):
            held.add(100 * m + j)
        m += 1
    return held


class TestMakeSplitSettingA:
    @pytest.mark.parametrize(
        "length,N,expected",
        [
            (500, 1, {101, 201, 301, 401}),
            (500, 3, {101, 102, 103, 201, 202, 203, 301, 302, 303, 401, 402, 403}),
            (250, 20, set(range(101, 121)) | set(range(201, 221))),
            (101, 1, {101}),
        ],
    )
    def test_matches_enumeration(self, length, N, expected):
        assert brute_force_missing_frames(length, N) == expected  # oracle self-check
        ds = dummy_dataset([length])
        plan = make_split(ds, "a", N=N)
        assert {f for _, f in plan.test_ids} == expected
        assert {f for _, f in plan.train_ids} == set(range(1, length + 1)) - expected

    def test_too_short_sequence(self):
        with pytest.raises(SplitError):
            make_split(dummy_dataset([100]), "a", N=1)

    def test_random_configs_disjoint_and_covering(self):
        rng = np.random.default_rng(0)
        for _ in range(100):
            length = int(rng.integers(101, 620))
            N = int(rng.integers(1, 21))
            if 100 + N > length:
                continue
            ds = dummy_dataset([length])
            plan = make_split(ds, "a", N=N)
            train = set(plan.train_ids)
            test = set(plan.test_ids)
            assert not train & test
            assert {f for _, f in train | test} == set(range(1, length + 1))
            assert {f for _, f in test} == brute_force_missing_frames(length, N)

    def test_multi_sequence(self):
        ds = dummy_dataset([500, 150])
        plan = make_split(ds, "a", N=1)
        assert {(s, f) for s, f in plan.test_ids} == {(0, 101), (0, 201), (0, 301), (0, 401), (1, 101)}


class TestMakeSplitSettingsBC:
    def test_setting_b_definition(self):
        ds = dummy_dataset([10, 12])
        plan = make_split(ds, "b", test_seqs=[1])
        assert plan.train_ids == [(0, i) for i in range(1, 11)]
        assert plan.test_ids == [(1, i) for i in range(1, 13)]

    def test_setting_c_multiple_held_out(self):
        ds = dummy_dataset([5, 6, 7])
        plan = make_split(ds, "c", test_seqs=[1, 2])
        assert {s for s, _ in plan.train_ids} == {0}
        assert {s for s, _ in plan.test_ids} == {1, 2}

    def test_no_train_left(self):
        with pytest.raises(SplitError):
            make_split(dummy_dataset([5, 5]), "b", test_seqs=[0, 1])

    def test_unknown_seq(self):
        with pytest.raises(SplitError):
            make_split(dummy_dataset([5]), "b", test_seqs=[3])

    def test_missing_test_seqs(self):
        with pytest.raises(SplitError):
            make_split(dummy_dataset([5, 5]), "b")


class TestSplitPlanJson:
    def test_round_trip(self, tmp_path):
        plan = SplitPlan("a", 3, [(0, 1), (0, 2)], [(0, 101)])
        path = tmp_path / "plan.json"
        plan.save(path)
        loaded = SplitPlan.load(path)
        assert loaded == plan

    def test_wire_format(self):
        import json

        plan = SplitPlan("b", 0, [(0, 1)], [(1, 1)])
        obj = json.loads(plan.to_json())
        assert set(obj) == {"setting", "N", "train", "test"}
        assert obj["train"] == [[0, 1]] and obj["test"] == [[1, 1]]


class TestNormalization:
    def make_frame(self, rgb_val, depth_mm):
        return RGBDFrame(
            rgb=np.full((2, 2, 3), rgb_val, dtype=np.uint8),
            depth=np.full((2, 2), depth_mm, dtype=np.uint16),
            pose=Pose7.identity(),
            seq_id=0,
            frame_id=1,
        )

    def test_rgb_endpoints(self):
        assert normalize_frame(self.make_frame(255, 0), 2.0)[0, 0, 0] == 1.0
        assert normalize_frame(self.make_frame(0, 0), 2.0)[0, 0, 0] == -1.0

    def test_depth_endpoints_and_midpoint(self):
        t = normalize_frame(self.make_frame(0, 2000), 2.0)
        assert t[3, 0, 0] == 1.0
        t = normalize_frame(self.make_frame(0, 1000), 2.0)
        assert t[3, 0, 0] == 0.0  # depth_max/2 -> 0
        t = normalize_frame(self.make_frame(0, 0), 2.0)
        assert t[3, 0, 0] == -1.0

    def test_depth_clamped_above_max(self):
        t = normalize_frame(self.make_frame(0, 5000), 2.0)
        assert t[3, 0, 0] == 1.0

    def test_channel_order_and_range(self):
        f = RGBDFrame(
            rgb=np.stack(
                [np.full((2, 2), 255, np.uint8), np.zeros((2, 2), np.uint8), np.zeros((2, 2), np.uint8)],
                axis=-1,
            ),
            depth=np.zeros((2, 2), dtype=np.uint16),
            pose=Pose7.identity(),
            seq_id=0,
            frame_id=1,
        )
        t = normalize_frame(f, 2.0)
        assert t.shape == (4, 2, 2)
        assert t[0, 0, 0] == 1.0 and t[1, 0, 0] == -1.0  # R first
        assert t.min() >= -1.0 and t.max() <= 1.0

    def test_denormalize_extremes(self):
        rgb, depth = denormalize_frame(np.full((4, 2, 2), -1.0, dtype=np.float32), 2.0)
        assert rgb.max() == 0 and depth.max() == 0
        rgb, depth = denormalize_frame(np.full((4, 2, 2), 1.0, dtype=np.float32), 2.0)
        assert rgb.min() == 255 and np.all(depth == 2000)

    def test_round_trip_within_one_level(self):
        rng = np.random.default_rng(1)
        f = RGBDFrame(
            rgb=rng.integers(0, 256, (8, 8, 3), dtype=np.uint16).astype(np.uint8),
            depth=rng.integers(0, 1800, (8, 8)).astype(np.uint16),
            pose=Pose7.identity(),
            seq_id=0,
            frame_id=1,
        )
        t = normalize_frame(f, 2.0)
        rgb, depth = denormalize_frame(t, 2.0)
        assert np.abs(rgb.astype(int) - f.rgb.astype(int)).max() <= 1
        assert np.abs(depth.astype(int) - f.depth.astype(int)).max() <= 1


@pytest.fixture(scope="module")
def oracle_root(tmp_path_factory):
    root = tmp_path_factory.mktemp("ds") / "oracle"
    scene = OracleScene(seed=3)
    traj = make_trajectory("circle", 10, scene, radius=1.0, target=(0, 0, 0))
    generate_dataset(scene, [traj], Intrinsics.square(32), root)
    return root


class TestLoadNative:
    def test_round_trip_poses(self, oracle_root):
        ds = load_dataset(oracle_root, format="cp2v2")
        assert len(ds.sequences) == 1 and len(ds.sequences[0]) == 10
        assert [f.frame_id for f in ds.sequences[0]] == list(range(1, 11))

    def test_deterministic_loads(self, oracle_root):
        a = load_dataset(oracle_root, format="cp2v2")
        b = load_dataset(oracle_root, format="cp2v2")
        for fa, fb in zip(a.sequences[0], b.sequences[0]):
            assert np.array_equal(fa.rgb, fb.rgb)
            assert np.array_equal(fa.depth, fb.depth)
            assert np.array_equal(fa.pose.as_vector(), fb.pose.as_vector())

    def test_missing_depth_file_detected(self, oracle_root, tmp_path):
        import shutil

        root = tmp_path / "broken"
        shutil.copytree(oracle_root, root)
        (root / "seq_000" / "frame_000003.depth.png").unlink()
        with pytest.raises(DataFormatError, match="depth"):
            load_dataset(root, format="cp2v2")

    def test_missing_root(self, tmp_path):
        with pytest.raises(DataFormatError):
            load_dataset(tmp_path / "nope", format="cp2v2")


class TestLoadSevenScenes:
    @staticmethod
    def write_frame(d, idx, mat, hw=8):
        from pose2image.data import write_color_png

        stem = d / f"frame-{idx:06d}"
        np.savetxt(f"{stem}.pose.txt", mat)
        write_color_png(f"{stem}.color.png", np.zeros((hw, hw, 3), dtype=np.uint8))
        write_depth_png(f"{stem}.depth.png", np.full((hw, hw), 1500, dtype=np.uint16))

    def test_identity_matrix_converts(self, tmp_path):
        d = tmp_path / "seq-01"
        d.mkdir()
        self.write_frame(d, 0, np.eye(4))
        self.write_frame(d, 1, np.eye(4))
        ds = load_dataset(tmp_path, format="sevenscenes")
        f = ds.sequences[0][0]
        np.testing.assert_array_equal(f.pose.t, [0, 0, 0])
        np.testing.assert_array_equal(f.pose.q, [1, 0, 0, 0])
        assert f.frame_id == 1

    def test_rotation_round_trip(self, tmp_path):
        from pose2image.pose import quat_to_matrix

        q = np.array([0.5, 0.5, 0.5, 0.5])
        mat = np.eye(4)
        mat[:3, :3] = quat_to_matrix(q)
        mat[:3, 3] = [1.0, 2.0, 3.0]
        d = tmp_path / "seq-01"
        d.mkdir()
        self.write_frame(d, 0, mat)
        ds = load_dataset(tmp_path, format="sevenscenes")
        d7 = pose_distance(ds.sequences[0][0].pose, Pose7(np.array([1.0, 2, 3]), q))
        assert d7.translation_err < 1e-9 and d7.rotation_err < 1e-6

    def test_non_orthonormal_rejected(self, tmp_path):
        mat = np.eye(4)
        mat[0, 0] = 1.5  # breaks R'R = I well past the 1e-3 gate
        d = tmp_path / "seq-01"
        d.mkdir()
        self.write_frame(d, 0, mat)
        with pytest.raises(DataFormatError, match="orthonormal"):
            load_dataset(tmp_path, format="sevenscenes")

    def test_missing_color_file(self, tmp_path):
        d = tmp_path / "seq-01"
        d.mkdir()
        self.write_frame(d, 0, np.eye(4))
        (d / "frame-000000.color.png").unlink()
        with pytest.raises(DataFormatError, match="color"):
            load_dataset(tmp_path, format="sevenscenes")


class TestDepthPng:
    def test_sixteen_bit_round_trip(self, tmp_path):
        arr = np.array([[0, 1], [40000, 65535]], dtype=np.uint16)
        write_depth_png(tmp_path / "d.png", arr)
        back = read_depth_png(tmp_path / "d.png")
        assert back.dtype == np.uint16
        assert np.array_equal(arr, back)
