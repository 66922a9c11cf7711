# Copyright 2026 The ffpa Authors
#
# Licensed under the Apache License, Version 2.0 (the "License");
# you may not use this file except in compliance with the License.
# You may obtain a copy of the License at
#
#     http://www.apache.org/licenses/LICENSE-2.0
#
# Unless required by applicable law or agreed to in writing, software
# distributed under the License is distributed on an "AS IS" BASIS,
# WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
# See the License for the specific language governing permissions and
# limitations under the License.


import json

import numpy as np
import pytest

import ffpa

SMALL = {
    "fusion": "licamfuse",
    "input_width": "8",
    "offset_width": "8",
    "level1.point_width": "8",
    "level2.point_width": "8",
    "level3.point_width": "16",
    "level4.point_width": "16",
    "level1.image_width": "4",
    "level2.image_width": "8",
    "level3.image_width": "8",
    "level4.image_width": "8",
}


@pytest.fixture(scope="module")
def dataset(tmp_path_factory):
    root = tmp_path_factory.mktemp("kitti")
    ffpa.write_synthetic_dataset(str(root), seed=5, count=2)
    return root


def test_calibration_matches_numpy_product(dataset):
    calib = ffpa.read_calibration(str(dataset / "calib" / "000000.txt"))
    r0 = np.eye(4)
    r0[:3, :3] = calib.R0_rect
    tr = np.vstack([calib.Tr_velo_to_cam, [0, 0, 0, 1]])
    np.testing.assert_allclose(calib.composed, calib.P2 @ r0 @ tr, atol=1e-9)


def test_parse_error_is_raised():
    with pytest.raises(ffpa.Error):
        ffpa.parse_calibration("P2: 1 2 x\n")


def test_velodyne_count_is_size_over_16(dataset):
    path = dataset / "velodyne" / "000000.bin"
    points = ffpa.read_velodyne(str(path))
    assert points.shape == (path.stat().st_size // 16, 4)
    assert points.dtype == np.float32


def test_crop_keeps_box():
    pts = np.array([[1, 0, 0, 0], [-1, 0, 0, 0], [10, 0, 5, 0]], dtype=np.float32)
    assert ffpa.crop(pts).shape == (1, 4)


def test_maps_stay_synchronized(dataset):
    pts = ffpa.read_velodyne(str(dataset / "velodyne" / "000001.bin"))
    calib = ffpa.read_calibration(str(dataset / "calib" / "000001.txt"))
    m = ffpa.build_synced_maps(pts, calib, "46x420")
    assert (m.height, m.width) == (46, 420)
    assert m.valid_count == int(m.mask.sum())
    for _ in range(4):
        assert m.synchronization_error() <= 1e-5
        m = m.subsample(2, 2)
    assert m.xyz.shape == (m.height, m.width, 3)
    assert m.uv.shape == (m.height, m.width, 2)


def test_knn_matches_numpy_window_scan(dataset):
    pts = ffpa.read_velodyne(str(dataset / "velodyne" / "000000.bin"))
    calib = ffpa.read_calibration(str(dataset / "calib" / "000000.txt"))
    m = ffpa.build_synced_maps(pts, calib)
    xyz, mask = m.xyz, m.mask
    rows, cols = np.nonzero(mask)
    for r, c in list(zip(rows, cols))[::25]:
        got = m.knn(int(r), int(c), 9, 13, 16, 1.0)
        cand = []
        for dr in range(-4, 5):
            for dc in range(-6, 7):
                rr, cc = r + dr, c + dc
                if 0 <= rr < m.height and 0 <= cc < m.width and mask[rr, cc]:
                    d = np.sum((xyz[rr, cc] - xyz[r, c]) ** 2)
                    if d <= 1.0:
                        cand.append((d, rr * m.width + cc, (int(rr), int(cc))))
        cand.sort()
        want = [x[2] for x in cand[:16]]
        want += [want[0]] * (16 - len(want))
        assert got == want


def test_euclidean_info():
    assert ffpa.euclidean_info(3, 4, 0, 0) == [3, 4, 0, 0, 3, 4, 5]


def test_run_frame_shapes_and_determinism(dataset, tmp_path):
    a, report = ffpa.run_frame(str(dataset), "000000", SMALL)
    b, _ = ffpa.run_frame(str(dataset), "000000", {**SMALL, "threads": "2"})
    c, _ = ffpa.run_frame(str(dataset), "000000", {**SMALL, "fusion": "bilicamfuse"})
    r = json.loads(report)
    assert a.shape == (r["level_points"][0], 8)
    assert c.shape == a.shape
    assert a.tobytes() == b.tobytes()
    assert "image_features" in r["stages_ms"]


def test_bad_setting_raises(dataset):
    with pytest.raises(ffpa.Error):
        ffpa.run_frame(str(dataset), "000000", {"bogus": "1"})


def test_bench_sampling_report(dataset):
    r = json.loads(ffpa.bench_sampling(str(dataset), "000000", 3))
    assert r["baseline"]["repeats"] == 3
    assert len(r["baseline"]["stride_ms"]) == 3
