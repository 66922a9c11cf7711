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

"""Python bindings for the ffpa core."""

from ._ffpa import (
    Calibration,
    Error,
    SyncedMaps,
    bench_sampling,
    build_synced_maps,
    crop,
    euclidean_info,
    parse_calibration,
    project_spherical,
    read_calibration,
    read_features,
    read_velodyne,
    run_frame,
    write_synthetic_dataset,
)

__all__ = [
    "Calibration",
    "Error",
    "SyncedMaps",
    "bench_sampling",
    "build_synced_maps",
    "crop",
    "euclidean_info",
    "parse_calibration",
    "project_spherical",
    "read_calibration",
    "read_features",
    "read_velodyne",
    "run_frame",
    "write_synthetic_dataset",
]
