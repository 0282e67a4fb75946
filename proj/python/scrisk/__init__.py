# Copyright 2026 The scrisk Authors
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

"""Driver risk field, hazard scenario generation and risk-aware trajectory prediction."""

from __future__ import annotations

import json
import os
from typing import Any, Mapping, Sequence

from ._core import (
    AgentState,
    CostParams,
    DrfParams,
    RiskTriple,
    ScriskError,
    arc_coordinates,
    arc_point,
    collision_cost,
    drf_probability,
    look_ahead,
    pairwise_risk,
    run_cli,
)

__all__ = [
    "AgentState",
    "CostParams",
    "DrfParams",
    "RiskTriple",
    "ScriskError",
    "arc_coordinates",
    "arc_point",
    "collision_cost",
    "drf_probability",
    "generate_dataset",
    "load_config",
    "look_ahead",
    "pairwise_risk",
    "predict",
    "run_cli",
]


def load_config(path: str | os.PathLike[str]) -> dict[str, Any]:
    """Reads a workbench configuration file into a dict."""
    with open(path, encoding="utf-8") as f:
        return json.load(f)


def _config_text(config: Mapping[str, Any] | str | os.PathLike[str] | None) -> str:
    if config is None:
        return ""
    if isinstance(config, Mapping):
        return json.dumps(config)
    return json.dumps(load_config(config))


def generate_dataset(
    seed: int,
    n: int,
    config: Mapping[str, Any] | str | os.PathLike[str] | None = None,
    threads: int = 1,
) -> list[dict[str, Any]]:
    """Generates `n` hazard scenes; the result does not depend on `threads`."""
    from ._core import _generate_dataset

    return [json.loads(s) for s in _generate_dataset(_config_text(config), seed, n, threads)]


def predict(checkpoint: str | os.PathLike[str], scene: Mapping[str, Any], k: int = 6) -> dict[str, Any]:
    """Top-k modes of a trained checkpoint for one scene record."""
    from ._core import _predict

    return json.loads(_predict(os.fspath(checkpoint), json.dumps(scene), k))


def main(argv: Sequence[str] | None = None) -> int:
    import sys

    rc, out, err = run_cli(list(sys.argv[1:] if argv is None else argv))
    sys.stdout.write(out)
    sys.stderr.write(err)
    return rc
