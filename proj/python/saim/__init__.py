# Copyright 2026 The saim Authors.
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


"""Margin-inducing domain adaptation for sentiment classifiers."""

from ._saim import (
    BoundsError,
    ContractError,
    DegenerateError,
    IoError,
    Model,
    NumericError,
    ParseError,
    ShapeError,
    StateError,
    Task,
    embed,
    evaluate,
    load_task,
    pseudo_dataset,
    run_experiment,
    run_suite,
    swd,
    swd_between_sets,
    synthetic_task,
    tau_sweep,
    train_source,
    wasserstein2_1d,
)

__all__ = [
    "BoundsError",
    "ContractError",
    "DegenerateError",
    "IoError",
    "Model",
    "NumericError",
    "ParseError",
    "ShapeError",
    "StateError",
    "Task",
    "embed",
    "evaluate",
    "load_task",
    "pseudo_dataset",
    "run_experiment",
    "run_suite",
    "swd",
    "swd_between_sets",
    "synthetic_task",
    "tau_sweep",
    "train_source",
    "wasserstein2_1d",
]
