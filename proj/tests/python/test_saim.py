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


import numpy as np
import pytest

import saim


def test_wasserstein_1d_matches_sorted_pairing():
    a = [0.0, 1.0, 3.0]
    b = [0.5, 1.0, 4.0]
    assert saim.wasserstein2_1d(a, b) == pytest.approx((0.25 + 0.0 + 1.0) / 3)


def test_swd_zero_for_identical_samples_and_shapes():
    rng = np.random.default_rng(0)
    x = rng.normal(size=(16, 5))
    value, gx, gy = saim.swd(x, x, slices=32, seed=1)
    assert value == 0.0
    assert gx.shape == (16, 5) and gy.shape == (16, 5)
    assert not gx.any()


def test_swd_offset_in_one_dimension():
    x = np.arange(6, dtype=float).reshape(6, 1)
    value, _, _ = saim.swd(x, x + 2.0, slices=4, seed=0)
    assert value == pytest.approx(4.0)


def test_swd_rejects_mismatched_samples():
    with pytest.raises(saim.ContractError):
        saim.swd(np.zeros((3, 2)), np.zeros((4, 2)))
    with pytest.raises(saim.ShapeError):
        saim.swd(np.zeros(3), np.zeros(3))


def test_synthetic_task_and_bayes_accuracy():
    task = saim.synthetic_task(separation=4.0, n_source=200, n_target=200, n_test=400)
    assert task.bayes_accuracy == pytest.approx(0.97725, abs=5e-5)
    assert task.sizes["source"] == 200
    assert task.sizes["target_test"] == 400
    imbalanced = saim.synthetic_task(n_target=2000, imbalance=0.9)
    assert imbalanced.sizes["target"] == 1111


def test_end_to_end_run_is_deterministic():
    task = saim.synthetic_task(n_source=200, n_target=200, n_test=400)
    kwargs = dict(mode="saim2", seed=3, lam=1.0, epochs=2, slices=16, train_epochs=5)
    a = saim.run_experiment(task, **kwargs)
    b = saim.run_experiment(task, **kwargs)
    assert a["model"] == b["model"]
    assert a["report"] == b["report"]
    assert 0.0 <= a["target_accuracy"] <= 1.0
    restored = saim.Model.from_json(a["model"].to_json())
    assert restored == a["model"]


def test_embeddings_and_pseudo_margin():
    task = saim.synthetic_task(n_source=300, n_target=300, n_test=300)
    model = saim.train_source(task, seed=1)
    z = saim.embed(model, task, "source")
    assert z.shape == (300, model.hidden)
    assert ((z > 0) & (z < 1)).all()
    kept = saim.pseudo_dataset(model, task, 200, tau=0.9, seed=2)
    loose = saim.pseudo_dataset(model, task, 200, tau=0.0, seed=2)
    assert kept["z"].shape[1] == model.hidden
    assert np.abs(kept["margin"]).mean() > np.abs(loose["margin"]).mean()


def test_suite_csv_and_missing_data(tmp_path):
    csv = saim.run_suite(["synthetic"], ["so"], [1, 2], epochs=1)
    lines = csv.strip().splitlines()
    assert lines[0].startswith("task,mode,n_seeds,mean_accuracy")
    assert len(lines) == 2
    with pytest.raises(saim.IoError):
        saim.load_task("D:K", data_root=str(tmp_path))
