import numpy as np
import pytest

from parthoe.errors import InvalidInputError, TrainingDivergedError
from parthoe.model import init_params
from parthoe.skeleton import FULL, SampleSet, generate_samples
from parthoe.train import (
    HISTORY_FIELDS,
    AdamW,
    TrainConfig,
    load_checkpoint,
    save_checkpoint,
    split_validation,
    train,
    write_history,
)

SMALL = dict(hidden=(16, 16), hm_size=4, hm_sigma=1.0, batch_size=32)


@pytest.fixture(scope="module")
def small_set():
    return SampleSet.from_samples(generate_samples(100, [(FULL, 1.0)], 0.02, seed=3))


def test_training_is_deterministic(small_set):
    cfg = TrainConfig(epochs=2, seed=5, **SMALL)
    a, ha = train(small_set, cfg)
    b, hb = train(small_set, cfg)
    for name in a.layers:
        assert np.array_equal(a.layers[name], b.layers[name])
    assert ha == hb
    assert len(ha) == 2 and set(HISTORY_FIELDS) <= set(ha[0])


def test_zero_learning_rate_keeps_init(small_set):
    cfg = TrainConfig(epochs=2, lr=0.0, seed=5, **SMALL)
    params, _ = train(small_set, cfg)
    init = init_params(cfg.model_config(), cfg.seed)
    for name in params.layers:
        assert np.array_equal(params.layers[name], init.layers[name])


def test_empty_dataset_rejected():
    empty = SampleSet.from_samples([])
    with pytest.raises(InvalidInputError):
        train(empty, TrainConfig(epochs=1, **SMALL))


def test_divergence_names_epoch(small_set):
    bad = small_set[np.arange(len(small_set))]
    bad.joints = bad.joints.copy()
    bad.joints[0, 0, 0] = np.nan
    with pytest.raises(TrainingDivergedError) as err:
        train(bad, TrainConfig(epochs=3, val_fraction=0.0, **SMALL))
    assert err.value.epoch == 1
    assert "epoch 1" in str(err.value)


def test_loss_decreases_on_full_mode():
    data = SampleSet.from_samples(generate_samples(500, [(FULL, 1.0)], 0.05, seed=8))
    cfg = TrainConfig(epochs=6, seed=1)
    _, history = train(data, cfg)
    assert history[-1]["total"] <= history[0]["total"]
    assert history[-1]["val_mae"] < history[0]["val_mae"]


def test_split_validation_is_disjoint(small_set):
    tr, val = split_validation(small_set, 0.2, seed=4)
    assert len(tr) == 80 and len(val) == 20
    assert not set(tr.ids) & set(val.ids)
    tr2, val2 = split_validation(small_set, 0.0, seed=4)
    assert val2 is None and len(tr2) == 100


def test_adamw_decoupled_decay_only_on_weights():
    params = init_params(TrainConfig(**SMALL).model_config(), seed=0)
    params.layers["orient.bias"][:] = 1.0
    zero = {k: np.zeros_like(v) for k, v in params.layers.items()}
    before = params.copy()
    AdamW(params, lr=0.1, weight_decay=0.5).step(params, zero)
    np.testing.assert_allclose(params.layers["orient.weight"], before.layers["orient.weight"] * (1 - 0.05))
    np.testing.assert_array_equal(params.layers["orient.bias"], before.layers["orient.bias"])


def test_checkpoint_roundtrip(tmp_path, small_set):
    cfg = TrainConfig(epochs=1, seed=2, **SMALL)
    params, history = train(small_set, cfg)
    path = tmp_path / "model.json"
    save_checkpoint(path, params, cfg)
    loaded, loaded_cfg = load_checkpoint(path)
    assert loaded_cfg == cfg
    for name in params.layers:
        assert np.array_equal(loaded.layers[name], params.layers[name])
    save_checkpoint(tmp_path / "again.json", loaded, loaded_cfg)
    assert (tmp_path / "again.json").read_bytes() == path.read_bytes()
    write_history(tmp_path / "m.csv", history)
    lines = (tmp_path / "m.csv").read_text().splitlines()
    assert lines[0] == "epoch,l_p_prime,l_c,l_kpt,lambda,total,val_acc30,val_mae"
    assert len(lines) == 2
