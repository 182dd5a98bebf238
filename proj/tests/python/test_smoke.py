import json

import numpy as np
import pytest

import mrd


@pytest.fixture(scope="module")
def data():
    spec = {"n": 60, "n_sequences": 6, "output_dims": [6, 5], "n_classes": 3, "seed": 1}
    return mrd.synth(json.dumps(spec))


@pytest.fixture(scope="module")
def trained(data):
    model = mrd.init_model(data["views"], latent_dim=3, num_inducing=10, seed=1)
    return mrd.train(model, max_iter=150)


def test_synth_shapes(data):
    names = [name for name, _ in data["views"]]
    assert names == ["view0", "view1"]
    assert data["views"][0][1].shape == (60, 6)
    assert sorted(set(data["labels"])) == [0, 1, 2]


def test_training_is_monotone(trained):
    model, trace, termination = trained
    assert np.all(np.diff(trace) >= 0)
    assert trace[-1] == pytest.approx(model.bound())
    assert isinstance(termination, str)
    assert model.latent_dim == 3
    assert model.view_names == ["view0", "view1"]
    assert model.weights("view0").max() == pytest.approx(1.0)


def test_segment_partitions_dims(trained):
    seg = mrd.segment(trained[0], 0.01)
    dims = list(seg["shared"]) + list(seg["inactive"])
    for d in seg["private"].values():
        dims += list(d)
    for _, d in seg["partial"]:
        dims += list(d)
    assert sorted(dims) == [0, 1, 2]


def test_transfer_and_save_roundtrip(trained, data, tmp_path):
    model = trained[0]
    y = data["views"][0][1][:5]
    out = mrd.transfer(model, y, "view0", "view1", k=2, max_iter=50)
    assert out["predictions"].shape == (5, 5)
    assert len(out["candidates"][0]) == 2
    path = str(tmp_path / "m.json")
    model.save(path)
    assert abs(mrd.load_model(path).bound() - model.bound()) <= 1e-9


def test_psi_stats_point_mass_limit():
    rng = np.random.default_rng(0)
    mu = rng.normal(size=(4, 2))
    z = rng.normal(size=(3, 2))
    w = np.array([0.7, 1.3])
    psi0, psi1, psi2 = mrd.psi_stats(1.5, w, mu, np.full((4, 2), 1e-14), z)
    d = ((mu[:, None, :] - z[None, :, :]) ** 2 * w).sum(-1)
    k = 1.5 * np.exp(-0.5 * d)
    assert psi0 == pytest.approx(6.0)
    np.testing.assert_allclose(psi1, k, atol=1e-10)
    np.testing.assert_allclose(psi2, k.T @ k, atol=1e-10)


def test_gradcheck():
    res = mrd.gradcheck(0)
    assert res["standard"] <= 1e-5
    assert res["dynamical"] <= 1e-5


def test_errors_map_to_exceptions(trained):
    model = trained[0]
    with pytest.raises(mrd.InvalidArgument):
        mrd.segment(model, 2.0)
    with pytest.raises(mrd.DimensionError):
        mrd.transfer(model, np.zeros((2, 4)), "view0", "view1")
    with pytest.raises(mrd.DataError):
        mrd.load_model("/nonexistent/model.json")
    assert issubclass(mrd.VersionError, mrd.DataError)
    assert issubclass(mrd.DataError, mrd.MrdError)
