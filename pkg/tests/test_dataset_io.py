import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from romkit import Normalizer, ParameterSpace, SamplingPlan, SnapshotSet, sample, split_train_test
from romkit.exceptions import NumericalError, SnapshotFormatError
from romkit.io import load_arrays, load_snapshots, save_arrays, save_snapshots


def test_sampling_is_seeded_and_inside_box():
    space = ParameterSpace([0.1, -1.0], [10.0, 1.0])
    a = sample(space, SamplingPlan("uniform", 30, seed=7))
    b = sample(space, SamplingPlan("uniform", 30, seed=7))
    assert a.shape == (30, 2)
    assert np.array_equal(a, b)
    assert np.all(space.contains(a))
    assert not np.array_equal(a, sample(space, SamplingPlan("uniform", 30, seed=8)))


def test_grid_sampling():
    space = ParameterSpace([0.0], [1.0])
    np.testing.assert_allclose(sample(space, SamplingPlan("grid", 5))[:, 0], np.linspace(0, 1, 5))
    g = sample(ParameterSpace([0, 0], [1, 1]), SamplingPlan("grid", 9))
    assert g.shape == (9, 2) and len({tuple(r) for r in g}) == 9
    with pytest.raises(ValueError, match="k\\*\\*2"):
        sample(ParameterSpace([0, 0], [1, 1]), SamplingPlan("grid", 8))


def test_normal_sampling_truncated_to_box():
    space = ParameterSpace([0.0, 0.0], [1.0, 1.0])
    pts = sample(space, SamplingPlan("normal", 200, 1, normal_center=[0.9, 0.5], normal_spread=[0.5, 0.1]))
    assert np.all(space.contains(pts))


def test_parameter_space_validation():
    with pytest.raises(ValueError):
        ParameterSpace([1.0], [1.0])
    with pytest.raises(ValueError):
        SamplingPlan("sobol", 4)


def _set(rng, n_mu=4, T=3, dof=5):
    mus = rng.uniform(size=(n_mu, 2))
    S = rng.normal(size=(dof, n_mu * T))
    return SnapshotSet(S, np.repeat(mus, T, axis=0), np.tile(np.arange(T) * 0.5, n_mu), {"origin": "test"})


def test_snapshot_set_groups_are_time_ordered(rng):
    s = _set(rng)
    perm = rng.permutation(s.n_snapshots)
    shuffled = s.subset(perm)
    groups = list(shuffled.groups())
    assert len(groups) == 4
    for _, g in groups:
        assert np.all(np.diff(g.times) > 0)


def test_snapshot_set_rejects_non_finite(rng):
    S = rng.normal(size=(3, 2))
    S[0, 0] = np.inf
    with pytest.raises(NumericalError):
        SnapshotSet(S, np.zeros((2, 1)))


def test_split_is_by_parameter(rng):
    s = _set(rng, n_mu=10)
    train, test = split_train_test(s, 0.7, seed=3)
    tr = {tuple(m) for m in train.unique_params()}
    te = {tuple(m) for m in test.unique_params()}
    assert not tr & te
    assert len(tr) == 7 and len(te) == 3
    assert train.n_snapshots + test.n_snapshots == s.n_snapshots


@pytest.mark.parametrize("suffix", [".roms", ".csv"])
def test_snapshot_round_trip(tmp_path, rng, suffix):
    s = _set(rng)
    path = tmp_path / f"snaps{suffix}"
    save_snapshots(path, s)
    back = load_snapshots(path)
    assert np.array_equal(back.snapshots, s.snapshots)
    assert np.array_equal(back.params, s.params)
    assert np.array_equal(back.times, s.times)
    if suffix == ".roms":
        assert back.metadata == {"origin": "test"}


def test_binary_format_errors(tmp_path, rng):
    path = tmp_path / "bad.roms"
    path.write_bytes(b"NOPE" + bytes(40))
    with pytest.raises(SnapshotFormatError):
        load_snapshots(path)
    save_snapshots(path, _set(rng))
    data = path.read_bytes()
    path.write_bytes(data[: len(data) // 2])
    with pytest.raises(SnapshotFormatError):
        load_snapshots(path)
    with pytest.raises(SnapshotFormatError):
        load_snapshots(tmp_path / "missing.roms")


def test_csv_format_errors(tmp_path):
    path = tmp_path / "bad.csv"
    path.write_text("t,mu_0,dof_0\n0,1,2\n0,1\n")
    with pytest.raises(SnapshotFormatError, match=":3"):
        load_snapshots(path)
    path.write_text("t,mu_0,dof_0\n0,1,abc\n")
    with pytest.raises(SnapshotFormatError):
        load_snapshots(path)


def test_model_archive_round_trip(tmp_path):
    meta = {"kind": "x", "values": [1, 2.5]}
    save_arrays(tmp_path / "m.npz", meta, a=np.arange(4.0), c=np.array([1 + 2j]))
    m, arrays = load_arrays(tmp_path / "m.npz")
    assert m == meta
    assert np.array_equal(arrays["a"], np.arange(4.0))
    assert arrays["c"][0] == 1 + 2j


@given(st.sampled_from(["none", "mean-center", "center-and-scale"]), st.booleans(), st.integers(0, 10_000))
def test_normalizer_inverse(mode, per_dof, seed):
    X = np.random.default_rng(seed).normal(size=(6, 4)) * [1, 10, 0.1, 0]
    norm = Normalizer(mode, per_dof).fit(X)
    np.testing.assert_allclose(norm.inverse_transform(norm.transform(X)), X, atol=1e-12)
    if mode != "none":
        np.testing.assert_allclose(norm.transform(X).mean(axis=0), 0, atol=1e-12)
