import numpy as np
import pytest

from helpers import write_fake_parkinsons
from uaboost.core import (
    InsufficientData,
    ModalityMatrix,
    ParseError,
    ProbabilisticPrediction,
    SchemaError,
    ShapeMismatch,
)
from uaboost.data import (
    AMPLITUDE,
    FREQUENCY,
    PARKINSONS_COLUMNS,
    ModalitySplitSpec,
    NoiseProfile,
    Standardizer,
    SyntheticSpec,
    generate_synthetic,
    load_parkinsons,
    make_folds,
    split_modalities,
    standardize,
    train_val_split,
    write_synthetic_csv,
)
from uaboost.metrics import calibration_curve


def test_load_and_split(tmp_path):
    recs = load_parkinsons(write_fake_parkinsons(tmp_path / "p.csv"))
    assert len(recs) == 30
    assert len({r.subject_id for r in recs}) == 6
    mats, y = split_modalities(recs)
    assert mats["Amplitude"].values.shape == (30, 10)
    assert mats["Frequency"].values.shape == (30, 6)
    assert mats["Amplitude"].feature_names == AMPLITUDE
    assert mats["Frequency"].feature_names == FREQUENCY
    # row order preserved
    assert y[3] == recs[3].total_updrs
    assert mats["Frequency"].values[3, 5] == recs[3].voice["PPE"]


def test_load_empty_with_header(tmp_path):
    p = tmp_path / "p.csv"
    p.write_text(",".join(PARKINSONS_COLUMNS) + "\n")
    assert load_parkinsons(p) == []


def test_missing_column_named(tmp_path):
    cols = [c for c in PARKINSONS_COLUMNS if c != "PPE"]
    p = write_fake_parkinsons(tmp_path / "p.csv", columns=cols)
    with pytest.raises(SchemaError) as err:
        load_parkinsons(p)
    assert err.value.missing == ["PPE"]


def test_malformed_row_line_number(tmp_path):
    p = write_fake_parkinsons(tmp_path / "p.csv", n=5)
    lines = p.read_text().splitlines()
    lines[3] = lines[3].replace(lines[3].split(",")[7], "abc", 1)
    p.write_text("\n".join(lines) + "\n")
    with pytest.raises(ParseError) as err:
        load_parkinsons(p)
    assert err.value.line == 4


def test_record_count_warning(tmp_path, caplog):
    load_parkinsons(write_fake_parkinsons(tmp_path / "p.csv", n=7))
    assert "expected 5875" in caplog.text


def test_split_spec():
    with pytest.raises(ValueError):
        ModalitySplitSpec({"a": ("Shimmer", "NHR"), "b": ("NHR",)})
    spec = ModalitySplitSpec({"only": FREQUENCY})
    assert list(spec.columns) == ["only"]


def test_single_modality_split(tmp_path):
    recs = load_parkinsons(write_fake_parkinsons(tmp_path / "p.csv"))
    mats, _ = split_modalities(recs, ModalitySplitSpec({"only": FREQUENCY}))
    assert list(mats) == ["only"]
    with pytest.raises(SchemaError):
        split_modalities(recs, ModalitySplitSpec({"bad": ("nope",)}))


def test_folds():
    plan = make_folds(10, 5, seed=3)
    assert sorted(np.bincount(plan.assignments)) == [2] * 5
    np.testing.assert_array_equal(plan.assignments, make_folds(10, 5, seed=3).assignments)
    assert np.bincount(make_folds(5875, 5, seed=1).assignments).tolist() == [1175] * 5
    tests = np.concatenate([te for _, te in plan])
    assert sorted(tests.tolist()) == list(range(10))
    with pytest.raises(InsufficientData):
        make_folds(3, 5)


def test_grouped_folds():
    groups = np.repeat(np.arange(12), 7)
    plan = make_folds(groups.size, 4, seed=0, groups=groups)
    for g in range(12):
        assert np.unique(plan.assignments[groups == g]).size == 1
    assert np.all(np.bincount(plan.assignments) > 0)


def test_train_val_split():
    tr, va = train_val_split(10, 0.2, seed=0)
    assert (tr.size, va.size) == (8, 2)
    tr, va = train_val_split(108, 0.2, seed=0)
    assert (tr.size, va.size) == (86, 22)
    assert set(tr) | set(va) == set(range(108)) and not set(tr) & set(va)
    with pytest.raises(InsufficientData):
        train_val_split(1)


def test_standardize():
    m = ModalityMatrix("a", np.array([[1.0, 5.0], [2.0, 5.0], [3.0, 5.0]]))
    z, others, t = standardize(m, [m])
    np.testing.assert_allclose(z.values[:, 0], [-np.sqrt(1.5), 0, np.sqrt(1.5)], atol=1e-12)
    np.testing.assert_array_equal(z.values[:, 1], 0)
    assert t.constant.tolist() == [False, True]
    np.testing.assert_array_equal(others[0].values, z.values)
    np.testing.assert_allclose(t.inverse_transform(z.values), m.values, atol=1e-9)
    with pytest.raises(ShapeMismatch):
        t.transform(np.zeros((2, 3)))


def test_standardize_round_trip(rng):
    x = rng.normal(3, 7, size=(50, 4))
    t = Standardizer.fit(x)
    np.testing.assert_allclose(t.inverse_transform(t.transform(x)), x, atol=1e-9)


def test_synthetic_noise_free():
    prof = NoiseProfile("homoscedastic", 0.0)
    ds = generate_synthetic(SyntheticSpec(200, (4, 4), (prof, prof), prof, seed=1))
    np.testing.assert_array_equal(ds.y, ds.mu_star)
    for j, (mid, mat) in enumerate(ds.modalities.items()):
        assert np.all(np.abs(mat.values) < 1)  # pure tanh projections


def test_synthetic_reproducible_and_heteroscedastic():
    a = generate_synthetic(SyntheticSpec(seed=4))
    b = generate_synthetic(SyntheticSpec(seed=4))
    assert a.y.tobytes() == b.y.tobytes()
    assert len(a.modalities) == 3
    for m in a.modalities:
        assert a.modalities[m].values.tobytes() == b.modalities[m].values.tobytes()
    assert a.sigma_star.std() > 0
    hi = a.sigma_star > np.median(a.sigma_star)
    resid = a.y - a.mu_star
    assert resid[hi].var() > resid[~hi].var()


def test_synthetic_calibration_oracle():
    ds = generate_synthetic(SyntheticSpec(n_samples=2000, seed=9))
    curve = calibration_curve(ProbabilisticPrediction(ds.mu_star, ds.sigma_star), ds.y)
    assert np.max(np.abs(curve.observed_fractions - curve.nominal_levels)) <= 0.03


def test_synthetic_csv(tmp_path):
    paths = write_synthetic_csv(generate_synthetic(SyntheticSpec(n_samples=20)), tmp_path)
    assert [p.name for p in paths] == ["m1.csv", "m2.csv", "m3.csv", "targets.csv"]
    assert paths[-1].read_text().splitlines()[0] == "y,mu_star,sigma_star"
