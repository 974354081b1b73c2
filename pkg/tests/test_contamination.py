import math

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from gamma_regress.contamination import (
    ContaminationScheme,
    CovariateSpec,
    RegionRates,
    generate,
    generate_clean,
    nu_diagnostic,
    read_csv,
    write_csv,
)
from gamma_regress.divergence import RegressionDataset
from gamma_regress.models import GaussianLinearModel, LogisticModel, PoissonModel

BETA = (0.0, 1.0, -1.0, 1.0, -1.0, 0.0)
COV = CovariateSpec()
MU_OUT = (20.0, 0.0, 20.0, 0.0, 0.0)


def leverage(eps, **kw):
    return ContaminationScheme(LogisticModel(), BETA, eps, outlier_mean=MU_OUT, **kw)


def test_covariance_structure():
    sigma = CovariateSpec(p=4, rho=0.2).covariance
    assert sigma[0, 3] == pytest.approx(0.2**3)
    assert np.all(np.linalg.eigvalsh(sigma) > 0)


@pytest.mark.parametrize("rho", [1.0, -1.5])
def test_covariate_rho_range(rho):
    with pytest.raises(ValueError):
        CovariateSpec(rho=rho)


@pytest.mark.parametrize(
    "kwargs",
    [
        {"outlier_ratio": 1.0, "outlier_mean": MU_OUT},
        {"outlier_ratio": -0.1, "outlier_mean": MU_OUT},
        {"outlier_ratio": 0.1},
        {"outlier_ratio": 0.1, "outlier_mean": (np.inf,) * 5},
        {"outlier_ratio": 0.1, "outlier_mean": MU_OUT, "outlier_sd": 0.0},
        {"outlier_ratio": 0.1, "mode": "sideways", "outlier_mean": MU_OUT},
    ],
)
def test_scheme_validation(kwargs):
    with pytest.raises(ValueError):
        ContaminationScheme(LogisticModel(), BETA, **kwargs)


def test_region_rates_validation_and_lookup():
    with pytest.raises(ValueError):
        RegionRates(0, (0.0,), (0.1,))
    with pytest.raises(ValueError):
        RegionRates(0, (0.0,), (0.1, 1.0))
    rates = RegionRates(0, (-1.0, 1.0), (0.0, 0.1, 0.4))
    np.testing.assert_array_equal(rates(np.array([[-3.0], [0.0], [5.0]])), [0.0, 0.1, 0.4])


def test_zero_ratio_matches_clean_generator():
    data, flags = generate(leverage(0.0), COV, 500, 7)
    clean = generate_clean(LogisticModel(), BETA, COV, 500, 7)
    assert not flags.any()
    np.testing.assert_array_equal(data.x, clean.x)
    np.testing.assert_array_equal(data.y, clean.y)


def test_clean_rows_do_not_depend_on_ratio():
    a, fa = generate(leverage(0.1), COV, 800, 3)
    b, fb = generate(leverage(0.3), COV, 800, 3)
    both = ~fa & ~fb
    np.testing.assert_array_equal(a.x[both], b.x[both])
    np.testing.assert_array_equal(a.y[both], b.y[both])


def test_outlier_count_and_location():
    data, flags = generate(leverage(0.1), COV, 1000, 11)
    count = int(flags.sum())
    assert 60 <= count <= 140
    out_x = data.x[flags]
    assert abs(out_x[:, 0].mean() - 20.0) <= 0.5 * 5 / math.sqrt(0.1 * 1000)
    assert abs(out_x[:, 2].mean() - 20.0) <= 0.5 * 5 / math.sqrt(0.1 * 1000)
    assert np.all(data.y[flags] == 0.0)


def test_homogeneous_keeps_clean_covariates():
    scheme = ContaminationScheme(PoissonModel(), (1.0, 0.5), 0.2, mode="homogeneous", outlier_response=60.0)
    data, flags = generate(scheme, CovariateSpec(p=1), 20_000, 2)
    clean = generate_clean(PoissonModel(), (1.0, 0.5), CovariateSpec(p=1), 20_000, 2)
    np.testing.assert_array_equal(data.x, clean.x)
    assert np.all(data.y[flags] == 60.0)
    se = math.sqrt(0.2 * 0.8 / 20_000)
    assert abs(flags.mean() - 0.2) <= 5 * se


def test_region_rates_mixture_fraction():
    rates = RegionRates(0, (0.0,), (0.05, 0.3))
    scheme = ContaminationScheme(LogisticModel(), (0.0, 1.0), rates, outlier_response=1.0)
    n = 40_000
    data, flags = generate(scheme, CovariateSpec(p=1), n, 9)
    expected = 0.5 * 0.05 + 0.5 * 0.3
    assert abs(flags.mean() - expected) <= 5 * math.sqrt(expected * (1 - expected) / n)
    assert flags[data.x[:, 0] < 0].mean() < flags[data.x[:, 0] >= 0].mean()


def test_callable_outlier_response():
    scheme = ContaminationScheme(
        GaussianLinearModel(), (0.0, 1.0, 1.0), 0.3, mode="homogeneous", outlier_response=lambda x: x[:, 0] + 10.0
    )
    data, flags = generate(scheme, CovariateSpec(p=1), 300, 1)
    np.testing.assert_allclose(data.y[flags], data.x[flags, 0] + 10.0)


def test_generation_deterministic():
    a, fa = generate(leverage(0.2), COV, 300, 42)
    b, fb = generate(leverage(0.2), COV, 300, 42)
    np.testing.assert_array_equal(a.x, b.x)
    np.testing.assert_array_equal(a.y, b.y)
    np.testing.assert_array_equal(fa, fb)


def test_dimension_mismatch():
    with pytest.raises(ValueError):
        generate(leverage(0.1), CovariateSpec(p=3), 10, 0)


# --- nu diagnostic -----------------------------------------------------------


def test_nu_far_tail_is_negligible():
    nu = nu_diagnostic(LogisticModel(), BETA, leverage(0.1), COV, 0.5, n_mc=2000, seed=0)
    assert nu.nu < 1e-12
    assert np.all(nu.nu_x >= 0)
    # plug-in: at the outlier centre eta = 20 + 20 = 40
    centre = LogisticModel().density(np.array(BETA), np.array(MU_OUT), 0.0)
    assert centre == pytest.approx(math.exp(-40), rel=1e-10)


def test_nu_at_model_mode_is_large():
    # Gaussian with outliers placed at the conditional mean
    scheme = ContaminationScheme(
        GaussianLinearModel(), (0.0, 1.0, 1.0), 0.2, mode="homogeneous", outlier_response=lambda x: x[:, 0]
    )
    nu = nu_diagnostic(GaussianLinearModel(), (0.0, 1.0, 1.0), scheme, CovariateSpec(p=1), 0.5, n_mc=500)
    assert nu.nu > 0.1


def test_nu_zero_without_contamination():
    assert nu_diagnostic(LogisticModel(), BETA, leverage(0.0), COV, 0.5).nu == 0.0


@settings(max_examples=25, deadline=None)
@given(near=st.floats(0.0, 5.0), extra=st.floats(0.1, 10.0))
def test_nu_shrinks_deeper_in_tail(near, extra):
    model = GaussianLinearModel()
    theta = (0.0, 1.0, 1.0)
    values = []
    for shift in (near, near + extra):
        scheme = ContaminationScheme(
            model, theta, 0.2, mode="homogeneous", outlier_response=lambda x, s=shift: x[:, 0] + s
        )
        values.append(nu_diagnostic(model, theta, scheme, CovariateSpec(p=1), 0.7, n_mc=200, seed=1).nu)
    assert values[1] <= values[0]


# --- CSV ---------------------------------------------------------------------


def test_csv_round_trip(tmp_path):
    data, flags = generate(leverage(0.2), COV, 50, 5)
    path = tmp_path / "d.csv"
    write_csv(path, data, flags)
    back, back_flags = read_csv(path)
    np.testing.assert_array_equal(back.x, data.x)
    np.testing.assert_array_equal(back.y, data.y)
    np.testing.assert_array_equal(back_flags, flags)
    assert path.read_text().splitlines()[0] == "x1,x2,x3,x4,x5,y,is_outlier"


def test_csv_without_flags(tmp_path):
    path = tmp_path / "plain.csv"
    path.write_text("x1,y\n0.5,1\n-1,0\n")
    data, flags = read_csv(path)
    assert flags is None and data.n == 2


def test_csv_errors(tmp_path):
    with pytest.raises(OSError, match="missing.csv"):
        read_csv(tmp_path / "missing.csv")
    bad = tmp_path / "bad.csv"
    bad.write_text("x1,z\n1,2\n")
    with pytest.raises(ValueError, match="'y'"):
        read_csv(bad)
    with pytest.raises(OSError, match="nodir"):
        write_csv(tmp_path / "nodir" / "out.csv", RegressionDataset([[0.0]], [1.0]))
