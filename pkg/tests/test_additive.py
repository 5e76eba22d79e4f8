import numpy as np
import pytest

import oracles
from dcselect.additive import (
    TermSpec,
    choose_contribution,
    compare_models,
    fit_additive,
)
from dcselect.data_model import (
    Dataset,
    StructuralError,
    categorical_covariate,
    functional_covariate,
    scalar_covariate,
    vector_covariate,
)
from dcselect.scenarios import ou_paths


def _scalar_dataset(rng, n, formula, p=3, noise=1.0):
    z = rng.normal(size=(n, p))
    y = formula(z) + noise * rng.normal(size=n)
    cands = tuple(scalar_covariate(f"Z{j + 1}", z[:, j]) for j in range(p))
    return Dataset(scalar_covariate("Y", y), cands), z, y


def test_null_model():
    rng = np.random.default_rng(0)
    data, _, y = _scalar_dataset(rng, 50, lambda z: z[:, 0])
    m = fit_additive(data, [])
    assert m.intercept == pytest.approx(float(y.mean()), abs=1e-12)
    assert m.deviance_explained == 0.0
    assert m.edf == 1.0
    assert np.allclose(m.fitted, y.mean())


def test_single_linear_term_matches_ols():
    rng = np.random.default_rng(1)
    n = 200
    z = rng.normal(size=n)
    y = 2.0 * z + rng.normal(size=n)
    data = Dataset(scalar_covariate("Y", y), (scalar_covariate("Z", z),))
    m = fit_additive(data, [TermSpec("Z", "linear")])
    beta = oracles.ols(z[:, None], y)
    assert m.beta[0] == pytest.approx(beta[1], rel=1e-10)
    # slope within 3 standard errors of the truth
    resid = y - (beta[0] + beta[1] * z)
    se = np.sqrt(resid @ resid / (n - 2) / np.sum((z - z.mean()) ** 2))
    assert abs(m.beta[0] - 2.0) < 3 * se
    # deviance explained close to Var(2Z)/Var(Y)
    expected = np.var(2.0 * z) / np.var(y)
    assert m.deviance_explained == pytest.approx(expected, abs=0.05)


def test_all_linear_matches_multiple_ols():
    rng = np.random.default_rng(2)
    # correlated design to exercise the joint parametric solve
    chol = np.linalg.cholesky(0.6 + 0.4 * np.eye(4))
    z = rng.normal(size=(300, 4)) @ chol.T
    y = z @ np.array([1.0, -2.0, 0.5, 3.0]) + rng.normal(size=300)
    cands = tuple(scalar_covariate(f"Z{j + 1}", z[:, j]) for j in range(4))
    data = Dataset(scalar_covariate("Y", y), cands)
    m = fit_additive(data, [TermSpec(f"Z{j + 1}", "linear") for j in range(4)])
    expected = oracles.ols(z, y)
    assert np.allclose(m.beta, expected[1:], rtol=1e-6)
    fitted_oracle = expected[0] + z @ expected[1:]
    assert np.allclose(m.fitted, fitted_oracle, rtol=1e-8)
    assert m.edf == pytest.approx(5.0)
    assert abs(np.mean(m.residuals)) < 1e-8


def test_backfitting_fixed_point():
    rng = np.random.default_rng(3)
    n = 250
    z = rng.normal(size=(n, 2))
    y = np.sin(z[:, 0]) + z[:, 1] ** 2 + 0.3 * rng.normal(size=n)
    cands = (scalar_covariate("Z1", z[:, 0]), scalar_covariate("Z2", z[:, 1]))
    data = Dataset(scalar_covariate("Y", y), cands)
    m = fit_additive(data, [TermSpec("Z1", "smooth"), TermSpec("Z2", "smooth")])
    assert "non_convergent" not in m.flags
    # refitting one term against its partial residuals barely moves it
    from dcselect.splines import smooth_fit

    comp = m.smooth_comps[0]
    other = m.smooth_comps[1]
    partial = y - m.intercept - other.predict(cands[1])
    refit = smooth_fit(z[:, 0], partial, lam=comp.fit.lam)
    change = np.max(np.abs((refit.fitted - refit.fitted.mean())
                           - comp.predict(cands[0])))
    assert change < 1e-5 * np.std(y)


def test_deviance_explained_nondecreasing():
    rng = np.random.default_rng(4)
    data, z, y = _scalar_dataset(rng, 150, lambda z: z[:, 0] + np.sin(2 * z[:, 1]))
    terms = []
    prev = 0.0
    for spec in (TermSpec("Z1", "linear"), TermSpec("Z2", "smooth"),
                 TermSpec("Z3", "linear")):
        terms.append(spec)
        m = fit_additive(data, terms)
        assert m.deviance_explained >= prev - 1e-10
        prev = m.deviance_explained


def test_dummy_and_vector_terms():
    rng = np.random.default_rng(5)
    n = 200
    g = rng.integers(0, 3, size=n)
    v = rng.normal(size=(n, 2))
    effects = np.array([0.0, 1.5, -1.0])
    y = effects[g] + v @ np.array([1.0, -1.0]) + 0.2 * rng.normal(size=n)
    data = Dataset(
        scalar_covariate("Y", y),
        (categorical_covariate("G", [str(x) for x in g], levels=("0", "1", "2")),
         vector_covariate("V", v)),
    )
    m = fit_additive(data, [TermSpec("G", "dummy_set"), TermSpec("V", "linear")])
    assert m.term_edf["G"] == 2.0 and m.term_edf["V"] == 2.0
    assert m.deviance_explained > 0.9
    pred = m.predict(data.candidate_map())
    assert np.allclose(pred, m.fitted)
    # unseen level at prediction time is a structural error
    bad = categorical_covariate("G", ["3"], levels=("3",))
    one_v = vector_covariate("V", v[:1])
    with pytest.raises(StructuralError):
        m.predict({"G": bad, "V": one_v})


def test_functional_term_with_fpca_scores():
    rng = np.random.default_rng(6)
    n = 150
    grid = np.linspace(0.0, 1.0, 51)
    curves = ou_paths(rng, n, grid)
    w = np.gradient(grid)
    signal = curves @ (w * (2 * grid))
    y = signal + 0.1 * rng.normal(size=n)
    data = Dataset(scalar_covariate("Y", y),
                   (functional_covariate("X", grid, curves),))
    m = fit_additive(data, [TermSpec("X", "fpca_scores", k=4)])
    assert m.deviance_explained > 0.8
    assert m.term_edf["X"] == pytest.approx(4.0)
    m_smooth = fit_additive(data, [TermSpec("X", "fpca_scores", k=4,
                                            score_form="smooth")])
    assert m_smooth.deviance_explained >= m.deviance_explained - 0.05


def test_logit_fit_probabilities_strictly_inside_unit_interval():
    rng = np.random.default_rng(7)
    n = 300
    z = rng.normal(size=n)
    p = 1.0 / (1.0 + np.exp(-(2.0 * z)))
    y = (rng.uniform(size=n) < p).astype(int)
    data = Dataset(categorical_covariate("Y", [str(v) for v in y], levels=("0", "1")),
                   (scalar_covariate("Z", z),))
    m = fit_additive(data, [TermSpec("Z", "linear")], link="logit")
    assert np.all(m.fitted > 0.0) and np.all(m.fitted < 1.0)
    assert m.deviance_explained > 0.2
    assert m.beta[0] == pytest.approx(2.0, abs=0.8)
    assert np.allclose(m.residuals, y - m.fitted)


def test_constant_covariate_dropped_with_flag():
    rng = np.random.default_rng(8)
    n = 60
    y = rng.normal(size=n)
    data = Dataset(scalar_covariate("Y", y),
                   (scalar_covariate("C", np.full(n, 2.0)),
                    scalar_covariate("Z", rng.normal(size=n))))
    m = fit_additive(data, [TermSpec("C", "linear"), TermSpec("Z", "linear")])
    assert "dropped:C" in m.flags
    assert [t.covariate for t in m.term_specs] == ["Z"]


def test_compare_models_identical_terms_rejected():
    rng = np.random.default_rng(9)
    data, _, _ = _scalar_dataset(rng, 100, lambda z: z[:, 0])
    m = fit_additive(data, [TermSpec("Z1", "linear")])
    cmp = compare_models(m, m)
    assert not cmp.accept_full and cmp.p_value == 1.0


def test_compare_models_level():
    # adding pure noise to a correct model: acceptance rate stays near alpha
    accepts = 0
    n_sim = 200
    for s in range(n_sim):
        rng = np.random.default_rng(1000 + s)
        data, z, _ = _scalar_dataset(rng, 80, lambda z: 1.5 * z[:, 0], p=2)
        reduced = fit_additive(data, [TermSpec("Z1", "linear")])
        full = fit_additive(data, [TermSpec("Z1", "linear"), TermSpec("Z2", "linear")])
        if compare_models(reduced, full).accept_full:
            accepts += 1
    assert 0.02 <= accepts / n_sim <= 0.09


def test_compare_models_power_quadratic():
    accepts = 0
    n_sim = 200
    for s in range(n_sim):
        rng = np.random.default_rng(2000 + s)
        data, z, _ = _scalar_dataset(rng, 100,
                                     lambda z: z[:, 0] + z[:, 1] ** 2, p=2)
        reduced = fit_additive(data, [TermSpec("Z1", "linear")])
        full = fit_additive(data, [TermSpec("Z1", "linear"), TermSpec("Z2", "smooth")])
        if compare_models(reduced, full).accept_full:
            accepts += 1
    assert accepts / n_sim >= 0.99


def test_compare_models_validations():
    rng = np.random.default_rng(10)
    data, _, _ = _scalar_dataset(rng, 60, lambda z: z[:, 0])
    m1 = fit_additive(data, [TermSpec("Z1", "linear")])
    m2 = fit_additive(data, [TermSpec("Z2", "linear")])
    with pytest.raises(ValueError):
        compare_models(m1, m2)  # not nested


def test_choose_contribution_duplicate_not_accepted():
    rng = np.random.default_rng(11)
    n = 120
    z = rng.normal(size=n)
    y = z + 0.5 * rng.normal(size=n)
    data = Dataset(scalar_covariate("Y", y),
                   (scalar_covariate("Z", z), scalar_covariate("Zdup", z.copy())))
    current = fit_additive(data, [TermSpec("Z", "linear")])
    best, accepted = choose_contribution(current, data.candidate("Zdup"), data)
    assert not accepted


def test_choose_contribution_smooth_beats_linear_on_quadratic():
    rng = np.random.default_rng(12)
    n = 150
    z = rng.uniform(-1.5, 1.5, size=n)
    y = z**2 + 0.1 * rng.normal(size=n)
    data = Dataset(scalar_covariate("Y", y), (scalar_covariate("Z", z),))
    null = fit_additive(data, [])
    best, accepted = choose_contribution(null, data.candidate("Z"), data,
                                         "linear_or_smooth")
    assert accepted and best.term_specs[-1].form == "smooth"
    # the linear catalog must stick to the linear form
    best_lm, _ = choose_contribution(null, data.candidate("Z"), data, "linear_only")
    assert best_lm.term_specs[-1].form == "linear"


def test_choose_contribution_prefers_linear_when_truth_linear():
    chose_linear = 0
    n_sim = 200
    for s in range(n_sim):
        rng = np.random.default_rng(3000 + s)
        n = 100
        z = rng.normal(size=n)
        y = z + rng.normal(size=n)
        data = Dataset(scalar_covariate("Y", y), (scalar_covariate("Z", z),))
        null = fit_additive(data, [])
        best, accepted = choose_contribution(null, data.candidate("Z"), data)
        if accepted and best.term_specs[-1].form == "linear":
            chose_linear += 1
    assert chose_linear / n_sim >= 0.90


def test_choose_contribution_constant_candidate_rejected():
    rng = np.random.default_rng(13)
    n = 50
    y = rng.normal(size=n)
    data = Dataset(scalar_covariate("Y", y),
                   (scalar_covariate("C", np.zeros(n)),))
    null = fit_additive(data, [])
    best, accepted = choose_contribution(null, data.candidate("C"), data)
    assert not accepted
