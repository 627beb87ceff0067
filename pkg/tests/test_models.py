import numpy as np
import pytest
from fractions import Fraction

from rgpo_rfs.models import (AdaptiveJammerModel, ClutterModel, MeasurementModel,
                             NonAdaptiveJammerModel, build_cv_model, build_jammer_obs_adaptive,
                             build_jammer_obs_nonadaptive, clutter_mixture_weights, los_frame,
                             los_unit_vector, stack_jammer_obs)


def test_cv_model_blocks():
    m = build_cv_model(0.5, np.sqrt(5.0), 10.0, 2)
    assert m.dim == 6
    np.testing.assert_array_equal(m.F[0, 2], 0.5)
    q = 5.0
    assert m.Q[0, 0] == pytest.approx(q * 0.5**4 / 4)
    assert m.Q[0, 2] == pytest.approx(q * 0.5**3 / 2)
    assert m.Q[2, 2] == pytest.approx(q * 0.5**2)
    # bias random walk: alpha * delta * sigma_q^2
    assert m.Q[4, 4] == pytest.approx(10 * 0.5 * 5.0)
    assert m.Q[4, 5] == 0.0
    assert np.linalg.eigvalsh(m.Q).min() >= -1e-12


def test_cv_model_is_piecewise_constant_acceleration():
    # acceleration held constant over a step: Q = q G G^T with G = [delta^2/2, delta]
    delta, q = 0.7, 3.0
    G = np.array([delta**2 / 2, delta])
    m = build_cv_model(delta, np.sqrt(q), 0.0, 0)
    np.testing.assert_allclose(m.Q[np.ix_([0, 2], [0, 2])], q * np.outer(G, G), rtol=1e-14)
    np.testing.assert_allclose(m.Q[np.ix_([1, 3], [1, 3])], q * np.outer(G, G), rtol=1e-14)


def test_cv_model_errors():
    with pytest.raises(ValueError):
        build_cv_model(0.0, 1.0)
    with pytest.raises(ValueError):
        build_cv_model(1.0, 1.0, 10.0, -1)


def test_los_unit_vector():
    np.testing.assert_allclose(los_unit_vector([3.0, 4.0]), [0.6, 0.8])
    with pytest.raises(ValueError, match="line of sight"):
        los_unit_vector([0.0, 0.0])


def test_adaptive_observation_structure():
    meas = MeasurementModel.position(np.sqrt(5.0))
    obs = build_jammer_obs_adaptive([0.6, 0.8], 2, 3, meas)
    assert obs.B.shape == (2, 7)
    np.testing.assert_array_equal(obs.B[:, :2], np.eye(2))
    np.testing.assert_array_equal(obs.B[:, 5], [0.6, 0.8])
    assert obs.B[:, 4].tolist() == [0.0, 0.0] and obs.B[:, 6].tolist() == [0.0, 0.0]
    np.testing.assert_allclose(obs.D, 5.0 * np.eye(2), rtol=1e-14)
    # the predicted jammer return is position + bias * los
    x = np.array([10.0, 20.0, 1.0, 1.0, 0.0, 30.0, 0.0])
    np.testing.assert_allclose(obs.B @ x, [10 + 18.0, 20 + 24.0])
    with pytest.raises(ValueError):
        build_jammer_obs_adaptive([1.0, 0.0], 4, 3, meas)


def test_nonadaptive_observation_structure():
    los = np.array([0.6, 0.8])
    obs = build_jammer_obs_nonadaptive(los, 70.0, (500.0, 1.0))
    np.testing.assert_allclose(obs.offset, 70.0 * los)
    w, V = np.linalg.eigh(obs.D)
    np.testing.assert_allclose(w, [1.0, 500.0])
    assert abs(V[:, 1] @ los) == pytest.approx(1.0)
    U = los_frame(los)
    np.testing.assert_allclose(U.T @ U, np.eye(2), atol=1e-15)
    assert np.linalg.det(U) == pytest.approx(1.0)
    with pytest.raises(ValueError):
        build_jammer_obs_nonadaptive(los, -1.0)
    with pytest.raises(ValueError):
        build_jammer_obs_nonadaptive(los, 70.0, (500.0, 0.0))


def test_batched_builders_match_single():
    rng = np.random.default_rng(3)
    means = np.column_stack([rng.uniform(100, 900, (5, 2)), rng.standard_normal((5, 4))])
    meas = MeasurementModel.position(2.0)
    ad = AdaptiveJammerModel(meas)
    B, off, D = stack_jammer_obs(ad, means, 2)
    for r in range(5):
        for i, o in enumerate(ad(means[r], 2)):
            np.testing.assert_allclose(B[r, i], o.B)
            np.testing.assert_allclose(off[r, i], o.offset)
            np.testing.assert_allclose(D[r, i], o.D)
    na = NonAdaptiveJammerModel()
    B, off, D = stack_jammer_obs(na, means[:, :4], 1)
    for r in range(5):
        o = na(means[r, :4])[0]
        np.testing.assert_allclose(B[r, 0], o.B)
        np.testing.assert_allclose(off[r, 0], o.offset)
        np.testing.assert_allclose(D[r, 0], o.D, atol=1e-12)


def test_clutter_weights_exact():
    cm = ClutterModel(20.0, (3.0,))
    w = clutter_mixture_weights(cm)
    assert [Fraction(x).limit_denominator(1000) for x in w] == [Fraction(20, 23), Fraction(3, 23)]
    np.testing.assert_allclose(w, [20 / 23, 3 / 23], rtol=0, atol=1e-16)
    with pytest.raises(ValueError):
        clutter_mixture_weights(ClutterModel(0.0))


def test_clutter_from_density():
    cm = ClutterModel.from_density(2e-5, ((0, 1000), (0, 1000)))
    assert cm.lambda0_bar == pytest.approx(20.0)
    assert cm.uniform_density == pytest.approx(1e-6)
    assert cm.contains([[0, 0], [1000, 1000], [1001, 5]]).tolist() == [True, True, False]
    with pytest.raises(ValueError):
        ClutterModel(-1.0)
