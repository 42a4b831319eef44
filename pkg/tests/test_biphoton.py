import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from oamsim import biphoton as bp

amp_pairs = st.tuples(st.floats(0.05, 1.0), st.floats(0.05, 1.0))


def qubit(a, b, labels=(-1, 1)):
    spec = bp.PathStateSpec.normalized([a, b])
    return bp.transfer_to_oam(bp.build_path_state(spec), np.eye(2), labels, sink=False)


def test_spec_requires_normalization():
    with pytest.raises(ValueError, match="normalized"):
        bp.PathStateSpec((0.5, 0.5))
    with pytest.raises(ValueError):
        bp.PathStateSpec((1.0,))
    s = bp.PathStateSpec.normalized([3, 4], [np.pi / 2])
    assert s.coefficients == pytest.approx([0.6, 0.8j])


def test_pump_amplitudes_symmetric_and_peaked():
    a = bp.pump_amplitudes([-250e-6, 0.0, 250e-6], 150e-6, 1e-3)
    assert a[0] == pytest.approx(a[2], rel=1e-12)
    assert a[1] > a[0]
    assert np.sum(np.square(a)) == pytest.approx(1.0)


def test_density_matrix_checks():
    with pytest.raises(ValueError, match="Hermitian"):
        bp.BiphotonState((0, 1), np.array([[0.5, 0.1, 0, 0], [0, 0.5, 0, 0],
                                           [0, 0, 0, 0], [0, 0, 0, 0]]))
    with pytest.raises(ValueError, match="trace"):
        bp.BiphotonState((0, 1), np.eye(4) / 2)


def test_transfer_with_sink_and_postselect():
    t = np.array([[0.9, 0.0], [0.0, 0.6]])
    st_ = bp.transfer_to_oam(bp.build_path_state(bp.PathStateSpec.normalized([1, 1])), t, [-1, 1])
    assert st_.labels == (-1, 1, bp.SINK)
    d = st_.postselect()
    # detected amplitudes scale as t^2
    ratio = d.population(-1, -1) / d.population(1, 1)
    assert ratio == pytest.approx((0.81 / 0.36) ** 2)


def test_empty_support():
    st_ = bp.BiphotonState.pure((0, bp.SINK), np.array([0, 0, 0, 1.0]))
    with pytest.raises(bp.EmptySupportError):
        st_.postselect()
    with pytest.raises(bp.EmptySupportError):
        bp.transfer_to_oam(bp.build_path_state(bp.PathStateSpec.normalized([1, 1])),
                           np.zeros((2, 2)), [0, 1], sink=False)


def test_golden_white_noise_qubit():
    # ideal Bell pair: F(w) = 1 - w + w/4, so F = 0.97 at w = 0.04
    s = qubit(1, 1)
    target = bp.aligned_target(s, [-1, 1], [1, 1])
    w = bp.calibrate_white_noise(s, target, 0.97, postselect=False)
    assert w == pytest.approx(0.04, abs=1e-10)


def test_calibration_unbracketed():
    s = qubit(1, 1)
    with pytest.raises(ValueError, match="bracketed"):
        bp.calibrate_white_noise(s, bp.aligned_target(s, [-1, 1], [1, 1]), 0.1, postselect=False)


@settings(max_examples=40, deadline=None)
@given(amp_pairs, st.floats(0, 1), st.floats(0, 1))
def test_noise_keeps_state_physical(ab, w, dph):
    s = bp.apply_noise(qubit(*ab), w, dph)
    assert s.min_eigenvalue() >= -1e-12
    assert np.trace(s.rho).real == pytest.approx(1.0)


@settings(max_examples=40, deadline=None)
@given(amp_pairs, st.floats(0, 2 * np.pi), st.floats(0, 2 * np.pi))
def test_probabilities_bounded(ab, pa, pb):
    s = bp.apply_noise(qubit(*ab), 0.1)
    tot = 0.0
    for da in (0, np.pi):
        for db in (0, np.pi):
            tot += bp.coincidence_probability(s, bp.MeasurementSetting(-1, 1, pa + da),
                                              bp.MeasurementSetting(-1, 1, pb + db))
    assert tot <= 1 + 1e-9


@settings(max_examples=40, deadline=None)
@given(amp_pairs)
def test_fringe_visibility_closed_form(ab):
    a, b = np.array(ab) / np.hypot(*ab)
    s = qubit(a, b)
    phis = np.linspace(0, 2 * np.pi, 64, endpoint=False)
    p = np.array([bp.coincidence_probability(s, bp.MeasurementSetting(-1, 1, 0.0),
                                             bp.MeasurementSetting(-1, 1, ph)) for ph in phis])
    v = (p.max() - p.min()) / (p.max() + p.min())
    assert v == pytest.approx(2 * a * b / (a * a + b * b), abs=1e-6)


@settings(max_examples=30, deadline=None)
@given(amp_pairs, st.floats(0, 2 * np.pi), st.floats(0, 2 * np.pi))
def test_diagonal_unitary_transfer_keeps_schmidt(ab, t1, t2):
    from oamsim.certify import schmidt_decompose
    spec = bp.PathStateSpec.normalized(ab)
    u = np.diag(np.exp(1j * np.array([t1, t2])))
    s = bp.transfer_to_oam(bp.build_path_state(spec), u, [0, 1], sink=False)
    lam, _, _ = schmidt_decompose(s.rho[:, 0].reshape(2, 2) / np.sqrt(s.rho[0, 0].real))
    ref = sorted(spec.amplitudes, reverse=True)
    assert lam.array == pytest.approx(ref, abs=1e-9)


def test_sample_counts_deterministic_and_order_free():
    s = qubit(0.54, 0.84)
    sets = [(bp.MeasurementSetting(-1, 1, p), bp.MeasurementSetting(-1, 1, 0.0))
            for p in np.linspace(0, np.pi, 5)]
    r1 = bp.sample_counts(s, sets, 100, 1.0, seed=7)
    r2 = bp.sample_counts(s, sets, 100, 1.0, seed=7)
    assert [r.count for r in r1] == [r.count for r in r2]
    r3 = bp.sample_counts(s, sets, 100, 1.0, seed=8)
    assert [r.count for r in r1] != [r.count for r in r3]
    # a zero-probability setting never clicks
    z = bp.sample_counts(s, [(bp.MeasurementSetting(-1), bp.MeasurementSetting(1))], 1e6, 1.0, 1)
    assert z[0].count == 0 and z[0].expected_rate == 0.0
    with pytest.raises(ValueError):
        bp.sample_counts(s, sets, 0, 1.0, 1)


def test_counts_csv_roundtrip(tmp_path):
    s = qubit(0.54, 0.84)
    sets = [(bp.MeasurementSetting(-1), bp.MeasurementSetting(-1)),
            (bp.MeasurementSetting(-1, 1, 0.3), bp.MeasurementSetting(-1, 1, 1.1))]
    recs = bp.sample_counts(s, sets, 100, 2.0, 3)
    p = bp.write_counts_csv(tmp_path / "c.csv", recs)
    assert bp.read_counts_csv(p) == recs
    assert "np." not in p.read_text()


def test_setting_outside_basis():
    with pytest.raises(ValueError):
        bp.MeasurementSetting(5).vector([0, 1])
