"""Time-variant MISO simulation: reductions, linearity, noise injection."""

import numpy as np
import pytest

from hrtfmeas.errors import ConfigError
from hrtfmeas.excitation import ExcitationSignal, gen_white_noise
from hrtfmeas.simulate import (LoudspeakerLayout, RotationTrajectory,
                               add_noise, angle_at, simulate_measurement,
                               simulate_miso)
from hrtfmeas.sphere import HrirGrid, SphereConfig

# small, fast geometry for tests
TEST_SPHERE = SphereConfig(ref_length=96, synthesis_fft_size=512,
                           support_taps=80, source_distance=0.6,
                           truncation_tail=1e-6)


def test_angle_at_basics():
    traj = RotationTrajectory(start_angle=15.0, velocity=0.0)
    assert angle_at(traj, 123456) == 15.0
    traj = RotationTrajectory(start_angle=0.0, velocity=180.0,
                              sample_rate=24000.0)
    assert angle_at(traj, 24000) == pytest.approx(180.0)
    traj = RotationTrajectory(start_angle=350.0, velocity=20.0,
                              sample_rate=24000.0)
    assert angle_at(traj, 24000) == pytest.approx(10.0)


def test_static_rotation_reduces_to_lti_convolution():
    layout = LoudspeakerLayout.default(1)
    exc = gen_white_noise(1, 400, seed=0)
    traj = RotationTrajectory(start_angle=30.0, velocity=0.0)
    out = simulate_miso(layout, exc, traj, TEST_SPHERE)
    href = out.references[0, 0]
    direct = np.convolve(exc.data[0], href)[:400]
    peak = np.max(np.abs(direct))
    assert np.max(np.abs(out.d - direct)) <= 1e-12 * peak
    assert np.all(out.references == out.references[0])


def test_zero_excitation_gives_zero_output():
    layout = LoudspeakerLayout.default(2)
    exc = ExcitationSignal(np.zeros((2, 128)), "white_noise", 0)
    traj = RotationTrajectory(velocity=90.0)
    out = simulate_miso(layout, exc, traj, TEST_SPHERE)
    assert np.all(out.d == 0.0)


def test_superposition():
    layout = LoudspeakerLayout.default(1)
    traj = RotationTrajectory(velocity=360.0)
    grid = HrirGrid(TEST_SPHERE)
    rng = np.random.default_rng(5)
    xa = ExcitationSignal(rng.standard_normal((1, 300)), "white_noise", 0)
    xb = ExcitationSignal(rng.standard_normal((1, 300)), "white_noise", 0)
    xsum = ExcitationSignal(xa.data + xb.data, "white_noise", 0)
    da = simulate_miso(layout, xa, traj, TEST_SPHERE, grid=grid).d
    db = simulate_miso(layout, xb, traj, TEST_SPHERE, grid=grid).d
    dsum = simulate_miso(layout, xsum, traj, TEST_SPHERE, grid=grid).d
    assert np.max(np.abs(dsum - (da + db))) <= 1e-10 * np.max(np.abs(dsum))


def test_unit_impulse_reads_out_references():
    # impulse on channel s at sample k0: d(k0+kappa) = h_{k0+kappa,s}(kappa)
    layout = LoudspeakerLayout.default(2)
    traj = RotationTrajectory(velocity=600.0)
    k0 = 37
    n = 300
    data = np.zeros((2, n))
    data[1, k0] = 1.0
    exc = ExcitationSignal(data, "white_noise", 0)
    out = simulate_miso(layout, exc, traj, TEST_SPHERE)
    for kappa in range(0, n - k0, 7):
        expect = out.references[k0 + kappa, 1, kappa] \
            if kappa < TEST_SPHERE.ref_length else 0.0
        assert out.d[k0 + kappa] == pytest.approx(expect, abs=1e-15)


def test_simulation_deterministic():
    layout = LoudspeakerLayout.default(1)
    exc = gen_white_noise(1, 256, seed=1)
    traj = RotationTrajectory(velocity=45.0)
    a = simulate_measurement(layout, exc, traj, TEST_SPHERE, 60.0, 7)
    b = simulate_measurement(layout, exc, traj, TEST_SPHERE, 60.0, 7)
    assert np.array_equal(a.y, b.y)
    assert np.array_equal(a.references, b.references)


def test_add_noise_snr():
    rng = np.random.default_rng(2)
    d = rng.standard_normal(100000)
    y, achieved = add_noise(d, 60.0, seed=3)
    assert achieved == pytest.approx(60.0, abs=0.1)
    measured = 10 * np.log10(np.mean(d ** 2) / np.mean((y - d) ** 2))
    assert measured == pytest.approx(achieved, abs=1e-12)


def test_add_noise_noiseless_sentinel():
    d = np.sin(np.arange(64.0))
    for snr in (None, np.inf):
        y, achieved = add_noise(d, snr, seed=0)
        assert np.array_equal(y, d)
        assert achieved == np.inf


def test_add_noise_zero_power_errors():
    with pytest.raises(ConfigError):
        add_noise(np.zeros(16), 60.0, seed=0)


def test_channel_count_mismatch():
    layout = LoudspeakerLayout.default(2)
    exc = gen_white_noise(1, 64, seed=0)
    with pytest.raises(ConfigError):
        simulate_miso(layout, exc, RotationTrajectory(), TEST_SPHERE)
