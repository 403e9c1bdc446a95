import math

import numpy as np
import pytest
from scipy import stats as sps

from riskstrat.rng import SplitMix64
from riskstrat.synthetic import XorConfig, generate_null, generate_xor, xor_risk


def test_splitmix_reference_vector():
    # first outputs of the reference C implementation seeded with 1234567
    got = SplitMix64(1234567).next_uint64(5).tolist()
    assert got == [
        6457827717110365317,
        3203168211198807973,
        9817491932198370423,
        4593380528125082431,
        16408922859458223821,
    ]


def _splitmix_scalar(seed, n):
    mask = (1 << 64) - 1
    out, state = [], seed
    for _ in range(n):
        state = (state + 0x9E3779B97F4A7C15) & mask
        z = state
        z = ((z ^ (z >> 30)) * 0xBF58476D1CE4E5B9) & mask
        z = ((z ^ (z >> 27)) * 0x94D049BB133111EB) & mask
        out.append(z ^ (z >> 31))
    return out


def test_splitmix_blocks_continue_the_stream():
    rng = SplitMix64(42)
    joined = rng.next_uint64(3).tolist() + rng.next_uint64(4).tolist()
    assert joined == _splitmix_scalar(42, 7)


def test_uniform_ranges():
    rng = SplitMix64(1)
    u = rng.random(10000)
    assert u.min() >= 0 and u.max() < 1
    v = rng.random_open_closed(10000)
    assert v.min() > 0 and v.max() <= 1
    k = rng.integers(3, 10000)
    assert set(np.unique(k)) == {0, 1, 2}
    assert sorted(SplitMix64(3).permutation(50).tolist()) == list(range(50))


def test_xor_true_risks():
    assert xor_risk(5, 0) == pytest.approx(1 / 6)
    assert xor_risk(5, 1) == pytest.approx(1 / 11)


def test_xor_empirical_risks_at_scale():
    data = generate_xor(XorConfig(1_000_000, rho=0.0, seed=0))
    cls = data.X[:, 0] ^ data.X[:, 1]
    assert np.mean(data.time[cls == 0] <= 5) == pytest.approx(1 / 6, abs=0.002)
    assert np.mean(data.time[cls == 1] <= 5) == pytest.approx(1 / 11, abs=0.002)
    assert data.time[cls == 0].min() >= 4.0
    assert data.time[cls == 1].min() >= 4.5
    assert data.event.all()


def test_plain_xor_model_is_balanced():
    data = generate_xor(XorConfig(200_000, rho=0.0, seed=1, p_x1=0.5))
    for col in (0, 1):
        assert data.X[:, col].mean() == pytest.approx(0.5, abs=0.005)
    assert np.mean(data.X[:, 0] ^ data.X[:, 1]) == pytest.approx(0.5, abs=0.005)


def test_rho_sets_agreement_rate():
    data = generate_xor(XorConfig(200_000, rho=0.3, seed=2))
    assert np.mean(data.X[:, 0] == data.X[:, 1]) == pytest.approx(0.65, abs=0.005)
    assert data.X[:, 0].mean() == pytest.approx(0.2, abs=0.005)


def test_unbalanced_x1_makes_x2_informative():
    # with a fair x1 the class is independent of x2 whatever rho is
    fair = generate_xor(XorConfig(200_000, rho=0.3, seed=3, p_x1=0.5))
    skew = generate_xor(XorConfig(200_000, rho=0.3, seed=3))
    for data, informative in ((fair, False), (skew, True)):
        cls = data.X[:, 0] ^ data.X[:, 1]
        gap = abs(cls[data.X[:, 1] == 0].mean() - cls[data.X[:, 1] == 1].mean())
        assert (gap > 0.1) == informative


def test_xor_determinism():
    a = generate_xor(XorConfig(1000, seed=5, censor_rate=0.1))
    b = generate_xor(XorConfig(1000, seed=5, censor_rate=0.1))
    assert a == b
    assert a.time.tobytes() == b.time.tobytes()
    assert not a.event.all()
    assert generate_xor(XorConfig(1000, seed=6)) != a


def test_censoring():
    data = generate_xor(XorConfig(50_000, seed=7, censor_rate=0.05))
    rate = 1 - data.event.mean()
    assert 0.1 < rate < 0.9
    assert generate_xor(XorConfig(1000, seed=7, censor_rate=0.0)).event.all()


def test_xor_config_validation():
    with pytest.raises(ValueError):
        XorConfig(0)
    with pytest.raises(ValueError):
        XorConfig(10, rho=1.5)
    with pytest.raises(ValueError):
        XorConfig(10, p_x1=1.0)


def test_null_pooled_risk():
    data = generate_null(100_000, 3, seed=0)
    assert np.mean(data.time <= 1) == pytest.approx(1 - math.exp(-1), abs=0.005)
    assert data.event.all()
    for col in range(3):
        in_cell = data.time[data.X[:, col] == 1]
        assert np.mean(in_cell <= 1) == pytest.approx(1 - math.exp(-1), abs=0.01)


def test_null_determinism():
    assert generate_null(500, 4, seed=2) == generate_null(500, 4, seed=2)
    with pytest.raises(ValueError):
        generate_null(0, 2, seed=0)


def test_rho_zero_independence():
    crit = sps.chi2.ppf(0.99, 1)
    passed = 0
    for seed in range(40):
        data = generate_xor(XorConfig(100_000, rho=0.0, seed=seed))
        table = np.zeros((2, 2))
        np.add.at(table, (data.X[:, 0], data.X[:, 1]), 1)
        stat = sps.chi2_contingency(table, correction=False)[0]
        passed += stat < crit
    assert passed / 40 >= 0.95
