import numpy as np

from fluidsea.rng import Xorshift64Star


def test_deterministic_stream():
    a = Xorshift64Star(42)
    b = Xorshift64Star(42)
    assert [a.next_u64() for _ in range(10)] == [b.next_u64() for _ in range(10)]


def test_seed_changes_stream():
    a = Xorshift64Star(1)
    b = Xorshift64Star(2)
    assert a.next_u64() != b.next_u64()


def test_zero_seed_fallback():
    g = Xorshift64Star(0)
    assert g.next_u64() != 0


def test_uniform_range_and_moments():
    g = Xorshift64Star(7)
    u = np.array([g.uniform() for _ in range(20000)])
    assert np.all((0.0 <= u) & (u < 1.0))
    assert abs(u.mean() - 0.5) < 0.01
    assert abs(u.var() - 1.0 / 12.0) < 0.005


def test_normal_moments():
    g = Xorshift64Star(11)
    z = g.normal_array(20000)
    assert abs(z.mean()) < 0.03
    assert abs(z.std() - 1.0) < 0.03
