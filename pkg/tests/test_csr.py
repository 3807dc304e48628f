import numpy as np
import pytest
from hypothesis import given, strategies as st

from csrfbs.csr import (CsrConfig, Dictionary, DictionaryOperator, coefficient_norm_sq_sum, csr_data_term,
                        csr_gradient_d, dump_dictionary_images, filter_norm_sq_sum, init_dictionary, load_dictionary,
                        reconstruct, save_dictionary)
from csrfbs.solver import update_dictionary
from csrfbs.video import VideoFormatError

from oracles import naive_circ_conv


def random_case(rng, shape=(7, 6, 3), sizes=((3, 3), (2, 4))):
    dic = Dictionary(tuple(rng.standard_normal(s) for s in sizes))
    a = rng.standard_normal((len(sizes),) + shape)
    f = rng.standard_normal(shape)
    return f, dic, a


def fd_gradient(f, dic, a, h=1e-6):
    grads = []
    for k, flt in enumerate(dic.filters):
        g = np.zeros(flt.shape)
        for idx in np.ndindex(flt.shape):
            def at(delta):
                fs = [x.copy() for x in dic.filters]
                fs[k][idx] += delta
                return csr_data_term(f, Dictionary(tuple(fs)), a)
            g[idx] = (at(h) - at(-h)) / (2 * h)
        grads.append(g)
    return grads


def test_identity_filter_and_zero_coefficients(rng):
    a = rng.standard_normal((1, 4, 5, 2))
    np.testing.assert_allclose(reconstruct(Dictionary((np.ones((1, 1)),)), a), a[0], atol=1e-14)
    dic = init_dictionary(CsrConfig(3, 3))
    assert not np.any(reconstruct(dic, np.zeros((3, 4, 5, 2))))


def test_reconstruct_matches_naive_sum(rng):
    f, dic, a = random_case(rng)
    want = naive_circ_conv(dic.filters[0], a[0]) + naive_circ_conv(dic.filters[1], a[1])
    np.testing.assert_allclose(reconstruct(dic, a), want, atol=1e-10)


def test_reconstruct_is_bilinear(rng):
    _, dic, a = random_case(rng)
    _, dic2, a2 = random_case(rng)
    np.testing.assert_allclose(reconstruct(dic, 2 * a - a2), 2 * reconstruct(dic, a) - reconstruct(dic, a2),
                               atol=1e-10)
    mix = Dictionary(tuple(3 * x - y for x, y in zip(dic.filters, dic2.filters)))
    np.testing.assert_allclose(reconstruct(mix, a), 3 * reconstruct(dic, a) - reconstruct(dic2, a), atol=1e-10)


def test_data_term(rng):
    _, dic, a = random_case(rng)
    rec = reconstruct(dic, a)
    assert csr_data_term(rec, dic, a) == pytest.approx(0.0, abs=1e-20)
    assert csr_data_term(rec + 0.3, dic, a) == pytest.approx(0.5 * 0.09 * rec.size, rel=1e-10)
    f = rng.standard_normal(rec.shape)
    direct = 0.5 * sum((x - y) ** 2 for x, y in zip(f.ravel(), rec.ravel()))
    assert csr_data_term(f, dic, a) == pytest.approx(direct, rel=1e-12)
    assert csr_data_term(f, dic, a) >= 0
    with pytest.raises(ValueError):
        csr_data_term(f[:, :, :2], dic, a)
    with pytest.raises(ValueError):
        reconstruct(dic, a[:1])


def test_init_dictionary():
    cfg = CsrConfig(4, 5, 0.05, init_seed=3)
    d1, d2 = init_dictionary(cfg), init_dictionary(cfg)
    for x, y in zip(d1.filters, d2.filters):
        np.testing.assert_array_equal(x, y)
    assert np.all(d1.norms() <= 1 + 1e-12)
    others = [init_dictionary(CsrConfig(4, 5, 0.05, init_seed=s)).filters[0] for s in (4, 5, 6)]
    assert all(not np.array_equal(o, d1.filters[0]) for o in others)
    with pytest.raises(ValueError):
        CsrConfig(0, 3)
    with pytest.raises(ValueError):
        CsrConfig(2, 3, lambda1=0.0)


def test_gradient_zero_at_exact_fit(rng):
    _, dic, a = random_case(rng)
    for g in csr_gradient_d(reconstruct(dic, a), dic, a):
        assert np.max(np.abs(g)) < 1e-10


@pytest.mark.parametrize("seed", range(10))
def test_gradient_matches_central_differences(seed):
    rng = np.random.default_rng(seed)
    f, dic, a = random_case(rng, shape=(6, 5, 2))
    g = np.concatenate([x.ravel() for x in csr_gradient_d(f, dic, a)])
    g_fd = np.concatenate([x.ravel() for x in fd_gradient(f, dic, a)])
    assert np.linalg.norm(g - g_fd) <= 1e-5 * np.linalg.norm(g)


def test_gradient_with_impulse_coefficients(rng):
    # a = unit impulse at the origin: reconstruction is the zero-padded filter,
    # so the gradient is -(f window - d) on the filter support
    n1, n2 = 6, 7
    d = rng.standard_normal((3, 2))
    a = np.zeros((1, n1, n2, 1))
    a[0, 0, 0, 0] = 1.0
    f = rng.standard_normal((n1, n2, 1))
    g = csr_gradient_d(f, Dictionary((d,)), a)[0]
    np.testing.assert_allclose(g, -(f[:3, :2, 0] - d), atol=1e-12)


def test_operator_adjoint_and_norms(rng):
    _, dic, a = random_case(rng)
    op = DictionaryOperator(dic, a.shape[1:])
    y = rng.standard_normal(a.shape[1:])
    assert np.vdot(op.apply(a), y) == pytest.approx(np.vdot(a, op.adjoint(y)), rel=1e-10)
    assert op.norm_sq_sum() == pytest.approx(filter_norm_sq_sum(dic, 7, 6))
    assert coefficient_norm_sq_sum(a) > 0
    with pytest.raises(ValueError):
        DictionaryOperator(dic, (2, 2, 1))


def test_dictionary_update_decreases_objective(rng):
    for _ in range(10):
        f, _, a = random_case(rng, sizes=((3, 3), (3, 3)))
        dic = init_dictionary(CsrConfig(2, 3, 0.05, int(rng.integers(1000))))
        new = update_dictionary(f, a, dic, iters=10)
        assert csr_data_term(f, new, a) <= csr_data_term(f, dic, a)
        assert np.all(new.norms() <= 1 + 1e-12)


def test_dictionary_update_recovers_patch_from_impulse(rng):
    n1, n2 = 8, 8
    patch = rng.standard_normal((3, 3))
    patch /= 1.25 * np.linalg.norm(patch)
    a = np.zeros((1, n1, n2, 1))
    a[0, 0, 0, 0] = 1.0
    f = reconstruct(Dictionary((patch,)), a)
    d0 = Dictionary((np.zeros((3, 3)),))
    out = update_dictionary(f, a, d0, iters=200)
    np.testing.assert_allclose(out.filters[0], patch, atol=1e-6)
    assert csr_data_term(f, out, a) < 1e-6


def test_dictionary_update_zero_coefficients():
    dic = init_dictionary(CsrConfig(2, 3))
    assert update_dictionary(np.ones((5, 5, 2)), np.zeros((2, 5, 5, 2)), dic) is dic


@given(st.integers(1, 4), st.integers(1, 5), st.integers(1, 5), st.integers(0, 99))
def test_dictionary_file_round_trip(tmp_path_factory, n, r, c, seed):
    rng = np.random.default_rng(seed)
    dic = Dictionary(tuple(rng.standard_normal((r + i % 2, c)).astype(np.float32) for i in range(n)))
    path = tmp_path_factory.mktemp("dic") / "d.cfbd"
    save_dictionary(dic, path)
    back = load_dictionary(path)
    assert len(back) == n
    for x, y in zip(dic.filters, back.filters):
        np.testing.assert_array_equal(x, y)


def test_dictionary_file_errors(tmp_path):
    save_dictionary(init_dictionary(CsrConfig(2, 3)), tmp_path / "d.cfbd")
    raw = (tmp_path / "d.cfbd").read_bytes()
    (tmp_path / "bad.cfbd").write_bytes(b"NOPE" + raw[4:])
    (tmp_path / "short.cfbd").write_bytes(raw[:-1])
    for name in ("bad", "short"):
        with pytest.raises(VideoFormatError):
            load_dictionary(tmp_path / f"{name}.cfbd")


def test_image_dump(tmp_path):
    out = dump_dictionary_images(init_dictionary(CsrConfig(5, 4)), tmp_path / "tiles", scale=2)
    assert out.name == "grid.png"
    assert len(list((tmp_path / "tiles").glob("filter_*.png"))) == 5
