import itertools
import math

import numpy as np
import pytest
import scipy.sparse.linalg as spla

from holokernel import fueter_lattice as fl
from holokernel.fueter_lattice import I, J, K, ONE, Quaternion, QuaternionField


def test_quaternion_table():
    minus_one = Quaternion(-1.0)
    assert I * I == J * J == K * K == minus_one
    assert I * J == K and J * K == I and K * I == J
    assert J * I == -K
    a, b, c = Quaternion(1, 2, -1, 0.5), Quaternion(0, 1, 3, -2), Quaternion(2, 0, 1, 1)
    assert np.allclose(list((a * b) * c), list(a * (b * c)))
    assert np.allclose(fl.left_matrix(a) @ np.array(list(b)), list(a * b))


def test_field_invariants():
    with pytest.raises(fl.LatticeError):
        QuaternionField(np.zeros((4, 4, 4, 4)))
    with pytest.raises(fl.LatticeError):
        QuaternionField(np.zeros((3, 5, 5, 5)))


def test_constant_field_is_killed():
    f = QuaternionField(np.ones((4, 7, 7, 7)) * np.array([1, -2, 3, 0.5])[:, None, None, None])
    assert fl.fueter_apply(f).norm_inf() == 0
    assert fl.fueter_square_residual(f) == 0


def test_sawtooth():
    n = 9
    f = QuaternionField.from_function(n, lambda y1, y2, y3: np.stack(
        [y1, np.zeros_like(y1), np.zeros_like(y1), np.zeros_like(y1)]))
    df = fl.fueter_apply(f).data
    interior = df[:, 1:n - 1]
    assert np.allclose(interior[1], 1.0, atol=1e-12)
    assert np.allclose(interior[[0, 2, 3]], 0.0, atol=1e-12)


def test_plane_wave_matches_symbol():
    n = 11
    q = Quaternion(0.3, -1.0, 0.5, 2.0)
    f = QuaternionField.from_function(n, lambda y1, y2, y3: np.array(list(q))[:, None, None, None]
                                      * np.cos(2 * math.pi * y1))
    df = fl.fueter_apply(f).data
    sym = math.sin(2 * math.pi / n) * n
    y1 = np.arange(n) / n
    expected = -sym * np.array(list(I * q))[:, None, None, None] * np.sin(2 * math.pi * y1)[None, :, None, None]
    expected = np.broadcast_to(expected, df.shape)
    assert np.abs(df - expected).max() <= 1e-10 * np.abs(expected).max()


def test_symbol_matches_operator_on_fourier_modes():
    n = 5
    k = (1, 3, 2)
    rng = np.random.default_rng(3)
    v = rng.standard_normal(4) + 1j * rng.standard_normal(4)
    y = np.arange(n) / n
    y1, y2, y3 = np.meshgrid(y, y, y, indexing="ij")
    phase = np.exp(2j * math.pi * (k[0] * y1 + k[1] * y2 + k[2] * y3))
    field = v[:, None, None, None] * phase
    re = fl.fueter_apply(QuaternionField(field.real)).data
    im = fl.fueter_apply(QuaternionField(field.imag)).data
    got = re + 1j * im
    expected = (fl.symbol(n, k) @ v)[:, None, None, None] * phase
    assert np.allclose(got, expected, atol=1e-10)


def test_square_identity_on_random_fields():
    rng = np.random.default_rng(20240917)
    for _ in range(50):
        f = QuaternionField.random(9, rng)
        assert fl.fueter_square_residual(f) <= 1e-12 * f.norm_inf()


def test_square_identity_under_axis_permutations():
    rng = np.random.default_rng(5)
    f = QuaternionField.random(7, rng)
    for units in itertools.permutations("ijk"):
        assert fl.fueter_square_residual(f, units) <= 1e-12 * f.norm_inf()


def test_pure_component_field():
    rng = np.random.default_rng(6)
    data = np.zeros((4, 7, 7, 7))
    data[1] = rng.standard_normal((7, 7, 7))
    f = QuaternionField(data)
    assert fl.fueter_square_residual(f) <= 1e-12 * f.norm_inf()


def test_linearity():
    rng = np.random.default_rng(7)
    f, g = QuaternionField.random(5, rng), QuaternionField.random(5, rng)
    lhs = fl.fueter_apply(QuaternionField(2 * f.data - 3 * g.data)).data
    rhs = 2 * fl.fueter_apply(f).data - 3 * fl.fueter_apply(g).data
    assert np.allclose(lhs, rhs, atol=1e-10)


@pytest.mark.parametrize("n", [5, 7, 9, 11])
def test_kernel_dimension(n):
    assert fl.kernel_dimension(n) == 4


@pytest.mark.parametrize("n", [5, 7])
def test_kernel_dimension_dense_oracle(n):
    op = fl.assemble_operator(n).toarray()
    s = np.linalg.svd(op, compute_uv=False)
    assert int((s <= 1e-9 * n).sum()) == 4


def test_even_lattice_refused():
    with pytest.raises(fl.LatticeError):
        fl.kernel_dimension(4)
    with pytest.raises(fl.LatticeError):
        fl.assemble_operator(6)


def test_assembled_operator_matches_apply():
    rng = np.random.default_rng(8)
    f = QuaternionField.random(5, rng)
    op = fl.assemble_operator(5)
    assert abs(op - op.T).max() == 0
    assert np.allclose(op @ f.data.ravel(), fl.fueter_apply(f).data.ravel(), atol=1e-10)


def test_eigen_residual():
    const = QuaternionField(np.ones((4, 5, 5, 5)))
    assert fl.nonlinear_eigen_residual(const, 0.0) == 0
    op = fl.assemble_operator(7)
    vals, vecs = spla.eigsh(op, k=2, which="LA")
    for lam, v in zip(vals, vecs.T):
        f = QuaternionField(v.reshape(4, 7, 7, 7))
        assert fl.nonlinear_eigen_residual(f, lam) <= 1e-8
    rng = np.random.default_rng(9)
    assert fl.nonlinear_eigen_residual(QuaternionField.random(5, rng), 1.0) > 0
    with pytest.raises(fl.LatticeError):
        fl.nonlinear_eigen_residual(QuaternionField(np.zeros((4, 5, 5, 5))), 1.0)


# spectral flow ----------------------------------------------------------------------

def _diag_family():
    return fl.SelfAdjointFamily((-1.0, 1.0), (np.array([[-1.0]]), np.array([[1.0]])))


def test_diag_flow():
    fam = _diag_family()
    res = fl.spectral_flow(fam)
    assert res.flow == 1 and res.simple and abs(res.crossings[0][0]) < 1e-9
    assert fl.spectral_flow(fam.reversed()).flow == -1


def test_endpoint_refused():
    fam = fl.SelfAdjointFamily((0.0, 1.0), (np.array([[0.0]]), np.array([[1.0]])))
    with pytest.raises(fl.SpectralFlowError):
        fl.spectral_flow(fam)


def test_family_validation():
    with pytest.raises(fl.SpectralFlowError):
        fl.SelfAdjointFamily((0.0, 1.0), (np.array([[0.0, 1.0], [0.0, 0.0]]), np.eye(2)))
    with pytest.raises(fl.SpectralFlowError):
        fl.SelfAdjointFamily((1.0, 0.0), (np.eye(1), np.eye(1)))
    with pytest.raises(fl.SpectralFlowError):
        fl.load_family({"params": [0, 1]})


def _sym(rng, n):
    a = rng.standard_normal((n, n))
    return (a + a.T) / 2


def _herm(rng, n):
    a = rng.standard_normal((n, n)) + 1j * rng.standard_normal((n, n))
    return (a + a.conj().T) / 2


def test_flow_additivity_and_reversal():
    rng = np.random.default_rng(20240917)
    for _ in range(100):
        n = int(rng.integers(1, 9))
        mats = [_sym(rng, n) for _ in range(5)]
        first = fl.SelfAdjointFamily((0.0, 0.5, 1.0), mats[:3])
        second = fl.SelfAdjointFamily((1.0, 1.7, 2.0), mats[2:])
        a, b = fl.spectral_flow(first).flow, fl.spectral_flow(second).flow
        whole = first.concat(second)
        assert fl.spectral_flow(whole).flow == a + b
        assert fl.spectral_flow(whole.reversed()).flow == -(a + b)
        # the flow is the net change in the number of negative eigenvalues
        neg = lambda m: int((np.linalg.eigvalsh(m) < 0).sum())
        assert a + b == neg(mats[0]) - neg(mats[-1])


def test_realified_flow_is_twice_and_even():
    rng = np.random.default_rng(11)
    for _ in range(20):
        n = int(rng.integers(1, 5))
        mats = [_herm(rng, n) for _ in range(4)]
        fam = fl.SelfAdjointFamily((0.0, 1.0, 2.0, 3.0), mats)
        flow = fl.spectral_flow(fam).flow
        real = fl.spectral_flow(fl.realify_family(fam)).flow
        assert real == 2 * flow and real % 2 == 0


def test_closed_complex_loop_has_even_flow():
    rng = np.random.default_rng(12)
    for _ in range(10):
        a, b, c = (_herm(rng, 3) for _ in range(3))
        loop = fl.SelfAdjointFamily((0.0, 1.0, 2.0, 3.0), (a, b, c, a))
        assert fl.spectral_flow(fl.realify_family(loop)).flow % 2 == 0


def test_realify_is_symmetric():
    rng = np.random.default_rng(13)
    h = _herm(rng, 3)
    r = fl.realify(h)
    assert np.allclose(r, r.T)
    assert np.allclose(np.sort(np.linalg.eigvalsh(r)), np.sort(np.repeat(np.linalg.eigvalsh(h), 2)))


def test_load_family_complex():
    fam = fl.load_family({"params": [0, 1], "matrices": [[[-1, 0], [0, 2]], [[1, 0], [0, 2]]],
                          "imag": [[[0, 0.5], [-0.5, 0]], [[0, 0.5], [-0.5, 0]]]})
    assert fl.spectral_flow(fam).flow == 1
