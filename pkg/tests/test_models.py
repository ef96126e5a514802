import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from quasipot.models import JumpAtom, LocalModel, Path, affine_jump, constant_jump


def make_toy_model(jumps=()):
    def drift(y):
        y = np.asarray(y, dtype=float)
        return -y

    return LocalModel(2, drift, np.array([[1.0, 0.0], [0.5, 2.0]]), jumps)


def test_constant_jump_broadcasts():
    f = constant_jump([1.0, -2.0])
    out = f(np.zeros((4, 3, 2)))
    assert out.shape == (4, 3, 2)
    assert np.all(out[..., 0] == 1.0) and np.all(out[..., 1] == -2.0)


def test_affine_jump():
    f = affine_jump([1.0, 0.0], [[0.0, 1.0], [1.0, 0.0]])
    got = f(np.array([[2.0, 3.0]]))
    np.testing.assert_allclose(got, [[1.0 + 3.0, 2.0]])


def test_jump_atom_rejects_bad_rate():
    f = constant_jump([1.0])
    for rate in (0.0, -1.0, np.inf, np.nan):
        with pytest.raises(ValueError):
            JumpAtom(rate, f)


def test_drift_shape_check():
    model = LocalModel(2, lambda y: np.asarray(y)[..., :1], np.eye(2))
    with pytest.raises(ValueError, match="drift returned"):
        model.drift_at(np.zeros(2))


def test_diffusion_constant_and_callable_agree():
    sig = np.array([[1.0, 0.0], [0.5, 2.0]])
    const = LocalModel(2, lambda y: -np.asarray(y, float), sig)
    as_callable = LocalModel(
        2,
        lambda y: -np.asarray(y, float),
        lambda y: np.broadcast_to(sig, np.shape(y)[:-1] + (2, 2)).copy(),
    )
    y = np.random.default_rng(0).normal(size=(5, 2))
    np.testing.assert_array_equal(const.diffusion_at(y), as_callable.diffusion_at(y))
    assert const.noise_width == 2


def test_noise_covariance_formula():
    model = make_toy_model()
    y = np.zeros((1, 2))
    sig = np.array([[1.0, 0.0], [0.5, 2.0]])
    np.testing.assert_allclose(model.noise_covariance(y)[0], sig @ sig.T)


def test_jump_covariance_formula():
    atoms = (
        JumpAtom(0.5, constant_jump([1.0, 0.0])),
        JumpAtom(2.0, constant_jump([0.0, 3.0])),
    )
    model = make_toy_model(atoms)
    got = model.jump_covariance(np.zeros(2))
    want = 0.5 * np.outer([1, 0], [1, 0]) + 2.0 * np.outer([0, 3], [0, 3])
    np.testing.assert_allclose(got, want)
    np.testing.assert_allclose(
        model.local_covariance(np.zeros(2)),
        model.noise_covariance(np.zeros(2)) + want,
    )


def test_jump_values_stacking():
    atoms = (
        JumpAtom(1.0, constant_jump([1.0, 0.0])),
        JumpAtom(1.0, affine_jump([0.0, 0.0], np.eye(2))),
    )
    model = make_toy_model(atoms)
    y = np.array([[2.0, -1.0], [0.0, 4.0]])
    vals = model.jump_values(y)
    assert vals.shape == (2, 2, 2)
    np.testing.assert_allclose(vals[:, 0], [[1.0, 0.0], [1.0, 0.0]])
    np.testing.assert_allclose(vals[:, 1], y)
    assert model.jump_rates.tolist() == [1.0, 1.0]


def test_no_jumps_edge_case():
    model = make_toy_model()
    assert model.jump_values(np.zeros((3, 2))).shape == (3, 0, 2)
    np.testing.assert_array_equal(model.jump_covariance(np.zeros(2)), np.zeros((2, 2)))
    assert model.jump_growth_constants(np.zeros((2, 2))).size == 0


def test_assert_nondegenerate():
    good = make_toy_model()
    good.assert_nondegenerate(np.zeros((3, 2)))
    flat = LocalModel(2, lambda y: -np.asarray(y, float), np.array([[1.0], [0.0]]))
    with pytest.raises(ValueError, match="degenerate"):
        flat.assert_nondegenerate(np.zeros(2))


def test_degenerate_diffusion_fixed_by_jump():
    # a jump channel can restore full rank by itself
    atom = JumpAtom(1.0, constant_jump([0.0, 1.0]))
    model = LocalModel(2, lambda y: -np.asarray(y, float), np.array([[1.0], [0.0]]), (atom,))
    model.assert_nondegenerate(np.zeros(2))


def test_jump_growth_constants():
    atom = JumpAtom(1.0, constant_jump([2.0]))
    model = LocalModel(1, lambda y: -np.asarray(y, float), np.eye(1), (atom,))
    pts = np.array([[0.0], [1.0], [9.0]])
    # constant jump: max |f|/(1+|y|) attained at the origin
    np.testing.assert_allclose(model.jump_growth_constants(pts), [2.0])


def test_drift_contraction():
    model = make_toy_model()
    pts = np.random.default_rng(1).normal(size=(20, 2))
    # b = -y gives -y.b/|y|^2 = 1 everywhere
    assert model.drift_contraction(pts) == pytest.approx(1.0)
    with pytest.raises(ValueError):
        model.drift_contraction(np.zeros((1, 2)))


@given(st.integers(min_value=0, max_value=2**31 - 1))
@settings(max_examples=40, deadline=None)
def test_local_covariance_is_psd(seed):
    rng = np.random.default_rng(seed)
    d = int(rng.integers(1, 4))
    sig = rng.normal(size=(d, int(rng.integers(1, 4))))
    atoms = tuple(
        JumpAtom(float(rng.uniform(0.1, 2.0)), constant_jump(rng.normal(size=d)))
        for _ in range(int(rng.integers(0, 3)))
    )
    model = LocalModel(d, lambda y: -np.asarray(y, float), sig, atoms)
    c = model.local_covariance(rng.normal(size=(5, d)))
    eigs = np.linalg.eigvalsh(c)
    assert (eigs >= -1e-12).all()
    np.testing.assert_allclose(c, np.swapaxes(c, -1, -2), atol=1e-14)


# -- discrete paths ---------------------------------------------------------


def test_path_validation():
    with pytest.raises(ValueError, match="three points"):
        Path(1.0, np.zeros((2, 1)))
    with pytest.raises(ValueError, match="horizon"):
        Path(0.0, np.zeros((5, 1)))
    with pytest.raises(ValueError, match="finite"):
        Path(1.0, np.array([[0.0], [np.inf], [1.0]]))


def test_path_geometry():
    pts = np.array([[0.0], [1.0], [4.0], [9.0]])
    path = Path(3.0, pts)
    assert path.num_segments == 3
    assert path.dim == 1
    assert path.dt == 1.0
    np.testing.assert_allclose(path.times, [0.0, 1.0, 2.0, 3.0])
    with pytest.raises(ValueError):
        path.points[0, 0] = 5.0


def test_path_resample_preserves_endpoints_and_lines():
    t = np.linspace(0.0, 2.0, 9)
    pts = np.column_stack([2.0 * t - 1.0, t**0 * 3.0])
    path = Path(2.0, pts)
    fine = path.resampled(32)
    assert fine.num_segments == 32
    np.testing.assert_allclose(fine.points[0], path.points[0])
    np.testing.assert_allclose(fine.points[-1], path.points[-1])
    # linear data is reproduced exactly by linear interpolation
    np.testing.assert_allclose(fine.points[:, 0], 2.0 * fine.times - 1.0, atol=1e-12)
