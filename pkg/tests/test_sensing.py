import numpy as np
import pytest

from icci_lab.sensing import (
    DimMismatchError,
    Mask,
    Measurement,
    SensingModel,
    SizeGuardError,
    adjoint,
    build_sensing_matrix,
    cacti_forward,
    cassi_forward,
    forward,
    generate_mask,
    load_sensing_model,
    mask_power_map,
    save_sensing_model,
)
from icci_lab.tensors_io import Rng


def random_cube(shape, seed):
    return Rng(seed).uniforms(int(np.prod(shape))).reshape(shape)


def random_model(kind, shape, seed, d=1):
    h, w, c = shape
    if kind == "cassi":
        mask = generate_mask(h, w, None, 0.5, seed)
        return SensingModel("cassi", mask, dispersion_step=d)
    mask = generate_mask(h, w, c, 0.5, seed)
    return SensingModel("cacti", mask)


class TestGenerateMask:
    def test_p_zero_all_zeros(self):
        m = generate_mask(8, 8, None, 0.0, 1)
        assert np.all(m.pattern == 0.0)

    def test_p_one_all_ones(self):
        m = generate_mask(8, 8, None, 1.0, 1)
        assert np.all(m.pattern == 1.0)

    def test_density_near_half(self):
        m = generate_mask(64, 64, None, 0.5, 3)
        assert abs(m.pattern.mean() - 0.5) < 0.05

    def test_invalid_p(self):
        with pytest.raises(ValueError):
            generate_mask(8, 8, None, 1.5, 0)

    def test_deterministic(self):
        a = generate_mask(16, 16, 4, 0.5, 9).pattern
        b = generate_mask(16, 16, 4, 0.5, 9).pattern
        assert np.array_equal(a, b)

    def test_debug_kinds(self):
        assert np.all(generate_mask(8, 8, None, 0.5, 0, kind="ones").pattern == 1.0)
        assert np.all(generate_mask(8, 8, None, 0.5, 0, kind="zeros").pattern == 0.0)

    def test_binary_mask_validation(self):
        with pytest.raises(ValueError):
            Mask(np.full((4, 4), 0.5), kind="binary")


class TestCassiForward:
    def test_single_band_identity(self):
        cube = random_cube((6, 6, 1), 1)
        model = SensingModel("cassi", generate_mask(6, 6, None, 0.5, 0, kind="ones"),
                             dispersion_step=0)
        m = cassi_forward(cube, model)
        assert np.allclose(m.data, cube[:, :, 0], atol=1e-6)

    def test_hand_summation(self):
        cube = np.ones((2, 2, 2))
        model = SensingModel("cassi", Mask(np.array([[1.0, 0.0], [0.0, 1.0]])),
                             dispersion_step=0)
        m = cassi_forward(cube, model)
        assert np.allclose(m.data, [[2.0, 0.0], [0.0, 2.0]])

    def test_matches_explicit_matrix(self):
        cube = random_cube((4, 4, 3), 2)
        model = random_model("cassi", (4, 4, 3), 5)
        m = cassi_forward(cube, model)
        h_mat = build_sensing_matrix(model, cube.shape)
        assert np.max(np.abs(m.data.ravel() - h_mat @ cube.ravel())) <= 1e-5

    def test_dispersion_widens_canvas(self):
        cube = random_cube((4, 4, 3), 3)
        model = random_model("cassi", (4, 4, 3), 5, d=2)
        assert cassi_forward(cube, model).data.shape == (4, 4 + 2 * 2)

    def test_dim_mismatch(self):
        model = random_model("cassi", (4, 4, 3), 5)
        with pytest.raises(DimMismatchError):
            cassi_forward(random_cube((5, 4, 3), 1), model)


class TestCactiForward:
    def test_single_frame_identity(self):
        video = random_cube((6, 6, 1), 4)
        model = SensingModel("cacti", generate_mask(6, 6, 1, 0.5, 0, kind="ones"))
        assert np.allclose(cacti_forward(video, model).data, video[:, :, 0], atol=1e-6)

    def test_partition_of_unity(self):
        base = generate_mask(8, 8, None, 0.5, 6).pattern
        masks = np.stack([base, 1.0 - base], axis=2)
        model = SensingModel("cacti", Mask(masks))
        m = cacti_forward(np.ones((8, 8, 2)), model)
        assert np.allclose(m.data, 1.0)

    def test_matches_explicit_matrix(self):
        video = random_cube((8, 8, 4), 7)
        model = random_model("cacti", (8, 8, 4), 8)
        m = cacti_forward(video, model)
        h_mat = build_sensing_matrix(model, video.shape)
        assert np.max(np.abs(m.data.ravel() - h_mat @ video.ravel())) <= 1e-5

    def test_sensor_noise_deterministic(self):
        video = random_cube((8, 8, 2), 9)
        mask = generate_mask(8, 8, 2, 0.5, 1)
        model = SensingModel("cacti", mask, noise_std=0.1)
        a = cacti_forward(video, model, Rng(3)).data
        b = cacti_forward(video, model, Rng(3)).data
        assert np.array_equal(a, b)
        assert not np.array_equal(a, cacti_forward(video, model).data)


class TestSensingMatrix:
    def test_identity_for_trivial_cassi(self):
        model = SensingModel("cassi", generate_mask(2, 2, None, 0.5, 0, kind="ones"),
                             dispersion_step=0)
        h_mat = build_sensing_matrix(model, (2, 2, 1))
        assert np.allclose(h_mat.toarray(), np.eye(4))

    def test_hand_written_cacti(self):
        m0 = np.array([[1.0, 0.0], [0.0, 1.0]])
        m1 = np.array([[1.0, 1.0], [0.0, 0.0]])
        model = SensingModel("cacti", Mask(np.stack([m0, m1], axis=2)))
        h_mat = build_sensing_matrix(model, (2, 2, 2)).toarray()
        # columns ordered (y, x, frame) row-major; rows (y, x)
        expect = np.array(
            [
                [1, 1, 0, 0, 0, 0, 0, 0],
                [0, 0, 0, 1, 0, 0, 0, 0],
                [0, 0, 0, 0, 0, 0, 0, 0],
                [0, 0, 0, 0, 0, 0, 1, 0],
            ],
            dtype=float,
        )
        assert np.array_equal(h_mat, expect)

    def test_single_nonzero_per_column(self):
        for kind in ("cassi", "cacti"):
            model = random_model(kind, (6, 5, 3), 11)
            h_mat = build_sensing_matrix(model, (6, 5, 3))
            per_col = np.diff(h_mat.tocsc().indptr)
            assert per_col.max() <= 1

    def test_size_guard(self):
        model = random_model("cassi", (8, 8, 2), 1)
        with pytest.raises(SizeGuardError):
            build_sensing_matrix(model, (2048, 2048, 8))


class TestLinearityAndAdjoint:
    @pytest.mark.parametrize("kind", ["cassi", "cacti"])
    def test_linearity(self, kind):
        shape = (6, 7, 3)
        model = random_model(kind, shape, 13)
        x1, x2 = random_cube(shape, 1), random_cube(shape, 2)
        a, b = 0.7, -1.3
        lhs = forward(a * x1 + b * x2, model).data
        rhs = a * forward(x1, model).data + b * forward(x2, model).data
        assert np.max(np.abs(lhs - rhs)) <= 1e-5

    @pytest.mark.parametrize("kind", ["cassi", "cacti"])
    def test_matrix_equivalence_20_instances(self, kind):
        for i in range(20):
            shape = (4 + i % 4, 4 + (i * 3) % 5, 2 + i % 3)
            model = random_model(kind, shape, 100 + i)
            x = random_cube(shape, 200 + i)
            h_mat = build_sensing_matrix(model, shape)
            assert np.max(np.abs(forward(x, model).data.ravel() - h_mat @ x.ravel())) <= 1e-5

    @pytest.mark.parametrize("kind", ["cassi", "cacti"])
    def test_adjoint_inner_product(self, kind):
        shape = (6, 6, 4)
        model = random_model(kind, shape, 17)
        x = random_cube(shape, 3)
        w_m = model.measurement_width(shape)
        y = random_cube((6, w_m, 1), 4)[:, :, 0]
        lhs = np.sum(forward(x, model).data.astype(np.float64) * y)
        rhs = np.sum(x * adjoint(y, model, shape).astype(np.float64))
        assert abs(lhs - rhs) <= 1e-4 * max(abs(lhs), abs(rhs))

    def test_mask_power_map_is_hht_diagonal(self):
        shape = (5, 6, 3)
        model = random_model("cassi", shape, 19)
        h_mat = build_sensing_matrix(model, shape)
        diag = (h_mat @ h_mat.T).diagonal()
        assert np.allclose(mask_power_map(model, shape).ravel(), diag, atol=1e-6)


class TestModelSerialization:
    def test_round_trip(self, tmp_path):
        model = random_model("cassi", (8, 8, 3), 21, d=2)
        model.noise_std = 0.01
        p = tmp_path / "model.yaml"
        save_sensing_model(model, p, seed=21)
        back = load_sensing_model(p)
        assert back.kind == "cassi"
        assert back.dispersion_step == 2
        assert back.noise_std == pytest.approx(0.01)
        assert np.array_equal(back.mask.pattern, model.mask.pattern)

    def test_measurement_carries_model(self):
        model = random_model("cacti", (8, 8, 2), 23)
        m = cacti_forward(random_cube((8, 8, 2), 5), model)
        assert isinstance(m, Measurement)
        assert m.model is model
