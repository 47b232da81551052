"""Contract tests for network construction and the four forward operations."""

import numpy as np
import pytest

from aegan import networks
from aegan.errors import ConfigurationError, DataError, ShapeError, UsageError
from aegan.networks import ModelConfig, NetworkSpec, build_network


def dense_spec(role, widths, d_z=32, sample_shape=(2,), **kw):
    return NetworkSpec(network_role=role, layer_widths=widths, d_z=d_z,
                       sample_shape=sample_shape, **kw)


class TestBuild:
    def test_parameter_count_dense_generator(self):
        # (32*64 + 64) + (64*2 + 2) = 2242
        spec = dense_spec("generator", (32, 64, 2))
        net = build_network(spec, seed=7)
        assert net.n_parameters == 2242
        assert networks.parameter_count(spec) == 2242

    def test_build_is_deterministic(self):
        spec = dense_spec("generator", (32, 64, 2))
        a = build_network(spec, seed=7)
        b = build_network(spec, seed=7)
        for name in a.params:
            np.testing.assert_array_equal(a.params[name], b.params[name])
        c = build_network(spec, seed=8)
        assert any(not np.array_equal(a.params[n], c.params[n]) for n in a.params)

    def test_empty_widths_rejected(self):
        with pytest.raises(ConfigurationError, match="layer_widths"):
            dense_spec("generator", ()).validate()

    def test_role_width_mismatch_names_field(self):
        with pytest.raises(ConfigurationError, match="layer_widths"):
            build_network(dense_spec("generator", (16, 64, 2)), seed=0)
        with pytest.raises(ConfigurationError, match="layer_widths"):
            build_network(dense_spec("encoder", (2, 64, 31)), seed=0)

    def test_bad_role_and_activation(self):
        with pytest.raises(ConfigurationError, match="network_role"):
            dense_spec("critic", (2, 1)).validate()
        with pytest.raises(ConfigurationError, match="output_activation"):
            dense_spec("sample_discriminator", (2, 8, 1),
                       output_activation="identity").validate()

    def test_conv_latent_discriminator_rejected(self):
        spec = NetworkSpec("latent_discriminator", (16,), "convolutional",
                           d_z=8, sample_shape=(8, 8, 3))
        with pytest.raises(ConfigurationError, match="dense"):
            spec.validate()

    def test_conv_stage_count_enforced(self):
        with pytest.raises(ConfigurationError, match="channel counts"):
            NetworkSpec("generator", (32,), "convolutional", d_z=8,
                        sample_shape=(16, 16, 3)).validate()

    def test_conv_side_must_be_power_of_two_times_four(self):
        with pytest.raises(ConfigurationError, match="4 \\* 2"):
            NetworkSpec("generator", (32, 16), "convolutional", d_z=8,
                        sample_shape=(12, 12, 3)).validate()

    def test_conv_parameter_count_is_pure(self):
        spec = NetworkSpec("encoder", (8, 16), "convolutional", d_z=4,
                           sample_shape=(16, 16, 3))
        net = build_network(spec, seed=3)
        assert net.n_parameters == networks.parameter_count(spec)


def tiny_model(seed=0, d_z=4):
    cfg = ModelConfig(generator_widths=(8,), encoder_widths=(8,),
                      sample_discriminator_widths=(8,),
                      latent_discriminator_widths=(8,))
    specs = {r: cfg.spec_for(r, d_z, (2,), (-2.2, 2.2)) for r in networks.ROLES}
    return {r: build_network(s, seed + i) for i, (r, s) in enumerate(specs.items())}


class TestForwardContracts:
    def test_generate_shapes_and_range(self):
        nets = tiny_model()
        z = np.random.default_rng(0).standard_normal((16, 4))
        x = networks.generate(nets["generator"], z)
        assert x.shape == (16, 2)
        assert np.all(x >= -2.2) and np.all(x <= 2.2)
        assert networks.generate(nets["generator"], z[:1]).shape == (1, 2)

    def test_generate_deterministic(self):
        nets = tiny_model()
        z = np.zeros((3, 4))
        a = networks.generate(nets["generator"], z)
        b = networks.generate(nets["generator"], z)
        np.testing.assert_array_equal(a, b)
        assert np.all(np.isfinite(a))

    def test_encode_shapes(self):
        nets = tiny_model()
        x = np.random.default_rng(1).uniform(-1, 1, size=(16, 2))
        z = networks.encode(nets["encoder"], x)
        assert z.shape == (16, 4)
        assert networks.encode(nets["encoder"], x[:1]).shape == (1, 4)

    def test_encode_rejects_non_finite(self):
        nets = tiny_model()
        bad = np.array([[np.nan, 0.0]])
        with pytest.raises(DataError):
            networks.encode(nets["encoder"], bad)

    def test_shape_errors(self):
        nets = tiny_model()
        with pytest.raises(ShapeError):
            networks.generate(nets["generator"], np.zeros((4, 5)))
        with pytest.raises(ShapeError):
            networks.encode(nets["encoder"], np.zeros((4, 3)))
        with pytest.raises(UsageError):
            networks.generate(nets["generator"], np.zeros((0, 4)))

    def test_role_guards(self):
        nets = tiny_model()
        with pytest.raises(UsageError):
            networks.generate(nets["encoder"], np.zeros((1, 4)))

    def test_discriminators_output_open_interval(self):
        nets = tiny_model()
        x = np.random.default_rng(2).uniform(-2, 2, size=(32, 2))
        z = np.random.default_rng(3).standard_normal((32, 4))
        px = networks.discriminate_sample(nets["sample_discriminator"], x)
        pz = networks.discriminate_latent(nets["latent_discriminator"], z)
        for p in (px, pz):
            assert p.shape == (32, 1)
            assert np.all(p > 0) and np.all(p < 1)

    def test_saturated_discriminator_is_clamped(self):
        nets = tiny_model()
        net = nets["sample_discriminator"]
        for name in net.params:
            net.params[name] = net.params[name] * 1e8 + 1e6
        p = networks.discriminate_sample(net, np.array([[1.0, 1.0], [-1.0, -1.0]]))
        assert np.all(p >= networks.PROB_EPS)
        assert np.all(p <= 1 - networks.PROB_EPS)

    def test_initialization_not_degenerate_across_seeds(self):
        # a fresh discriminator must not map different inputs to one value
        rng = np.random.default_rng(11)
        x = rng.uniform(-2, 2, size=(64, 2))
        for seed in range(10):
            spec = dense_spec("sample_discriminator", (2, 16, 1))
            net = build_network(spec, seed=seed)
            p = networks.discriminate_sample(net, x)
            assert np.unique(p).size > 1

    def test_batch_independence(self):
        nets = tiny_model()
        z = np.random.default_rng(4).standard_normal((9, 4))
        full = networks.generate(nets["generator"], z)
        singles = np.concatenate(
            [networks.generate(nets["generator"], z[i:i + 1]) for i in range(9)])
        np.testing.assert_allclose(full, singles, atol=1e-5)
        # einsum forward actually makes this bitwise
        np.testing.assert_array_equal(full, singles)

    def test_shape_algebra_round_trip(self):
        nets = tiny_model()
        for n in (1, 3, 16):
            z = np.random.default_rng(n).standard_normal((n, 4))
            x = networks.generate(nets["generator"], z)
            z2 = networks.encode(nets["encoder"], x)
            assert z2.shape == z.shape
            x2 = networks.generate(nets["generator"], z2)
            assert x2.shape == x.shape


class TestConvForward:
    def setup_method(self):
        self.cfg = ModelConfig(generator_widths=(16, 8), encoder_widths=(8,),
                               sample_discriminator_widths=(8,),
                               latent_discriminator_widths=(8,))
        self.shape = (8, 8, 3)
        self.d_z = 6

    def net(self, role, seed=0):
        return build_network(
            self.cfg.spec_for(role, self.d_z, self.shape, (-1.0, 1.0)), seed)

    def test_conv_round_trip_shapes(self):
        g = self.net("generator")
        e = self.net("encoder", 1)
        z = np.random.default_rng(0).standard_normal((4, 6))
        x = networks.generate(g, z)
        assert x.shape == (4, 8, 8, 3)
        assert np.all(np.abs(x) <= 1.0)
        z2 = networks.encode(e, x)
        assert z2.shape == (4, 6)

    def test_conv_discriminator(self):
        d = self.net("sample_discriminator", 2)
        x = np.random.default_rng(1).uniform(-1, 1, size=(5, 8, 8, 3))
        p = networks.discriminate_sample(d, x)
        assert p.shape == (5, 1)
        assert np.all((p > 0) & (p < 1))

    def test_conv_batch_independence(self):
        g = self.net("generator", 3)
        z = np.random.default_rng(2).standard_normal((6, 6))
        full = networks.generate(g, z)
        singles = np.concatenate(
            [networks.generate(g, z[i:i + 1]) for i in range(6)])
        np.testing.assert_allclose(full, singles, atol=1e-5)


class TestFlatParameters:
    def test_round_trip(self):
        net = build_network(dense_spec("generator", (32, 64, 2)), seed=0)
        vec = networks.flat_parameters(net)
        assert vec.size == 2242
        h0 = net.hash()
        networks.set_flat_parameters(net, vec)
        assert net.hash() == h0
        vec[0] += 1.0
        networks.set_flat_parameters(net, vec)
        assert net.hash() != h0

    def test_copy_is_independent(self):
        net = build_network(dense_spec("generator", (32, 64, 2)), seed=0)
        dup = net.copy()
        dup.params["w0"][0, 0] += 1.0
        assert net.hash() != dup.hash()
