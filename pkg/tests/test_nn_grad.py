"""Every layer's backward pass against central finite differences."""

import numpy as np

from availcast.nn import (
    LayerSpec,
    ResidualBlock,
    build_network,
    grad_check,
    numeric_jacobian,
    one_hot,
)

TOL = 1e-4
rng = np.random.default_rng(42)


def _check(specs, in_shape, out_shape, loss="mse", classes=None, seed=0):
    net = build_network(specs, seed=seed)
    x = rng.normal(size=in_shape)
    if loss == "cross_entropy":
        targets = one_hot(rng.integers(0, classes, size=in_shape[0]), classes)
    else:
        targets = rng.normal(size=out_shape)
    return grad_check(net, x, targets, loss=loss)


class TestSingleLayers:
    def test_dense(self):
        assert _check([LayerSpec("dense", {"in_dim": 4, "out_dim": 3})],
                      (5, 4), (5, 3)) < TOL

    def test_leaky_relu(self):
        specs = [LayerSpec("dense", {"in_dim": 3, "out_dim": 3}),
                 LayerSpec("leaky_relu", {"a": 0.01})]
        assert _check(specs, (6, 3), (6, 3)) < TOL

    def test_batch_norm_training_mode(self):
        specs = [LayerSpec("dense", {"in_dim": 3, "out_dim": 4}),
                 LayerSpec("batch_norm", {"num_features": 4})]
        assert _check(specs, (8, 3), (8, 4)) < TOL

    def test_conv2d(self):
        specs = [LayerSpec("conv2d", {"in_ch": 2, "out_ch": 3, "kh": 3, "padding": 1})]
        assert _check(specs, (2, 2, 5, 5), (2, 3, 5, 5)) < TOL

    def test_conv2d_strided(self):
        specs = [LayerSpec("conv2d", {"in_ch": 1, "out_ch": 2, "kh": 3, "stride": 2,
                                      "padding": 1})]
        assert _check(specs, (2, 1, 7, 7), (2, 2, 4, 4)) < TOL

    def test_max_pool(self):
        specs = [LayerSpec("conv2d", {"in_ch": 1, "out_ch": 2, "kh": 3, "padding": 1}),
                 LayerSpec("max_pool", {"window": 3, "stride": 2, "padding": 1})]
        assert _check(specs, (2, 1, 6, 6), (2, 2, 3, 3)) < TOL

    def test_avg_pool(self):
        specs = [LayerSpec("conv2d", {"in_ch": 1, "out_ch": 2, "kh": 3, "padding": 1}),
                 LayerSpec("avg_pool", {"window": 2, "stride": 2})]
        assert _check(specs, (2, 1, 6, 6), (2, 2, 3, 3)) < TOL

    def test_global_avg_pool(self):
        specs = [LayerSpec("conv2d", {"in_ch": 1, "out_ch": 3, "kh": 3}),
                 LayerSpec("global_avg_pool", {})]
        assert _check(specs, (2, 1, 5, 5), (2, 3)) < TOL

    def test_residual_block(self):
        specs = [LayerSpec("residual_block", {"in_ch": 2, "out_ch": 2})]
        assert _check(specs, (2, 2, 4, 4), (2, 2, 4, 4)) < TOL

    def test_residual_block_projection(self):
        specs = [LayerSpec("residual_block", {"in_ch": 2, "out_ch": 3, "stride": 2})]
        assert _check(specs, (2, 2, 6, 6), (2, 3, 3, 3)) < TOL

    def test_softmax_cross_entropy(self):
        specs = [LayerSpec("dense", {"in_dim": 4, "out_dim": 3}), LayerSpec("softmax", {})]
        assert _check(specs, (6, 4), (6, 3), loss="cross_entropy", classes=3) < TOL


class TestComposites:
    def test_dense_bn_leaky(self):
        specs = [
            LayerSpec("dense", {"in_dim": 5, "out_dim": 8}),
            LayerSpec("leaky_relu", {"a": 0.01}),
            LayerSpec("batch_norm", {"num_features": 8}),
            LayerSpec("dense", {"in_dim": 8, "out_dim": 4}),
            LayerSpec("softmax", {}),
        ]
        assert _check(specs, (7, 5), (7, 4), loss="cross_entropy", classes=4) < TOL

    def test_conv_pool_residual_softmax(self):
        specs = [
            LayerSpec("conv2d", {"in_ch": 1, "out_ch": 2, "kh": 3, "padding": 1}),
            LayerSpec("leaky_relu", {"a": 0.05}),
            LayerSpec("max_pool", {"window": 2, "stride": 2}),
            LayerSpec("residual_block", {"in_ch": 2, "out_ch": 3, "stride": 2}),
            LayerSpec("global_avg_pool", {}),
            LayerSpec("dense", {"in_dim": 3, "out_dim": 4}),
            LayerSpec("softmax", {}),
        ]
        assert _check(specs, (3, 1, 8, 8), (3, 4), loss="cross_entropy", classes=4) < TOL

    def test_input_gradient_flatten_chain(self):
        # input gradient via the full backward chain vs numeric Jacobian
        specs = [
            LayerSpec("conv2d", {"in_ch": 1, "out_ch": 2, "kh": 3, "padding": 1}),
            LayerSpec("flatten", {}),
            LayerSpec("dense", {"in_dim": 2 * 16, "out_dim": 2}),
        ]
        net = build_network(specs, seed=3)
        x = rng.normal(size=(1, 1, 4, 4))
        g = rng.normal(size=(1, 2))
        net.forward(x, training=False)
        dx = net.backward(g).reshape(-1)
        jac = numeric_jacobian(lambda v: net.forward(v, training=False), x.copy())
        assert np.abs(jac.T @ g[0] - dx).max() < 1e-6


class TestResidualIdentityPath:
    def test_jacobian_contains_identity_when_branch_zeroed(self):
        block = ResidualBlock(1, 1, stride=1, rng=np.random.default_rng(0))
        for _, value, _ in block.param_items():
            if value.ndim > 1:
                value[...] = 0.0
        x = np.abs(rng.normal(size=(1, 1, 3, 3))) + 0.1  # keep the relu active
        jac = numeric_jacobian(lambda v: block.forward(v, training=True), x.copy())
        # branch output is identically zero, so the block is the identity map
        assert np.abs(jac - np.eye(9)).max() < 1e-6
