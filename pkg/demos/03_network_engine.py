"""A tour of the neural-network engine.

Every layer carries its own hand-written backward pass; central finite
differences verify the analytic gradients, and a few SGD steps on a toy
problem show the loss falling under the step-decay schedule.
"""

import numpy as np

from availcast.nn import (
    LayerSpec,
    SchedulerConfig,
    build_network,
    cross_entropy_grad,
    cross_entropy_loss,
    grad_check,
    leaky_relu,
    one_hot,
    scheduler_rate,
    softmax,
)

rng = np.random.default_rng(0)

print("--- activations")
x = np.array([-2.0, -0.5, 0.0, 1.5])
print(f"  leaky_relu({x}, a=0.01) = {leaky_relu(x, 0.01)}")
print(f"  softmax([ln2, 0]) = {softmax(np.array([[np.log(2), 0.0]]))[0]}")

print("\n--- gradient check: conv -> pool -> residual -> softmax")
specs = [
    LayerSpec("conv2d", {"in_ch": 1, "out_ch": 2, "kh": 3, "padding": 1}),
    LayerSpec("leaky_relu", {"a": 0.05}),
    LayerSpec("max_pool", {"window": 2, "stride": 2}),
    LayerSpec("residual_block", {"in_ch": 2, "out_ch": 3, "stride": 2}),
    LayerSpec("global_avg_pool", {}),
    LayerSpec("dense", {"in_dim": 3, "out_dim": 4}),
    LayerSpec("softmax", {}),
]
net = build_network(specs, seed=3)
images = rng.normal(size=(3, 1, 8, 8))
targets = one_hot(rng.integers(0, 4, size=3), 4)
worst = grad_check(net, images, targets, loss="cross_entropy", h=1e-5)
print(f"  worst relative error vs central differences: {worst:.2e}")

print("\n--- training a small classifier with the step-decay schedule")
specs = [
    LayerSpec("dense", {"in_dim": 6, "out_dim": 16}),
    LayerSpec("leaky_relu", {"a": 0.01}),
    LayerSpec("batch_norm", {"num_features": 16}),
    LayerSpec("dense", {"in_dim": 16, "out_dim": 3}),
    LayerSpec("softmax", {}),
]
net = build_network(specs, seed=1)
labels = rng.integers(0, 3, size=96)
inputs = rng.normal(size=(96, 6)) + 2.0 * one_hot(labels, 3) @ rng.normal(size=(3, 6))
hot = one_hot(labels, 3)
schedule = SchedulerConfig(alpha0=0.1, delta=0.5, drop=10)
for epoch in range(30):
    lr = scheduler_rate(schedule, epoch)
    probs = net.forward(inputs, training=True)
    loss = cross_entropy_loss(probs, hot)
    net.backward(cross_entropy_grad(probs, hot))
    net.sgd_step(lr)
    if epoch % 5 == 0:
        print(f"  epoch {epoch:2d}: lr={lr:.4f} loss={loss:.4f}")
probs = net.forward(inputs, training=False)
accuracy = float(np.mean(probs.argmax(axis=1) == labels))
print(f"  final training accuracy: {accuracy:.2f}")
