"""Finite-difference check of every layer on small float64 models.

A healthy backward pass agrees with central differences to about 1e-10.
The second half scales the gradient of one op on purpose and shows the
checker naming the layers that depend on it.
"""
from nes2net import core
from nes2net.gradcheck import THRESHOLD, check_inputs, model_grad_check
from nes2net.models import ModelConfig, build_model

cfg = ModelConfig(variant="nes2net_x", input_dim=16, s1=2, s2=2, se_ratio=4,
                  pool_bottleneck=2, dtype="f64")
model = build_model(cfg, seed=1)
x, labels = check_inputs(model, frames=6, seed=2)

errors = model_grad_check(model, x, labels)
for layer, err in errors.items():
    print(f"{layer:32s} {err:.2e}")
print(f"worst {max(errors.values()):.2e} (threshold {THRESHOLD:g})\n")

with core.inject_backward_fault("weighted_sum"):
    broken = model_grad_check(model, x, labels)
print("with a faulty weighted_sum backward, failing layers:")
for layer, err in broken.items():
    if err >= THRESHOLD:
        print(f"  {layer:30s} {err:.2e}")
