"""Stage 2: how long does the service stay available?

Synthetic windows with class-specific shapes become field-image pairs;
the dual-pathway residual network (one pathway per field, fused by
concatenation) learns to classify the next three presence bits. Width
factor 1/8 shrinks every channel count so this runs in about a minute on
a CPU.
"""

import time

import numpy as np

from availcast import Stage2Config, evaluate_stage2, forecast, train_stage2
from availcast.nn import SchedulerConfig
from availcast.synthetic import make_gaf_pairs

pairs = make_gaf_pairs(100, window_len=32, horizon=3, seed=7)
counts = np.bincount([label.class_index for _, label in pairs], minlength=8)
print(f"--- 100 image pairs (32x32), class counts {counts.tolist()}")

cfg = Stage2Config(
    horizon=3, input_size=32, width_factor=0.125,
    scheduler=SchedulerConfig(alpha0=0.1, delta=0.5, drop=40),
    batch_size=16, max_epochs=120, val_fraction=0.0, seed=7, balance=True,
)
print(f"--- channel schedule {cfg.scaled_channels()} (full width: {list(cfg.channels)})")

start = time.time()
model = train_stage2(pairs, cfg)
print(f"--- trained {len(model.history)} epochs in {time.time() - start:.0f}s")
for rec in model.history[::20]:
    print(f"  epoch {rec.epoch:3d}: lr={rec.learning_rate:.4f} loss={rec.train_loss:.4f}")

result = evaluate_stage2(model, pairs)
print(f"--- exact-match error {result.error_rate:.3f},"
      f" per-step bit errors {np.round(result.per_bit_error, 3).tolist()}")

print("\n--- forecasts on three training pairs")
for pair, label in pairs[:3]:
    predicted, probs = forecast(model, pair)
    print(f"  true {label.bits} -> predicted {predicted.bits}"
          f" (p={probs[predicted.class_index]:.3f})")
