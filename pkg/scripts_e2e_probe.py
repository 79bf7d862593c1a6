"""Calibration probe for the end-to-end simulated counting gate."""

import time
from dataclasses import replace

import numpy as np

import linkcount as lc
from linkcount import nn
from linkcount.cli import evaluate_model, simulate_eval_windows

TRAIN_SEED = 424242
EVAL_SEED = 777_000

t0 = time.time()
scen = lc.SimScenario(agents=1, duration=6000.0, rng_seed=TRAIN_SEED)
times, paths = lc.simulate_walk(scen)
log = lc.crossings(times, paths[0], scen.los)
originals = lc.split_into_windows(log, 6000.0, 5.0, 1.0)
plan = lc.SynthesisPlan(m=len(originals), max_count=5, w=300, rng_seed=TRAIN_SEED)
dataset = lc.build_dataset(originals, plan)
print(f"dataset: {len(dataset)} samples, built in {time.time()-t0:.1f}s", flush=True)

t0 = time.time()
hyper = nn.TrainHyper(learning_rate=0.01, momentum=0.9, epochs=120, batch_size=15,
                      rng_seed=TRAIN_SEED)
model, losses = lc.train(dataset, 32, hyper)
print(f"train: {time.time()-t0:.1f}s loss {losses[0]:.4f} -> {losses[-1]:.4f}", flush=True)

# training accuracy
preds = nn.predict_batch(model, [s.sequence for s in dataset.samples])
acc = np.mean([p == s.label for p, s in zip(preds, dataset.samples)])
print(f"train acc: {acc:.3f}", flush=True)

t0 = time.time()
eval_scen = replace(scen, duration=300.0)
windows = simulate_eval_windows(eval_scen, range(6), 20, EVAL_SEED, 1.0)
det = lc.DetectorParams(tau=5.0, w=300)
report = evaluate_model(model, det, windows)
print(f"eval: {time.time()-t0:.1f}s", flush=True)

by_class = {}
for real, est, err in report.rows:
    by_class.setdefault(real, []).append(est)
for real in sorted(by_class):
    print(f"class {real}: {by_class[real]}")
within2 = np.mean([abs(err) <= 2 for _, _, err in report.rows])
print(f"epsilon={report.epsilon} exact={report.exact_accuracy:.3f} within2={within2:.3f}")
