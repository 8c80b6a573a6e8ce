"""
Optimizing a fitting for a noisy environment
============================================

Starts from NAL-R for the moderate-to-severe audiogram and runs Adam on the
difference between the aided impaired output and the normal-hearing
reference, once on clean speech (G) and once on speech in traffic noise
(Cn). Both are then scored with FWSNR on held-out noisy utterances.

The defaults finish in a few minutes; raise --epochs and --train for a
closer look.
"""

import argparse
import time

from hafit.evaluation import evaluate_fitting
from hafit.optimizer import FittingProblem, TrainConfig, train
from hafit.prescriptions import nal_r, standard_audiogram
from hafit.synthetic import make_utterances

parser = argparse.ArgumentParser()
parser.add_argument("--audiogram", default="N4")
parser.add_argument("--noise", default="traffic")
parser.add_argument("--train", type=int, default=8)
parser.add_argument("--test", type=int, default=10)
parser.add_argument("--epochs", type=int, default=10)
parser.add_argument("--lr", type=float, default=0.1)
args = parser.parse_args()

a = standard_audiogram(args.audiogram)
problem = FittingProblem(a)
train_set = make_utterances(args.train, args.noise, 5.0, 1.0, seed=11)
test_set = make_utterances(args.test, args.noise, 5.0, 1.5, seed=12)
cfg = TrainConfig(batch_size=4, epochs=args.epochs, learning_rate=args.lr, train_seconds=1.0)

# %%
# Train on clean and on noisy inputs from the same prescription
fittings = {"N": nal_r(a)}
for source in ("clean", "noisy"):
    t0 = time.perf_counter()
    run = train(train_set, a, cfg, "none", source, problem=problem)
    fittings[run.label] = run.final
    print(f"{run.label}: loss {run.initial_loss:.2f} -> {run.final_loss:.2f} "
          f"in {time.perf_counter() - t0:.0f} s")

# %%
# Gains relative to the prescription, then held-out scores
print("\ngain change vs NAL-R (dB) at 250 500 1k 2k 4k 6k Hz")
for label, f in fittings.items():
    print(f"  {label:3s}" + "".join(f"{d:+7.2f}" for d in f.gains - fittings["N"].gains))

print(f"\nFWSNR on {len(test_set)} noisy test utterances")
for label, f in fittings.items():
    row = evaluate_fitting(test_set, f, a, problem=problem)
    print(f"  {label:3s} {row.fwsnr_mean:7.3f} dB   spectral distance {row.lspec_mean:6.2f} dB")
