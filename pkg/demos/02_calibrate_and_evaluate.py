"""
Calibrating a threshold and measuring it
========================================

Generate a labelled corpus, fit the blurry/sharp threshold on 80% of it and
report sensitivity, specificity and accuracy on the rest.
"""

import tempfile
from pathlib import Path

from blurscope.evaluation import Method, evaluate, format_report, laplacian_classifier, split_dataset
from blurscope.imageio import Label, synth_dataset
from blurscope.laplacian import calibrate, calibrate_dataset, score_batch

out = Path(tempfile.mkdtemp()) / "corpus"
dataset = synth_dataset(seed=7, count=200, sigma_min=2, sigma_max=4, out_dir=out)
print(len(dataset), "images,", dataset.count(Label.BLURRY), "blurry")

split = split_dataset(dataset, train_fraction=0.8, seed=7)

# the threshold sits between the two class means, weighted by class size
model = calibrate_dataset(split.train)
print(f"blurry centre {model.centre_blurry:.4f}")
print(f"sharp centre  {model.centre_sharp:.4f}")
print(f"threshold     {model.threshold:.4f}")

# the same fit by hand from raw scores
scored = score_batch(split.train, workers=4)
blurry = [v for s, v in scored if s.label is Label.BLURRY]
sharp = [v for s, v in scored if s.label is Label.SHARP]
assert calibrate(blurry, sharp) == model

# blurry is the positive class
report = evaluate(laplacian_classifier(model), split.validation, Method.LAPLACIAN, "synthetic-20%")
print(format_report(report))
print(report.to_json())
