"""
Training the small CNN
======================

Two conv/pool stages and a dense head trained with plain SGD on the same
synthetic corpus. Takes about half a minute on one core.
"""

import tempfile
from pathlib import Path

from blurscope import cnn
from blurscope.evaluation import Method, cnn_classifier, evaluate, format_report, split_dataset
from blurscope.imageio import load_image, synth_dataset, synth_texture

work = Path(tempfile.mkdtemp())
dataset = synth_dataset(seed=7, count=200, sigma_min=2, sigma_max=4, out_dir=work / "corpus")
split = split_dataset(dataset, 0.8, seed=7)

for layer, shape in zip(cnn.default_architecture(), cnn.layer_shapes(cnn.default_architecture(), 64)[1:]):
    print(f"{layer.kind.name:<10} -> {shape}")

config = cnn.TrainConfig(epochs=30, learning_rate=0.05, batch_size=16, seed=7)


def progress(stats):
    if stats.epoch % 5 == 0 or stats.epoch == 1:
        print(f"epoch {stats.epoch:2d}  loss {stats.mean_loss:.4f}  train acc {stats.train_accuracy:.3f}")


model = cnn.train(split.train, config, on_epoch=progress)
print(model.parameter_count(), "parameters")

report = evaluate(cnn_classifier(model), split.validation, Method.CNN, "synthetic-20%")
print(format_report(report))

# the model file reloads bit for bit
cnn.save_model(model, work / "model.bin")
assert cnn.load_model(work / "model.bin") == model

# p >= 0.5 means blurry
p, label = cnn.predict(model, synth_texture(seed=4242))
print(f"fresh texture: p(blurry) = {p:.3f} -> {label.value}")
p, label = cnn.predict(model, load_image(split.validation[0].path))
print(f"{split.validation[0].path.name}: p(blurry) = {p:.3f} -> {label.value}")
