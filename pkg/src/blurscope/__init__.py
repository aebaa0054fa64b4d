"""Blur detection: variance-of-Laplacian thresholding and a from-scratch CNN.

Submodules:

``imageio``     netpbm I/O, resizing, Gaussian blur, synthetic corpus
``laplacian``   Laplacian response, variance score, threshold calibration
``cnn``         numpy convolutional network, training, model files
``evaluation``  dataset split, confusion matrix, sensitivity/specificity/accuracy
``cli``         the ``blurscope`` command
"""
from .errors import BlurscopeError
from .imageio import (
    GrayImage,
    Label,
    LabeledDataset,
    LabeledSample,
    gaussian_blur,
    load_image,
    read_labels_csv,
    save_pgm,
    synth_dataset,
    synth_texture,
)
from .laplacian import ThresholdModel, calibrate, classify_laplacian, laplacian_variance
from .cnn import CnnModel, TrainConfig, load_model, predict, save_model, train
from .evaluation import (
    ConfusionMatrix,
    MetricsReport,
    accuracy,
    build_confusion,
    evaluate,
    sensitivity,
    specificity,
    split_dataset,
)

__version__ = "0.1.0"
