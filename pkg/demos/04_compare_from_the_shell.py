"""
The whole pipeline through the command line
===========================================

Each step is one ``blurscope`` subcommand; here they are called in-process
through ``blurscope.cli.main`` with the same arguments a shell would pass.
"""

import tempfile
from pathlib import Path

from blurscope.cli import main

work = Path(tempfile.mkdtemp())
labels = work / "data" / "labels.csv"


def run(*args):
    print("$ blurscope", " ".join(str(a) for a in args))
    code = main([str(a) for a in args])
    print("exit", code)
    assert code == 0


run("synth", "--seed", 7, "--count", 200, "--sigma", "2:4", "--out", work / "data")
run("calibrate", "--labels", labels, "--out", work / "threshold.json")
run("train", "--labels", labels, "--out", work / "model.bin", "--epochs", 30, "--seed", 7)
run("classify", "--method", "laplacian", "--model", work / "threshold.json",
    work / "data" / "sharp_0000.pgm", work / "data" / "blurry_0000.pgm")
run("compare", "--threshold", work / "threshold.json", "--model", work / "model.bin", "--labels", labels)
