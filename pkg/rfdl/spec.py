MANIFESTSPEC = "<MANIFEST>"
MANIFEST_HELP = """Path to a dataset manifest.

A manifest is a JSON document of the form::

    {"features": "X.bin", "labels": "labels.txt", "classes": 3,
     "height": 8, "width": 8, "normalize": "none"}

'features' and 'labels' are resolved relative to the manifest file.
'height', 'width' and 'normalize' are optional; 'normalize' is one of
'none' or 'unit_l2'.

The features file holds an n x N matrix whose columns are samples. The labels
file holds one 0-based class index per line.
"""

MATRIXSPEC = "<MATRIX>"
MATRIX_HELP = """Path to a matrix file.

Files ending in '.csv' are parsed as comma separated rows of numbers (a single
non-numeric header line is skipped). Any other file is read as RAWF64: the
magic bytes 'HYBM', the row and column counts as little-endian 32 bit unsigned
integers, then the entries as little-endian 64 bit floats in row-major order.
"""

CONFIGSPEC = "<CONFIG>"
CONFIG_HELP = """Path to an experiment configuration.

Either an experiment config (JSON or YAML) or a 'metadata.json' written by a
previous run, in which case the recorded configuration is used again::

    {"dataset": "synth/dataset.json", "method": "djrfdl",
     "hyperparams": {"alpha": 0.1, "beta": 0.001, "gamma": 0.001},
     "split": {"train_per_class": 10, "n_splits": 10, "seed": 0},
     "sweep": {"kind": "corruption", "values": [0, 0.2, 0.4]},
     "pca_energy": null, "corruption_mode": "uniform", "out": "out"}

The dataset path is resolved relative to the configuration file. Command line
options override the file, which overrides the 'hyperparams' of the user
configuration, which override the method defaults.
"""

MODELSPEC = "<MODEL>"
MODEL_HELP = """Path to a model file written by 'rfdl train'.

The model's metadata sidecar is read from 'model.json' in the same directory.
"""

SPEC_HELP = {
    "manifest": MANIFEST_HELP,
    "matrix": MATRIX_HELP,
    "config": CONFIG_HELP,
    "model": MODEL_HELP,
}
