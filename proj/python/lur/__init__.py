"""Python access to the land-use regression toolkit.

Array functions take numpy arrays (rows are observations). Functions that
produce reports return parsed JSON dictionaries.
"""

import json

from . import _lur
from ._lur import (
    ComputeError,
    Model,
    ValidationError,
    benjamini_hochberg,
    fit_model,
    fit_yeo_johnson_lambda,
    morans_i,
    r2,
    rmse,
    segment_length_in_circle,
    synth,
    tree_shap,
    variance_inflation,
    wilcoxon_rank_sum,
    yeo_johnson,
)

__version__ = _lur.__version__


def nested_cv(x, names, y, cities, families, repeats=4, folds=10, inner_folds=10, seed=0, threads=0):
    """Nested cross-validation. `families` is a list of dicts such as
    {"family": "GBT", "grid": {"rounds": [100, 300], "max_depth": [2, 4]}}."""
    return json.loads(_lur.nested_cv(x, list(names), list(y), list(cities), list(families), repeats, folds,
                                     inner_folds, seed, threads))


def moran_test(values, xy, n_perm=999, seed=0, power=1.0, row_standardize=True):
    return json.loads(_lur.moran_test(list(values), xy, n_perm, seed, power, row_standardize))


def model_json(model):
    return json.loads(model.to_json())


def _command(fn):
    def run(config, threads=0, out_dir=None):
        return json.loads(fn(str(config), threads, out_dir))

    run.__name__ = fn.__name__
    run.__doc__ = f"Runs `lur {fn.__name__.replace('_', '-')}` and returns its manifest."
    return run


features = _command(_lur.features)
train = _command(_lur.train)
evaluate = _command(_lur.evaluate)
explain = _command(_lur.explain)
predict_grid = _command(_lur.predict_grid)
exposure = _command(_lur.exposure)
