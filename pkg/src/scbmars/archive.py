"""JSON model archives.

One file format for every estimator, versioned. Floats go through ``repr``
(the json module's default), which round-trips IEEE doubles exactly, so a
saved model reproduces its predictions bit for bit. Unknown formats raise
:class:`ArchiveError`; a known format with a different version raises
:class:`ArchiveVersionError`.
"""

from __future__ import annotations

import json

import numpy as np

from .baselines import BaggedCausalMars, CausalMars
from .basis import BasisFunction, HingeTerm
from .estimators import ScbmRegressor, TransformedOutcomeBaggingMars
from .exceptions import ArchiveError, ArchiveVersionError
from .propensity import ConstantPropensity, ForestPropensity, LogisticPropensity

__all__ = ["FORMAT_NAME", "FORMAT_VERSION", "save_model", "load_model",
           "model_to_blob", "model_from_blob"]

FORMAT_NAME = "scbmars-model"
FORMAT_VERSION = 1


def _basis_to_json(functions) -> list:
    return [
        [[t.variable_index, t.sign, t.knot] for t in f.terms] for f in functions
    ]


def _basis_from_json(items) -> list[BasisFunction]:
    out = []
    for terms in items:
        out.append(
            BasisFunction(
                tuple(HingeTerm(int(v), int(s), float(c)) for v, s, c in terms)
            )
        )
    return out


def _propensity_to_json(model):
    if model is None:
        return None
    if isinstance(model, ConstantPropensity):
        return {"kind": model.kind, "value": model.value}
    if isinstance(model, LogisticPropensity):
        return {
            "kind": model.kind,
            "intercept": model.intercept_,
            "coef": list(map(float, model.coef_)),
        }
    if isinstance(model, ForestPropensity):
        return {
            "kind": model.kind,
            "n_trees": model.n_trees,
            "max_depth": model.max_depth,
            "min_leaf": model.min_leaf,
            "trees": [
                {
                    "feature": [int(v) for v in tr["feature"]],
                    "threshold": [float(v) for v in tr["threshold"]],
                    "left": [int(v) for v in tr["left"]],
                    "right": [int(v) for v in tr["right"]],
                    "prob1": [float(v) for v in tr["prob1"]],
                }
                for tr in model.trees_
            ],
        }
    raise ArchiveError(f"cannot archive propensity model {type(model).__name__}")


def _propensity_from_json(blob):
    if blob is None:
        return None
    kind = blob.get("kind")
    if kind == "known-constant":
        return ConstantPropensity(float(blob["value"]))
    if kind == "logistic":
        model = LogisticPropensity()
        model.intercept_ = float(blob["intercept"])
        model.coef_ = np.asarray(blob["coef"], dtype=float)
        return model
    if kind == "random-forest":
        model = ForestPropensity(
            n_trees=int(blob["n_trees"]),
            max_depth=int(blob["max_depth"]),
            min_leaf=int(blob["min_leaf"]),
        )
        model.trees_ = [
            {
                "feature": np.asarray(tr["feature"], dtype=int),
                "threshold": np.asarray(tr["threshold"], dtype=float),
                "left": np.asarray(tr["left"], dtype=int),
                "right": np.asarray(tr["right"], dtype=int),
                "prob1": np.asarray(tr["prob1"], dtype=float),
            }
            for tr in blob["trees"]
        ]
        return model
    raise ArchiveError(f"unknown propensity kind {kind!r}")


def model_to_blob(model) -> dict:
    known = (ScbmRegressor, TransformedOutcomeBaggingMars, CausalMars, BaggedCausalMars)
    if not isinstance(model, known):
        raise ArchiveError(f"cannot archive model of type {type(model).__name__}")
    if not hasattr(model, "n_features_in_"):
        raise ArchiveError(
            f"cannot archive {type(model).__name__}: model is not fitted"
        )
    blob = {
        "format": FORMAT_NAME,
        "version": FORMAT_VERSION,
        "n_features": int(model.n_features_in_),
    }
    if isinstance(model, ScbmRegressor):
        blob.update(
            variant="scbm",
            basis=_basis_to_json(model.basis_),
            coef_pairs=[[float(a), float(b)] for a, b in model.coef_pairs_],
            lam=float(model.lambda_),
            propensity=_propensity_to_json(model.propensity_model_),
            clip_epsilon=float(model.clip_epsilon),
        )
    elif isinstance(model, TransformedOutcomeBaggingMars):
        blob.update(
            variant="prop1" if model.ridge_refit else "prop0",
            basis=_basis_to_json(model.basis_),
            coef=[float(v) for v in model.coef_],
            propensity=_propensity_to_json(model.propensity_model_),
            clip_epsilon=float(model.clip_epsilon),
        )
        if model.ridge_refit:
            blob["alpha"] = float(model.alpha_)
    elif isinstance(model, CausalMars):
        blob.update(
            variant="cm",
            basis=_basis_to_json(model.basis_),
            coef_pairs=[[float(a), float(b)] for a, b in model.coef_pairs_],
        )
    elif isinstance(model, BaggedCausalMars):
        blob.update(
            variant="bcm",
            n_strata=int(model.n_strata),
            stratum_edges=[float(v) for v in model.stratum_edges_],
            bin_map=[int(v) for v in model.bin_map_],
            propensity=_propensity_to_json(model.propensity_model_),
            replicates=[
                {
                    "basis": _basis_to_json(rep["basis"]),
                    "coef": np.asarray(rep["coef"]).tolist(),
                    "map": [int(v) for v in rep["map"]],
                }
                for rep in model.replicates_
            ],
        )
    else:
        raise ArchiveError(f"cannot archive model of type {type(model).__name__}")
    return blob


def model_from_blob(blob: dict):
    if not isinstance(blob, dict) or blob.get("format") != FORMAT_NAME:
        raise ArchiveError("not a model archive")
    if blob.get("version") != FORMAT_VERSION:
        raise ArchiveVersionError(
            f"archive version {blob.get('version')!r} is not supported "
            f"(expected {FORMAT_VERSION})"
        )
    try:
        variant = blob["variant"]
        n_features = int(blob["n_features"])
        if variant == "scbm":
            model = ScbmRegressor(clip_epsilon=float(blob["clip_epsilon"]))
            model.basis_ = _basis_from_json(blob["basis"])
            model.coef_pairs_ = np.asarray(blob["coef_pairs"], dtype=float)
            model.lambda_ = float(blob["lam"])
            model.propensity_model_ = _propensity_from_json(blob["propensity"])
        elif variant in ("prop0", "prop1"):
            model = TransformedOutcomeBaggingMars(
                ridge_refit=(variant == "prop1"),
                clip_epsilon=float(blob["clip_epsilon"]),
            )
            model.basis_ = _basis_from_json(blob["basis"])
            model.coef_ = np.asarray(blob["coef"], dtype=float)
            model.propensity_model_ = _propensity_from_json(blob["propensity"])
            if variant == "prop1":
                model.alpha_ = float(blob["alpha"])
        elif variant == "cm":
            model = CausalMars()
            model.basis_ = _basis_from_json(blob["basis"])
            model.coef_pairs_ = np.asarray(blob["coef_pairs"], dtype=float)
        elif variant == "bcm":
            model = BaggedCausalMars(n_strata=int(blob["n_strata"]))
            model.stratum_edges_ = np.asarray(blob["stratum_edges"], dtype=float)
            model.bin_map_ = np.asarray(blob["bin_map"], dtype=int)
            model.propensity_model_ = _propensity_from_json(blob["propensity"])
            model.replicates_ = [
                {
                    "basis": _basis_from_json(rep["basis"]),
                    "coef": np.asarray(rep["coef"], dtype=float),
                    "map": np.asarray(rep["map"], dtype=int),
                }
                for rep in blob["replicates"]
            ]
        else:
            raise ArchiveError(f"unknown variant {variant!r}")
    except KeyError as exc:
        raise ArchiveError(f"archive is missing field {exc.args[0]!r}") from None
    model.n_features_in_ = n_features
    return model


def save_model(path, model) -> None:
    with open(path, "w") as fh:
        json.dump(model_to_blob(model), fh, indent=2, sort_keys=True)
        fh.write("\n")


def load_model(path):
    try:
        with open(path) as fh:
            blob = json.load(fh)
    except json.JSONDecodeError as exc:
        raise ArchiveError(f"{path}: not valid JSON ({exc})") from None
    return model_from_blob(blob)
