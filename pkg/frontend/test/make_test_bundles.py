"""Build the two logistic bundles the UI end-to-end tests serve.

  intercept.vbmb  intercept-only model, b0 = ln(3): every prediction 0.75
  negcoef.vbmb    negative standardized coefficient on prepreg_bmi

Usage: python3 make_test_bundles.py <output-dir>
"""

import sys
from pathlib import Path

import numpy as np

from vbackit.bundle import ModelBundle, save_bundle
from vbackit.features import fit_preprocess
from vbackit.linmod import fit_logistic
from vbackit.records import DeliveryRecord


def records():
    out = []
    for bmi, age, tobacco, region in [
        (18.0, 22.0, "no", "midwest"),
        (25.0, 28.0, "yes", "northeast"),
        (32.0, 33.0, "no", "south"),
        (40.0, 38.0, "yes", "west"),
        (22.0, 25.0, "no", "south"),
        (28.0, 30.0, "yes", "midwest"),
        (35.0, 35.0, "no", "west"),
        (45.0, 41.0, "yes", "northeast"),
    ]:
        out.append(DeliveryRecord(prepreg_bmi=bmi, maternal_age=age,
                                  tobacco_use=tobacco, census_region=region))
    return out


def build(intercept, coefficients):
    data = records()
    labels = np.array([1, 1, 1, 1, 0, 0, 0, 0])
    prep = fit_preprocess(
        data, ["prepreg_bmi", "maternal_age", "tobacco_use", "census_region"],
        drop_first=True, prune_threshold=None,
    )
    X = prep.transform_records(data)
    model = fit_logistic(X, labels, ridge_lambda=0.5)
    model.intercept = intercept
    beta = np.zeros_like(model.coefficients)
    for idx, value in coefficients.items():
        beta[idx] = value
    model.coefficients = beta
    return ModelBundle(family="logistic", preprocess=prep, model=model,
                       threshold=0.5, metadata={"config_hash": "ui-e2e"})


def main():
    out = Path(sys.argv[1])
    out.mkdir(parents=True, exist_ok=True)
    save_bundle(build(float(np.log(3.0)), {}), str(out / "intercept.vbmb"))
    # column 0 is standardized prepreg_bmi (predictor order, numeric first)
    save_bundle(build(0.4, {0: -1.5}), str(out / "negcoef.vbmb"))
    print(f"wrote {out}/intercept.vbmb and {out}/negcoef.vbmb")


if __name__ == "__main__":
    main()
