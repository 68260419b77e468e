import json
import threading
import urllib.error
import urllib.request

import numpy as np
import pytest

from vbackit.bundle import ModelBundle
from vbackit.features import fit_preprocess
from vbackit.linmod import fit_logistic
from vbackit.pipeline import TrainSettings, train_family
from vbackit.serve import ModelServer, PredictionService

from conftest import make_cesarean_record, make_record


def _intercept_only_bundle(beta0=1.0986122886681098):
    """Logistic bundle whose prediction is sigmoid(b0 + coefs . x)."""
    records = [make_record(prepreg_bmi=float(b), tobacco_use=t)
               for b, t in [(18, "no"), (25, "yes"), (32, "no"), (40, "yes")]]
    records += [make_cesarean_record(prepreg_bmi=float(b), tobacco_use=t)
                for b, t in [(20, "no"), (28, "yes"), (36, "no"), (44, "yes")]]
    labels = np.array([1, 1, 1, 1, 0, 0, 0, 0])
    prep = fit_preprocess(records, ["prepreg_bmi", "tobacco_use"], drop_first=True,
                          prune_threshold=None)
    X = prep.transform_records(records)
    model = fit_logistic(X, labels, ridge_lambda=0.5)
    model.intercept = beta0
    model.coefficients = np.zeros_like(model.coefficients)
    return ModelBundle(family="logistic", preprocess=prep, model=model,
                       threshold=0.5, metadata={"config_hash": "test"})


def _negative_coefficient_bundle():
    regions = ["midwest", "northeast", "south", "west"]
    records = [make_record(prepreg_bmi=float(b), census_region=r)
               for b, r in zip((18, 25, 32, 40), regions)]
    records += [make_cesarean_record(prepreg_bmi=float(b), census_region=r)
                for b, r in zip((20, 28, 36, 44), regions)]
    labels = np.array([1, 1, 1, 1, 0, 0, 0, 0])
    prep = fit_preprocess(records, ["prepreg_bmi", "census_region"], drop_first=True,
                          prune_threshold=None)
    X = prep.transform_records(records)
    model = fit_logistic(X, labels, ridge_lambda=0.5)
    model.intercept = 0.3
    model.coefficients = np.array([-1.2] + [0.0] * (model.coefficients.size - 1))
    return ModelBundle(family="logistic", preprocess=prep, model=model,
                       threshold=0.5, metadata={"config_hash": "test"})


@pytest.fixture(scope="module")
def server():
    srv = ModelServer(_intercept_only_bundle(), port=0)
    srv.start()
    yield srv
    srv.stop()


def request_json(server, path, payload=None, method=None):
    url = f"http://127.0.0.1:{server.port}{path}"
    data = json.dumps(payload).encode() if payload is not None else None
    req = urllib.request.Request(url, data=data, method=method,
                                 headers={"Content-Type": "application/json"})
    with urllib.request.urlopen(req, timeout=10) as resp:
        return resp.status, json.loads(resp.read())


def request_error(server, path, payload):
    try:
        request_json(server, path, payload)
    except urllib.error.HTTPError as exc:
        return exc.code, json.loads(exc.read())
    raise AssertionError("expected an HTTP error")


def valid_fields(server):
    _, meta = request_json(server, "/metadata")
    fields = {}
    for f in meta["fields"]:
        if f["kind"] == "numeric":
            fields[f["name"]] = (f["min"] + f["max"]) / 2
        else:
            fields[f["name"]] = f["levels"][0]
    return fields


class TestHealthAndMetadata:
    def test_healthz(self, server):
        status, body = request_json(server, "/healthz")
        assert status == 200
        assert body == {"status": "ok"}

    def test_metadata_matches_bundle(self, server):
        status, meta = request_json(server, "/metadata")
        assert status == 200
        assert meta["family"] == "logistic"
        assert meta["threshold"] == 0.5
        assert [f["name"] for f in meta["fields"]] == ["prepreg_bmi", "tobacco_use"]
        categorical = meta["fields"][1]
        assert categorical["levels"] == ["no", "yes"]

    def test_metadata_stable_across_calls(self, server):
        _, a = request_json(server, "/metadata")
        _, b = request_json(server, "/metadata")
        assert a == b


class TestPredict:
    def test_intercept_only_returns_075(self, server):
        status, body = request_json(server, "/predict", {"fields": valid_fields(server)})
        assert status == 200
        assert body["probability"] == pytest.approx(0.75, abs=1e-9)
        assert body["predicted_class"] == 1
        assert body["model"]["family"] == "logistic"

    def test_prediction_invariant_to_inputs_for_intercept_only(self, server):
        fields = valid_fields(server)
        fields["prepreg_bmi"] = 19.0
        _, a = request_json(server, "/predict", {"fields": fields})
        fields["prepreg_bmi"] = 43.0
        _, b = request_json(server, "/predict", {"fields": fields})
        assert a["probability"] == b["probability"]

    def test_missing_field_400_names_it(self, server):
        fields = valid_fields(server)
        del fields["prepreg_bmi"]
        code, body = request_error(server, "/predict", {"fields": fields})
        assert code == 400
        assert body["error"] == "missing_field"
        assert body["field"] == "prepreg_bmi"

    def test_unknown_field_400(self, server):
        fields = valid_fields(server)
        fields["bishop_score"] = 7
        code, body = request_error(server, "/predict", {"fields": fields})
        assert code == 400
        assert body["error"] == "unknown_field"
        assert body["field"] == "bishop_score"

    def test_unseen_level_422_with_allowed_set(self, server):
        fields = valid_fields(server)
        fields["tobacco_use"] = "socially"
        code, body = request_error(server, "/predict", {"fields": fields})
        assert code == 422
        assert body["error"] == "unseen_level"
        assert body["level"] == "socially"
        assert body["allowed"] == ["no", "yes"]

    def test_out_of_range_numeric_400(self, server):
        fields = valid_fields(server)
        fields["prepreg_bmi"] = 500.0
        code, body = request_error(server, "/predict", {"fields": fields})
        assert code == 400
        assert body["error"] == "out_of_range"

    def test_probability_strictly_inside_unit_interval(self, server):
        _, body = request_json(server, "/predict", {"fields": valid_fields(server)})
        assert 0.0 < body["probability"] < 1.0

    def test_malformed_json_400(self, server):
        url = f"http://127.0.0.1:{server.port}/predict"
        req = urllib.request.Request(url, data=b"{nope", headers={"Content-Type": "application/json"})
        try:
            urllib.request.urlopen(req, timeout=10)
            raise AssertionError("expected 400")
        except urllib.error.HTTPError as exc:
            assert exc.code == 400


@pytest.fixture(scope="module")
def neg_server():
    srv = ModelServer(_negative_coefficient_bundle(), port=0)
    srv.start()
    yield srv
    srv.stop()


class TestWhatIf:
    def test_negative_coefficient_sweep_monotone_decreasing(self, neg_server):
        fields = valid_fields(neg_server)
        _, body = request_json(
            neg_server, "/whatif",
            {"fields": fields, "field": "prepreg_bmi", "grid": [20, 25, 30, 35, 40]},
        )
        probs = [r["probability"] for r in body["results"]]
        assert all(a > b for a, b in zip(probs, probs[1:]))

    def test_grid_of_length_one_equals_predict(self, neg_server):
        fields = valid_fields(neg_server)
        fields["prepreg_bmi"] = 33.0
        _, predict_body = request_json(neg_server, "/predict", {"fields": fields})
        _, sweep_body = request_json(
            neg_server, "/whatif",
            {"fields": fields, "field": "prepreg_bmi", "grid": [33.0]},
        )
        assert sweep_body["results"][0]["probability"] == predict_body["probability"]

    def test_categorical_sweep_one_result_per_level(self, neg_server):
        fields = valid_fields(neg_server)
        _, meta = request_json(neg_server, "/metadata")
        levels = next(f["levels"] for f in meta["fields"] if f["name"] == "census_region")
        _, body = request_json(
            neg_server, "/whatif",
            {"fields": fields, "field": "census_region", "grid": levels},
        )
        assert len(body["results"]) == len(levels)
        assert [r["value"] for r in body["results"]] == levels

    def test_identical_grid_points_identical_probabilities(self, neg_server):
        fields = valid_fields(neg_server)
        _, body = request_json(
            neg_server, "/whatif",
            {"fields": fields, "field": "prepreg_bmi", "grid": [30.0, 30.0, 30.0]},
        )
        probs = {r["probability"] for r in body["results"]}
        assert len(probs) == 1

    def test_unknown_sweep_field_400(self, neg_server):
        code, body = request_error(
            neg_server, "/whatif",
            {"fields": valid_fields(neg_server), "field": "nope", "grid": [1]},
        )
        assert code == 400

    def test_unseen_level_in_grid_422(self, neg_server):
        code, body = request_error(
            neg_server, "/whatif",
            {"fields": valid_fields(neg_server), "field": "census_region",
             "grid": ["atlantis"]},
        )
        assert code == 422


class TestServingEqualsOffline:
    def test_served_probability_equals_predict_records(self, small_synth_cohort):
        cohort = small_synth_cohort.to_labeled_cohort()
        result = train_family(cohort, TrainSettings(family="logistic", seed=2))
        bundle = result.bundle
        srv = ModelServer(bundle, port=0)
        srv.start()
        try:
            record = cohort.records[17]
            fields = {}
            for name in bundle.predictor_fields():
                value = record.get(name)
                fields[name] = value if isinstance(value, str) else float(value)
            _, body = request_json(srv, "/predict", {"fields": fields})
            offline = float(bundle.predict_records([record])[0])
            assert body["probability"] == offline  # bit-for-bit
        finally:
            srv.stop()


class TestConcurrency:
    def test_parallel_requests_consistent(self, server):
        fields = valid_fields(server)
        results = []
        errors = []

        def hit():
            try:
                _, body = request_json(server, "/predict", {"fields": fields})
                results.append(body["probability"])
            except Exception as exc:  # pragma: no cover
                errors.append(exc)

        threads = [threading.Thread(target=hit) for _ in range(16)]
        for t in threads:
            t.start()
        for t in threads:
            t.join()
        assert not errors
        assert len(set(results)) == 1


class TestStaticServing:
    def test_static_files_served_from_root(self, tmp_path):
        (tmp_path / "index.html").write_text("<html><body>counsel</body></html>")
        srv = ModelServer(_intercept_only_bundle(), port=0, static_dir=str(tmp_path))
        srv.start()
        try:
            url = f"http://127.0.0.1:{srv.port}/"
            with urllib.request.urlopen(url, timeout=10) as resp:
                assert resp.status == 200
                assert b"counsel" in resp.read()
        finally:
            srv.stop()

    def test_path_traversal_blocked(self, tmp_path):
        (tmp_path / "index.html").write_text("ok")
        srv = ModelServer(_intercept_only_bundle(), port=0, static_dir=str(tmp_path))
        srv.start()
        try:
            try:
                urllib.request.urlopen(
                    f"http://127.0.0.1:{srv.port}/../etc/passwd", timeout=10
                )
                raise AssertionError("expected 404")
            except urllib.error.HTTPError as exc:
                assert exc.code == 404
        finally:
            srv.stop()


def test_prediction_service_direct():
    service = PredictionService(_intercept_only_bundle())
    fields = {"prepreg_bmi": 30.0, "tobacco_use": "no"}
    result = service.predict(fields)
    assert result["probability"] == pytest.approx(0.75, abs=1e-9)
    sweep = service.whatif(fields, "tobacco_use", ["no", "yes"])
    assert len(sweep["results"]) == 2
