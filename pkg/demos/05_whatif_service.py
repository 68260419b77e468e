"""Train, bundle, serve, and interrogate the what-if counseling API.

Trains a small model, saves it as a single-file bundle, starts the HTTP
service on a free port, and walks the three JSON endpoints a counseling
front end uses: /metadata for the form schema, /predict for the headline
probability, /whatif for a BMI sweep.

Run:  python demos/05_whatif_service.py
"""

import json
import tempfile
import urllib.request
from pathlib import Path

from vbackit import synth
from vbackit.bundle import load_bundle, save_bundle
from vbackit.pipeline import TrainSettings, train_family
from vbackit.serve import ModelServer

print("1. Training a logistic model and writing the bundle...")
cohort = synth.generate_cohort(synth.default_config(n=20_000, seed=31))
result = train_family(cohort.to_labeled_cohort(), TrainSettings(family="logistic", seed=9))
bundle_path = Path(tempfile.mkdtemp(prefix="vbackit-demo-")) / "model.vbmb"
save_bundle(result.bundle, str(bundle_path))
print(f"   {bundle_path} ({bundle_path.stat().st_size:,} bytes,"
      f" test AUROC {result.report.roc_auc:.4f})")

print("\n2. Serving it...")
server = ModelServer(load_bundle(str(bundle_path)), port=0)
server.start()
base = f"http://127.0.0.1:{server.port}"
print(f"   {base}  (POST /predict, POST /whatif, GET /metadata, GET /healthz)")


def call(path, payload=None):
    data = json.dumps(payload).encode() if payload is not None else None
    request = urllib.request.Request(base + path, data=data,
                                     headers={"Content-Type": "application/json"})
    with urllib.request.urlopen(request) as response:
        return json.loads(response.read())


metadata = call("/metadata")
print(f"\n3. /metadata: {len(metadata['fields'])} form fields, e.g.")
for field in metadata["fields"][:3]:
    print(f"   {field}")

fields = {}
for field in metadata["fields"]:
    if field["kind"] == "numeric":
        fields[field["name"]] = round((field["min"] + field["max"]) / 2, 1)
    else:
        fields[field["name"]] = field["levels"][0]

prediction = call("/predict", {"fields": fields})
print(f"\n4. /predict for a mid-range patient: {prediction['probability']:.1%}"
      f" (class {prediction['predicted_class']} at threshold {prediction['threshold']:.2f})")

sweep = call("/whatif", {"fields": fields, "field": "prepreg_bmi",
                         "grid": [20, 24, 28, 32, 36, 40]})
print("\n5. /whatif sweep over pre-pregnancy BMI, all else held fixed:")
for point in sweep["results"]:
    bar = "#" * int(60 * point["probability"])
    print(f"   BMI {point['value']:>4} -> {point['probability']:.1%} {bar}")
print("   The planted BMI coefficient is negative, so the curve slopes down;")
print("   a clinician can read counterfactuals straight off this endpoint.")

server.stop()
print("\n6. Server stopped. The same bundle serves the browser UI in frontend/.")
