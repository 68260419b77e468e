import numpy as np
import pytest

from vbackit.bundle import (
    BundleChecksumError,
    BundleError,
    BundleVersionError,
    ModelBundle,
    field_domains,
    load_bundle,
    save_bundle,
)
from vbackit.pipeline import TrainSettings, train_family
from vbackit import gbt as gbt_mod
from vbackit import mlp as mlp_mod


@pytest.fixture(scope="module")
def trained(small_synth_cohort):
    cohort = small_synth_cohort.to_labeled_cohort()
    results = {}
    results["logistic"] = train_family(cohort, TrainSettings(family="logistic", seed=5))
    results["mlp"] = train_family(
        cohort,
        TrainSettings(
            family="mlp", seed=5,
            mlp=mlp_mod.MlpConfig(hidden_sizes=(16, 8, 4), dropout_rates=(0.2, 0.1, 0.0),
                                  learning_rate=1e-3, max_epochs=4, batch_size=128),
        ),
    )
    results["gbt"] = train_family(
        cohort,
        TrainSettings(family="gbt", seed=5,
                      gbt=gbt_mod.GbtConfig(rounds=25, learning_rate=0.1)),
    )
    return cohort, results


class TestRoundTrip:
    @pytest.mark.parametrize("family", ["logistic", "mlp", "gbt"])
    def test_predictions_identical_after_reload(self, trained, tmp_path, family):
        cohort, results = trained
        bundle = results[family].bundle
        path = tmp_path / f"{family}.vbmb"
        save_bundle(bundle, str(path))
        loaded = load_bundle(str(path))
        probe = list(cohort.records)[:97]
        before = bundle.predict_records(probe)
        after = loaded.predict_records(probe)
        assert np.array_equal(before, after)  # bit-exact

    @pytest.mark.parametrize("family", ["logistic", "mlp", "gbt"])
    def test_single_load_path_for_all_families(self, trained, tmp_path, family):
        _, results = trained
        path = tmp_path / f"{family}.vbmb"
        save_bundle(results[family].bundle, str(path))
        loaded = load_bundle(str(path))
        assert loaded.family == family
        assert 0.0 < loaded.threshold < 1.0
        assert loaded.metadata["eval_summary"]["roc_auc"] == pytest.approx(
            results[family].report.roc_auc
        )

    def test_save_is_byte_deterministic(self, trained, tmp_path):
        _, results = trained
        a = tmp_path / "a.vbmb"
        b = tmp_path / "b.vbmb"
        save_bundle(results["gbt"].bundle, str(a))
        save_bundle(results["gbt"].bundle, str(b))
        assert a.read_bytes() == b.read_bytes()


class TestCorruption:
    def test_truncated_file_fails_checksum(self, trained, tmp_path):
        _, results = trained
        path = tmp_path / "m.vbmb"
        save_bundle(results["logistic"].bundle, str(path))
        blob = path.read_bytes()
        path.write_bytes(blob[:-20])
        with pytest.raises((BundleChecksumError, BundleError)):
            load_bundle(str(path))

    def test_flipped_byte_fails_checksum(self, trained, tmp_path):
        _, results = trained
        path = tmp_path / "m.vbmb"
        save_bundle(results["mlp"].bundle, str(path))
        blob = bytearray(path.read_bytes())
        blob[len(blob) // 2] ^= 0x01
        path.write_bytes(bytes(blob))
        with pytest.raises(BundleChecksumError):
            load_bundle(str(path))

    def test_version_mismatch(self, trained, tmp_path):
        import struct

        _, results = trained
        path = tmp_path / "m.vbmb"
        save_bundle(results["logistic"].bundle, str(path))
        blob = bytearray(path.read_bytes())
        blob[4:8] = struct.pack("<I", 99)
        path.write_bytes(bytes(blob))
        with pytest.raises(BundleVersionError):
            load_bundle(str(path))

    def test_wrong_magic(self, tmp_path):
        path = tmp_path / "m.vbmb"
        path.write_bytes(b"NOPE" + b"\x00" * 40)
        with pytest.raises(BundleError):
            load_bundle(str(path))

    def test_missing_file(self):
        with pytest.raises(BundleError):
            load_bundle("/nonexistent/bundle.vbmb")


class TestValidation:
    def test_threshold_range_enforced(self, trained):
        _, results = trained
        bundle = results["logistic"].bundle
        with pytest.raises(BundleError):
            ModelBundle(
                family=bundle.family, preprocess=bundle.preprocess,
                model=bundle.model, threshold=1.5, metadata={},
            )

    def test_unknown_family_rejected(self, trained):
        _, results = trained
        bundle = results["logistic"].bundle
        with pytest.raises(BundleError):
            ModelBundle(
                family="forest", preprocess=bundle.preprocess,
                model=bundle.model, threshold=0.5, metadata={},
            )

    def test_field_domains_cover_predictors(self, trained):
        _, results = trained
        bundle = results["gbt"].bundle
        domains = field_domains(bundle)
        assert [d["name"] for d in domains] == bundle.predictor_fields()
        for d in domains:
            if d["kind"] == "numeric":
                assert d["min"] < d["max"]
            else:
                assert len(d["levels"]) >= 1

    def test_preprocessing_chain_validated_on_load(self, trained, tmp_path):
        # corrupt the prune mask length inside a re-saved bundle
        import struct
        import zlib

        _, results = trained
        path = tmp_path / "m.vbmb"
        save_bundle(results["logistic"].bundle, str(path))
        blob = path.read_bytes()
        payload = bytearray(blob[8:-4])
        # shrink the prune_mask section: locate its name then cut one byte of
        # its array payload and fix the length header
        marker = b"prune_mask"
        idx = payload.find(marker)
        kind_off = idx + len(marker)
        (length,) = struct.unpack("<Q", payload[kind_off + 1 : kind_off + 9])
        payload[kind_off + 1 : kind_off + 9] = struct.pack("<Q", length - 1)
        del payload[kind_off + 9 + length - 1]
        fixed = blob[:8] + bytes(payload) + struct.pack("<I", zlib.crc32(bytes(payload)))
        path.write_bytes(fixed)
        with pytest.raises(BundleError):
            load_bundle(str(path))
