import json

import pytest

from msmmt.dataset import (
    DEFAULT_CDE_MAPPING,
    ManifestEntry,
    UnmappedLabelError,
    cde_relabel,
    load_cde_mapping,
    load_manifest,
    save_manifest,
)


class TestManifest:
    def test_round_trip(self, tmp_path):
        entries = [
            ManifestEntry("a.msmt", "s01", 0, "synthetic", 0, 5, 11),
            ManifestEntry("b.msmt", "s02", 2, "synthetic", 0, 6, 11, "b.csv"),
        ]
        p = tmp_path / "manifest.json"
        save_manifest(entries, p)
        back = load_manifest(p)
        assert back == entries

    def test_optional_landmarks_omitted_from_json(self, tmp_path):
        p = tmp_path / "m.json"
        save_manifest([ManifestEntry("a.msmt", "s", 0, "x", 0, 1, 2)], p)
        raw = json.loads(p.read_text())
        assert "landmarks_path" not in raw[0]

    def test_bad_record_rejected(self, tmp_path):
        p = tmp_path / "m.json"
        p.write_text(json.dumps([{"clip_path": "a"}]))
        with pytest.raises(ValueError, match="record"):
            load_manifest(p)

    def test_non_list_rejected(self, tmp_path):
        p = tmp_path / "m.json"
        p.write_text(json.dumps({"not": "a list"}))
        with pytest.raises(ValueError, match="list"):
            load_manifest(p)


class TestRelabel:
    def test_happiness_is_positive(self):
        assert cde_relabel("happiness", "CASMEII") == "positive"

    def test_surprise_identity(self):
        assert cde_relabel("surprise", "SAMM") == "surprise"

    @pytest.mark.parametrize(
        "emotion", ["disgust", "repression", "anger", "sadness", "fear", "contempt"]
    )
    def test_negatives(self, emotion):
        assert cde_relabel(emotion, "SAMM") == "negative"

    def test_pooled_labels_pass_through(self):
        for lab in ("positive", "negative", "surprise"):
            assert cde_relabel(lab, "SMIC") == lab

    def test_unmapped_label_rejected(self):
        with pytest.raises(UnmappedLabelError, match="others"):
            cde_relabel("others", "CASMEII")

    def test_case_insensitive(self):
        assert cde_relabel("Happiness", "CASMEII") == "positive"

    def test_custom_mapping_file(self, tmp_path):
        p = tmp_path / "map.json"
        p.write_text(json.dumps({"joy": "positive"}))
        table = load_cde_mapping(p)
        assert cde_relabel("joy", "custom", table) == "positive"
        with pytest.raises(UnmappedLabelError):
            cde_relabel("happiness", "custom", table)

    def test_default_table_complete(self):
        assert set(DEFAULT_CDE_MAPPING.values()) <= {"positive", "negative", "surprise"}
