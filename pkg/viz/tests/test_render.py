"""Schema validation, display normalization, and file output of the renderer."""

import json

import numpy as np
import pytest

from render_attention import (SchemaError, display_matrix, load_records,
                              main, output_paths, validate_record)


def make_record(n=5, channels=2, pads=0):
    live = n - pads
    row = [0.0] * pads + [1.0 / live] * live
    return {"tokens": [f"w{i}" for i in range(n)],
            "pads": [True] * pads + [False] * live,
            "channels": [list(row) for _ in range(channels)],
            "predicted": 1,
            "label": 0}


def png_size(path):
    data = path.read_bytes()
    assert data[:8] == b"\x89PNG\r\n\x1a\n", "not a PNG file"
    return (int.from_bytes(data[16:20], "big"),
            int.from_bytes(data[20:24], "big"))


def write_records(path, records):
    path.write_text(json.dumps(records))
    return str(path)


class TestSchemaValidation:
    def test_valid_record_accepted(self):
        validate_record(make_record(), 0)

    def test_missing_key(self):
        rec = make_record()
        del rec["pads"]
        with pytest.raises(SchemaError, match="record 3"):
            validate_record(rec, 3)

    def test_unexpected_key(self):
        rec = make_record()
        rec["extra"] = 1
        with pytest.raises(SchemaError, match="extra"):
            validate_record(rec, 0)

    def test_pads_length_mismatch(self):
        rec = make_record(n=5)
        rec["pads"] = rec["pads"][:-1]
        with pytest.raises(SchemaError, match="pads"):
            validate_record(rec, 0)

    def test_integer_pads_rejected(self):
        rec = make_record()
        rec["pads"] = [0] * 5
        with pytest.raises(SchemaError, match="boolean"):
            validate_record(rec, 0)

    def test_channel_row_length_mismatch(self):
        rec = make_record(n=4)
        rec["channels"][1] = rec["channels"][1][:-1]
        with pytest.raises(SchemaError, match="channel 1"):
            validate_record(rec, 0)

    def test_empty_channels_rejected(self):
        rec = make_record()
        rec["channels"] = []
        with pytest.raises(SchemaError, match="channels"):
            validate_record(rec, 0)

    def test_unnormalized_weights_rejected(self):
        rec = make_record(n=4)
        rec["channels"][0] = [0.5, 0.1, 0.1, 0.1]
        with pytest.raises(SchemaError, match="sum"):
            validate_record(rec, 0)

    def test_negative_weight_rejected(self):
        rec = make_record(n=2)
        rec["channels"][0] = [1.5, -0.5]
        with pytest.raises(SchemaError, match="negative"):
            validate_record(rec, 0)

    def test_boolean_predicted_rejected(self):
        rec = make_record()
        rec["predicted"] = True
        with pytest.raises(SchemaError, match="predicted"):
            validate_record(rec, 0)

    def test_null_label_accepted(self):
        rec = make_record()
        rec["label"] = None
        validate_record(rec, 0)

    def test_string_label_rejected(self):
        rec = make_record()
        rec["label"] = "1"
        with pytest.raises(SchemaError, match="label"):
            validate_record(rec, 0)

    def test_load_reports_offending_index(self, tmp_path):
        records = [make_record(), make_record()]
        del records[1]["tokens"]
        path = write_records(tmp_path / "r.json", records)
        with pytest.raises(SchemaError, match="record 1"):
            load_records(path)


class TestDisplayMatrix:
    def test_pads_dropped_by_default(self):
        rec = make_record(n=6, channels=3, pads=2)
        matrix, labels = display_matrix(rec)
        assert matrix.shape == (3, 4)
        assert labels == ["w2", "w3", "w4", "w5"]

    def test_show_pads_keeps_all_columns(self):
        rec = make_record(n=6, channels=2, pads=2)
        matrix, labels = display_matrix(rec, hide_pads=False)
        assert matrix.shape == (2, 6)
        assert labels[0] == "w0"

    def test_rows_normalized_to_unit_max(self):
        rec = make_record(n=4)
        rec["channels"][0] = [0.4, 0.3, 0.2, 0.1]
        matrix, _ = display_matrix(rec)
        assert matrix[0].max() == 1.0
        np.testing.assert_allclose(matrix[0], [1.0, 0.75, 0.5, 0.25])

    def test_uniform_row_stays_uniform(self):
        matrix, _ = display_matrix(make_record(n=5))
        assert np.all(matrix == 1.0)

    def test_all_zero_visible_row_left_as_zeros(self):
        rec = make_record(n=3, pads=2)  # all mass on the one live token
        rec["channels"][0] = [0.5, 0.5, 0.0]  # schema-valid, zero where visible
        matrix, _ = display_matrix(rec)
        assert matrix[0].tolist() == [0.0]

    def test_input_record_not_mutated(self):
        rec = make_record(n=4, pads=1)
        before = json.dumps(rec)
        display_matrix(rec)
        assert json.dumps(rec) == before


class TestOutputPaths:
    def test_single_record_uses_exact_path(self):
        assert output_paths("a/b.png", 1) == ["a/b.png"]

    def test_multiple_records_get_index_suffix(self):
        assert output_paths("b.png", 3) == ["b_0.png", "b_1.png", "b_2.png"]

    def test_missing_extension_defaults_to_png(self):
        assert output_paths("plain", 2) == ["plain_0.png", "plain_1.png"]


class TestMainRendering:
    def test_single_record_writes_one_png(self, tmp_path, capsys):
        src = write_records(tmp_path / "r.json", [make_record()])
        out = tmp_path / "heat.png"
        assert main([src, str(out)]) == 0
        width, height = png_size(out)
        assert width > 0 and height > 0

    def test_three_records_write_three_files(self, tmp_path, capsys):
        src = write_records(tmp_path / "r.json", [make_record()] * 3)
        out = tmp_path / "heat.png"
        assert main([src, str(out)]) == 0
        for i in range(3):
            assert (tmp_path / f"heat_{i}.png").exists()

    def test_dimensions_deterministic(self, tmp_path, capsys):
        src = write_records(tmp_path / "r.json", [make_record(n=7, pads=2)])
        sizes = []
        for name in ("a.png", "b.png"):
            assert main([src, str(tmp_path / name)]) == 0
            sizes.append(png_size(tmp_path / name))
        assert sizes[0] == sizes[1]

    def test_show_pads_widens_the_figure(self, tmp_path, capsys):
        src = write_records(tmp_path / "r.json", [make_record(n=9, pads=4)])
        assert main([src, str(tmp_path / "hidden.png")]) == 0
        assert main([src, str(tmp_path / "shown.png"), "--show-pads"]) == 0
        assert png_size(tmp_path / "shown.png")[0] > \
            png_size(tmp_path / "hidden.png")[0]

    def test_input_file_untouched(self, tmp_path, capsys):
        src = tmp_path / "r.json"
        write_records(src, [make_record()])
        before = src.read_bytes()
        assert main([str(src), str(tmp_path / "o.png")]) == 0
        assert src.read_bytes() == before

    def test_schema_violation_exits_1_with_index(self, tmp_path, capsys):
        records = [make_record(), make_record()]
        records[1]["channels"][0][0] = 0.9  # break normalization
        src = write_records(tmp_path / "r.json", records)
        assert main([src, str(tmp_path / "o.png")]) == 1
        assert "record 1" in capsys.readouterr().err

    def test_all_pad_record_exits_1(self, tmp_path, capsys):
        rec = {"tokens": ["w0", "w1", "w2"], "pads": [True] * 3,
               "channels": [[1.0, 0.0, 0.0]], "predicted": 0, "label": None}
        src = write_records(tmp_path / "r.json", [rec])
        assert main([src, str(tmp_path / "o.png")]) == 1
        assert "record 0" in capsys.readouterr().err

    def test_missing_input_exits_2(self, tmp_path, capsys):
        assert main([str(tmp_path / "absent.json"),
                     str(tmp_path / "o.png")]) == 2

    def test_invalid_json_exits_2(self, tmp_path, capsys):
        src = tmp_path / "r.json"
        src.write_text("not json at all {")
        assert main([str(src), str(tmp_path / "o.png")]) == 2

    def test_unknown_colormap_exits_2(self, tmp_path, capsys):
        src = write_records(tmp_path / "r.json", [make_record()])
        assert main([src, str(tmp_path / "o.png"),
                     "--cmap", "no-such-map"]) == 2
