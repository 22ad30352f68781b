import json
from pathlib import Path

import numpy as np
import pytest
from PIL import Image

from recapaug.assets import DiskMoireBank, load_banks
from recapaug.cli import main, read_manifest
from recapaug.errors import FormatError
from recapaug.icc import write_profile_bank
from recapaug.image import ColorMode
from recapaug.imageio import load_image
from recapaug.policy import BUILTIN_OPS
from recapaug.press import write_preset_bank
from recapaug.printsim import BLUENOISE_MODES, _SOURCE_CHANNELS, generate_blue_noise_channels
from recapaug.replay import build_default_layouts, tile_layout


def _save_array(path, arr):
    img = arr[:, :, 0] if (arr.ndim == 3 and arr.shape[2] == 1) else arr
    Image.fromarray(img).save(path)


@pytest.fixture(scope="session")
def mini_bank_dir(tmp_path_factory):
    """Bank directory with unwarped moiré tiles and 32px dither arrays."""
    root = tmp_path_factory.mktemp("minibank")
    write_profile_bank(root / "profiles")
    write_preset_bank(root / "presets.json")

    moire_dir = root / "moire"
    moire_dir.mkdir()
    entries = []
    for layout in build_default_layouts()[:2]:
        for warp in range(2):
            fname = f"{layout.name}_{warp}.png"
            _save_array(moire_dir / fname, tile_layout(layout))
            entries.append({"layout": layout.name, "warp": warp, "file": fname})
    (moire_dir / "index.json").write_text(
        json.dumps({"version": 1, "seed": 0, "textures": entries})
    )

    bn_dir = root / "bluenoise"
    bn_dir.mkdir()
    entries = []
    for mode in BLUENOISE_MODES:
        src = generate_blue_noise_channels(32, 32, _SOURCE_CHANNELS[mode], (5, mode.value, 0))
        fname = f"{mode.value}_0.png"
        _save_array(bn_dir / fname, src)
        entries.append({"mode": mode.value, "instance": 0, "file": fname})
    (bn_dir / "index.json").write_text(
        json.dumps({"version": 1, "seed": 5, "textures": entries})
    )
    return root


@pytest.fixture()
def manifest_dir(tmp_path):
    rng = np.random.default_rng(0)
    records = []
    for i in range(6):
        name = f"face_{i}.png"
        arr = (rng.random((120, 120, 3)) * 255).astype(np.uint8)
        Image.fromarray(arr).save(tmp_path / name)
        records.append(
            {
                "path": name,
                "label": "bonafide" if i % 2 == 0 else "spoof",
                "domain": f"d{i % 2}",
            }
        )
    manifest = tmp_path / "manifest.jsonl"
    manifest.write_text("\n".join(json.dumps(r) for r in records) + "\n")
    return tmp_path, manifest


def tree_bytes(directory: Path) -> dict:
    return {
        str(p.relative_to(directory)): p.read_bytes()
        for p in sorted(directory.rglob("*"))
        if p.is_file()
    }


class TestManifest:
    def test_jsonl_parsing(self, manifest_dir):
        base, manifest = manifest_dir
        records = read_manifest(manifest)
        assert len(records) == 6
        assert records[0].path == base / "face_0.png"
        assert records[1].label == "spoof"

    def test_csv_parsing(self, tmp_path):
        csv_path = tmp_path / "m.csv"
        csv_path.write_text("path,label,domain\na.png,bonafide,d0\nb.png,spoof,d1\n")
        records = read_manifest(csv_path)
        assert len(records) == 2
        assert records[1].domain == "d1"

    def test_missing_field_rejected(self, tmp_path):
        bad = tmp_path / "m.jsonl"
        bad.write_text('{"path": "x.png", "label": "spoof"}\n')
        with pytest.raises(FormatError):
            read_manifest(bad)

    def test_missing_manifest_rejected(self, tmp_path):
        with pytest.raises(FormatError):
            read_manifest(tmp_path / "nope.jsonl")


class TestAugmentCommand:
    def _run(self, manifest, out, bank, extra=()):
        return main(
            [
                "augment",
                "--manifest", str(manifest),
                "--out", str(out),
                "--seed", "7",
                "--epoch", "0",
                "--banks", str(bank),
                *extra,
            ]
        )

    def test_basic_run_writes_images_and_provenance(self, manifest_dir, mini_bank_dir, tmp_path):
        _, manifest = manifest_dir
        out = tmp_path / "out"
        assert self._run(manifest, out, mini_bank_dir) == 0
        lines = [
            json.loads(l)
            for l in (out / "provenance.jsonl").read_text().splitlines()
        ]
        assert len(lines) == 6
        for line in lines:
            assert (out / "images" / line["output_path"]).exists()
            if line["input_label"] == "spoof":
                assert line["output_label"] == "spoof"
            assert len(line["sub_policy"]) == 2
            assert line["rng_seed_components"] == [7, 0, line["record_index"]]

    def test_deterministic_across_runs_and_workers(self, manifest_dir, mini_bank_dir, tmp_path):
        _, manifest = manifest_dir
        trees = []
        for i, workers in enumerate(("1", "3")):
            out = tmp_path / f"out{i}"
            assert self._run(manifest, out, mini_bank_dir, ("--workers", workers)) == 0
            trees.append(tree_bytes(out))
        assert trees[0] == trees[1]

    def test_bonafide_only_manifest_yields_spoof_outputs(
        self, manifest_dir, mini_bank_dir, tmp_path
    ):
        base, manifest = manifest_dir
        rows = [json.loads(l) for l in manifest.read_text().splitlines()]
        for row in rows:
            row["label"] = "bonafide"
        bona = base / "bona.jsonl"
        bona.write_text("\n".join(json.dumps(r) for r in rows) + "\n")
        out = tmp_path / "out"
        assert self._run(bona, out, mini_bank_dir) == 0
        lines = [json.loads(l) for l in (out / "provenance.jsonl").read_text().splitlines()]
        assert all(l["input_label"] == "bonafide" for l in lines)
        assert any(l["output_label"] == "spoof" for l in lines)
        # every output file has exactly one provenance line
        files = {p.name for p in (out / "images").iterdir()}
        assert files == {l["output_path"] for l in lines}

    def test_epoch_changes_outputs(self, manifest_dir, mini_bank_dir, tmp_path):
        _, manifest = manifest_dir
        out0, out1 = tmp_path / "e0", tmp_path / "e1"
        main(["augment", "--manifest", str(manifest), "--out", str(out0),
              "--seed", "7", "--epoch", "0", "--banks", str(mini_bank_dir)])
        main(["augment", "--manifest", str(manifest), "--out", str(out1),
              "--seed", "7", "--epoch", "1", "--banks", str(mini_bank_dir)])
        p0 = (out0 / "provenance.jsonl").read_text()
        p1 = (out1 / "provenance.jsonl").read_text()
        assert p0 != p1

    def test_resume_skips_complete_outputs(self, manifest_dir, mini_bank_dir, tmp_path):
        _, manifest = manifest_dir
        out = tmp_path / "out"
        assert self._run(manifest, out, mini_bank_dir) == 0
        before = tree_bytes(out)
        # drop one output; rerun must restore it byte-identically
        victim = next((out / "images").iterdir())
        victim_mtimes = {
            p: p.stat().st_mtime_ns for p in (out / "images").iterdir() if p != victim
        }
        victim.unlink()
        assert self._run(manifest, out, mini_bank_dir) == 0
        assert tree_bytes(out) == before
        for p, mtime in victim_mtimes.items():
            assert p.stat().st_mtime_ns == mtime  # untouched, not rewritten

    def test_record_error_sets_exit_code(self, manifest_dir, mini_bank_dir, tmp_path):
        base, manifest = manifest_dir
        rows = [json.loads(l) for l in manifest.read_text().splitlines()]
        rows[2]["path"] = "missing.png"
        manifest.write_text("\n".join(json.dumps(r) for r in rows) + "\n")
        out = tmp_path / "out"
        assert self._run(manifest, out, mini_bank_dir) == 2
        lines = [json.loads(l) for l in (out / "provenance.jsonl").read_text().splitlines()]
        assert len(lines) == 6
        assert sum("error" in l for l in lines) == 1
        # relaxed threshold tolerates the one bad record
        out2 = tmp_path / "out2"
        assert self._run(manifest, out2, mini_bank_dir, ("--error-threshold", "0.5")) == 0

    def test_strict_aborts(self, manifest_dir, mini_bank_dir, tmp_path):
        base, manifest = manifest_dir
        rows = [json.loads(l) for l in manifest.read_text().splitlines()]
        rows[0]["path"] = "missing.png"
        manifest.write_text("\n".join(json.dumps(r) for r in rows) + "\n")
        assert self._run(manifest, tmp_path / "out", mini_bank_dir, ("--strict",)) == 2

    def test_empty_manifest_ok(self, mini_bank_dir, tmp_path):
        manifest = tmp_path / "empty.jsonl"
        manifest.write_text("")
        out = tmp_path / "out"
        assert self._run(manifest, out, mini_bank_dir) == 0
        assert (out / "provenance.jsonl").read_text() == ""

    def test_missing_banks_exit_3(self, manifest_dir, tmp_path, monkeypatch):
        monkeypatch.delenv("RECAPAUG_BANK_DIR", raising=False)
        _, manifest = manifest_dir
        assert self._run(manifest, tmp_path / "out", tmp_path / "nobank") == 3
        rc = main(["augment", "--manifest", str(manifest), "--out", str(tmp_path / "o"),
                   "--seed", "1", "--epoch", "0"])
        assert rc == 3

    def test_env_var_supplies_banks(self, manifest_dir, mini_bank_dir, tmp_path, monkeypatch):
        monkeypatch.setenv("RECAPAUG_BANK_DIR", str(mini_bank_dir))
        _, manifest = manifest_dir
        rc = main(["augment", "--manifest", str(manifest), "--out", str(tmp_path / "out"),
                   "--seed", "7", "--epoch", "0"])
        assert rc == 0

    def test_usage_error_exit_1(self):
        assert main(["augment", "--manifest", "x"]) == 1
        assert main(["no-such-command"]) == 1


class TestPreviewCommand:
    def test_contact_sheet_grid(self, manifest_dir, mini_bank_dir, tmp_path):
        base, _ = manifest_dir
        out = tmp_path / "sheet.png"
        rc = main(
            ["preview", "--image", str(base / "face_0.png"), "--out", str(out),
             "--banks", str(mini_bank_dir), "--seed", "3"]
        )
        assert rc == 0
        sheet = load_image(out)
        assert sheet.data.shape == (8 * 120, 10 * 120, 3)

    def test_identity_columns_byte_equal(self, manifest_dir, mini_bank_dir, tmp_path):
        base, _ = manifest_dir
        out = tmp_path / "sheet.png"
        main(["preview", "--image", str(base / "face_0.png"), "--out", str(out),
              "--banks", str(mini_bank_dir), "--seed", "3"])
        sheet = np.asarray(Image.open(out))
        src = np.asarray(Image.open(base / "face_0.png"))
        ops = list(BUILTIN_OPS)
        for kind in ("LowResolution", "HandTrembling"):
            row = ops.index(kind)
            tile = sheet[row * 120 : (row + 1) * 120, 0:120]
            assert np.array_equal(tile, src)

    def test_deterministic(self, manifest_dir, mini_bank_dir, tmp_path):
        base, _ = manifest_dir
        outs = []
        for name in ("a.png", "b.png"):
            out = tmp_path / name
            main(["preview", "--image", str(base / "face_0.png"), "--out", str(out),
                  "--banks", str(mini_bank_dir), "--seed", "9"])
            outs.append(out.read_bytes())
        assert outs[0] == outs[1]

    def test_unreadable_image_exit_2(self, mini_bank_dir, tmp_path):
        bad = tmp_path / "bad.png"
        bad.write_bytes(b"not a png")
        rc = main(["preview", "--image", str(bad), "--out", str(tmp_path / "s.png"),
                   "--banks", str(mini_bank_dir)])
        assert rc == 2


class TestPolicyCommand:
    def test_sample_prints_policy_json(self, capsys):
        assert main(["policy", "sample", "--seed", "11", "--epoch", "2"]) == 0
        doc = json.loads(capsys.readouterr().out)
        assert len(doc["sub_policies"]) == 5
        assert all(len(sub) == 2 for sub in doc["sub_policies"])


class TestBankLoading:
    def test_load_banks_round_trip(self, mini_bank_dir):
        banks = load_banks(mini_bank_dir)
        assert len(banks.profiles) == 11
        assert len(banks.presets) == 7
        assert len(banks.moire_textures) == 4
        assert len(banks.bluenoise) == 6
        assert banks.bluenoise[4].color_mode is ColorMode.CMYK
        assert banks.bluenoise[4].raster.shape == (32, 32, 4)

    def test_disk_moire_bank_lazy_cache(self, mini_bank_dir):
        bank = DiskMoireBank(mini_bank_dir / "moire", cache_size=2)
        a = bank[0]
        assert bank[0] is a  # cached
        bank[1], bank[2], bank[3]
        assert bank[0] is not a  # evicted
