import itertools
import json
from pathlib import Path

import numpy as np
import pytest

from frameprov.cli import main
from frameprov.core import read_fchain, parse_trailer
from frameprov.edits import extract_content, read_fvid
from frameprov.frames_io import read_ppm, write_ppm
from frameprov.keystore import load_store
from frameprov.vesl import canonicalize, EditList, Compression, RangeDeletion
from frameprov.crypto import sha256

from conftest import random_frames

LISTING_1 = Path(__file__).parent / "data" / "listing1.vesl"


def counter_rng():
    counter = itertools.count(1)
    return lambda n: bytes([next(counter)]) * n


@pytest.fixture
def env(tmp_path, monkeypatch):
    monkeypatch.chdir(tmp_path)
    monkeypatch.setenv("FRAMEPROV_KEYSTORE", str(tmp_path / "keys.json"))
    rng = counter_rng()

    def run(*argv, clock=lambda: 1_700_000_000):
        return main(list(argv), clock=clock, rng=rng)
    return run


@pytest.fixture
def frames_dir(tmp_path):
    rng = np.random.default_rng(3)
    d = tmp_path / "frames"
    d.mkdir()
    for i, f in enumerate(random_frames(rng, 5, 24, 12)):
        (d / f"frame_{i:03d}.ppm").write_bytes(write_ppm(f))
    return d


def keygen(run, capsys, role, owner, out):
    assert run("--json", "keygen", "--role", role, "--owner", owner, "--key-out", out) == 0
    return json.loads(capsys.readouterr().out)


def test_keygen_registers(env, capsys, tmp_path):
    info = keygen(env, capsys, "device", "Newsroom A", "dev.fpsk")
    store = load_store(tmp_path / "keys.json")
    assert [r.key_id for r in store.list("device")] == [info["keyId"]]
    assert info["registeredAt"] == 1_700_000_000
    assert (tmp_path / "dev.fpsk").read_bytes()[:4] == b"FPSK"
    second = keygen(env, capsys, "device", "Newsroom A", "dev2.fpsk")
    assert second["keyId"] != info["keyId"]


def test_keystore_flag_overrides_env(env, capsys, tmp_path):
    assert env("--keystore", str(tmp_path / "other.json"), "keygen", "--role", "editor",
               "--owner", "x", "--key-out", "e.fpsk") == 0
    assert len(load_store(tmp_path / "other.json")) == 1
    assert not (tmp_path / "keys.json").exists()


def test_record_and_verify(env, capsys, frames_dir, tmp_path):
    keygen(env, capsys, "device", "Newsroom A", "dev.fpsk")
    assert env("record", "--key", "dev.fpsk", "--in", str(frames_dir), "--fps", "30/1",
               "--out", "clip.fchain", "--snippet-every", "2") == 0
    capsys.readouterr()
    chain = read_fchain((tmp_path / "clip.fchain").read_bytes())
    assert len(chain) == 7
    assert [s.frame_index for s in parse_trailer(chain.trailer).snippets] == [1, 3]
    assert read_ppm((frames_dir / "frame_002.ppm").read_bytes()).pixels[72:] == chain.arrays[3].pixels[72:]
    assert env("verify", "clip.fchain") == 0
    assert "verdict: valid" in capsys.readouterr().out


def test_verify_tampered_and_missing(env, capsys, frames_dir, tmp_path):
    keygen(env, capsys, "device", "Newsroom A", "dev.fpsk")
    env("record", "--key", "dev.fpsk", "--in", str(frames_dir), "--out", "clip.fchain")
    data = bytearray((tmp_path / "clip.fchain").read_bytes())
    frame = 3 * 24 * 12
    data[30 + 2 * frame + 100] ^= 0xFF  # content frame 1, below the hash band
    (tmp_path / "bad.fchain").write_bytes(bytes(data))
    capsys.readouterr()
    assert env("--json", "verify", "bad.fchain") == 1
    report = json.loads(capsys.readouterr().out)
    assert report["chainLinks"]["firstBroken"] == 2
    assert env("verify", "nope.fchain") == 2


def test_raw_rgb_input(env, capsys, tmp_path):
    keygen(env, capsys, "device", "cam", "dev.fpsk")
    rng = np.random.default_rng(1)
    (tmp_path / "raw.rgb").write_bytes(rng.integers(0, 256, 3 * 16 * 11 * 3, dtype=np.uint8).tobytes())
    assert env("record", "--key", "dev.fpsk", "--in", "raw.rgb", "--out", "c.fchain") == 2
    assert env("record", "--key", "dev.fpsk", "--in", "raw.rgb", "--width", "16", "--height", "11",
               "--out", "c.fchain") == 0
    assert len(read_fchain((tmp_path / "c.fchain").read_bytes())) == 5


def test_record_dimension_error(env, capsys, tmp_path):
    keygen(env, capsys, "device", "cam", "dev.fpsk")
    (tmp_path / "raw.rgb").write_bytes(bytes(3 * 8 * 4))
    assert env("record", "--key", "dev.fpsk", "--in", "raw.rgb", "--width", "8", "--height", "4",
               "--out", "c.fchain") == 2


@pytest.fixture
def recorded(env, capsys, frames_dir, tmp_path):
    keygen(env, capsys, "device", "Newsroom A", "dev.fpsk")
    keygen(env, capsys, "editor", "Desk B", "ed.fpsk")
    env("record", "--key", "dev.fpsk", "--in", str(frames_dir), "--out", "clip.fchain")
    capsys.readouterr()
    return tmp_path / "clip.fchain"


def write_vesl(path, source: bytes, *edits):
    path.write_bytes(canonicalize(EditList(tuple(edits), sha256(source))))


def test_edit_none_is_identity(env, capsys, recorded, tmp_path):
    write_vesl(tmp_path / "e.vesl", recorded.read_bytes(), Compression("none"))
    assert env("edit", "--in", "clip.fchain", "--vesl", "e.vesl", "--sign-key", "ed.fpsk",
               "--out", "clip.fvid") == 0
    out = read_fvid((tmp_path / "clip.fvid").read_bytes())
    assert out.frames == extract_content(read_fchain(recorded.read_bytes())).frames
    assert (tmp_path / "e.vesl.sig").stat().st_size == 101


def test_edit_listing_1_is_rejected(env, capsys, recorded, tmp_path):
    assert env("edit", "--in", "clip.fchain", "--vesl", str(LISTING_1), "--sign-key", "ed.fpsk",
               "--out", "x.fvid") == 1
    out = capsys.readouterr().out
    assert "unsupported-codec" in out
    assert not (tmp_path / "x.fvid").exists()


def test_edit_codec_only(env, capsys, recorded, tmp_path):
    write_vesl(tmp_path / "h.vesl", recorded.read_bytes(), Compression("H.264", {"CRF": "27"}))
    assert env("--json", "edit", "--in", "clip.fchain", "--vesl", "h.vesl", "--sign-key", "ed.fpsk",
               "--out", "x.fvid") == 1
    assert [i["code"] for i in json.loads(capsys.readouterr().out)["issues"]] == ["unsupported-codec"]


def test_edit_then_delayed_verify(env, capsys, recorded, tmp_path):
    write_vesl(tmp_path / "a.vesl", recorded.read_bytes(), RangeDeletion(0, 1))
    assert env("edit", "--in", "clip.fchain", "--vesl", "a.vesl", "--sign-key", "ed.fpsk",
               "--out", "a.fvid") == 0
    write_vesl(tmp_path / "b.vesl", (tmp_path / "a.fvid").read_bytes(), Compression("quant8", {"q": "16"}))
    assert env("edit", "--in", "a.fvid", "--vesl", "b.vesl", "--sign-key", "ed.fpsk",
               "--out", "b.fvid") == 0
    capsys.readouterr()
    assert env("delayed-verify", "--source", "clip.fchain", "--stage", "a.vesl:a.vesl.sig",
               "--stage", "b.vesl", "--video", "b.fvid") == 0
    assert "verdict: valid" in capsys.readouterr().out
    # wrong stage order breaks the source binding
    assert env("--json", "delayed-verify", "--source", "clip.fchain", "--stage", "b.vesl",
               "--stage", "a.vesl", "--video", "b.fvid") == 1
    report = json.loads(capsys.readouterr().out)
    assert report["stages"][0]["sourceHash"] == "mismatch"


def test_delayed_verify_undeclared_edit(env, capsys, recorded, tmp_path):
    write_vesl(tmp_path / "a.vesl", recorded.read_bytes(), RangeDeletion(0, 0))
    env("edit", "--in", "clip.fchain", "--vesl", "a.vesl", "--sign-key", "ed.fpsk", "--out", "a.fvid")
    write_vesl(tmp_path / "sneaky.vesl", recorded.read_bytes(), RangeDeletion(0, 1))
    env("edit", "--in", "clip.fchain", "--vesl", "sneaky.vesl", "--sign-key", "ed.fpsk",
        "--out", "sneaky.fvid", "--sig-out", "sneaky.sig")
    capsys.readouterr()
    assert env("--json", "delayed-verify", "--source", "clip.fchain", "--stage", "a.vesl",
               "--video", "sneaky.fvid") == 1
    assert "video-hash-mismatch" in json.loads(capsys.readouterr().out)["failures"]


def test_inspect(env, capsys, recorded, tmp_path):
    assert env("--json", "inspect", "clip.fchain") == 0
    info = json.loads(capsys.readouterr().out)
    assert info["trailer"]["contentCount"] == 5
    assert info["genesis"]["timestamp"] == 1_700_000_000
    assert len(info["genesis"]["devicePublicKey"]) == 64
    assert env("inspect", str(LISTING_1)) == 0
    text = capsys.readouterr().out
    assert "rangeDeletion: frames 1250-1500" in text
    assert "alpha[2010-2020]" in text
    write_vesl(tmp_path / "e.vesl", recorded.read_bytes(), Compression("none"))
    env("edit", "--in", "clip.fchain", "--vesl", "e.vesl", "--sign-key", "ed.fpsk", "--out", "c.fvid")
    capsys.readouterr()
    assert env("--json", "inspect", "c.fvid") == 0
    info = json.loads(capsys.readouterr().out)
    assert info["frames"] == 5 and info["fileHash"] == sha256((tmp_path / "c.fvid").read_bytes()).hex()
    (tmp_path / "junk.bin").write_bytes(b"\x00\x01garbage")
    assert env("inspect", "junk.bin") == 2


def test_usage_errors(env):
    assert env() == 2
    assert env("frobnicate") == 2
    assert env("--help") == 0


def test_full_pipeline_randomized(env, capsys, tmp_path):
    keygen(env, capsys, "device", "cam", "dev.fpsk")
    keygen(env, capsys, "editor", "desk", "ed.fpsk")
    rng = np.random.default_rng(11)
    for trial in range(5):
        w, h, n = int(rng.integers(11, 40)), int(rng.integers(8, 20)), int(rng.integers(2, 9))
        d = tmp_path / f"t{trial}"
        d.mkdir()
        for i, f in enumerate(random_frames(rng, n, w, h)):
            (d / f"{i:02d}.ppm").write_bytes(write_ppm(f))
        chain_path = d / "c.fchain"
        assert env("record", "--key", "dev.fpsk", "--in", str(d), "--out", str(chain_path)) == 0
        write_vesl(d / "e.vesl", chain_path.read_bytes(), RangeDeletion(0, 0), Compression("quant8", {"q": "4"}))
        assert env("edit", "--in", str(chain_path), "--vesl", str(d / "e.vesl"), "--sign-key", "ed.fpsk",
                   "--out", str(d / "e.fvid")) == 0
        assert env("delayed-verify", "--source", str(chain_path), "--stage", str(d / "e.vesl"),
                   "--video", str(d / "e.fvid")) == 0
