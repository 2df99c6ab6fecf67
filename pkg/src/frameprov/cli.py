"""``frameprov`` command line: keygen, record, verify, edit, delayed-verify, inspect.

Exit codes: 0 success/valid, 1 verification or validation failure, 2 usage or IO error.
The keystore path comes from ``--keystore``, then ``$FRAMEPROV_KEYSTORE``, then
``./frameprov-keys.json``. ``$FRAMEPROV_NOW`` (epoch seconds) overrides the clock.
"""

from __future__ import annotations

import argparse
import json
import os
import sys
import time
from fractions import Fraction
from pathlib import Path
from typing import Callable

from . import core, tee
from .crypto import KeyPair, read_key_file, sha256, write_key_file
from .edits import FVID_MAGIC, extract_content, read_fvid, replay, write_fvid
from .errors import FrameProvError, VeslError
from .frames_io import ppm_directory, raw_rgb_file
from .keystore import load_store
from .verify import delayed_verify, verify_chain
from .vesl import (
    REPLAYABLE_CODECS,
    Compression,
    EditSignature,
    ValidationIssue,
    VideoFilter,
    canonicalize,
    edit_type_name,
    parse_vesl,
    sign_vesl,
    validate_against_source,
)

DEFAULT_KEYSTORE = "frameprov-keys.json"
EXIT_OK, EXIT_INVALID, EXIT_USAGE = 0, 1, 2


class UsageError(Exception):
    pass


class _Parser(argparse.ArgumentParser):
    def error(self, message):  # argparse exits with 2 already; keep the message on stderr
        self.print_usage(sys.stderr)
        raise UsageError(message)


def _emit(args, payload: dict, text: str) -> None:
    if args.json:
        print(json.dumps(payload, indent=2, ensure_ascii=False))
    else:
        print(text)


def _keystore_path(args) -> Path:
    return Path(args.keystore or os.environ.get("FRAMEPROV_KEYSTORE") or DEFAULT_KEYSTORE)


def _parse_fps(text: str) -> tuple[int, int]:
    if "/" in text:
        num, den = text.split("/", 1)
        num, den = int(num), int(den)
    else:
        frac = Fraction(text)
        num, den = frac.numerator, frac.denominator
    if num < 1 or den < 1:
        raise UsageError(f"invalid framerate {text!r}")
    return num, den


# -- commands -------------------------------------------------------------------


def cmd_keygen(args, clock, rng) -> int:
    keypair = KeyPair.generate(rng)
    store = load_store(_keystore_path(args), missing_ok=True)
    record = store.register(keypair.public_key, args.role, args.owner, clock())
    key_path = Path(args.key_out or f"{args.role}-{record.key_id[:16]}.fpsk")
    write_key_file(keypair, key_path)
    _emit(args, {"keyId": record.key_id, "role": record.role, "owner": record.owner,
                 "registeredAt": record.registered_at, "keyFile": str(key_path)},
          f"{record.key_id}\nprivate key written to {key_path}")
    return EXIT_OK


def cmd_record(args, clock, rng) -> int:
    keypair = read_key_file(args.key)
    source = Path(args.input)
    if source.is_dir():
        frames = ppm_directory(source)
    else:
        if args.width is None or args.height is None:
            raise UsageError("--width and --height are required for raw RGB input")
        frames = raw_rgb_file(source, args.width, args.height)
    anchor = bytes.fromhex(args.anchor) if args.anchor else None
    chain = tee.record(
        keypair, frames, fps=_parse_fps(args.fps), sensor_id=args.sensor_id,
        timestamp=clock(), sequence_number=args.sequence, anchor_hash=anchor,
        snippet_every=args.snippet_every,
    )
    data = core.write_fchain(chain)
    Path(args.out).write_bytes(data)
    trailer = core.parse_trailer(chain.trailer)
    _emit(args, {"contentCount": trailer.content_count, "keyId": keypair.key_id,
                 "snippets": [s.frame_index for s in trailer.snippets], "fileHash": sha256(data).hex()},
          f"recorded {trailer.content_count} frames with key {keypair.key_id}")
    return EXIT_OK


def _load_chain(path: str) -> core.FrameChain:
    return core.read_fchain(Path(path).read_bytes())


def _finish_report(args, report) -> int:
    if args.json:
        print(report.to_json(indent=2))
    else:
        print(report.render_text())
    return EXIT_OK if report.ok else EXIT_INVALID


def cmd_verify(args, clock, rng) -> int:
    try:
        chain = _load_chain(args.file)
    except FrameProvError as exc:
        _emit(args, {"verdict": "invalid", "failures": [f"container: {exc}"]},
              f"verdict: invalid\ncontainer: {exc}")
        return EXIT_INVALID
    store = load_store(_keystore_path(args), missing_ok=True)
    return _finish_report(args, verify_chain(chain, store))


def _load_edit_input(data: bytes):
    if data[:4] == FVID_MAGIC:
        return read_fvid(data)
    return extract_content(core.read_fchain(data))


def cmd_edit(args, clock, rng) -> int:
    source_bytes = Path(args.input).read_bytes()
    vesl_path = Path(args.vesl)
    vesl_bytes = vesl_path.read_bytes()
    editor = read_key_file(args.sign_key)
    try:
        buf = _load_edit_input(source_bytes)
    except FrameProvError as exc:
        raise UsageError(f"{args.input}: {exc}") from None

    try:
        edit_list = parse_vesl(vesl_bytes)
    except VeslError as exc:
        _emit(args, {"status": "invalid", "issues": [{"code": "parse", "message": str(exc)}]},
              f"invalid edit list: {exc}")
        return EXIT_INVALID
    result = validate_against_source(edit_list, len(buf), sha256(source_bytes), (buf.width, buf.height))
    issues = list(result.issues)
    for i, edit in enumerate(edit_list.edits):
        if isinstance(edit, Compression) and edit.algorithm not in REPLAYABLE_CODECS:
            issues.append(ValidationIssue(
                "unsupported-codec", f"codec {edit.algorithm!r} parses but cannot be replayed", i))
    if issues:
        _emit(args, {"status": "invalid", "issues": [
                  {"code": i.code, "editIndex": i.edit_index, "message": i.message} for i in issues]},
              "\n".join(f"{i.code}: {i.message}" for i in issues))
        return EXIT_INVALID
    try:
        out = write_fvid(replay(buf, edit_list))
    except FrameProvError as exc:
        _emit(args, {"status": "invalid", "issues": [{"code": "replay", "message": str(exc)}]},
              f"replay failed: {exc}")
        return EXIT_INVALID

    Path(args.out).write_bytes(out)
    sig_path = Path(args.sig_out or f"{vesl_path}.sig")
    sig_path.write_bytes(sign_vesl(vesl_bytes, editor).to_bytes())
    video_hash = sha256(out).hex()
    _emit(args, {"status": "ok", "videoHash": video_hash, "signature": str(sig_path),
                 "editorKeyId": editor.key_id},
          f"{video_hash}\nsignature written to {sig_path}")
    return EXIT_OK


def cmd_delayed_verify(args, clock, rng) -> int:
    chain_bytes = Path(args.source).read_bytes()
    stages = []
    for spec in args.stage:
        vesl_path, _, sig_path = spec.rpartition(":") if ":" in spec else (spec, "", "")
        sig_path = sig_path or f"{vesl_path}.sig"
        try:
            sig = EditSignature.from_bytes(Path(sig_path).read_bytes())
        except FrameProvError as exc:
            raise UsageError(f"{sig_path}: {exc}") from None
        stages.append((Path(vesl_path).read_bytes(), sig))
    video = Path(args.video).read_bytes()
    editor_keys = {}
    for hexkey in args.editor_key or ():
        pub = bytes.fromhex(hexkey)
        editor_keys[sha256(pub).hex()] = pub
    try:
        chain = core.read_fchain(chain_bytes)
    except FrameProvError as exc:
        _emit(args, {"verdict": "invalid", "failures": [f"container: {exc}"]},
              f"verdict: invalid\ncontainer: {exc}")
        return EXIT_INVALID
    store = load_store(_keystore_path(args), missing_ok=True)
    return _finish_report(args, delayed_verify(chain, stages, video, store, editor_keys))


def _summarize_edit(edit) -> str:
    name = edit_type_name(edit)
    if isinstance(edit, VideoFilter):
        parts = []
        for f in edit.filters:
            rng = "all" if f.from_frame is None else f"{f.from_frame}-{f.to_frame}"
            params = ",".join(f"{k}={v}" for k, v in f.type_params.items())
            parts.append(f"{f.filter_type}[{rng}]" + (f"({params})" if params else ""))
        return f"{name}: " + "; ".join(parts)
    if isinstance(edit, Compression):
        params = ",".join(f"{k}={v}" for k, v in edit.algorithm_params.items())
        return f"{name}: {edit.algorithm}" + (f" ({params})" if params else "")
    if edit.from_frame is None:
        rng = "all"
    else:
        rng = f"{edit.from_frame}-{edit.to_frame}"
    if hasattr(edit, "factor_num"):
        return f"{name}: x{edit.factor_num}/{edit.factor_den} over {rng}"
    return f"{name}: frames {rng}"


def cmd_inspect(args, clock, rng) -> int:
    data = Path(args.file).read_bytes()
    magic = data[:4]
    if magic == core.FCHAIN_MAGIC:
        chain = core.read_fchain(data)
        info: dict = {"format": "fchain", "width": chain.width, "height": chain.height,
                      "arrays": len(chain.arrays), "fps": f"{chain.fps_num}/{chain.fps_den}",
                      "fileHash": sha256(data).hex()}
        lines = [f"fchain {chain.width}x{chain.height}, {len(chain.arrays)} arrays, "
                 f"{chain.fps_num}/{chain.fps_den} fps", f"file hash {info['fileHash']}"]
        for label, parse, key in (("genesis", core.parse_genesis, 0), ("trailer", core.parse_trailer, -1)):
            try:
                meta = parse(chain.arrays[key]).to_dict()
            except FrameProvError as exc:
                meta = {"error": str(exc)}
            info[label] = meta
            lines.append(f"{label}: " + ", ".join(f"{k}={v}" for k, v in meta.items()))
        _emit(args, info, "\n".join(lines))
        return EXIT_OK
    if magic == FVID_MAGIC:
        buf = read_fvid(data)
        info = {"format": "fvid", "width": buf.width, "height": buf.height, "frames": len(buf),
                "fps": f"{buf.fps_num}/{buf.fps_den}", "fileHash": sha256(data).hex()}
        _emit(args, info, f"fvid {buf.width}x{buf.height}, {len(buf)} frames, {info['fps']} fps\n"
                          f"file hash {info['fileHash']}")
        return EXIT_OK
    try:
        edit_list = parse_vesl(data)
    except (VeslError, UnicodeDecodeError) as exc:
        raise UsageError(f"{args.file}: not an .fchain, .fvid or VESL file ({exc})") from None
    summary = [_summarize_edit(e) for e in edit_list.edits]
    info = {"format": "vesl", "veslVersion": edit_list.vesl_version,
            "sourceHash": None if edit_list.source_hash is None else edit_list.source_hash.hex(),
            "edits": summary, "canonicalHash": sha256(canonicalize(edit_list)).hex()}
    lines = [f"vesl {edit_list.vesl_version}, source {info['sourceHash'] or '(unbound)'}"]
    lines += [f"  {i}. {s}" for i, s in enumerate(summary)]
    _emit(args, info, "\n".join(lines))
    return EXIT_OK


# -- entry point --------------------------------------------------------------------


def build_parser() -> argparse.ArgumentParser:
    parser = _Parser(prog="frameprov", description="Create, edit and verify video provenance chains.")
    parser.add_argument("--keystore", help="key registry file (default $FRAMEPROV_KEYSTORE or ./frameprov-keys.json)")
    parser.add_argument("--json", action="store_true", help="machine-readable output")
    sub = parser.add_subparsers(dest="command", required=True, parser_class=_Parser)

    p = sub.add_parser("keygen", help="generate and register an Ed25519 key")
    p.add_argument("--role", choices=("device", "editor"), required=True)
    p.add_argument("--owner", required=True)
    p.add_argument("--key-out", help="private key file path")
    p.set_defaults(func=cmd_keygen)

    p = sub.add_parser("record", help="record frames into an .fchain file")
    p.add_argument("--key", required=True, help="device private key file")
    p.add_argument("--in", dest="input", required=True, help="directory of .ppm files or raw RGB24 file")
    p.add_argument("--width", type=int)
    p.add_argument("--height", type=int)
    p.add_argument("--fps", default="30/1")
    p.add_argument("--out", required=True)
    p.add_argument("--anchor", help="hex anchor hash for the genesis frame")
    p.add_argument("--snippet-every", type=int, metavar="N")
    p.add_argument("--sensor-id", default="")
    p.add_argument("--sequence", type=int, default=0)
    p.set_defaults(func=cmd_record)

    p = sub.add_parser("verify", help="verify a raw .fchain file")
    p.add_argument("file")
    p.set_defaults(func=cmd_verify)

    p = sub.add_parser("edit", help="replay a VESL edit list and sign it")
    p.add_argument("--in", dest="input", required=True, help=".fchain or .fvid input")
    p.add_argument("--vesl", required=True)
    p.add_argument("--sign-key", required=True, help="editor private key file")
    p.add_argument("--out", required=True, help="output .fvid")
    p.add_argument("--sig-out", help="signature path (default <vesl>.sig)")
    p.set_defaults(func=cmd_edit)

    p = sub.add_parser("delayed-verify", help="verify an edited video against its source")
    p.add_argument("--source", required=True)
    p.add_argument("--stage", action="append", required=True, metavar="VESL[:SIG]",
                   help="edit stage in order; repeat for multi-stage pipelines")
    p.add_argument("--video", required=True)
    p.add_argument("--editor-key", action="append", metavar="HEX",
                   help="public key of an unregistered editor")
    p.set_defaults(func=cmd_delayed_verify)

    p = sub.add_parser("inspect", help="print metadata of an .fchain, .fvid or VESL file")
    p.add_argument("file")
    p.set_defaults(func=cmd_inspect)
    return parser


def _default_clock() -> int:
    env = os.environ.get("FRAMEPROV_NOW")
    return int(env) if env else int(time.time())


def main(argv: list[str] | None = None, *, clock: Callable[[], int] | None = None,
         rng: Callable[[int], bytes] | None = None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
        return args.func(args, clock or _default_clock, rng)
    except UsageError as exc:
        print(f"frameprov: {exc}", file=sys.stderr)
    except SystemExit as exc:  # --help
        return int(exc.code or 0)
    except (OSError, FrameProvError, ValueError) as exc:
        print(f"frameprov: {exc}", file=sys.stderr)
    return EXIT_USAGE


if __name__ == "__main__":
    raise SystemExit(main())
