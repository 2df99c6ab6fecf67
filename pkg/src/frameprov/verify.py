"""Verification of raw chains, streamed chains, snippets and edited videos.

Verification never raises on bad data: every problem becomes a field of the
returned :class:`VerificationReport`, so one run reports everything that can
be checked. Link ``k`` is the check that content frame ``k`` (0-based) carries
the digest of the array before it in its row 0.

Report JSON schema (keys always present, in this order)::

    verdict          "valid" | "invalid" | "partially-valid"
    failures         list of failure codes, in detection order
    chainLinks       {"checked": int, "broken": [int], "firstBroken": int | null}
    genesis          {"status": str, "metadata": {...} | null}
    trailer          {"status": str, "metadata": {...} | null}
    deviceKey        {"status": str, "keyId": str | null, "owner": str | null}
    finalSignature   "ok" | "failed" | "unchecked"
    snippets         [{"frameIndex": int, "status": str}]
    container        "ok" | "fps-mismatch" | "unchecked"
    stages           [stage objects, delayed verification only]
    videoHash        hex | null      (hash of the supplied edited video)
    replayedHash     hex | null      (hash of the locally replayed video)
"""

from __future__ import annotations

import json
from dataclasses import dataclass, field
from typing import Sequence

from .core import (
    Frame,
    FrameChain,
    GenesisMetadata,
    SnippetSignature,
    TrailerMetadata,
    encode_hash_row,
    final_message,
    frame_digest,
    parse_genesis,
    parse_trailer,
    snippet_message,
    write_fchain,
)
from .crypto import key_id, sha256, verify_signature
from .edits import extract_content, replay, write_fvid
from .errors import (
    BadMagicError,
    DimensionError,
    FrameProvError,
    OrderingError,
    PaddingError,
    StateError,
    TruncatedError,
    VersionError,
)
from .vesl import EditorCheck, EditSignature, parse_vesl, verify_vesl_signature

VALID = "valid"
INVALID = "invalid"
PARTIAL = "partially-valid"
UNKNOWN_DEVICE = "unknown device key"

_PARSE_CODES = (
    (BadMagicError, "bad-magic"),
    (VersionError, "bad-version"),
    (TruncatedError, "truncated"),
    (PaddingError, "nonzero-padding"),
    (OrderingError, "snippet-order"),
)


def _parse_code(exc: Exception) -> str:
    for cls, code in _PARSE_CODES:
        if isinstance(exc, cls):
            return code
    return "malformed"


@dataclass
class StageReport:
    index: int
    editor: dict
    source_hash: str = "unchecked"  # ok | mismatch | missing | unchecked
    parse: str = "unchecked"
    replay: str = "unchecked"  # ok | error: ... | skipped
    output_hash: str | None = None

    def to_dict(self) -> dict:
        return {
            "index": self.index,
            "editor": self.editor,
            "parse": self.parse,
            "sourceHash": self.source_hash,
            "replay": self.replay,
            "outputHash": self.output_hash,
        }


@dataclass
class VerificationReport:
    verdict: str = INVALID
    failures: list[str] = field(default_factory=list)
    links_checked: int = 0
    broken_links: list[int] = field(default_factory=list)
    genesis_status: str = "unchecked"
    genesis: GenesisMetadata | None = None
    trailer_status: str = "unchecked"
    trailer: TrailerMetadata | None = None
    device_key_status: str = "unchecked"
    device_key_id: str | None = None
    device_owner: str | None = None
    final_signature: str = "unchecked"
    snippets: list[dict] = field(default_factory=list)
    container: str = "unchecked"
    stages: list[StageReport] = field(default_factory=list)
    video_hash: bytes | None = None
    replayed_hash: bytes | None = None

    @property
    def first_broken_link(self) -> int | None:
        return self.broken_links[0] if self.broken_links else None

    @property
    def ok(self) -> bool:
        return self.verdict == VALID

    def to_dict(self) -> dict:
        return {
            "verdict": self.verdict,
            "failures": list(self.failures),
            "chainLinks": {
                "checked": self.links_checked,
                "broken": list(self.broken_links),
                "firstBroken": self.first_broken_link,
            },
            "genesis": {
                "status": self.genesis_status,
                "metadata": None if self.genesis is None else self.genesis.to_dict(),
            },
            "trailer": {
                "status": self.trailer_status,
                "metadata": None if self.trailer is None else self.trailer.to_dict(),
            },
            "deviceKey": {
                "status": self.device_key_status,
                "keyId": self.device_key_id,
                "owner": self.device_owner,
            },
            "finalSignature": self.final_signature,
            "snippets": [dict(s) for s in self.snippets],
            "container": self.container,
            "stages": [s.to_dict() for s in self.stages],
            "videoHash": None if self.video_hash is None else self.video_hash.hex(),
            "replayedHash": None if self.replayed_hash is None else self.replayed_hash.hex(),
        }

    def to_json(self, indent: int | None = None) -> str:
        if indent is None:
            return json.dumps(self.to_dict(), separators=(",", ":"), ensure_ascii=False)
        return json.dumps(self.to_dict(), indent=indent, ensure_ascii=False)

    def render_text(self) -> str:
        lines = [f"verdict: {self.verdict}"]
        lines.append(f"chain links: {self.links_checked} checked, "
                     + (f"first broken at content frame {self.first_broken_link}"
                        if self.broken_links else "all intact"))
        lines.append(f"genesis: {self.genesis_status}")
        if self.genesis is not None:
            g = self.genesis
            lines.append(f"  device key {g.device_public_key.hex()}  timestamp {g.timestamp}  "
                         f"sequence {g.sequence_number}  sensor {g.sensor_id!r}")
        lines.append(f"trailer: {self.trailer_status}")
        if self.trailer is not None:
            t = self.trailer
            lines.append(f"  {t.content_count} content frames at {t.fps_num}/{t.fps_den} fps")
        owner = f" ({self.device_owner})" if self.device_owner else ""
        lines.append(f"device key: {self.device_key_status}{owner}")
        lines.append(f"final signature: {self.final_signature}")
        for snip in self.snippets:
            lines.append(f"snippet @ {snip['frameIndex']}: {snip['status']}")
        for stage in self.stages:
            ed = stage.editor
            who = ed.get("owner") or ed.get("keyId", "?")[:16]
            lines.append(f"stage {stage.index}: editor {ed.get('status')} [{who}], "
                         f"source {stage.source_hash}, replay {stage.replay}")
        if self.video_hash is not None:
            lines.append(f"video hash: {self.video_hash.hex()}")
        if self.replayed_hash is not None:
            lines.append(f"replayed hash: {self.replayed_hash.hex()}")
        if self.failures:
            lines.append("failures: " + ", ".join(self.failures))
        return "\n".join(lines)


# -- shared trailer-side checks ----------------------------------------------------


def _snippet_status(snippet: SnippetSignature, digests: Sequence[bytes], broken: Sequence[int],
                    content_count: int, device_key: bytes | None) -> str:
    k = snippet.frame_index
    if k >= content_count or k + 1 >= len(digests):
        return "out-of-range"
    if any(b <= k for b in broken):
        return "broken-link"
    if device_key is None:
        return "unchecked"
    ok = verify_signature(device_key, snippet.signature, snippet_message(digests[k + 1], k))
    return "valid" if ok else "bad-signature"


def _assemble(genesis_frame: Frame, digests: list[bytes], broken: list[int],
              trailer_frame: Frame, keystore, container_fps: tuple[int, int] | None) -> VerificationReport:
    """Build the report from link results plus the genesis and trailer frames.

    ``digests[i]`` is the digest of array ``i`` (genesis first), excluding the trailer.
    """
    report = VerificationReport(links_checked=len(digests) - 1, broken_links=list(broken))
    fail = report.failures
    content_count = len(digests) - 1
    if broken:
        fail.append(f"broken-link@{broken[0]}")

    try:
        report.genesis = parse_genesis(genesis_frame)
        report.genesis_status = "ok"
    except FrameProvError as exc:
        report.genesis_status = _parse_code(exc)
        fail.append(f"genesis-{report.genesis_status}")
    try:
        report.trailer = parse_trailer(trailer_frame)
        report.trailer_status = "ok"
    except FrameProvError as exc:
        report.trailer_status = _parse_code(exc)
        fail.append(f"trailer-{report.trailer_status}")

    device_key = None if report.genesis is None else report.genesis.device_public_key
    if device_key is not None:
        report.device_key_id = key_id(device_key)
        record = None if keystore is None else keystore.lookup(report.device_key_id)
        if record is None:
            report.device_key_status = UNKNOWN_DEVICE
        elif record.role != "device":
            report.device_key_status = "wrong-role"
            report.device_owner = record.owner
            fail.append("device-key-wrong-role")
        else:
            report.device_key_status = "registered"
            report.device_owner = record.owner

    trailer = report.trailer
    if trailer is not None:
        if trailer.content_count != content_count:
            fail.append("content-count-mismatch")
        if container_fps is not None:
            if (trailer.fps_num, trailer.fps_den) == tuple(container_fps):
                report.container = "ok"
            else:
                report.container = "fps-mismatch"
                fail.append("container-fps-mismatch")
        if device_key is not None and content_count >= 1:
            message = final_message(digests[-1], trailer.content_count, trailer.fps_num, trailer.fps_den)
            ok = verify_signature(device_key, trailer.final_signature, message)
            report.final_signature = "ok" if ok else "failed"
            if not ok:
                fail.append("final-signature")
        for snip in trailer.snippets:
            status = _snippet_status(snip, digests, broken, content_count, device_key)
            report.snippets.append({"frameIndex": snip.frame_index, "status": status})
            if status != "valid":
                fail.append(f"snippet@{snip.frame_index}-{status}")
    if report.final_signature == "unchecked" and "final-signature-unchecked" not in fail:
        fail.append("final-signature-unchecked")

    report.verdict = _verdict(report)
    return report


def _verdict(report: VerificationReport) -> str:
    if report.failures:
        return INVALID
    unidentified = any(s.editor.get("status") == "unidentified" for s in report.stages)
    if report.device_key_status == UNKNOWN_DEVICE or unidentified:
        return PARTIAL
    return VALID


# -- batch ---------------------------------------------------------------------------


def verify_chain(chain: FrameChain, keystore) -> VerificationReport:
    """Check every link in order, then the genesis, trailer, signatures and device key."""
    arrays = chain.arrays
    digests = [frame_digest(f) for f in arrays[:-1]]
    broken = [k for k, frame in enumerate(arrays[1:-1])
              if frame.row(0) != encode_hash_row(digests[k], chain.width)]
    return _assemble(arrays[0], digests, broken, arrays[-1], keystore,
                     (chain.fps_num, chain.fps_den))


# -- streaming -------------------------------------------------------------------------


class StreamVerifier:
    """Incremental verifier: feed content frames as they arrive, then the trailer.

    Link failures are reported by :meth:`feed` as soon as they occur. The
    report from :meth:`finalize` equals :func:`verify_chain` on the same arrays
    when ``fps`` is the container framerate.
    """

    def __init__(self, genesis: Frame, fps: tuple[int, int] | None = None) -> None:
        if genesis.width < 11 or genesis.height < 2:
            raise DimensionError(f"genesis frame {genesis.width}x{genesis.height} is too small for a chain")
        self.width = genesis.width
        self.height = genesis.height
        self._genesis = genesis
        self._fps = fps
        self._digests = [frame_digest(genesis)]
        self._broken: list[int] = []
        self.finalized = False

    @property
    def links_checked(self) -> int:
        return len(self._digests) - 1

    @property
    def first_broken_link(self) -> int | None:
        return self._broken[0] if self._broken else None

    def feed(self, frame: Frame) -> str:
        if self.finalized:
            raise StateError("verifier already finalized")
        index = len(self._digests) - 1
        intact = ((frame.width, frame.height) == (self.width, self.height)
                  and frame.pixels[:3 * self.width] == encode_hash_row(self._digests[-1], self.width))
        if not intact:
            self._broken.append(index)
        self._digests.append(frame_digest(frame))
        return "ok" if intact else "broken"

    def finalize(self, trailer: Frame, keystore) -> VerificationReport:
        if self.finalized:
            raise StateError("verifier already finalized")
        self.finalized = True
        return _assemble(self._genesis, self._digests, self._broken, trailer, keystore, self._fps)


def verifier_init(genesis: Frame, fps: tuple[int, int] | None = None) -> StreamVerifier:
    return StreamVerifier(genesis, fps)


def verifier_feed(sv: StreamVerifier, frame: Frame) -> str:
    return sv.feed(frame)


def verifier_finalize(sv: StreamVerifier, trailer: Frame, keystore) -> VerificationReport:
    return sv.finalize(trailer, keystore)


# -- snippets -------------------------------------------------------------------------------


def verify_snippet(arrays: Sequence[Frame], snippet: SnippetSignature, genesis_key: bytes,
                   content_count: int | None = None) -> str:
    """Status of one snippet given the chain prefix ``arrays`` (genesis first).

    Only links up to the snippet's frame are checked, so a valid snippet
    attests its prefix even when later frames are damaged or missing.
    Returns ``valid``, ``bad-signature``, ``broken-link`` or ``out-of-range``.
    """
    k = snippet.frame_index
    if (content_count is not None and k >= content_count) or len(arrays) < k + 2:
        return "out-of-range"
    prefix = arrays[:k + 2]
    digests = [frame_digest(f) for f in prefix]
    width = prefix[0].width
    for j, frame in enumerate(prefix[1:]):
        if frame.width != width or frame.row(0) != encode_hash_row(digests[j], width):
            return "broken-link"
    return _snippet_status(snippet, digests, [], k + 1, genesis_key)


# -- delayed verification --------------------------------------------------------------------


def delayed_verify(source: FrameChain, stages: Sequence[tuple[bytes, EditSignature]],
                   edited_video: bytes, keystore,
                   editor_keys: dict[str, bytes] | None = None) -> VerificationReport:
    """Verify an edited video by replaying every declared edit stage on the source chain.

    Stage 0 must be bound to the SHA-256 of the source ``.fchain`` bytes and
    each later stage to the SHA-256 of the previous stage's replayed ``.fvid``.
    ``editor_keys`` maps key ids to public keys for unregistered (pseudonymous)
    editors.
    """
    report = verify_chain(source, keystore)
    fail = report.failures
    if not stages:
        fail.append("no-edit-stages")
    current_hash = sha256(write_fchain(source))
    buf = extract_content(source)
    replayable = True

    for i, (vesl_bytes, signature) in enumerate(stages):
        check: EditorCheck = verify_vesl_signature(
            vesl_bytes, signature, keystore, (editor_keys or {}).get(signature.key_id))
        stage = StageReport(i, check.to_dict())
        report.stages.append(stage)
        if not check.ok:
            fail.append(f"stage{i}-editor-{check.status}")
        try:
            edit_list = parse_vesl(vesl_bytes)
            stage.parse = "ok"
        except FrameProvError as exc:
            stage.parse = f"error: {exc}"
            stage.replay = "skipped"
            fail.append(f"stage{i}-parse")
            replayable = False
            continue
        if edit_list.source_hash is None:
            stage.source_hash = "missing"
            fail.append(f"stage{i}-source-hash-missing")
        elif edit_list.source_hash != current_hash:
            stage.source_hash = "mismatch"
            fail.append(f"stage{i}-source-hash-mismatch")
        else:
            stage.source_hash = "ok"
        if not replayable:
            stage.replay = "skipped"
            continue
        try:
            buf = replay(buf, edit_list)
        except FrameProvError as exc:
            stage.replay = f"error: {exc}"
            fail.append(f"stage{i}-replay")
            replayable = False
            continue
        stage.replay = "ok"
        current_hash = sha256(write_fvid(buf))
        stage.output_hash = current_hash.hex()

    report.video_hash = sha256(edited_video)
    if replayable and stages:
        report.replayed_hash = current_hash
        if report.replayed_hash != report.video_hash:
            fail.append("video-hash-mismatch")
    report.verdict = _verdict(report)
    return report
