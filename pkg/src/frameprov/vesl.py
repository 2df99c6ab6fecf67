"""Video Edit Specification Language: parsing, canonical form, validation, signatures.

Two document styles are accepted. The canonical style holds an ordered array::

    {"edits": [{"editType": "rangeDeletion",
                "rangeDeletionParams": {"fromFrame": "0", "toFrame": "9"}}],
     "sourceHash": "<64 hex>", "veslVersion": "1.0"}

The document-order style repeats ``"editType"`` at the top level, each
followed by its ``"<editType>Params"`` member; edits are taken in the order
they appear. Frame numbers are 0-based content indices and always refer to the
stream as already transformed by the preceding edits.

Canonical bytes are compact UTF-8 JSON with sorted keys and every number
written as a decimal string. Signatures cover the exact file bytes, not the
canonical form.
"""

from __future__ import annotations

import json
import re
import struct
from dataclasses import dataclass, field
from typing import Union

from . import _jsonish
from .crypto import DIGEST_SIZE, PUBLIC_KEY_SIZE, SIGNATURE_SIZE, KeyPair, key_id, verify_signature
from .errors import (
    BadMagicError,
    LengthError,
    ParameterError,
    RangeError,
    UnknownEditTypeError,
    VersionError,
    VeslError,
    VeslSyntaxError,
)

VESL_VERSION = "1.0"

FILTER_PARAMS = {
    "grayscale": (),
    "brightness": ("offset",),
    "blackout": ("x", "y", "w", "h"),
    "boxblur": ("radius",),
}
SUPPORTED_FILTERS = frozenset(FILTER_PARAMS)
REPLAYABLE_CODECS = frozenset({"none", "quant8"})
# Recognised for provenance bookkeeping; only REPLAYABLE_CODECS can be replayed.
KNOWN_CODECS = REPLAYABLE_CODECS | {"H.264", "H.265", "HEVC", "VP8", "VP9", "AV1", "MPEG-4"}
QUANT8_STEPS = (2, 4, 8, 16, 32, 64)

_INT = re.compile(r"-?[0-9]+")


# -- edit model ---------------------------------------------------------------


@dataclass(frozen=True)
class RangeDeletion:
    from_frame: int
    to_frame: int


@dataclass(frozen=True)
class PlaybackSpeed:
    """Resample a range by ``factor_num / factor_den`` (2/1 plays twice as fast).

    A missing range covers the whole stream.
    """

    factor_num: int
    factor_den: int
    from_frame: int | None = None
    to_frame: int | None = None


@dataclass(frozen=True)
class FilterSpec:
    filter_type: str
    from_frame: int | None = None
    to_frame: int | None = None
    type_params: dict = field(default_factory=dict)


@dataclass(frozen=True)
class VideoFilter:
    filters: tuple[FilterSpec, ...]


@dataclass(frozen=True)
class Compression:
    algorithm: str
    algorithm_params: dict = field(default_factory=dict)


Edit = Union[RangeDeletion, PlaybackSpeed, VideoFilter, Compression]

EDIT_TYPES = {
    "rangeDeletion": RangeDeletion,
    "playbackSpeed": PlaybackSpeed,
    "videoFilter": VideoFilter,
    "compression": Compression,
}
_EDIT_TYPE_NAMES = {cls: name for name, cls in EDIT_TYPES.items()}


def edit_type_name(edit: Edit) -> str:
    return _EDIT_TYPE_NAMES[type(edit)]


@dataclass(frozen=True)
class EditList:
    edits: tuple[Edit, ...]
    source_hash: bytes | None = None
    vesl_version: str = VESL_VERSION

    def __post_init__(self) -> None:
        object.__setattr__(self, "edits", tuple(self.edits))
        if not self.edits:
            raise VeslError("an edit list needs at least one edit")
        if self.source_hash is not None and len(self.source_hash) != DIGEST_SIZE:
            raise VeslError("sourceHash must be 32 bytes")

    def bound_to(self, source_hash: bytes) -> EditList:
        return EditList(self.edits, source_hash, self.vesl_version)


def resolve_range(from_frame: int | None, to_frame: int | None, count: int) -> tuple[int, int]:
    """Apply the whole-stream default for unspecified ranges."""
    return (0 if from_frame is None else from_frame,
            count - 1 if to_frame is None else to_frame)


# -- parsing ------------------------------------------------------------------


def _err(cls, message: str, node: _jsonish.Node, path: str):
    return cls(message, line=node.line, column=node.column, path=path)


def _members(node: _jsonish.Node, path: str, required: tuple, optional: tuple = ()) -> dict:
    if not isinstance(node, _jsonish.ObjectNode):
        raise _err(ParameterError, "expected an object", node, path)
    seen: dict[str, _jsonish.Node] = {}
    for key, line, col, value in node.pairs:
        if key in seen:
            raise ParameterError(f"duplicate key {key!r}", line=line, column=col, path=path)
        if key not in required and key not in optional:
            raise ParameterError(f"unexpected parameter {key!r}", line=line, column=col, path=path)
        seen[key] = value
    missing = [k for k in required if k not in seen]
    if missing:
        raise _err(ParameterError, f"missing parameter(s) {', '.join(map(repr, missing))}", node, path)
    return seen


def _int(node: _jsonish.Node, path: str, *, minimum: int | None = None,
         maximum: int | None = None) -> int:
    value = node.value
    if isinstance(value, str) and _INT.fullmatch(value.strip()):
        number = int(value.strip())
    elif isinstance(value, int) and not isinstance(value, bool):
        number = value
    else:
        raise _err(ParameterError, f"expected an integer, got {value!r}", node, path)
    if minimum is not None and number < minimum:
        raise _err(ParameterError, f"{number} is below the minimum {minimum}", node, path)
    if maximum is not None and number > maximum:
        raise _err(ParameterError, f"{number} is above the maximum {maximum}", node, path)
    return number


def _string(node: _jsonish.Node, path: str) -> str:
    if not isinstance(node.value, str):
        raise _err(ParameterError, f"expected a string, got {node.value!r}", node, path)
    return node.value


def _string_map(node: _jsonish.Node, path: str) -> dict[str, str]:
    if not isinstance(node, _jsonish.ObjectNode):
        raise _err(ParameterError, "expected an object of string values", node, path)
    out: dict[str, str] = {}
    for key, line, col, value in node.pairs:
        if key in out:
            raise ParameterError(f"duplicate key {key!r}", line=line, column=col, path=path)
        if isinstance(value.value, str):
            out[key] = value.value
        elif value.literal is not None:
            out[key] = value.literal
        elif isinstance(value.value, bool):
            out[key] = "true" if value.value else "false"
        else:
            raise _err(ParameterError, f"parameter {key!r} must be a string", value, f"{path}.{key}")
    return out


def _range(members: dict, path: str, node: _jsonish.Node, *, required: bool) -> tuple:
    lo = members.get("fromFrame")
    hi = members.get("toFrame")
    if (lo is None) != (hi is None):
        raise _err(ParameterError, "fromFrame and toFrame must be given together", node, path)
    if lo is None:
        if required:
            raise _err(ParameterError, "a frame range is required", node, path)
        return None, None
    start = _int(lo, f"{path}.fromFrame", minimum=0)
    end = _int(hi, f"{path}.toFrame", minimum=0)
    if start > end:
        raise _err(RangeError, f"fromFrame {start} is after toFrame {end}", lo, path)
    return start, end


def _filter_params(filter_type: str, raw: dict[str, str], node: _jsonish.Node, path: str) -> dict:
    if filter_type not in FILTER_PARAMS:
        return raw  # parsed, but rejected at validation time
    expected = FILTER_PARAMS[filter_type]
    if set(raw) != set(expected):
        raise _err(ParameterError,
                   f"{filter_type} takes parameters {list(expected)}, got {sorted(raw)}", node, path)
    fake = {k: _jsonish.Node(v, node.line, node.column) for k, v in raw.items()}
    if filter_type == "brightness":
        values = {"offset": _int(fake["offset"], f"{path}.offset", minimum=-255, maximum=255)}
    elif filter_type == "blackout":
        values = {k: _int(fake[k], f"{path}.{k}", minimum=0) for k in ("x", "y")}
        values.update({k: _int(fake[k], f"{path}.{k}", minimum=1) for k in ("w", "h")})
    elif filter_type == "boxblur":
        values = {"radius": _int(fake["radius"], f"{path}.radius", minimum=1)}
    else:
        values = {}
    return {k: str(v) for k, v in values.items()}


def _parse_edit(edit_type: str, type_node: _jsonish.Node, params: _jsonish.Node | None,
                path: str) -> Edit:
    if edit_type not in EDIT_TYPES:
        raise _err(UnknownEditTypeError, f"unknown editType {edit_type!r}", type_node, path)
    ppath = f"{path}.{edit_type}Params"
    if params is None:
        raise _err(ParameterError, f"missing {edit_type}Params", type_node, path)

    if edit_type == "rangeDeletion":
        members = _members(params, ppath, ("fromFrame", "toFrame"))
        return RangeDeletion(*_range(members, ppath, params, required=True))

    if edit_type == "playbackSpeed":
        members = _members(params, ppath, ("factorNum", "factorDen"), ("fromFrame", "toFrame"))
        num = _int(members["factorNum"], f"{ppath}.factorNum", minimum=1)
        den = _int(members["factorDen"], f"{ppath}.factorDen", minimum=1)
        return PlaybackSpeed(num, den, *_range(members, ppath, params, required=False))

    if edit_type == "videoFilter":
        if not isinstance(params, _jsonish.ArrayNode) or not params.items:
            raise _err(ParameterError, "videoFilterParams must be a non-empty array", params, ppath)
        filters = []
        for i, item in enumerate(params.items):
            fpath = f"{ppath}[{i}]"
            members = _members(item, fpath, ("filterType",), ("fromFrame", "toFrame", "typeParams"))
            ftype = _string(members["filterType"], f"{fpath}.filterType")
            lo, hi = _range(members, fpath, item, required=False)
            tp_node = members.get("typeParams")
            raw = {} if tp_node is None else _string_map(tp_node, f"{fpath}.typeParams")
            tparams = _filter_params(ftype, raw, tp_node or item, f"{fpath}.typeParams")
            filters.append(FilterSpec(ftype, lo, hi, tparams))
        return VideoFilter(tuple(filters))

    members = _members(params, ppath, ("algorithm",), ("algorithmParams",))
    algorithm = _string(members["algorithm"], f"{ppath}.algorithm")
    ap_node = members.get("algorithmParams")
    aparams = {} if ap_node is None else _string_map(ap_node, f"{ppath}.algorithmParams")
    if algorithm == "quant8":
        if set(aparams) != {"q"}:
            raise _err(ParameterError, "quant8 takes exactly the parameter 'q'", ap_node or params, ppath)
        q = _int(_jsonish.Node(aparams["q"], (ap_node or params).line, (ap_node or params).column),
                 f"{ppath}.algorithmParams.q")
        if q not in QUANT8_STEPS:
            raise _err(ParameterError, f"quant8 step must be one of {QUANT8_STEPS}, got {q}",
                       ap_node or params, ppath)
        aparams = {"q": str(q)}
    elif algorithm == "none" and aparams:
        raise _err(ParameterError, "compression 'none' takes no parameters", ap_node, ppath)
    return Compression(algorithm, aparams)


def _parse_header_field(key: str, node: _jsonish.Node, header: dict) -> None:
    if key in header:
        raise _err(ParameterError, f"duplicate key {key!r}", node, key)
    value = _string(node, key)
    if key == "veslVersion":
        if value != VESL_VERSION:
            raise _err(VeslError, f"unsupported veslVersion {value!r}", node, key)
        header[key] = value
    else:
        if not re.fullmatch(r"[0-9a-fA-F]{64}", value):
            raise _err(ParameterError, "sourceHash must be 64 hex digits", node, key)
        header[key] = bytes.fromhex(value)


def parse_vesl(data: bytes | str) -> EditList:
    """Parse either document style into a validated :class:`EditList`."""
    if isinstance(data, bytes):
        try:
            text = data.decode("utf-8")
        except UnicodeDecodeError as exc:
            raise VeslSyntaxError(f"not UTF-8: {exc}") from None
    else:
        text = data
    root = _jsonish.parse(text.lstrip("﻿"))
    if not isinstance(root, _jsonish.ObjectNode):
        raise _err(VeslSyntaxError, "a VESL document must be an object", root, "$")

    header: dict = {}
    edits: list[Edit] = []
    array_style = any(k == "edits" for k, *_ in root.pairs)
    pending: tuple[str, _jsonish.Node] | None = None

    for key, line, col, value in root.pairs:
        here = _jsonish.Node(None, line, col)
        if key in ("veslVersion", "sourceHash"):
            _parse_header_field(key, value, header)
            continue
        if array_style:
            if key != "edits":
                raise ParameterError(f"unexpected top-level key {key!r}", line=line, column=col, path="$")
            if edits:
                raise ParameterError("duplicate 'edits' array", line=line, column=col, path="$")
            if not isinstance(value, _jsonish.ArrayNode):
                raise _err(ParameterError, "'edits' must be an array", value, "edits")
            for i, item in enumerate(value.items):
                path = f"edits[{i}]"
                if not isinstance(item, _jsonish.ObjectNode):
                    raise _err(ParameterError, "each edit must be an object", item, path)
                type_nodes = [v for k, _, _, v in item.pairs if k == "editType"]
                if len(type_nodes) != 1:
                    raise _err(ParameterError, "each edit needs exactly one editType", item, path)
                etype = _string(type_nodes[0], f"{path}.editType")
                others = [(k, l, c, v) for k, l, c, v in item.pairs if k != "editType"]
                if etype in EDIT_TYPES and (len(others) != 1 or others[0][0] != f"{etype}Params"):
                    raise _err(ParameterError, f"edit must contain exactly editType and {etype}Params",
                               item, path)
                edits.append(_parse_edit(etype, type_nodes[0], others[0][3] if others else None, path))
            continue
        # document-order style
        path = f"edits[{len(edits)}]"
        if key == "editType":
            if pending is not None:
                raise _err(ParameterError, f"missing {pending[0]}Params", pending[1], path)
            pending = (_string(value, f"{path}.editType"), value)
            if pending[0] not in EDIT_TYPES:
                raise _err(UnknownEditTypeError, f"unknown editType {pending[0]!r}", value, path)
        elif pending is not None and key == f"{pending[0]}Params":
            edits.append(_parse_edit(pending[0], pending[1], value, path))
            pending = None
        else:
            raise _err(ParameterError, f"unexpected key {key!r}", here, path)
    if pending is not None:
        raise _err(ParameterError, f"missing {pending[0]}Params", pending[1], f"edits[{len(edits)}]")
    if not edits:
        raise _err(ParameterError, "document declares no edits", root, "$")
    return EditList(tuple(edits), header.get("sourceHash"), header.get("veslVersion", VESL_VERSION))


# -- canonical form -----------------------------------------------------------


def _range_dict(lo: int | None, hi: int | None) -> dict:
    return {} if lo is None else {"fromFrame": str(lo), "toFrame": str(hi)}


def edit_to_dict(edit: Edit) -> dict:
    name = edit_type_name(edit)
    if isinstance(edit, RangeDeletion):
        params: object = _range_dict(edit.from_frame, edit.to_frame)
    elif isinstance(edit, PlaybackSpeed):
        params = {"factorNum": str(edit.factor_num), "factorDen": str(edit.factor_den),
                  **_range_dict(edit.from_frame, edit.to_frame)}
    elif isinstance(edit, VideoFilter):
        params = [{"filterType": f.filter_type, **_range_dict(f.from_frame, f.to_frame),
                   "typeParams": dict(f.type_params)} for f in edit.filters]
    else:
        params = {"algorithm": edit.algorithm, "algorithmParams": dict(edit.algorithm_params)}
    return {"editType": name, f"{name}Params": params}


def to_document(edit_list: EditList) -> dict:
    doc: dict = {"veslVersion": edit_list.vesl_version}
    if edit_list.source_hash is not None:
        doc["sourceHash"] = edit_list.source_hash.hex()
    doc["edits"] = [edit_to_dict(e) for e in edit_list.edits]
    return doc


def canonicalize(edit_list: EditList) -> bytes:
    return json.dumps(to_document(edit_list), sort_keys=True, separators=(",", ":"),
                      ensure_ascii=False).encode("utf-8")


# -- validation against a concrete source --------------------------------------


@dataclass(frozen=True)
class ValidationIssue:
    code: str  # source-mismatch | missing-source-hash | out-of-bounds | empty-output | unsupported-filter | unsupported-codec | rect-out-of-frame
    message: str
    edit_index: int | None = None


@dataclass(frozen=True)
class ValidationResult:
    issues: tuple[ValidationIssue, ...] = ()
    final_count: int | None = None

    @property
    def ok(self) -> bool:
        return not self.issues

    def codes(self) -> list[str]:
        return [i.code for i in self.issues]


def speed_output_length(length: int, factor_num: int, factor_den: int) -> int:
    return -(-length * factor_den // factor_num)


def validate_against_source(edit_list: EditList, content_count: int, source_digest: bytes,
                            frame_size: tuple[int, int] | None = None) -> ValidationResult:
    """Check source binding, index bounds through the pipeline, and the filter/codec registries.

    Returns every issue found rather than stopping at the first one.
    ``frame_size`` as ``(width, height)`` enables blackout rectangle checks.
    """
    issues: list[ValidationIssue] = []
    if edit_list.source_hash is None:
        issues.append(ValidationIssue("missing-source-hash", "edit list is not bound to a source"))
    elif edit_list.source_hash != source_digest:
        issues.append(ValidationIssue(
            "source-mismatch",
            f"edit list targets {edit_list.source_hash.hex()}, source is {source_digest.hex()}"))

    count = content_count
    last = len(edit_list.edits) - 1

    def bounds(i: int, lo: int | None, hi: int | None, what: str) -> tuple[int, int] | None:
        lo, hi = resolve_range(lo, hi, count)
        if count == 0 or hi >= count:
            issues.append(ValidationIssue(
                "out-of-bounds", f"{what} range {lo}..{hi} exceeds {count} frames", i))
            return None
        return lo, hi

    for i, edit in enumerate(edit_list.edits):
        if count == 0:
            issues.append(ValidationIssue("out-of-bounds", "stream is already empty", i))
            continue
        if isinstance(edit, RangeDeletion):
            if bounds(i, edit.from_frame, edit.to_frame, "deletion"):
                count -= edit.to_frame - edit.from_frame + 1
                if count == 0 and i == last:
                    issues.append(ValidationIssue("empty-output", "edits delete every frame", i))
        elif isinstance(edit, PlaybackSpeed):
            rng = bounds(i, edit.from_frame, edit.to_frame, "playbackSpeed")
            if rng:
                length = rng[1] - rng[0] + 1
                count += speed_output_length(length, edit.factor_num, edit.factor_den) - length
        elif isinstance(edit, VideoFilter):
            for spec in edit.filters:
                bounds(i, spec.from_frame, spec.to_frame, f"filter {spec.filter_type!r}")
                if spec.filter_type not in SUPPORTED_FILTERS:
                    issues.append(ValidationIssue(
                        "unsupported-filter", f"filter {spec.filter_type!r} is not supported", i))
                elif spec.filter_type == "blackout" and frame_size is not None:
                    p = {k: int(v) for k, v in spec.type_params.items()}
                    width, height = frame_size
                    if p["x"] + p["w"] > width or p["y"] + p["h"] > height:
                        issues.append(ValidationIssue(
                            "rect-out-of-frame", f"blackout rectangle exceeds {width}x{height}", i))
        elif edit.algorithm not in KNOWN_CODECS:
            issues.append(ValidationIssue(
                "unsupported-codec", f"compression algorithm {edit.algorithm!r} is not recognised", i))
    return ValidationResult(tuple(issues), count)


# -- detached signatures ------------------------------------------------------

SIG_MAGIC = b"FPSV"
SIG_VERSION = 1
_SIG = struct.Struct("<4sB32s64s")


@dataclass(frozen=True)
class EditSignature:
    editor_key_id: bytes  # raw 32-byte SHA-256 of the editor public key
    signature: bytes = field(repr=False)

    @property
    def key_id(self) -> str:
        return self.editor_key_id.hex()

    def to_bytes(self) -> bytes:
        return _SIG.pack(SIG_MAGIC, SIG_VERSION, self.editor_key_id, self.signature)

    @classmethod
    def from_bytes(cls, data: bytes) -> EditSignature:
        if data[:4] != SIG_MAGIC:
            raise BadMagicError(f"expected signature magic {SIG_MAGIC!r}, got {data[:4]!r}")
        if len(data) != _SIG.size:
            raise LengthError(f"signature file must be {_SIG.size} bytes, got {len(data)}")
        _, version, kid, sig = _SIG.unpack(data)
        if version != SIG_VERSION:
            raise VersionError(f"unsupported signature version {version}")
        return cls(kid, sig)


def sign_vesl(data: bytes, editor: KeyPair) -> EditSignature:
    return EditSignature(bytes.fromhex(editor.key_id), editor.sign(data))


@dataclass(frozen=True)
class EditorCheck:
    """Outcome of checking a VESL signature.

    status is one of ``verified`` (registered editor, good signature),
    ``unidentified`` (good signature from an unregistered key),
    ``bad-signature``, ``unknown-key`` (unregistered and no public key given,
    so nothing could be checked) or ``wrong-role`` (key registered as a device).
    """

    status: str
    key_id: str
    record: object = None

    @property
    def ok(self) -> bool:
        return self.status in ("verified", "unidentified")

    def to_dict(self) -> dict:
        rec = self.record
        return {
            "status": self.status,
            "keyId": self.key_id,
            "owner": None if rec is None else rec.owner,
        }


def verify_vesl_signature(data: bytes, sig: EditSignature, keystore,
                          public_key: bytes | None = None) -> EditorCheck:
    """Check ``sig`` over the exact bytes ``data``.

    Unregistered editors are ephemeral pseudonyms: pass their ``public_key``
    to check the signature; success is reported as ``unidentified``.
    """
    kid = sig.key_id
    record = keystore.lookup(kid) if keystore is not None else None
    if record is not None:
        if record.role != "editor":
            return EditorCheck("wrong-role", kid, record)
        ok = verify_signature(record.public_key, sig.signature, data)
        return EditorCheck("verified" if ok else "bad-signature", kid, record)
    if public_key is None or len(public_key) != PUBLIC_KEY_SIZE or key_id(public_key) != kid:
        return EditorCheck("unknown-key", kid)
    ok = verify_signature(public_key, sig.signature, data)
    return EditorCheck("unidentified" if ok else "bad-signature", kid)


SIGNATURE_FILE_SIZE = _SIG.size
