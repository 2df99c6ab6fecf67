import json
from pathlib import Path

import pytest
from hypothesis import given, settings, strategies as st

from frameprov.errors import (
    BadMagicError,
    ParameterError,
    RangeError,
    UnknownEditTypeError,
    VeslSyntaxError,
)
from frameprov.keystore import KeyStore
from frameprov.vesl import (
    Compression,
    EditList,
    EditSignature,
    FilterSpec,
    PlaybackSpeed,
    RangeDeletion,
    VideoFilter,
    canonicalize,
    parse_vesl,
    sign_vesl,
    validate_against_source,
    verify_vesl_signature,
)

from conftest import keypair_from

LISTING_1 = (Path(__file__).parent / "data" / "listing1.vesl").read_bytes()
SRC = bytes(range(32))


def canonical_doc(edits, source=SRC):
    doc = {"veslVersion": "1.0", "edits": edits}
    if source is not None:
        doc["sourceHash"] = source.hex()
    return json.dumps(doc)


def test_listing_1_parses():
    el = parse_vesl(LISTING_1)
    assert len(el.edits) == 3
    deletion, filters, compression = el.edits
    assert deletion == RangeDeletion(1250, 1500)
    assert filters == VideoFilter((
        FilterSpec("alpha", 2010, 2020, {}),
        FilterSpec("atadenoise", 2040, 2090, {"0b": "1.6"}),
    ))
    assert compression == Compression("H.264", {"CRF": "27", "preset": "veryfast", "twopass": "true"})
    assert el.source_hash is None


def test_listing_1_needs_lenient_mode():
    # the listing omits a comma after "H.264"; strict parsing must point at it
    from frameprov import _jsonish
    with pytest.raises(VeslSyntaxError) as info:
        _jsonish.parse(LISTING_1.decode(), lenient=False)
    assert info.value.line == 27


def test_single_deletion_canonical():
    el = parse_vesl(canonical_doc([{"editType": "rangeDeletion",
                                    "rangeDeletionParams": {"fromFrame": "0", "toFrame": "0"}}]))
    assert el.edits == (RangeDeletion(0, 0),)
    assert el.source_hash == SRC


def test_inverted_range_error_has_position():
    text = '{\n  "editType": "rangeDeletion",\n  "rangeDeletionParams": {"fromFrame": "10", "toFrame": "5"}\n}'
    with pytest.raises(RangeError) as info:
        parse_vesl(text)
    assert info.value.line == 3


@pytest.mark.parametrize("text, exc", [
    ('{"editType": "zoom", "zoomParams": {}}', UnknownEditTypeError),
    ('{"editType": "rangeDeletion", "rangeDeletionParams": {"fromFrame": "1"}}', ParameterError),
    ('{"editType": "rangeDeletion", "rangeDeletionParams": {"fromFrame": "1", "toFrame": "2", "x": "1"}}',
     ParameterError),
    ('{"editType": "rangeDeletion"}', ParameterError),
    ('{"editType": "rangeDeletion", "rangeDeletionParams": {"fromFrame": "a", "toFrame": "2"}}',
     ParameterError),
    ('{"editType": "playbackSpeed", "playbackSpeedParams": {"factorNum": "0", "factorDen": "1"}}',
     ParameterError),
    ('{"editType": "videoFilter", "videoFilterParams": [{"filterType": "brightness", '
     '"typeParams": {"offset": "300"}}]}', ParameterError),
    ('{"editType": "compression", "compressionParams": {"algorithm": "quant8", '
     '"algorithmParams": {"q": "3"}}}', ParameterError),
    ('{"edits": []}', ParameterError),
    ('{"editType": "rangeDeletion", "rangeDeletionParams": {"fromFrame": "1", "toFrame": "2"},}',
     VeslSyntaxError),
    ('[1, 2]', VeslSyntaxError),
    ('{"veslVersion": "2.0", "editType": "compression", "compressionParams": {"algorithm": "none"}}',
     Exception),
])
def test_parse_errors(text, exc):
    with pytest.raises(exc):
        parse_vesl(text)


def test_key_order_does_not_change_canonical_bytes():
    a = ('{"sourceHash": "%s", "edits": [{"rangeDeletionParams": {"toFrame": "4", "fromFrame": "2"},'
         ' "editType": "rangeDeletion"}]}' % SRC.hex())
    b = ('{"edits": [{"editType": "rangeDeletion", "rangeDeletionParams": {"fromFrame": "2",'
         ' "toFrame": "4"}}], "veslVersion": "1.0", "sourceHash": "%s"}' % SRC.hex().upper())
    assert canonicalize(parse_vesl(a)) == canonicalize(parse_vesl(b))


def test_listing_style_equals_canonical_style():
    canonical = json.dumps({"edits": [
        {"editType": "rangeDeletion", "rangeDeletionParams": {"fromFrame": "1250", "toFrame": "1500"}},
        {"editType": "videoFilter", "videoFilterParams": [
            {"filterType": "alpha", "fromFrame": "2010", "toFrame": "2020", "typeParams": {}},
            {"filterType": "atadenoise", "fromFrame": "2040", "toFrame": "2090",
             "typeParams": {"0b": "1.6"}}]},
        {"editType": "compression", "compressionParams": {
            "algorithm": "H.264",
            "algorithmParams": {"CRF": "27", "preset": "veryfast", "twopass": "true"}}},
    ]})
    assert canonicalize(parse_vesl(LISTING_1)) == canonicalize(parse_vesl(canonical))


def test_numbers_are_normalised_to_decimal_strings():
    a = parse_vesl('{"editType": "rangeDeletion", "rangeDeletionParams": {"fromFrame": 3, "toFrame": "007"}}')
    assert a.edits == (RangeDeletion(3, 7),)
    assert b'"toFrame":"7"' in canonicalize(a)


range_st = st.tuples(st.integers(0, 5000), st.integers(0, 5000)).map(sorted)
opt_range_st = st.none() | range_st
filter_st = st.one_of(
    st.builds(lambda r: FilterSpec("grayscale", *(r or (None, None)), {}), opt_range_st),
    st.builds(lambda r, o: FilterSpec("brightness", *(r or (None, None)), {"offset": str(o)}),
              opt_range_st, st.integers(-255, 255)),
    st.builds(lambda r, v: FilterSpec("boxblur", *(r or (None, None)), {"radius": str(v)}),
              opt_range_st, st.integers(1, 9)),
    st.builds(lambda r, xs: FilterSpec("blackout", *(r or (None, None)),
                                       dict(zip("xywh", map(str, xs)))),
              opt_range_st, st.tuples(st.integers(0, 50), st.integers(0, 50),
                                      st.integers(1, 50), st.integers(1, 50))),
    st.builds(lambda r, name: FilterSpec(name, *(r or (None, None)), {"k": "v"}),
              opt_range_st, st.sampled_from(["alpha", "atadenoise"])),
)
edit_st = st.one_of(
    st.builds(lambda r: RangeDeletion(*r), range_st),
    st.builds(lambda n, d, r: PlaybackSpeed(n, d, *(r or (None, None))),
              st.integers(1, 8), st.integers(1, 8), opt_range_st),
    st.builds(lambda fs: VideoFilter(tuple(fs)), st.lists(filter_st, min_size=1, max_size=3)),
    st.builds(lambda q: Compression("quant8", {"q": str(q)}), st.sampled_from([2, 4, 8, 16, 32, 64])),
    st.just(Compression("none")),
    st.just(Compression("H.264", {"CRF": "27"})),
)
edit_list_st = st.builds(
    EditList, st.lists(edit_st, min_size=1, max_size=5).map(tuple),
    st.none() | st.binary(min_size=32, max_size=32),
)


@given(edit_list_st)
def test_parse_canonicalize_identity(el):
    canon = canonicalize(el)
    assert parse_vesl(canon) == el
    assert canonicalize(parse_vesl(canon)) == canon


# -- validation --------------------------------------------------------------------


def bound_listing_1(source=SRC):
    return parse_vesl(LISTING_1).bound_to(source)


def test_source_mismatch():
    result = validate_against_source(bound_listing_1(), 3000, bytes(32))
    assert "source-mismatch" in result.codes()


def test_listing_1_against_3000_frames():
    # bounds and codec are fine; the two placeholder filters are the only issues
    result = validate_against_source(bound_listing_1(), 3000, SRC)
    assert result.codes() == ["unsupported-filter", "unsupported-filter"]
    assert result.final_count == 2749


def test_listing_1_with_supported_filters_is_valid():
    text = LISTING_1.replace(b'"alpha"', b'"grayscale"').replace(b'"atadenoise"', b'"brightness"')
    text = text.replace(b'"0b" : "1.6"', b'"offset" : "10"')
    result = validate_against_source(parse_vesl(text).bound_to(SRC), 3000, SRC)
    assert result.ok, result.issues


def test_delete_everything():
    last = EditList((RangeDeletion(0, 9),), SRC)
    assert validate_against_source(last, 10, SRC).codes() == ["empty-output"]
    then = EditList((RangeDeletion(0, 9), Compression("none"), RangeDeletion(0, 0)), SRC)
    assert validate_against_source(then, 10, SRC).codes() == ["out-of-bounds", "out-of-bounds"]


def test_indices_follow_pipeline_state():
    # after deleting 5 of 10 frames, index 5 no longer exists
    el = EditList((RangeDeletion(0, 4), RangeDeletion(5, 5)), SRC)
    result = validate_against_source(el, 10, SRC)
    assert result.codes() == ["out-of-bounds"]
    assert result.issues[0].edit_index == 1
    slowed = EditList((PlaybackSpeed(1, 2, 0, 4), RangeDeletion(14, 14)), SRC)
    assert validate_against_source(slowed, 10, SRC).ok


def test_unknown_codec_and_blackout_rect():
    el = EditList((Compression("mystery"),
                   VideoFilter((FilterSpec("blackout", None, None, {"x": "10", "y": "0", "w": "10", "h": "1"}),))),
                  SRC)
    assert validate_against_source(el, 3, SRC, frame_size=(16, 11)).codes() == [
        "unsupported-codec", "rect-out-of-frame"]


# -- signatures ---------------------------------------------------------------------


@pytest.fixture
def editor_store(editor_key):
    store = KeyStore()
    store.register(editor_key.public_key, "editor", "Desk B", 5)
    return store


def test_sign_then_verify(editor_key, editor_store):
    sig = sign_vesl(LISTING_1, editor_key)
    check = verify_vesl_signature(LISTING_1, sig, editor_store)
    assert check.status == "verified"
    assert check.record.owner == "Desk B"


def test_signature_file_round_trip(editor_key):
    sig = sign_vesl(LISTING_1, editor_key)
    raw = sig.to_bytes()
    assert len(raw) == 101 and raw[:5] == b"FPSV\x01"
    assert EditSignature.from_bytes(raw) == sig
    with pytest.raises(BadMagicError):
        EditSignature.from_bytes(b"XXXX" + raw[4:])


def test_any_byte_flip_breaks_signature(editor_key, editor_store):
    sig = sign_vesl(LISTING_1, editor_key)
    for pos in range(0, len(LISTING_1), 7):
        mutated = bytearray(LISTING_1)
        mutated[pos] ^= 0x01
        assert verify_vesl_signature(bytes(mutated), sig, editor_store).status == "bad-signature"


def test_unregistered_editor_is_unidentified(editor_store):
    stranger = keypair_from("pseudonym")
    sig = sign_vesl(LISTING_1, stranger)
    assert verify_vesl_signature(LISTING_1, sig, editor_store).status == "unknown-key"
    check = verify_vesl_signature(LISTING_1, sig, editor_store, stranger.public_key)
    assert check.status == "unidentified" and check.ok


def test_device_key_cannot_sign_edits(device_key, editor_store):
    editor_store.register(device_key.public_key, "device", "cam", 6)
    sig = sign_vesl(LISTING_1, device_key)
    assert verify_vesl_signature(LISTING_1, sig, editor_store).status == "wrong-role"
