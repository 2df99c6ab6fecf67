import pytest

from frameprov.core import (
    Frame,
    broken_links,
    encode_hash_row,
    frame_digest,
    parse_trailer,
    write_fchain,
)
from frameprov.errors import DimensionError, StateError, StructureError
from frameprov.tee import SessionState, tee_feed, tee_mark_snippet, tee_start, tee_stop
from frameprov.verify import verify_chain

from conftest import keypair_from, random_frames


def start(key, width=64, height=48):
    return tee_start(key, "cam-1", 1_700_000_000, 3, width, height)


def test_start_accumulates_genesis(device_key):
    session = start(device_key)
    assert session.state is SessionState.RECORDING
    assert len(session.arrays) == 1
    assert session.last_digest == frame_digest(session.arrays[0])


def test_start_rejects_narrow_frames(device_key):
    with pytest.raises(DimensionError):
        start(device_key, width=8)


def test_identical_starts_are_byte_identical(device_key):
    assert start(device_key).arrays[0] == start(device_key).arrays[0]


def test_first_feed_embeds_genesis_digest(device_key, rng):
    session = start(device_key)
    genesis = session.arrays[0]
    (raw,) = random_frames(rng, 1, 64, 48)
    chained = tee_feed(session, raw)
    assert chained.row(0) == encode_hash_row(frame_digest(genesis), 64)
    assert chained.pixels[3 * 64:] == raw.pixels[3 * 64:]


def test_feeding_k_frames_keeps_chain_property(device_key, rng):
    session = start(device_key, 16, 11)
    for frame in random_frames(rng, 9, 16, 11):
        tee_feed(session, frame)
    assert broken_links(session.arrays + (Frame.blank(16, 11),)) == []


def test_feed_dimension_mismatch_does_not_mutate(device_key):
    session = start(device_key)
    with pytest.raises(DimensionError):
        tee_feed(session, Frame.blank(16, 11))
    assert len(session.arrays) == 1


def test_feed_after_stop(device_key, rng):
    session = start(device_key, 16, 11)
    tee_feed(session, random_frames(rng, 1, 16, 11)[0])
    tee_stop(session, 30, 1)
    with pytest.raises(StateError):
        tee_feed(session, Frame.blank(16, 11))
    with pytest.raises(StateError):
        tee_stop(session, 30, 1)


def test_mark_snippet(device_key, rng):
    session = start(device_key, 16, 11)
    with pytest.raises(StateError):
        tee_mark_snippet(session)
    for frame in random_frames(rng, 5, 16, 11):
        tee_feed(session, frame)
    assert tee_mark_snippet(session) == 4
    with pytest.raises(StateError):
        tee_mark_snippet(session)
    assert session.pending_snippets == [4]


def test_marked_snippets_reach_trailer(device_key, rng):
    session = start(device_key, 32, 11)
    marks = []
    for i, frame in enumerate(random_frames(rng, 7, 32, 11)):
        tee_feed(session, frame)
        if i in (1, 4):
            marks.append(tee_mark_snippet(session))
    chain = tee_stop(session, 25, 1)
    trailer = parse_trailer(chain.trailer)
    assert [s.frame_index for s in trailer.snippets] == marks == [1, 4]
    assert trailer.content_count == 7


def test_stop_without_frames(device_key):
    session = start(device_key)
    with pytest.raises(StateError):
        tee_stop(session, 30, 1)
    assert session.state is SessionState.RECORDING


def test_stop_zero_fps_den(device_key, rng):
    session = start(device_key, 16, 11)
    tee_feed(session, random_frames(rng, 1, 16, 11)[0])
    with pytest.raises(StructureError):
        tee_stop(session, 30, 0)
    assert session.state is SessionState.RECORDING


def test_minimal_chain_verifies(device_key, store, rng):
    session = start(device_key, 16, 11)
    tee_feed(session, random_frames(rng, 1, 16, 11)[0])
    chain = tee_stop(session, 30, 1)
    assert len(chain) == 3
    assert verify_chain(chain, store).verdict == "valid"


def test_cross_key_negative(store, rng):
    other = keypair_from("device-B")
    session = start(other, 16, 11)
    tee_feed(session, random_frames(rng, 1, 16, 11)[0])
    report = verify_chain(tee_stop(session, 30, 1), store)
    assert report.verdict != "valid"
    assert report.device_key_status == "unknown device key"


def test_recording_is_deterministic(device_key, rng):
    frames = random_frames(rng, 4, 16, 11)

    def run():
        session = start(device_key, 16, 11)
        for f in frames:
            tee_feed(session, f)
        tee_mark_snippet(session)
        return write_fchain(tee_stop(session, 30, 1))

    assert run() == run()


def test_dimensions_too_small_for_trailer(device_key):
    from frameprov.core import trailer_size
    from frameprov.errors import CapacityError

    assert trailer_size(0) == 87
    with pytest.raises(CapacityError):
        start(device_key, 11, 2)
    start(device_key, 15, 2)  # 90 bytes


def test_snippet_capacity(device_key, rng):
    from frameprov.errors import CapacityError

    session = start(device_key, 11, 8)  # 264 bytes: room for 2 snippets
    for frame in random_frames(rng, 3, 11, 8):
        tee_feed(session, frame)
        if len(session.pending_snippets) < 2:
            tee_mark_snippet(session)
        else:
            with pytest.raises(CapacityError):
                tee_mark_snippet(session)
    chain = tee_stop(session, 30, 1)
    assert [s.frame_index for s in parse_trailer(chain.trailer).snippets] == [0, 1]
