"""Tamper-evident video provenance: hash-chained frames, signed edit lists, replay verification."""

from .core import (
    Frame,
    FrameChain,
    GenesisMetadata,
    SnippetSignature,
    TrailerMetadata,
    build_genesis,
    build_trailer,
    decode_hash_row,
    encode_hash_row,
    frame_digest,
    parse_genesis,
    parse_trailer,
    read_fchain,
    write_fchain,
)
from .crypto import KeyPair
from .edits import VideoBuffer, apply_edits, extract_content, read_fvid, write_fvid
from .keystore import KeyRecord, KeyStore, load_store, save_store
from .tee import RecordingSession, record, tee_feed, tee_mark_snippet, tee_start, tee_stop
from .verify import (
    StreamVerifier,
    VerificationReport,
    delayed_verify,
    verify_chain,
    verify_snippet,
)
from .vesl import EditList, EditSignature, canonicalize, parse_vesl, sign_vesl, verify_vesl_signature

__version__ = "0.1.0"
