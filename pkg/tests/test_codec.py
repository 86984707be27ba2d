"""Codec tests: golden wire bytes, roundtrips, rejection totality, sequencing.

The golden fixtures are assembled here by hand with struct.pack, field by
field, independently of the encoder's own TLV helpers, and the resulting
hex is frozen under tests/data/. Any drift in the wire layout breaks both
the hand assembly comparison and the frozen file comparison.
"""

from __future__ import annotations

import random
import struct
from pathlib import Path

import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from gridshield.codec import (
    CodecError,
    GooseFrame,
    InvariantViolation,
    MacAddress,
    MalformedField,
    RawFrame,
    SvFrame,
    Truncated,
    WrongEthertype,
    decode_goose,
    decode_sv,
    encode_goose,
    encode_sv,
    next_publication,
)

DATA_DIR = Path(__file__).parent / "data"

GOOSE_DST = MacAddress.parse("01:0C:CD:01:00:01")
PIED_MAC = MacAddress.parse("00:30:A7:00:00:01")
MU_MAC = MacAddress.parse("00:30:A7:00:00:02")
SV_DST = MacAddress.parse("01:0C:CD:04:00:01")


def golden_goose_frame() -> GooseFrame:
    return GooseFrame(
        dst=GOOSE_DST,
        src=PIED_MAC,
        app_id=0x0001,
        gocb_ref="PIED/LLN0$GO$gcb1",
        time_allowed_to_live=2000,
        st_num=2,
        sq_num=0,
        test=False,
        timestamp=1_700_000_000_000_000,
        dataset_ref="PIED/LLN0$dataset1",
        all_data=(True,),
    )


def hand_assembled_goose_bytes() -> bytes:
    """Independent layout oracle: every byte written out explicitly."""
    body = b""
    body += bytes([0x80]) + struct.pack(">H", 17) + b"PIED/LLN0$GO$gcb1"
    body += bytes([0x81]) + struct.pack(">H", 4) + struct.pack(">I", 2000)
    body += bytes([0x82]) + struct.pack(">H", 4) + struct.pack(">I", 2)
    body += bytes([0x83]) + struct.pack(">H", 4) + struct.pack(">I", 0)
    body += bytes([0x84]) + struct.pack(">H", 1) + b"\x00"
    body += bytes([0x85]) + struct.pack(">H", 8) + struct.pack(">Q", 1_700_000_000_000_000)
    body += bytes([0x86]) + struct.pack(">H", 18) + b"PIED/LLN0$dataset1"
    body += bytes([0x87]) + struct.pack(">H", 1) + b"\x01"
    header = (
        bytes.fromhex("010CCD010001")
        + bytes.fromhex("0030A7000001")
        + struct.pack(">H", 0x88B8)
        + struct.pack(">H", 0x0001)
        + struct.pack(">H", len(body))
    )
    return header + body


def golden_sv_frame() -> SvFrame:
    return SvFrame(
        dst=SV_DST,
        src=MU_MAC,
        sv_id="MU01",
        smp_cnt=0,
        currents=(500, 500, 500),
        voltages=(120_000, 120_000, 120_000),
    )


def hand_assembled_sv_bytes() -> bytes:
    body = b""
    body += bytes([0x90]) + struct.pack(">H", 4) + b"MU01"
    body += bytes([0x91]) + struct.pack(">H", 2) + struct.pack(">H", 0)
    body += bytes([0x92]) + struct.pack(">H", 12) + struct.pack(">3i", 500, 500, 500)
    body += bytes([0x93]) + struct.pack(">H", 12) + struct.pack(">3i", 120_000, 120_000, 120_000)
    header = (
        bytes.fromhex("010CCD040001")
        + bytes.fromhex("0030A7000002")
        + struct.pack(">H", 0x88BA)
        + struct.pack(">H", 0x0000)
        + struct.pack(">H", len(body))
    )
    return header + body


# ---------------------------------------------------------------------------
# Golden fixtures
# ---------------------------------------------------------------------------


class TestGoldenFrames:
    def test_goose_encoder_matches_hand_layout(self):
        assert encode_goose(golden_goose_frame()).data == hand_assembled_goose_bytes()

    def test_goose_matches_frozen_fixture(self):
        frozen = bytes.fromhex((DATA_DIR / "goose_golden.hex").read_text().strip())
        assert encode_goose(golden_goose_frame()).data == frozen

    def test_goose_golden_decodes_back(self):
        assert decode_goose(RawFrame(hand_assembled_goose_bytes())) == golden_goose_frame()

    def test_sv_encoder_matches_hand_layout(self):
        assert encode_sv(golden_sv_frame()).data == hand_assembled_sv_bytes()

    def test_sv_matches_frozen_fixture(self):
        frozen = bytes.fromhex((DATA_DIR / "sv_golden.hex").read_text().strip())
        assert encode_sv(golden_sv_frame()).data == frozen

    def test_sv_golden_decodes_back(self):
        assert decode_sv(RawFrame(hand_assembled_sv_bytes())) == golden_sv_frame()

    def test_encoding_is_stable_across_calls(self):
        a = encode_goose(golden_goose_frame()).data
        b = encode_goose(golden_goose_frame()).data
        assert a == b


# ---------------------------------------------------------------------------
# Error paths
# ---------------------------------------------------------------------------


class TestDecodeErrors:
    def test_thirteen_bytes_is_truncated(self):
        with pytest.raises(Truncated):
            decode_goose(RawFrame(b"\x00" * 13))

    def test_flipped_ethertype_byte(self):
        data = bytearray(hand_assembled_goose_bytes())
        data[12] ^= 0xFF
        with pytest.raises(WrongEthertype):
            decode_goose(RawFrame(bytes(data)))

    def test_sv_decoder_rejects_goose_ethertype(self):
        with pytest.raises(WrongEthertype):
            decode_sv(RawFrame(hand_assembled_goose_bytes()))

    def test_body_length_beyond_available_is_truncated(self):
        data = hand_assembled_goose_bytes()[:-4]
        with pytest.raises(Truncated):
            decode_goose(RawFrame(data))

    def test_wrong_tag_order_is_malformed(self):
        data = bytearray(hand_assembled_goose_bytes())
        data[18] = 0x81  # first body tag should be 0x80
        with pytest.raises(MalformedField):
            decode_goose(RawFrame(bytes(data)))

    def test_trailing_bytes_are_malformed(self):
        data = bytearray(hand_assembled_goose_bytes())
        data += b"\x00"
        data[16:18] = struct.pack(">H", len(data) - 18)
        # actually extend the declared body too, so the trailing byte sits
        # inside the declared body but outside the final TLV
        with pytest.raises(MalformedField):
            decode_goose(RawFrame(bytes(data)))

    def test_decoded_st_num_zero_is_invariant_violation(self):
        data = bytearray(hand_assembled_goose_bytes())
        # st_num TLV value sits after gocb_ref (3+17) and ttl (3+4) TLVs
        offset = 18 + 20 + 7 + 3
        assert data[offset - 3] == 0x82
        struct.pack_into(">I", data, offset, 0)
        with pytest.raises(InvariantViolation):
            decode_goose(RawFrame(bytes(data)))


class TestEncodeErrors:
    def test_st_num_zero_rejected(self):
        frame = golden_goose_frame()
        bad = GooseFrame(**{**frame.__dict__, "st_num": 0})
        with pytest.raises(InvariantViolation):
            encode_goose(bad)

    def test_zero_ttl_rejected(self):
        frame = golden_goose_frame()
        bad = GooseFrame(**{**frame.__dict__, "time_allowed_to_live": 0})
        with pytest.raises(InvariantViolation):
            encode_goose(bad)

    def test_empty_all_data_rejected(self):
        frame = golden_goose_frame()
        bad = GooseFrame(**{**frame.__dict__, "all_data": ()})
        with pytest.raises(InvariantViolation):
            encode_goose(bad)

    def test_smp_cnt_beyond_modulus_rejected(self):
        frame = golden_sv_frame()
        bad = SvFrame(**{**frame.__dict__, "smp_cnt": 1000})
        with pytest.raises(InvariantViolation):
            encode_sv(bad, smp_cnt_modulus=1000)
        # without a modulus the same value is fine
        assert decode_sv(encode_sv(bad)) == bad


# ---------------------------------------------------------------------------
# Property tests
# ---------------------------------------------------------------------------

macs = st.binary(min_size=6, max_size=6).map(MacAddress)
refs = st.text(
    alphabet=st.characters(min_codepoint=0x20, max_codepoint=0x7E), max_size=48
)

goose_frames = st.builds(
    GooseFrame,
    dst=macs,
    src=macs,
    app_id=st.integers(0, 0xFFFF),
    gocb_ref=refs,
    time_allowed_to_live=st.integers(1, 0xFFFFFFFF),
    st_num=st.integers(1, 0xFFFFFFFF),
    sq_num=st.integers(0, 0xFFFFFFFF),
    test=st.booleans(),
    timestamp=st.integers(0, 2**64 - 1),
    dataset_ref=refs,
    all_data=st.lists(st.booleans(), min_size=1, max_size=32).map(tuple),
)

sv_frames = st.builds(
    SvFrame,
    dst=macs,
    src=macs,
    sv_id=refs,
    smp_cnt=st.integers(0, 0xFFFF),
    currents=st.tuples(*[st.integers(-(2**31), 2**31 - 1)] * 3),
    voltages=st.tuples(*[st.integers(-(2**31), 2**31 - 1)] * 3),
)


class TestRoundtripProperties:
    @given(goose_frames)
    def test_goose_roundtrip_identity(self, frame):
        assert decode_goose(encode_goose(frame)) == frame

    @given(sv_frames)
    def test_sv_roundtrip_identity(self, frame):
        assert decode_sv(encode_sv(frame)) == frame

    @given(goose_frames, goose_frames)
    def test_encoding_injective(self, a, b):
        if a != b:
            assert encode_goose(a).data != encode_goose(b).data

    @settings(max_examples=300)
    @given(st.binary(max_size=256))
    def test_random_bytes_never_crash(self, blob):
        try:
            decode_goose(RawFrame(blob))
        except CodecError:
            pass
        try:
            decode_sv(RawFrame(blob))
        except CodecError:
            pass

    @settings(max_examples=200)
    @given(st.data())
    def test_bitflips_never_crash(self, data):
        blob = bytearray(hand_assembled_goose_bytes())
        idx = data.draw(st.integers(0, len(blob) - 1))
        blob[idx] ^= data.draw(st.integers(1, 255))
        try:
            decode_goose(RawFrame(bytes(blob)))
        except CodecError:
            pass


# ---------------------------------------------------------------------------
# Publisher sequencing
# ---------------------------------------------------------------------------


class TestNextPublication:
    def test_retransmission_increments_sq(self):
        prev = GooseFrame(**{**golden_goose_frame().__dict__, "st_num": 5, "sq_num": 3})
        out = next_publication(prev, state_changed=False, now=10)
        assert (out.st_num, out.sq_num, out.timestamp) == (5, 4, 10)

    def test_state_change_resets_sq(self):
        prev = GooseFrame(**{**golden_goose_frame().__dict__, "st_num": 5, "sq_num": 3})
        out = next_publication(prev, state_changed=True, now=11)
        assert (out.st_num, out.sq_num, out.timestamp) == (6, 0, 11)

    def test_n_retransmissions_reach_sq_n(self):
        # loop oracle: apply the step n times, sq must land exactly on n
        frame = GooseFrame(**{**golden_goose_frame().__dict__, "sq_num": 0})
        n = 137
        for i in range(n):
            frame = next_publication(frame, state_changed=False, now=i)
        assert frame.sq_num == n

    @given(st.lists(st.booleans(), max_size=60))
    def test_chain_is_lexicographically_nondecreasing(self, changes):
        frame = golden_goose_frame()
        seen = [(frame.st_num, frame.sq_num)]
        for i, changed in enumerate(changes):
            frame = next_publication(frame, changed, now=i)
            seen.append((frame.st_num, frame.sq_num))
        assert seen == sorted(seen)
        for (st0, sq0), (st1, sq1) in zip(seen, seen[1:]):
            if st1 > st0:
                assert sq1 == 0
            else:
                assert st1 == st0 and sq1 == sq0 + 1


# ---------------------------------------------------------------------------
# Bulk deterministic fuzz (mirrors the acceptance criterion counts)
# ---------------------------------------------------------------------------


def test_seeded_random_frames_roundtrip():
    rng = random.Random(0xC0DEC)
    for _ in range(1000):
        frame = GooseFrame(
            dst=MacAddress(rng.randbytes(6)),
            src=MacAddress(rng.randbytes(6)),
            app_id=rng.randrange(0x10000),
            gocb_ref="".join(chr(rng.randrange(0x20, 0x7F)) for _ in range(rng.randrange(32))),
            time_allowed_to_live=rng.randrange(1, 2**32),
            st_num=rng.randrange(1, 2**32),
            sq_num=rng.randrange(2**32),
            test=rng.random() < 0.5,
            timestamp=rng.randrange(2**64),
            dataset_ref="".join(chr(rng.randrange(0x20, 0x7F)) for _ in range(rng.randrange(32))),
            all_data=tuple(rng.random() < 0.5 for _ in range(rng.randrange(1, 16))),
        )
        assert decode_goose(encode_goose(frame)) == frame
