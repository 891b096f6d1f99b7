import math
import random

import pytest
from hypothesis import given
from hypothesis import strategies as st

from tdm_noc.codec import (
    FLIT_WIDTHS,
    TAIL,
    CodecError,
    Flit,
    FlitKind,
    Header,
    Packet,
    body_count,
    decode_header,
    decode_v1,
    decode_word,
    deflitize,
    defragment,
    encode_header,
    encode_v1,
    encode_word,
    flit_count,
    flitize,
    format_flits,
    fragment,
    fragment_count,
    parse_flits,
)

headers = st.builds(Header, st.integers(0, 7), st.integers(0, 3), st.integers(0, 7)).filter(
    lambda h: (h.id, h.port, h.int_length) != (7, 3, 7))


@st.composite
def packets(draw, max_bits=200):
    n = draw(st.integers(1, max_bits))
    return Packet(draw(headers), draw(st.integers(0, (1 << n) - 1)), n)


def oracle_header(id_, port, il):
    # string concatenation of the three fields, independent of the shifts
    return int(f"{id_:03b}{port:02b}{il:03b}", 2)


class TestHeader:
    def test_zero(self):
        assert encode_header(Header(0, 0, 0)) == 0x00

    def test_layout(self):
        assert encode_header(Header(1, 2, 3)) == 0x33

    def test_tail_collision_rejected(self):
        with pytest.raises(CodecError, match="tail"):
            encode_header(Header(7, 3, 7))

    def test_only_ff_collides(self):
        codes = {encode_header(Header(i, p, l))
                 for i in range(8) for p in range(4) for l in range(8) if (i, p, l) != (7, 3, 7)}
        assert len(codes) == 255
        assert set(range(256)) - codes == {TAIL}

    @pytest.mark.parametrize("field,kw,maxv", [("id", dict(id=8, port=0, int_length=0), 7),
                                               ("port", dict(id=0, port=4, int_length=0), 3),
                                               ("int_length", dict(id=0, port=0, int_length=8), 7)])
    def test_overflow_names_field(self, field, kw, maxv):
        with pytest.raises(CodecError) as exc:
            encode_header(Header(**kw))
        assert field in str(exc.value) and str(maxv) in str(exc.value)

    def test_negative_field(self):
        with pytest.raises(CodecError):
            encode_header(Header(-1, 0, 0))

    def test_decode_examples(self):
        assert decode_header(0x00) == Header(0, 0, 0)
        assert decode_header(0x33) == Header(1, 2, 3)
        with pytest.raises(CodecError):
            decode_header(0xFF)

    @given(headers)
    def test_round_trip_and_oracle(self, h):
        code = encode_header(h)
        assert code == oracle_header(h.id, h.port, h.int_length)
        assert code != TAIL
        assert decode_header(code) == h


class TestFlitCount:
    @pytest.mark.parametrize("n,w,expect", [(64, 8, 10), (72, 8, 11), (24, 16, 4), (1, 8, 3)])
    def test_examples(self, n, w, expect):
        assert flit_count(n, w) == expect

    def test_header_plus_body_is_nine(self):
        assert flit_count(64, 8) - 1 == 9

    @given(st.integers(1, 10_000), st.sampled_from(FLIT_WIDTHS))
    def test_formula(self, n, w):
        assert flit_count(n, w) == 2 + math.ceil(n / w)
        assert body_count(n, w) == math.ceil(n / w)

    def test_rejects_bad_width(self):
        with pytest.raises(CodecError):
            flit_count(8, 12)


class TestFlitize:
    def test_64_bit_w8(self):
        p = Packet(Header(1, 1, 0), 0x0123456789ABCDEF, 64)
        fl = flitize(p, 8)
        assert [f.kind for f in fl] == [FlitKind.HEADER] + [FlitKind.BODY] * 8 + [FlitKind.TAIL]
        assert [f.word for f in fl[1:-1]] == [0x01, 0x23, 0x45, 0x67, 0x89, 0xAB, 0xCD, 0xEF]
        assert fl[-1].word == 0xFF

    def test_one_bit_payload_padded(self):
        fl = flitize(Packet(Header(0, 0, 0), 1, 1), 8)
        assert len(fl) == 3 and fl[1].word == 0b1000_0000

    def test_header_zero_extended(self):
        fl = flitize(Packet(Header(1, 2, 3), 0, 16), 32)
        assert fl[0].word == 0x33 and fl[-1].word == 0xFF

    @pytest.mark.parametrize("n", [72, 64, 64, 24])
    def test_workload_sizes_round_trip(self, n):
        rng = random.Random(n)
        p = Packet(Header(2, 3, 1), rng.getrandbits(n), n)
        for w in FLIT_WIDTHS:
            assert deflitize(flitize(p, w, 5), w, n) == p

    def test_random_72_bit_w16(self):
        rng = random.Random(7)
        for _ in range(1000):
            p = Packet(Header(0, 1, 0), rng.getrandbits(72), 72)
            assert deflitize(flitize(p, 16), 16, 72) == p

    @given(packets(), st.sampled_from(FLIT_WIDTHS))
    def test_round_trip_and_framing(self, p, w):
        fl = flitize(p, w, 3)
        assert deflitize(fl, w, p.n_bits) == p
        kinds = [f.kind for f in fl]
        assert kinds.count(FlitKind.HEADER) == 1 and kinds[0] is FlitKind.HEADER
        assert kinds.count(FlitKind.TAIL) == 1 and kinds[-1] is FlitKind.TAIL
        assert [f.seq for f in fl] == list(range(len(fl)))
        # body bits concatenated, padding stripped, equal the payload
        body = 0
        for f in fl[1:-1]:
            body = (body << w) | f.word
        assert body >> (len(fl[1:-1]) * w - p.n_bits) == p.payload

    def test_payload_too_wide(self):
        with pytest.raises(CodecError):
            Packet(Header(0, 0, 0), 4, 2)


class TestDeflitizeErrors:
    def setup_method(self):
        self.p = Packet(Header(1, 0, 0), 0xABCD, 16)
        self.fl = flitize(self.p, 8, packet_id=1)

    def test_missing_tail(self):
        with pytest.raises(CodecError, match="tail"):
            deflitize(self.fl[:-1], 8, 16)

    def test_foreign_flit(self):
        foreign = flitize(Packet(Header(1, 0, 0), 0x1234, 16), 8, packet_id=2)[1]
        with pytest.raises(CodecError, match="interleav|foreign|packet"):
            deflitize([self.fl[0], foreign] + self.fl[2:], 8, 16)

    def test_bad_header(self):
        bad = Flit(FlitKind.BODY, 0x12, 1, 0)
        with pytest.raises(CodecError):
            deflitize([bad] + self.fl[1:], 8, 16)

    def test_nonzero_padding(self):
        fl = flitize(Packet(Header(0, 0, 0), 1, 1), 8)
        fl[1] = Flit(FlitKind.BODY, 0b1000_0001, fl[1].packet_id, 1)
        with pytest.raises(CodecError, match="pad"):
            deflitize(fl, 8, 1)

    def test_length_by_kind(self):
        assert deflitize(self.fl, 8, {1: 16}) == self.p
        with pytest.raises(CodecError):
            deflitize(self.fl, 8, {0: 16})

    @given(st.data())
    def test_splice_mutations_detected(self, data):
        p = data.draw(packets(80))
        w = data.draw(st.sampled_from(FLIT_WIDTHS))
        fl = flitize(p, w, packet_id=1)
        other = flitize(data.draw(packets(80)), w, packet_id=2)
        pos = data.draw(st.integers(1, len(fl) - 1))
        donor = data.draw(st.sampled_from(other))
        mutated = fl[:pos] + [donor] + fl[pos:]
        with pytest.raises(CodecError):
            deflitize(mutated, w, p.n_bits)


class TestV1:
    def test_examples(self):
        assert encode_v1(Header(0, 0, 0), 0) == 0x000000
        assert encode_v1(Header(1, 2, 3), 0xBEEF) == 0x33BEEF
        assert decode_v1(0x33BEEF) == (Header(1, 2, 3), 0xBEEF)

    def test_random_pairs(self):
        rng = random.Random(1)
        for _ in range(1000):
            h = Header(rng.randrange(8), rng.randrange(4), rng.randrange(8))
            if h == Header(7, 3, 7):
                continue
            d = rng.getrandbits(16)
            assert decode_v1(encode_v1(h, d)) == (h, d)

    def test_data_overflow(self):
        with pytest.raises(CodecError):
            encode_v1(Header(0, 0, 0), 1 << 16)

    def test_wider_words(self):
        assert encode_word(Header(1, 2, 3), 0xAB, 16) == 0x33AB
        assert decode_word(0x33AB, 16) == (Header(1, 2, 3), 0xAB)

    @pytest.mark.parametrize("n,width,count", [(24, 24, 2), (16, 24, 1), (72, 24, 5),
                                               (64, 72, 1), (64, 24, 4)])
    def test_fragment_count(self, n, width, count):
        assert fragment_count(n, width) == count

    @given(packets(128), st.sampled_from([16, 24, 32, 72]))
    def test_fragment_round_trip(self, p, width):
        words = fragment(p, width, first_id=10)
        assert len(words) == fragment_count(p.n_bits, width)
        assert all(f.atomic and f.closes and f.opens for f in words)
        assert [f.packet_id for f in words] == list(range(10, 10 + len(words)))
        assert defragment([f.word for f in words], width, p.n_bits) == p


class TestDebugFormat:
    def test_format(self):
        fl = flitize(Packet(Header(1, 2, 3), 0xBEEF, 16), 8)
        assert format_flits(fl, 8) == "header:33\nbody:be\nbody:ef\ntail:ff\n"

    @given(packets(), st.sampled_from(FLIT_WIDTHS))
    def test_parse_inverts_format(self, p, w):
        fl = flitize(p, w)
        back = parse_flits(format_flits(fl, w))
        assert [(f.kind, f.word) for f in back] == [(f.kind, f.word) for f in fl]
        assert deflitize(back, w, p.n_bits) == p

    def test_parse_rejects_garbage(self):
        with pytest.raises(CodecError):
            parse_flits("header:zz\n")
