import itertools
import random

import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from blockleak.codec import (
    CapacityExceeded,
    CodeConfig,
    DetectedUncorrectable,
    DuplicateIdentity,
    GeometryMismatch,
    TargetRegistry,
    assign_codewords,
    bits_to_int,
    bits_to_str,
    bits_to_symbols,
    decode_user,
    derive_payload_bits,
    int_to_bits,
    rs_decode,
    rs_encode,
    rs_syndromes,
    str_to_bits,
    symbols_to_bits,
)


def brute_force_min_bits(n):
    m = 0
    while 2**m < n:
        m += 1
    return m


@pytest.mark.parametrize("n, expected", [(1_000_000, 20), (8, 3), (1, 0)])
def test_derive_payload_bits_examples(n, expected):
    assert derive_payload_bits(n) == expected


@given(st.integers(1, 2**40))
def test_derive_payload_bits_matches_brute_force(n):
    assert derive_payload_bits(n) == brute_force_min_bits(n)


def test_derive_payload_bits_rejects_zero():
    with pytest.raises(ValueError):
        derive_payload_bits(0)


def test_code_config_geometry():
    cfg = CodeConfig(10, 24, 4, 2)
    assert cfg.total_bits == 32
    assert cfg.total_symbols == 8
    assert cfg.correctable_symbols == 1
    with pytest.raises(GeometryMismatch):
        CodeConfig(10, 22, 4, 2)  # not whole symbols
    with pytest.raises(GeometryMismatch):
        CodeConfig(10, 60, 4, 2)  # 17 symbols > 15
    with pytest.raises(CapacityExceeded):
        CodeConfig(9, 3)


def test_for_targets_pads_to_whole_symbols():
    assert CodeConfig.for_targets(1000).payload_bits == 10
    assert CodeConfig.for_targets(1000, 4, 2).payload_bits == 12


def test_example_assignment(example_registry):
    assert bits_to_str(example_registry.codeword("Carol")) == "010"
    assert bits_to_str(example_registry.codeword("Alice")) == "000"
    assert bits_to_str(example_registry.codeword("Heidi")) == "111"


def test_single_target_needs_no_bits():
    reg = assign_codewords(["X"], CodeConfig.for_targets(1))
    assert reg.config.payload_bits == 0
    assert reg.codeword("X") == ()
    assert decode_user((), reg) == "X"


def test_seeded_assignment_inverts_exhaustively():
    ids = [f"u{i}" for i in range(1024)]
    reg = assign_codewords(ids, CodeConfig(1024, 10), shuffle_seed=7)
    words = {reg.codeword(i) for i in ids}
    assert len(words) == 1024
    for ident in ids:
        assert decode_user(reg.codeword(ident), reg) == ident
    # a shuffle actually happened
    assert any(bits_to_int(reg.codeword(f"u{i}")) != i for i in range(1024))


@given(st.integers(0, 2**32), st.integers(1, 200))
@settings(max_examples=50)
def test_assignment_bijective_under_any_seed(seed, n):
    ids = [f"id{i}" for i in range(n)]
    reg = assign_codewords(ids, CodeConfig.for_targets(n), shuffle_seed=seed)
    assert len({reg.codeword(i) for i in ids}) == n
    assert all(reg.lookup(reg.codeword(i)) == i for i in ids)


def test_assignment_errors():
    with pytest.raises(DuplicateIdentity):
        assign_codewords(["a", "b", "a"], CodeConfig(3, 2))
    with pytest.raises(CapacityExceeded):
        assign_codewords(["a", "b", "c"], CodeConfig(2, 1))


def test_decode_user_unknown_codeword():
    reg = assign_codewords([f"u{i}" for i in range(8)], CodeConfig(8, 4))
    assert decode_user((1, 1, 1, 1), reg) is None
    with pytest.raises(GeometryMismatch):
        decode_user((1, 1), reg)


def test_bit_packing_msb_first():
    assert bits_to_symbols((1, 0, 0, 0, 0, 0, 0, 1), 4) == [8, 1]
    assert symbols_to_bits([8, 1], 4) == (1, 0, 0, 0, 0, 0, 0, 1)
    assert int_to_bits(5, 4) == (0, 1, 0, 1)
    assert str_to_bits("0101") == (0, 1, 0, 1)


# -- Reed-Solomon --------------------------------------------------------------

WILD = CodeConfig(10, 24, 4, 2)


def test_rs_encode_length_and_systematic():
    payload = int_to_bits(0xABCDEF, 24)
    word = rs_encode(payload, WILD)
    assert len(word) == 32
    assert word[:24] == payload
    assert not any(rs_syndromes(word, WILD))


def test_rs_without_redundancy_is_identity():
    cfg = CodeConfig(8, 3)
    assert rs_encode((0, 1, 0), cfg) == (0, 1, 0)
    assert rs_decode((0, 1, 0), cfg).payload == (0, 1, 0)


def test_rs_matches_reference_library():
    reedsolo = pytest.importorskip("reedsolo")
    ref = reedsolo.RSCodec(2, nsize=15, c_exp=4, prim=0x13, fcr=0, generator=2)
    rng = random.Random(3)
    for _ in range(200):
        payload = tuple(rng.randint(0, 1) for _ in range(24))
        expected = list(ref.encode(bytearray(bits_to_symbols(payload, 4))))
        assert bits_to_symbols(rs_encode(payload, WILD), 4) == expected


def test_rs_corrects_one_flipped_symbol():
    payload = int_to_bits(0x5A5A5A, 24)
    word = list(rs_encode(payload, WILD))
    for i in range(8, 12):  # second symbol fully flipped
        word[i] ^= 1
    out = rs_decode(word, WILD)
    assert out.payload == payload
    assert out.corrected_symbols == 1


def test_rs_exhaustive_single_symbol_corruption():
    payload = int_to_bits(0x123456, 24)
    symbols = bits_to_symbols(rs_encode(payload, WILD), 4)
    for pos, value in itertools.product(range(8), range(1, 16)):
        corrupted = list(symbols)
        corrupted[pos] ^= value
        out = rs_decode(symbols_to_bits(corrupted, 4), WILD)
        assert out == type(out)(payload, 1)


def test_rs_two_symbol_errors_never_crash_and_mostly_detected():
    payload = int_to_bits(0x0F0F0F, 24)
    symbols = bits_to_symbols(rs_encode(payload, WILD), 4)
    detected = wrong = 0
    for (p1, p2) in itertools.combinations(range(8), 2):
        for v1, v2 in ((1, 1), (3, 7), (15, 8)):
            c = list(symbols)
            c[p1] ^= v1
            c[p2] ^= v2
            try:
                out = rs_decode(symbols_to_bits(c, 4), WILD)
            except DetectedUncorrectable:
                detected += 1
            else:
                assert out.payload != payload
                wrong += 1
    assert detected > 0
    assert detected + wrong == 28 * 3


def test_rs_geometry_errors():
    with pytest.raises(GeometryMismatch):
        rs_encode((0,) * 23, WILD)
    with pytest.raises(GeometryMismatch):
        rs_decode((0,) * 31, WILD)


@st.composite
def rs_cases(draw):
    r = draw(st.integers(3, 8))
    k_sym = draw(st.integers(0, 6))
    max_payload = (2**r - 1) - k_sym
    payload_syms = draw(st.integers(1, min(max_payload, 12)))
    cfg = CodeConfig(1, payload_syms * r, r, k_sym)
    payload = tuple(draw(st.lists(st.integers(0, 1), min_size=cfg.payload_bits, max_size=cfg.payload_bits)))
    return cfg, payload


@given(rs_cases(), st.data())
@settings(max_examples=200)
def test_rs_corrects_up_to_half_the_redundancy(case, data):
    cfg, payload = case
    symbols = bits_to_symbols(rs_encode(payload, cfg), cfg.rs_symbol_bits)
    n_err = data.draw(st.integers(0, cfg.correctable_symbols))
    positions = data.draw(
        st.lists(st.integers(0, len(symbols) - 1), min_size=n_err, max_size=n_err, unique=True)
    )
    for p in positions:
        symbols[p] ^= data.draw(st.integers(1, 2**cfg.rs_symbol_bits - 1))
    out = rs_decode(symbols_to_bits(symbols, cfg.rs_symbol_bits), cfg)
    assert out.payload == payload
    assert out.corrected_symbols == n_err


@given(st.lists(st.integers(0, 1), min_size=32, max_size=32))
def test_rs_decode_total_on_arbitrary_input(bits):
    try:
        out = rs_decode(bits, WILD)
    except DetectedUncorrectable:
        return
    assert len(out.payload) == 24
    assert out.corrected_symbols <= 1


def test_round_trip_every_registered_identity(wild_registry):
    for ident in wild_registry:
        word = rs_encode(wild_registry.codeword(ident), wild_registry.config)
        assert decode_user(rs_decode(word, wild_registry.config).payload, wild_registry) == ident


# -- registry file ---------------------------------------------------------------


def test_registry_text_round_trip(tmp_path, wild_registry):
    path = tmp_path / "reg.tsv"
    wild_registry.save(path)
    text = path.read_text()
    assert "target-0\t" in text
    assert TargetRegistry.load(path) == wild_registry


def test_registry_rejects_bad_files():
    with pytest.raises(ValueError):
        TargetRegistry.from_text("version\t99\n---\n")
    good = assign_codewords(["a", "b"], CodeConfig(2, 1)).to_text()
    with pytest.raises(DuplicateIdentity):
        TargetRegistry.from_text(good.replace("b\t1", "b\t0"))
