import struct

import numpy as np
import pytest
from hypothesis import given, strategies as st
from hypothesis.extra.numpy import arrays

from caraprune.basis import BasisSpec, Family, multi_index_set
from caraprune.errors import (
    AcceptanceTooLow,
    BadMagic,
    DimensionMismatch,
    NonPositiveWeight,
    ParseError,
    StreamTooShort,
    TruncatedFile,
    ValidationError,
)
from caraprune.io_stream import (
    BUILTIN_SHAPES,
    ArrayStream,
    DomainSpec,
    open_source,
    read_rule_csv,
    rejection_sampler,
    stream_from_binary,
    stream_from_csv,
    write_binary,
    write_csv,
)
from caraprune.pruning import gscsp


def test_csv_replays_three_nodes(tmp_path):
    p = tmp_path / "three.csv"
    p.write_text("x1,w\n0,0.3333333333333333\n0.5,0.3333333333333333\n1,0.3333333333333333\n")
    s = stream_from_csv(p)
    got = list(s)
    assert [float(x[0]) for x, _, _ in got] == [0.0, 0.5, 1.0]
    assert [w for _, w, _ in got] == [1 / 3] * 3
    assert [g for _, _, g in got] == [1, 2, 3]
    again = list(s)
    assert all(np.array_equal(a[0], b[0]) and a[1:] == b[1:] for a, b in zip(again, got))
    res = gscsp(s, BasisSpec(Family.MONOMIAL, multi_index_set("TD", 1, 1)))
    assert np.allclose(res.kept_weights, [0.5, 0.5])


def test_csv_empty_data_is_too_short(tmp_path):
    p = tmp_path / "empty.csv"
    p.write_text("x1,x2,w\n")
    with pytest.raises(StreamTooShort):
        gscsp(stream_from_csv(p), BasisSpec(Family.LEGENDRE, multi_index_set("TD", 1, 2)))


def test_csv_errors_carry_line_numbers(tmp_path):
    p = tmp_path / "bad.csv"
    p.write_text("x1,w\n0,1\n0.5,-1\n")
    with pytest.raises(NonPositiveWeight) as e:
        list(stream_from_csv(p))
    assert e.value.line == 3
    p.write_text("x1,w\n0,1\n0.5,abc\n")
    with pytest.raises(ParseError) as e:
        list(stream_from_csv(p))
    assert e.value.line == 3
    p.write_text("x1,w\n0,1,2\n")
    with pytest.raises(ParseError):
        list(stream_from_csv(p))
    p.write_text("a,b\n0,1\n")
    with pytest.raises(ParseError):
        stream_from_csv(p)
    p.write_text("x1,x2,w\n0,1,1\n")
    with pytest.raises(DimensionMismatch):
        stream_from_csv(p, dim=1)


finite = st.floats(allow_nan=False, allow_infinity=False, width=64)


@given(arrays(np.float64, st.tuples(st.integers(1, 20), st.integers(1, 3)), elements=finite), st.data())
def test_csv_round_trip_bit_exact(tmp_path_factory, x, data):
    w = data.draw(arrays(np.float64, x.shape[0], elements=st.floats(5e-324, 1e308)))
    p = tmp_path_factory.mktemp("rt") / "r.csv"
    write_csv(p, x, w, np.arange(1, len(w) + 1))
    xs, ws, idx = read_rule_csv(p)
    assert np.array_equal(xs.view(np.uint64), x.view(np.uint64))
    assert np.array_equal(ws.view(np.uint64), w.view(np.uint64))
    assert list(idx) == list(range(1, len(w) + 1))


def test_binary_round_trip(tmp_path, rng):
    x = rng.standard_normal((10_000, 3))
    w = rng.uniform(1e-9, 1, 10_000)
    p = tmp_path / "n.bin"
    write_binary(p, x, w)
    assert p.stat().st_size == 16 + 10_000 * 4 * 8
    s = stream_from_binary(p)
    assert (s.dim, s.length) == (3, 10_000)
    m = s.to_measure()
    assert m.nodes.tobytes() == x.tobytes() and m.weights.tobytes() == w.tobytes()
    idx = np.concatenate([b.index for b in s.batches(999)])
    assert np.array_equal(idx, np.arange(1, 10_001))


def test_binary_errors(tmp_path, rng):
    p = tmp_path / "n.bin"
    write_binary(p, rng.standard_normal((10, 2)), np.ones(10))
    raw = p.read_bytes()
    (tmp_path / "t.bin").write_bytes(raw[:-5])
    with pytest.raises(TruncatedFile) as e:
        stream_from_binary(tmp_path / "t.bin")
    assert e.value.offset == 16 + 9 * 24
    (tmp_path / "h.bin").write_bytes(raw[:10])
    with pytest.raises(TruncatedFile):
        stream_from_binary(tmp_path / "h.bin")
    (tmp_path / "m.bin").write_bytes(b"XXXX" + raw[4:])
    with pytest.raises(BadMagic):
        stream_from_binary(tmp_path / "m.bin")
    (tmp_path / "x.bin").write_bytes(raw + b"\0")
    with pytest.raises(ValidationError):
        stream_from_binary(tmp_path / "x.bin")
    with pytest.raises(DimensionMismatch):
        stream_from_binary(p, dim=3)
    bad = bytearray(raw)
    bad[16 + 24 * 4 + 16 : 16 + 24 * 5] = struct.pack("<d", 0.0)
    (tmp_path / "w.bin").write_bytes(bytes(bad))
    with pytest.raises(NonPositiveWeight) as e:
        list(stream_from_binary(tmp_path / "w.bin"))
    assert e.value.line == 5


def test_box_sampler_accepts_everything():
    s = rejection_sampler(DomainSpec.box((0, 0), (1, 2)), 5000, 1)
    m = s.to_measure()
    assert len(m) == 5000 and s.proposals == 5000
    assert np.all(m.weights == 1 / 5000)
    assert np.all((m.nodes >= 0) & (m.nodes <= [1, 2]))


def test_disk_acceptance_rate():
    s = rejection_sampler(DomainSpec.disk(), 100_000, 3)
    m = s.to_measure()
    assert len(m) == 100_000
    assert abs(100_000 / s.proposals - np.pi / 4) <= 0.01 * np.pi / 4
    assert np.all(np.sum(m.nodes**2, axis=1) <= 1)


def test_sampler_deterministic_and_batch_independent():
    s = rejection_sampler(DomainSpec.annulus(), 20_000, 42)
    a = np.vstack([b.coords for b in s.batches(1000)])
    b = np.vstack([b.coords for b in s.batches(7777)])
    assert np.array_equal(a, b)
    assert np.array_equal(a, rejection_sampler(DomainSpec.annulus(), 20_000, 42).to_measure().nodes)
    assert not np.array_equal(a, rejection_sampler(DomainSpec.annulus(), 20_000, 43).to_measure().nodes)


@pytest.mark.parametrize("name", sorted(BUILTIN_SHAPES))
def test_builtin_shapes(name):
    dom = BUILTIN_SHAPES[name]()
    m = rejection_sampler(dom, 2000, 0).to_measure()
    assert m.nodes.shape == (2000, dom.dim)
    assert np.all(dom.indicator(m.nodes))


def test_acceptance_too_low():
    dom = DomainSpec((0.0,), (1.0,), lambda x: np.zeros(len(x), dtype=bool))
    with pytest.raises(AcceptanceTooLow):
        list(rejection_sampler(dom, 1, 0).batches())


def test_open_source(tmp_path, rng):
    s = open_source("gen:disk:100", seed=2)
    assert s.length == 100 and s.dim == 2
    with pytest.raises(ValidationError):
        open_source("gen:blob:100")
    with pytest.raises(ValidationError):
        open_source("gen:disk")
    with pytest.raises(DimensionMismatch):
        open_source("gen:torus:10", dim=2)
    with pytest.raises(ValidationError):
        open_source(str(tmp_path / "missing.csv"))
    write_binary(tmp_path / "a.qpn", rng.standard_normal((5, 2)), np.ones(5))
    write_csv(tmp_path / "a.csv", rng.standard_normal((5, 2)), np.ones(5))
    assert open_source(str(tmp_path / "a.qpn")).length == 5
    assert len(open_source(str(tmp_path / "a.csv")).to_measure()) == 5


def test_array_stream_batches(rng):
    x = rng.standard_normal((10, 2))
    s = ArrayStream(x, np.ones(10))
    bs = list(s.batches(4))
    assert [len(b.weights) for b in bs] == [4, 4, 2]
    assert bs[-1].index.tolist() == [9, 10]
    with pytest.raises(ValidationError):
        list(s.batches(0))
