import numpy as np
import pytest

from analogbits import checkpoint as ckpt
from analogbits import mlp
from analogbits.codec import CodecSpec, encode, uint8_rand_spec
from analogbits.errors import InvariantViolation


def make_net(head=mlp.HEAD_LINEAR):
    codebook = None
    if head == mlp.HEAD_SOFTMAX:
        codebook = tuple(tuple(row) for row in encode(np.arange(8)[:, None],
                                                      CodecSpec("base2", 8)))
    cfg = mlp.MlpConfig(n_features=3, hidden=(10, 7), n_time_features=8,
                        head=head, positions=1, codebook=codebook)
    net = mlp.MlpDenoiser.initialize(cfg, np.random.default_rng(5))
    rng = np.random.default_rng(6)
    for k in net.params:
        net.params[k] = rng.standard_normal(net.params[k].shape)
    return net


def codec_hash():
    return ckpt.codec_fingerprint(CodecSpec("base2", 8))


@pytest.mark.parametrize("head", [mlp.HEAD_LINEAR, mlp.HEAD_SOFTMAX])
@pytest.mark.parametrize("with_ema", [False, True])
def test_save_load_save_is_byte_identical(tmp_path, head, with_ema):
    net = make_net(head)
    ema = None
    if with_ema:
        rng = np.random.default_rng(7)
        ema = {k: rng.standard_normal(v.shape) for k, v in net.params.items()}
    p1, p2 = tmp_path / "a.bin", tmp_path / "b.bin"
    ckpt.save(p1, net.cfg, net.params, codec_hash(), ema_params=ema)
    bundle = ckpt.load(p1)
    ckpt.save(p2, bundle.cfg, bundle.params, bundle.codec_hash,
              ema_params=bundle.ema_params)
    assert p1.read_bytes() == p2.read_bytes()


def test_load_recovers_float32_cast(tmp_path):
    net = make_net()
    path = tmp_path / "c.bin"
    ckpt.save(path, net.cfg, net.params, codec_hash())
    bundle = ckpt.load(path)
    assert bundle.cfg == net.cfg
    assert bundle.ema_params is None
    assert bundle.codec_hash == codec_hash()
    for k, p in net.params.items():
        assert np.array_equal(bundle.params[k], p.astype(np.float32).astype(np.float64))


def test_softmax_head_codebook_round_trips(tmp_path):
    net = make_net(mlp.HEAD_SOFTMAX)
    path = tmp_path / "s.bin"
    ckpt.save(path, net.cfg, net.params, codec_hash())
    bundle = ckpt.load(path)
    # +-1 codebook entries survive the float32 cast exactly
    assert bundle.cfg.codebook == net.cfg.codebook


def test_ema_entries_preserved(tmp_path):
    net = make_net()
    ema = {k: v * 0.5 for k, v in net.params.items()}
    path = tmp_path / "e.bin"
    ckpt.save(path, net.cfg, net.params, codec_hash(), ema_params=ema)
    bundle = ckpt.load(path)
    assert set(bundle.ema_params) == set(net.params)
    for k in ema:
        assert np.array_equal(bundle.ema_params[k],
                              ema[k].astype(np.float32).astype(np.float64))


def test_rejects_bad_magic(tmp_path):
    path = tmp_path / "m.bin"
    net = make_net()
    ckpt.save(path, net.cfg, net.params, codec_hash())
    data = bytearray(path.read_bytes())
    data[:8] = b"NOTAFILE"
    path.write_bytes(bytes(data))
    with pytest.raises(InvariantViolation):
        ckpt.load(path)


def test_rejects_truncation(tmp_path):
    path = tmp_path / "t.bin"
    net = make_net()
    ckpt.save(path, net.cfg, net.params, codec_hash())
    data = path.read_bytes()
    for cut in (4, 20, len(data) - 5):
        path.write_bytes(data[:cut])
        with pytest.raises(InvariantViolation):
            ckpt.load(path)


def test_rejects_trailing_garbage(tmp_path):
    path = tmp_path / "g.bin"
    net = make_net()
    ckpt.save(path, net.cfg, net.params, codec_hash())
    path.write_bytes(path.read_bytes() + b"\x00\x01")
    with pytest.raises(InvariantViolation):
        ckpt.load(path)


def test_rejects_unknown_version(tmp_path):
    path = tmp_path / "v.bin"
    net = make_net()
    ckpt.save(path, net.cfg, net.params, codec_hash())
    data = bytearray(path.read_bytes())
    data[8] = 99
    path.write_bytes(bytes(data))
    with pytest.raises(InvariantViolation):
        ckpt.load(path)


def test_fingerprint_separates_codecs():
    specs = [
        CodecSpec("base2", 8),
        CodecSpec("gray", 8),
        CodecSpec("base2", 16),
        CodecSpec("base2", 8, scale=2.0),
        CodecSpec("onehot", 8),
        uint8_rand_spec(),
    ]
    prints = [ckpt.codec_fingerprint(s) for s in specs]
    assert len(set(prints)) == len(prints)
    assert all(len(p) == 32 for p in prints)
    assert ckpt.codec_fingerprint(CodecSpec("base2", 8)) == prints[0]
