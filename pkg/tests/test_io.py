import struct

import numpy as np
import pytest

from csmri.io import (FormatError, MAGIC_IMAGE, MAGIC_KSPACE, load_complex,
                      load_mask, save_complex, save_mask, write_gray_png)

from conftest import random_complex


def test_complex_roundtrip_bit_exact(tmp_path):
    rng = np.random.default_rng(0)
    # float32-representable values round-trip exactly
    data = random_complex(rng, (64, 64)).astype(np.complex64).astype(np.complex128)
    path = tmp_path / "x.csim"
    save_complex(path, data, domain="image")
    again = load_complex(path)
    assert np.array_equal(again, data)
    save_complex(path, data, domain="image")
    blob1 = path.read_bytes()
    save_complex(path, again, domain="image")
    assert path.read_bytes() == blob1


def test_domain_magics(tmp_path):
    data = np.zeros((16, 16), dtype=complex)
    img = tmp_path / "a.csim"
    ksp = tmp_path / "a.csks"
    save_complex(img, data, domain="image")
    save_complex(ksp, data, domain="kspace")
    assert img.read_bytes()[:8] == MAGIC_IMAGE
    assert ksp.read_bytes()[:8] == MAGIC_KSPACE
    with pytest.raises(FormatError, match="magic"):
        load_complex(img, domain="kspace")
    load_complex(ksp, domain="kspace")


def test_wrong_magic_names_expectation(tmp_path):
    path = tmp_path / "bad.csks"
    path.write_bytes(b"BOGUS!!!" + struct.pack("<II", 2, 2) + b"\x00" * 32)
    with pytest.raises(FormatError, match="CSKS-V1"):
        load_complex(path, domain="kspace")


def test_truncated_payload_reports_offset(tmp_path):
    rng = np.random.default_rng(1)
    path = tmp_path / "x.csim"
    save_complex(path, random_complex(rng, (8, 8)), domain="image")
    path.write_bytes(path.read_bytes()[:-4])
    with pytest.raises(FormatError, match="offset 16"):
        load_complex(path)


def test_mask_roundtrip(tmp_path):
    rng = np.random.default_rng(2)
    mask = rng.random((32, 48)) < 0.3
    path = tmp_path / "m.csmk"
    save_mask(path, mask)
    assert np.array_equal(load_mask(path), mask)


def test_mask_rejects_bad_bytes(tmp_path):
    path = tmp_path / "m.csmk"
    save_mask(path, np.ones((4, 4), dtype=bool))
    blob = bytearray(path.read_bytes())
    blob[16 + 5] = 7
    path.write_bytes(bytes(blob))
    with pytest.raises(FormatError, match="not 0/1"):
        load_mask(path)


def test_png_writer_emits_valid_signature(tmp_path):
    path = tmp_path / "img.png"
    write_gray_png(path, np.linspace(0, 1, 64 * 64).reshape(64, 64))
    blob = path.read_bytes()
    assert blob[:8] == b"\x89PNG\r\n\x1a\n"
    assert b"IHDR" in blob and b"IDAT" in blob and blob.endswith(b"IEND\xaeB`\x82")
