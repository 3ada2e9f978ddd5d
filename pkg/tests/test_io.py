import numpy as np
import pytest

from ddir.io import ImageFormatError, load_csv, load_image, load_pgm, save_csv, save_image, save_pgm


def test_csv_round_trip_is_lossless(tmp_path):
    a = np.random.default_rng(0).standard_normal((5, 7))
    save_csv(a, tmp_path / "a.csv")
    assert np.array_equal(load_csv(tmp_path / "a.csv"), a)


@pytest.mark.parametrize("binary", [True, False])
def test_pgm_round_trip(tmp_path, binary):
    a = np.arange(12).reshape(3, 4) / 255.0
    save_pgm(a, tmp_path / "a.pgm", binary=binary)
    b = load_pgm(tmp_path / "a.pgm")
    assert b.shape == (3, 4)
    np.testing.assert_allclose(b, a, atol=0.5 / 255)


def test_pgm_header_comment(tmp_path):
    p = tmp_path / "c.pgm"
    p.write_bytes(b"P2\n# a comment\n2 2\n# another\n10\n0 5\n10 5\n")
    np.testing.assert_allclose(load_pgm(p), [[0, 0.5], [1, 0.5]])


def test_truncated_pgm_reports_offset(tmp_path):
    p = tmp_path / "t.pgm"
    p.write_bytes(b"P5\n4 4\n255\n" + bytes(5))
    with pytest.raises(ImageFormatError) as err:
        load_pgm(p)
    assert err.value.offset is not None


def test_bad_magic(tmp_path):
    p = tmp_path / "x.pgm"
    p.write_bytes(b"P6\n1 1\n255\n\x00\x00\x00")
    with pytest.raises(ImageFormatError):
        load_pgm(p)


def test_dispatch_by_extension(tmp_path):
    a = np.full((4, 4), 0.25)
    save_image(a, tmp_path / "a.csv")
    save_image(a, tmp_path / "a.pgm")
    assert np.array_equal(load_image(tmp_path / "a.csv"), a)
    np.testing.assert_allclose(load_image(tmp_path / "a.pgm"), a, atol=1 / 255)
    with pytest.raises(ValueError):
        save_image(a, tmp_path / "a.png")
