"""Tests for pmeval.utils."""
import numpy as np
import pytest
from numpy.testing import assert_array_equal

from pmeval import utils


@pytest.mark.parametrize('arg, expected', [
    (None, None),
    ('pgd,pma', ['pgd', 'pma']),
    (' pgd , ', ['pgd']),
    (['a', 1], ['a', '1']),
    (3, ['3']),
], ids=['none', 'str', 'spaces', 'list', 'scalar'])
def test_as_str_list(arg, expected):
    assert utils.as_str_list(arg) == expected


def test_derive_seed():
    a = utils.derive_seed(0, 'PGD_ce')
    assert a == utils.derive_seed(0, 'PGD_ce')
    assert a != utils.derive_seed(1, 'PGD_ce')
    assert a != utils.derive_seed(0, 'PMA')
    assert 0 <= a < 2 ** 63


def test_sample_rng():
    a = utils.sample_rng(3, 10, 1).uniform(size=4)
    assert_array_equal(a, utils.sample_rng(3, 10, 1).uniform(size=4))
    assert not np.array_equal(a, utils.sample_rng(3, 11, 1).uniform(size=4))
    assert not np.array_equal(a, utils.sample_rng(3, 10, 2).uniform(size=4))


def test_atomic_write(tmp_path):
    path = tmp_path / 'sub' / 'file.txt'
    utils.atomic_write(path, b'one')
    utils.atomic_write(path, b'two')
    assert path.read_bytes() == b'two'
    assert [p.name for p in path.parent.iterdir()] == ['file.txt']


def test_digests(tmp_path):
    (tmp_path / 'd').mkdir()
    (tmp_path / 'd' / 'x').write_text('1')
    (tmp_path / 'f').write_text('1')

    before = utils.file_digest(tmp_path / 'd')
    assert utils.file_digest(tmp_path / 'f') != before
    (tmp_path / 'd' / 'x').write_text('2')
    assert utils.file_digest(tmp_path / 'd') != before

    config = dict(b=1, a=[1, 2])
    digest = utils.config_digest(config)
    assert len(digest) == 16
    # Key order does not matter
    assert utils.config_digest(dict(a=[1, 2], b=1)) == digest
    assert utils.config_digest(dict(config, b=2)) != digest
    assert utils.config_digest(config, [tmp_path / 'f']) != digest
