import json

import pytest

from pmeval._config import Config, _locate


@pytest.fixture
def cfg():
    """Return a :class:`pmeval._config.Config` object without reading a file.
    """
    yield Config(read=False)


def test_locate(cfg):
    try:
        # The result of this test depends on the user's environment. If
        # $HOME/.local/share/pmeval exists, the call will succeed; otherwise,
        # it will fail.
        _locate()
    except FileNotFoundError:
        pass

    with pytest.raises(FileNotFoundError):
        _locate('nonexistent')


def test_defaults(cfg):
    assert cfg.get('seed') == 0
    assert cfg.get('epsilon') == 0.05
    assert cfg.get('steps') == 100
    assert cfg.get('stage1') == 25
    assert cfg.get('lid k') == 20


def test_set_get(cfg):
    # set() casts to the key's type
    cfg.set('steps', '50')
    assert cfg.get('steps') == 50

    # set() with None makes no change
    cfg.set('steps', None)
    assert cfg.get('steps') == 50

    with pytest.raises(TypeError):
        cfg.set('steps', 'many')
    with pytest.raises(KeyError, match="unknown configuration key 'foo'"):
        cfg.set('foo', 1)


def test_read(tmp_path, monkeypatch):
    monkeypatch.setenv('PMEVAL_DATA', str(tmp_path))
    (tmp_path / 'config.json').write_text('{"lid k": "10", "epsilon": 1}')

    # Values are cast to the types of the keys
    cfg = Config()
    assert cfg.get('lid k') == 10
    assert type(cfg.get('epsilon')) is float

    cfg.clear()
    assert cfg.get('lid k') == 20

    (tmp_path / 'config.json').write_text('{"color": "red"}')
    with pytest.raises(KeyError, match="unknown configuration key"):
        Config()


def test_save(cfg, tmp_env, tmp_path, monkeypatch):
    monkeypatch.setenv('PMEVAL_DATA', str(tmp_path))
    cfg.set('threads', 4)
    cfg.save()

    # Only non-default values are written
    assert json.loads((tmp_path / 'config.json').read_text()) == \
        {'threads': 4}

    other = Config()
    assert other.get('threads') == 4
    assert other.path == (tmp_path / 'config.json').resolve()


def test_global_seed(cfg, monkeypatch):
    monkeypatch.delenv('PMA_SEED', raising=False)
    cfg.set('seed', 5)
    assert cfg.global_seed() == 5

    monkeypatch.setenv('PMA_SEED', '17')
    assert cfg.global_seed() == 17
    assert cfg.global_seed(3) == 3

    monkeypatch.setenv('PMA_SEED', 'x')
    with pytest.raises(ValueError, match='not an integer'):
        cfg.global_seed()


def test_report_header(request):
    from pmeval.testing import pytest_report_header

    # The hook takes only the pytest config
    assert pytest_report_header(request.config).startswith('pmeval config:')
