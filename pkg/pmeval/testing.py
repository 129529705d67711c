"""Utilities for testing pmeval.

These include:

- pytest hooks, `fixtures <https://docs.pytest.org/en/latest/fixture.html>`_:

  .. autosummary::
     :nosignatures:

     pmeval_cli
     tmp_env
     blobs
     rings
     linear_model
     mlp_model
     reference_model

- Methods for building models and data for tests:

  .. autosummary::
     make_reference_model
     finite_difference

- …and assertions:

  .. autosummary::
     assert_logs
"""
from contextlib import contextmanager
import os

from click.testing import CliRunner
import numpy as np
import pytest

from . import cli, config as pmeval_config
from .attacks import AttackConfig
from .model import ModelSpec, init_classifier, train
from .synthetic import generate_synthetic, split

#: Pinned desk-scale reference configuration.
REFERENCE = dict(
    classes=10,
    dim=32,
    train_count=2000,
    eval_count=1000,
    hidden=(64,),
    epochs=10,
    lr=0.1,
    epsilon=0.05,
    adversarial_steps=10,
    seed=0,
)


# pytest hooks and fixtures

def pytest_sessionstart(session):
    """Unset any configuration read from the user's directory."""
    pmeval_config.clear()


def pytest_report_header(config):
    """Add the pmeval configuration to the pytest report header."""
    return 'pmeval config: {!r}'.format(pmeval_config.values)


@pytest.fixture(scope='session')
def tmp_env(tmp_path_factory):
    """Return the os.environ dict with the PMEVAL_DATA variable set.

    PMEVAL_DATA will point to a temporary directory that is unique to the
    test session. pmeval configuration (i.e. the 'config.json' file) can be
    written and read in this directory without modifying the current user's
    configuration. PMA_SEED is removed.
    """
    base_temp = tmp_path_factory.getbasetemp()
    os.environ['PMEVAL_DATA'] = str(base_temp)
    os.environ.pop('PMA_SEED', None)

    yield os.environ


@pytest.fixture(scope='session')
def pmeval_cli(tmp_env):
    """A CliRunner object that invokes the pmeval command-line interface."""
    class Runner(CliRunner):
        def invoke(self, *args, **kwargs):
            return super().invoke(cli.main, *args, env=tmp_env, **kwargs)

    yield Runner()


@pytest.fixture(scope='session')
def blobs():
    """Training and evaluation sets: 4 well-separated blobs in 8 dimensions.
    """
    return split(generate_synthetic('blobs', 4, 8, 400, seed=1), 300)


@pytest.fixture(scope='session')
def rings():
    """Training and evaluation sets: 3 concentric rings in 2 dimensions."""
    return split(generate_synthetic('rings', 3, 2, 900, seed=2), 600)


@pytest.fixture(scope='session')
def linear_model(blobs):
    """A linear classifier trained on :func:`blobs`."""
    spec = ModelSpec.mlp(8, (), 4)
    return train(init_classifier(spec, 3), blobs[0], epochs=20, lr=0.5)


@pytest.fixture(scope='session')
def mlp_model(blobs):
    """An 8-16-4 MLP trained on :func:`blobs`."""
    spec = ModelSpec.mlp(8, (16,), 4)
    return train(init_classifier(spec, 4), blobs[0], epochs=20, lr=0.5)


@pytest.fixture(scope='session')
def reference_model():
    """The pinned adversarially trained reference model and its evaluation
    set."""
    return make_reference_model()


# Models and data

def make_reference_model(**options):
    """Train the desk-scale reference model.

    Options override :data:`REFERENCE`. Returns (model, evaluation set).
    """
    o = dict(REFERENCE, **options)
    data = generate_synthetic('blobs', o['classes'], o['dim'],
                              o['train_count'] + o['eval_count'], o['seed'])
    train_set, eval_set = split(data, o['train_count'])

    spec = ModelSpec.mlp(o['dim'], o['hidden'], o['classes'])
    adversarial = AttackConfig(epsilon=o['epsilon'],
                               steps=o['adversarial_steps'], seed=o['seed'])
    model = train(init_classifier(spec, o['seed']), train_set, o['epochs'],
                  o['lr'], adversarial=adversarial, seed=o['seed'])
    return model, eval_set


def finite_difference(func, x, h=1e-5):
    """Central finite-difference gradient of the scalar *func* at *x*."""
    x = np.array(x, dtype=np.float64)
    grad = np.zeros_like(x)
    for i in np.ndindex(*x.shape):
        step = np.zeros_like(x)
        step[i] = h
        grad[i] = (func(x + step) - func(x - step)) / (2 * h)
    return grad


# Assertions for testing

@contextmanager
def assert_logs(caplog, message_or_messages=None):
    """Assert that *message_or_messages* appear in logs.

    Use assert_logs as a context manager for a statement that is expected to
    trigger certain log messages. assert_logs checks that these messages are
    generated.

    Example
    -------

    def test_foo(caplog):
        with assert_logs(caplog, 'a message'):
            logging.getLogger(__name__).info('this is a message!')

    Parameters
    ----------
    caplog : object
        The pytest caplog fixture.
    message_or_messages : str or list of str
        String(s) that must appear in log messages.
    """
    # Wrap a string in a list
    expected = [message_or_messages] if isinstance(message_or_messages, str) \
        else message_or_messages

    # Record the number of records prior to the managed block
    first = len(caplog.records)

    try:
        yield  # Nothing provided to the managed block
    finally:
        found = [any(e in msg for msg in caplog.messages[first:])
                 for e in expected]
        if not all(found):
            missing = [msg for i, msg in enumerate(expected) if not found[i]]
            raise AssertionError(f'Did not log {missing}\namong:\n'
                                 f'{caplog.messages[first:]}')
