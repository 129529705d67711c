import pytest


pytest_plugins = ['pmeval.testing']


# Hooks

def pytest_addoption(parser):
    parser.addoption(
        '--run-slow',
        action='store_true',
        help='also run the statistical ordering checks on the reference '
             'model.',
    )


def pytest_runtest_setup(item):
    if 'slow' in item.keywords and \
       not item.config.getoption('--run-slow'):
        pytest.skip('skipping slow test without --run-slow flag')
