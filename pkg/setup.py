#!/usr/bin/env python
from setuptools import find_packages, setup


with open('README.md', 'r') as f:
    LONG_DESCRIPTION = f.read()

INSTALL_REQUIRES = [
    'click',
    'dask',
    'numpy',
    'pandas>=1.0',
    'PyYAML',
    'scipy',
    'xarray',
]

EXTRAS_REQUIRE = {
    'tests': ['codecov', 'pytest-cov', 'pytest>=5'],
    'docs': ['numpydoc', 'sphinx', 'sphinx_rtd_theme'],
}

setup(
    name='pmeval',
    version='0.1.0',
    description='Robustness evaluation of classifiers with probability-'
                'margin attacks',
    long_description=LONG_DESCRIPTION,
    long_description_content_type='text/markdown',
    install_requires=INSTALL_REQUIRES,
    extras_require=EXTRAS_REQUIRE,
    packages=find_packages(),
    package_dir={'pmeval': 'pmeval'},
    entry_points={
        'console_scripts': [
            'pmeval=pmeval.cli:main',
        ],
    },
)
