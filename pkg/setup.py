"""
semwire
A Python package for semantic image compression: semantic masking, multi-modal payloads and rate-distortion sweeps
"""

import sys
from setuptools import setup, find_packages

short_description = __doc__.split("\n")

try:
    with open("README.md", "r") as handle:
        long_description = handle.read()
except:
    long_description = "\n".join(short_description[2:])


setup(
    name= 'semwire',
    author = 'semwire developers',
    description = short_description[2],
    long_description = long_description,
    long_description_content_type = "text/markdown",
    license = 'MIT',

    packages=find_packages(exclude=['tests', 'examples', 'examples.*']),
    package_data={'semwire': ['data/*.txt']},
    python_requires='>=3.8',
    install_requires=['numpy', 'scipy', 'pandas', 'Pillow', 'matplotlib'],
    extras_require={'einsum': ['opt_einsum']},
    entry_points={'console_scripts': ['semwire = semwire.cli:main']},

)
