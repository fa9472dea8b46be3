"""Setup configuration for the Lattice Spectra package.

This module configures the package installation settings, including dependencies,
package data, the console script and Python version requirements.
"""
from setuptools import setup, find_packages

setup(
    name="lattice_spectra",
    version="0.1.0",
    packages=find_packages(include=["lattice_spectra", "lattice_spectra.*"]),
    package_data={"lattice_spectra": ["schema.sql", "fixtures/*.cfg"]},
    install_requires=[
        "numpy",
        "scipy",
        "pandas",
        "joblib",
        "python-dotenv"
    ],
    entry_points={
        "console_scripts": ["lattice-spectra=lattice_spectra.cli:main"]
    },
    python_requires=">=3.10",
)
