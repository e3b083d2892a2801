"""Code to run if this package is used as a Python module."""

from .main import main

main()
