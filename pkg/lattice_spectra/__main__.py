"""Allow ``python -m lattice_spectra``."""
import sys

from lattice_spectra.cli import main

sys.exit(main())
