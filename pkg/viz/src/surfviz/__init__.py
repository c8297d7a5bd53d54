"""Render solver output files into publication-style figures.

The package reads only the documented file formats (trajectory CSV,
stationary-profile CSV, summary JSON, snapshot pairs); it never links
against the solver.
"""

__version__ = "0.1.0"
