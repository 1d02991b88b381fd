"""querylab: exact and Monte Carlo experiments on forward-vs-inverse query access.

Library layout:

- ``phases``: biased distributions over order-q roots of unity and their moments.
- ``linalg``: statevectors, density matrices, gates, measurements.
- ``ensembles``: diagonal-oracle ensembles and their normalized-trace statistics.
- ``biased_fourier``: near-orthonormal frames built from biased phase columns.
- ``query_sim``: query circuits, exact purified averaging, distinguishing advantage.
- ``families``: circuit generators (amplification probes, random circuits).
- ``amplitude``: amplitude estimation and amplification against black-box preparations.
- ``experiments``: parameter sweeps behind the CLI subcommands.
- ``config``: experiment configs and their key=value file format.
- ``cli``: the ``querylab`` command-line harness.
"""

__version__ = "0.1.0"
