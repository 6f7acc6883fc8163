"""Real randomized benchmarking of [4,2,2] logical gates versus bare qubits.

Subpackages of note:

* :mod:`rb422.clifford`, :mod:`rb422.groups` - Pauli/Clifford algebra and group catalogs
* :mod:`rb422.code` - the [4,2,2] code, its gate set and decoding
* :mod:`rb422.channels`, :mod:`rb422.simulator` - noise channels and density-matrix simulation
* :mod:`rb422.protocol` - sequence generation and survival statistics
* :mod:`rb422.analysis` - decay fits, fidelities and bootstrap intervals
* :mod:`rb422.config`, :mod:`rb422.experiment`, :mod:`rb422.qasm`, :mod:`rb422.plotting`, :mod:`rb422.cli` - I/O
"""

__version__ = "0.1.0"
