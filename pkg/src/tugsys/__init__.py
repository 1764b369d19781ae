"""Numerical toolkit for weakly coupled infinity-Laplace systems.

Modules: ``markov`` (mode switching), ``domain`` (geometry and lattices),
``exact`` (closed-form solutions), ``solver`` (DPP value iteration), ``game``
(Monte Carlo tug-of-war), ``analysis`` (slope diagnostics) and ``cli``.
"""

from __future__ import annotations

__version__ = "0.1.0"
