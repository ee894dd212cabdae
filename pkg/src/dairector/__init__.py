"""dairector: an improv narrative co-direction engine.

Walks a graph of abstract plot fragments to propose the next story beat,
and nudges performers sideways with thematically related trope "tilts"
chosen by paragraph-vector similarity. Ships a trainer, a story sampler,
a live-session protocol with console and HTTP front-ends, and a
retrieval evaluation harness.
"""

from __future__ import annotations

__version__ = "0.1.0"
