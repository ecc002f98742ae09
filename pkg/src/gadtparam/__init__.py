"""Derived relational liftings for declared data types.

A library and CLI that derives relational liftings from data declarations
(directly, or through their functorial completion), decides relatedness
with explicit derivation witnesses, and verifies inclusion preservation,
the graph lemma, structural mappability and a free theorem by exhaustive
search over finite carriers.
"""

__version__ = "0.1.0"
