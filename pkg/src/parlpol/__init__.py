"""Measure elite polarization from parliamentary speech corpora.

The pipeline ingests speeches, extracts politician-to-politician references
with sentiment through a pluggable LLM backend, resolves the referenced
actors to canonical parties, and aggregates the resulting dyads into
party-level and parliament-level polarization scores.  A validation
subsystem compares machine findings against human coding.
"""

__version__ = "0.1.0"
