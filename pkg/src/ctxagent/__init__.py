"""Context-efficient agent runtime.

Three mechanisms keep the working context small: an append-only state log
that replaces raw conversation history, a permanent/ephemeral cache ledger
per adapter channel with rewind-and-commit turn bookkeeping, and a two-stage
just-in-time tool protocol over minified schemas. A scripted backend and an
evaluation harness make every context-accounting claim measurable and
deterministic.
"""

__version__ = "0.1.0"
