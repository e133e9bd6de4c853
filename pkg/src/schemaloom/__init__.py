"""schemaloom: mine JSON schemas from scientific text with an LLM in the loop.

The workflow runs in three stages (generate from a domain specification,
refine over a small curated paper set with expert review gates, finalize over
a large corpus), grounds the resulting schema properties to ontology terms,
and quantifies schema variance across models with text-similarity metrics.
"""

__version__ = "0.1.0"


class SchemaloomError(Exception):
    """Base class for all errors raised by this package."""
