"""Feed reranking field-experiment platform."""
__version__ = "0.1.0"
