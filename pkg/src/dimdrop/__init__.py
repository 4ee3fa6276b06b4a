"""Executable constructions for prime dimension drop algebras and their embeddings."""

__version__ = "0.1.0"
