"""Reproducible experiment harness behind the ``blab`` command."""
