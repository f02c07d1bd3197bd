"""Knowledge-aware object and attribute coreference classification for
opinionated reviews."""

__version__ = "0.1.0"
