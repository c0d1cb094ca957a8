"""Crawl, process, analyze and prune social search data behind a mock API,
with a pseudonymizing recommendation gateway and a compliance audit ledger."""

__version__ = "0.1.0"
