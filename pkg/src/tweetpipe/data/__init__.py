"""Bundled data files: the fixture gazetteer and default category rules."""
