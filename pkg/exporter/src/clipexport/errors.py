"""Exporter error hierarchy. Everything user-facing maps to exit code 1."""


class ExportError(Exception):
    pass


class JobError(ExportError):
    """Bad job configuration (template, paths, split rule)."""


class EmptyClassError(ExportError):
    """A class folder has no decodable images."""


class ModelUnavailableError(ExportError):
    """The requested model backend cannot be loaded in this environment."""
