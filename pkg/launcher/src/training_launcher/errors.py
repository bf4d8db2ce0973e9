class LauncherError(Exception):
    """Base class for launcher failures."""


class SchemaError(LauncherError):
    """An export file does not follow the documented conversation format."""


class ToolNotFound(LauncherError):
    """The external training tool is not on PATH."""
