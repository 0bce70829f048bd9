class PlatoonError(Exception):
    """Base for every error raised by platoonzk."""
