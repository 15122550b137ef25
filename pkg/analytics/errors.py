class AnalyticsError(ValueError):
    """Base error for the empirical pipeline"""


class PostFormatError(AnalyticsError):
    """The posts CSV is malformed or out of range"""
