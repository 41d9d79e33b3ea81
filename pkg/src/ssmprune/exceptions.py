"""Exception types shared across the toolkit."""


class ValidationError(ValueError):
    """A model, score table, or decision violates a structural invariant."""


class ManifestError(RuntimeError):
    """An interchange directory is malformed (missing files, bad schema)."""
