"""HTTP service wrapping the estimators."""
