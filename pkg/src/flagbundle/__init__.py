"""Cowen-Douglas flag operators on truncated kernel spaces."""
