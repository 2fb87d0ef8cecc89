"""Wedge-restricted contact process simulator and block construction toolkit."""
