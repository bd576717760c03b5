"""Travelling waves of a singular-offset traffic model and their stability."""
