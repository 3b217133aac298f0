"""Bundled run configurations"""
