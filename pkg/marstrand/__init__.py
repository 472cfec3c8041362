"""Marstrand-like transversality package"""
