"""Renormalization and geometric consequences package"""
