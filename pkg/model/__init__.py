"""Horseshoe model package"""
