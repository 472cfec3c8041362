"""Symbolic dynamics package"""
