"""Experiment pipeline package"""
