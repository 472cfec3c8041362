"""Stackings, candidate sets and Monte Carlo package"""
