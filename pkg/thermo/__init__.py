"""Gibbs measures and pressure package"""
