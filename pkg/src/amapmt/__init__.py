"""Wireless multiple-access grant protocol simulator."""
