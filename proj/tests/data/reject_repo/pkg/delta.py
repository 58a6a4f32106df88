"""Lookup helpers."""


def delta(mapping, key):
    value = mapping[key]
    return value
