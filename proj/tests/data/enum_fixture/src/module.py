"""Enumeration fixture covering decorated, async and nested definitions."""
import functools


def top_level(a, b):
    return a + b


@functools.lru_cache(maxsize=None)
def decorated(x):
    return x * 2


async def async_top(x):
    return x


def outer():
    def inner():
        return 1

    return inner


class Widget:
    def method(self):
        return "m"

    @staticmethod
    def static_method():
        return "s"

    async def async_method(self):
        def helper():
            return 0

        return helper()


class Empty:
    pass


CONSTANT = top_level(1, 2)
