"""Formatting helpers."""


def beta(name, greeting="hello"):
    message = greeting + ", " + name
    return message


class Gamma:
    def gamma(self, count):
        lines = []
        for index in range(count):
            lines.append(str(index))
        return lines
