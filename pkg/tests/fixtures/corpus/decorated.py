import functools


def deco(fn):
    @functools.wraps(fn)
    def wrapper(*a, **kw):
        return fn(*a, **kw)
    return wrapper


@deco
@functools.lru_cache(maxsize=None)
def fib(n):
    return n if n < 2 else fib(n - 1) + fib(n - 2)


class Registry:
    items: dict = {}

    @classmethod
    def register(cls, name):
        def inner(obj):
            cls.items[name] = obj
            return obj
        return inner

    @deco
    def lookup(self, name, default=None):
        '''Single-quoted docstring.'''
        return self.items.get(name, default)


def overloaded(x: int) -> int: ...
def overloaded(x: str) -> str: ...
def overloaded(x):
    return x
