from .. import config


def helper_b():
    from pkg import c
    return c
