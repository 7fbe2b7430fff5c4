def lonely():
    return 42
