def old_calc(a, b):
    return a * b + a
