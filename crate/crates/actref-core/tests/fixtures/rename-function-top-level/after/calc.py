def new_calc(a, b):
    return a * b + a
