def f(a, b):
    y = compute(a + b)
    return y
