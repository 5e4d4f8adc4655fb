def convert(value):
    return int(value) * 3
