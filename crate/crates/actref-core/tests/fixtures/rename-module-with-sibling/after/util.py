LIMIT = 20
