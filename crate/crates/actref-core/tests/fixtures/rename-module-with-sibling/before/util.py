LIMIT = 10
