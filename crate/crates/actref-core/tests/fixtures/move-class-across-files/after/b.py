x = 1

class Mover:
    def m(self, q):
        return q - 1
