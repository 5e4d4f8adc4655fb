class GoneA:
    def ga(self, q):
        return q * 3

class GoneB:
    def gb(self, w):
        return w - 5
