class KeepA:
    def ka(self):
        return "a"

class GoneA:
    def ga(self, q):
        return q * 3
