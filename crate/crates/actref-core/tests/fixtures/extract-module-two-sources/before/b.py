class KeepB:
    def kb(self):
        return "b"

class GoneB:
    def gb(self, w):
        return w - 5
