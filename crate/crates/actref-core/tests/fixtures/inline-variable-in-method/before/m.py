class Q:
    def area(self, w, h):
        raw = w * h * self.scale
        r = round(raw)
        return r
