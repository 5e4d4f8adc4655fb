class Q:
    def area(self, w, h):
        r = round(w * h * self.scale)
        return r
