class Big:
    def keep(self):
        return 1

    def fmt_a(self, v):
        return "<" + v + ">"

    def fmt_b(self, v):
        return "[" + v + "]"
