class Source:
    def stay(self):
        return "s"

    def helper(self, v):
        return v * 2 + 1
