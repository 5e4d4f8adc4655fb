class KeepA:
    def ka(self):
        return "a"
