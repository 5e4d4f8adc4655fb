class Store:
    def keep(self):
        return self.data

    def load(self, path):
        return open(path).read()

    def save(self, path, text):
        open(path, "w").write(text)

    def clear(self, path):
        open(path, "w").write("")
