class Acc:
    def add(self, items):
        acc = 0
        for it in items:
            acc = acc + it
        return acc
