class C:
    def process(self, items):
        cleaned = [i.strip() for i in items]
        return self._count(cleaned)

    def _count(self, cleaned):
        counts = {}
        for c in cleaned:
            counts[c] = counts.get(c, 0) + 1
        return counts
