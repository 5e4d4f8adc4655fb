class A:
    def helper(self, v):
        return v * 2 + 1

class B:
    def keep(self):
        return 0
