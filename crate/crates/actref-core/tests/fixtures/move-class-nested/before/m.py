class A:
    class Inner:
        def w(self):
            return 42

    def am(self):
        return 1

class B:
    def bm(self):
        return 2
