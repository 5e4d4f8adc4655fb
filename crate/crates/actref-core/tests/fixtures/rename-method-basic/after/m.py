class C:
    def new_method(self, a):
        return a * self.f
