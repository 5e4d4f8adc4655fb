class OldName:
    def m(self):
        return self.x + 1
