class NewName:
    def m(self):
        return self.x + 1
