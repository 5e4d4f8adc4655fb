class Parser:
    def parse(self, text):
        return text.split()
