import os

class Tool:
    def run(self):
        return os.getcwd()
