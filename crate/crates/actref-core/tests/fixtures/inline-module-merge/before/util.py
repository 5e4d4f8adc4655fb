def fetch(url):
    return url + "?v=1"
