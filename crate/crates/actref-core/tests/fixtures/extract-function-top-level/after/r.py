def report(rows):
    header = "name,count"
    return render(header, rows)

def render(header, rows):
    lines = [header]
    for name, count in rows:
        lines.append(name + "," + str(count))
    return "\n".join(lines)
