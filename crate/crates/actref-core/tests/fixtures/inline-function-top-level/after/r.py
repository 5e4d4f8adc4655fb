def report(rows):
    header = "name,count"
    lines = [header]
    for name, count in rows:
        lines.append(name + "," + str(count))
    return "\n".join(lines)
