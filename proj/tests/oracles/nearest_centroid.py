"""Nearest class-mean accuracy of a labeled CSV (last column = label).

Centroids are fit on every row and the same rows are classified, with
ties going to the lower class. Plain Python, no numerical libraries.
"""
import csv
import math
import sys


def main(path):
    with open(path, newline="") as fh:
        rows = list(csv.reader(fh))[1:]
    xs = [[float(v) for v in r[:-1]] for r in rows]
    ys = [int(r[-1]) for r in rows]
    classes = sorted(set(ys))
    centroids = {}
    for c in classes:
        members = [x for x, y in zip(xs, ys) if y == c]
        centroids[c] = [math.fsum(col) / len(members) for col in zip(*members)]
    correct = 0
    for x, y in zip(xs, ys):
        best = min(classes, key=lambda c: (math.fsum((a - b) ** 2 for a, b in zip(x, centroids[c])), c))
        correct += best == y
    print(f"{correct} / {len(ys)} = {correct / len(ys):.17g}")


if __name__ == "__main__":
    main(sys.argv[1])
