"""Writes celeba_landmarks.csv: 68-point layouts in aligned 178x218 portrait
geometry (eyes near y=112, mouth near y=152), one row per fixture id."""
import math
import random


def layout(rng):
    cx = 89 + rng.uniform(-3, 3)
    s = rng.uniform(0.92, 1.08)
    pts = []
    # jaw 0..16
    for i in range(17):
        t = math.pi * (1 - i / 16)
        pts.append((cx + 42 * s * math.cos(t), 118 + 52 * s * math.sin(t) * (0.3 if i in (0, 16) else 1)))
    # brows 17..26
    for i in range(5):
        pts.append((cx - 34 * s + 6.5 * s * i, 100 - 3 * math.sin(math.pi * i / 4)))
    for i in range(5):
        pts.append((cx + 8 * s + 6.5 * s * i, 100 - 3 * math.sin(math.pi * i / 4)))
    # nose bridge 27..30, nostrils 31..35
    for i in range(4):
        pts.append((cx, 110 + 7 * s * i))
    for i in range(5):
        pts.append((cx - 8 * s + 4 * s * i, 138 + 2 * (1 - abs(i - 2) / 2)))
    # eyes 36..41 and 42..47
    for ex in (cx - 20 * s, cx + 20 * s):
        for i in range(6):
            t = 2 * math.pi * i / 6
            pts.append((ex - 7 * s * math.cos(t), 112 - 3 * s * math.sin(t)))
    # outer lip 48..59, inner lip 60..67
    for i in range(12):
        t = 2 * math.pi * i / 12
        pts.append((cx - 16 * s * math.cos(t), 153 - 6 * s * math.sin(t)))
    for i in range(8):
        t = 2 * math.pi * i / 8
        pts.append((cx - 10 * s * math.cos(t), 153 - 2.5 * s * math.sin(t)))
    pts = [(x + rng.gauss(0, 0.6), y + rng.gauss(0, 0.6)) for x, y in pts]
    assert len(pts) == 68
    return pts


def main():
    rng = random.Random(20240611)
    with open("celeba_landmarks.csv", "w") as f:
        f.write("id," + ",".join(f"x{i},y{i}" for i in range(68)) + "\n")
        for k in range(12):
            pts = layout(rng)
            f.write(f"face_{k:03d}," + ",".join(f"{x:.3f},{y:.3f}" for x, y in pts) + "\n")


if __name__ == "__main__":
    main()
