"""Reference implementations written separately from the package, for cross-checks."""
from __future__ import annotations

import math


def sign(x: float) -> int:
    return (x > 0) - (x < 0)


# (sign of predicted, sign of raw, |predicted| vs |raw|) -> which value is used
_FILTER_TABLE = {}
for sp in (-1, 0, 1):
    for sr in (-1, 0, 1):
        for cmp in ("lt", "eq", "gt"):
            if sp == 0 or sr == 0 or sp != sr:
                pick = "zero"
            elif cmp == "lt":
                pick = "predicted"
            else:
                pick = "raw"
            _FILTER_TABLE[(sp, sr, cmp)] = pick


def filter_oracle(predicted: float, raw: float) -> float:
    a, b = abs(predicted), abs(raw)
    cmp = "lt" if a < b else ("eq" if a == b else "gt")
    pick = _FILTER_TABLE[(sign(predicted), sign(raw), cmp)]
    return {"zero": 0.0, "predicted": predicted, "raw": raw}[pick]


# --- forward kinematics by quaternions, straight from the table text -----------

def _qmul(a, b):
    aw, ax, ay, az = a
    bw, bx, by, bz = b
    return (aw * bw - ax * bx - ay * by - az * bz,
            aw * bx + ax * bw + ay * bz - az * by,
            aw * by - ax * bz + ay * bw + az * bx,
            aw * bz + ax * by - ay * bx + az * bw)


def _qrot(q, v):
    w, x, y, z = q
    p = _qmul(_qmul(q, (0.0, *v)), (w, -x, -y, -z))
    return p[1:]


def parse_links(text: str):
    links = []
    for raw in text.splitlines():
        line = raw.split("#")[0].split()
        if not line:
            continue
        f = {line[i]: line[i + 1:i + 4] for i in range(2, len(line)) if line[i] in
             ("offset", "axis", "com_offset")}
        links.append({
            "name": line[1], "parent": line[3], "joint": line[5],
            "offset": tuple(map(float, f["offset"])), "axis": tuple(map(float, f["axis"])),
            "mass": float(line[line.index("mass_g") + 1]),
            "com": tuple(map(float, f["com_offset"])),
        })
    return links


def chain_walk(text: str, angles: dict[str, float]):
    """Return ({link: origin}, com) for joint angles in radians (missing joints are 0)."""
    frames = {}
    total = 0.0
    acc = [0.0, 0.0, 0.0]
    for link in parse_links(text):
        if link["parent"] == "none":
            origin, q = (0.0, 0.0, 0.0), (1.0, 0.0, 0.0, 0.0)
        else:
            po, pq = frames[link["parent"]]
            d = _qrot(pq, link["offset"])
            origin = tuple(po[i] + d[i] for i in range(3))
            q = pq
            if link["joint"] != "fixed":
                ax = link["axis"]
                n = math.sqrt(sum(c * c for c in ax))
                h = angles.get(link["joint"], 0.0) / 2
                q = _qmul(pq, (math.cos(h), *(math.sin(h) * c / n for c in ax)))
        frames[link["name"]] = (origin, q)
        if link["mass"]:
            c = _qrot(q, link["com"])
            for i in range(3):
                acc[i] += link["mass"] * (origin[i] + c[i])
            total += link["mass"]
    return {k: v[0] for k, v in frames.items()}, tuple(a / total for a in acc)
