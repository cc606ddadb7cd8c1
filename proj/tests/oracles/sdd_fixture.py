"""Writes the small annotation fixture tree and its expected window summary.

The windowing here is an independent re-statement of the loader rules:
drop lost rows, bbox centres, keep frames divisible by the stride, split at
gaps, then slide 20-frame windows across each video's timeline.
"""
import json
import math
import random
from pathlib import Path

HERE = Path(__file__).resolve().parent
ROOT = HERE.parent / "fixtures" / "sdd"
STRIDE = 12
T_OBS, T_PRED = 8, 12
CANON = {"pedestrian": 4, "biker": 0, "bicyclist": 0, "skater": 5, "skateboarder": 5,
         "car": 2, "bus": 1, "cart": 3, "golf cart": 3}

VIDEOS = {
    "bookstore/video0": [("Pedestrian", 0, 400), ("Biker", 24, 380), ("Skater", 0, 300), ("Pedestrian", 60, 420)],
    "deathCircle/video1": [("Car", 0, 350), ("Cart", 12, 330), ("Bus", 0, 300), ("Biker", 0, 400)],
}


def write_fixture():
    rng = random.Random(20240611)
    for scene, tracks in VIDEOS.items():
        rows = []
        for tid, (label, start, end) in enumerate(tracks):
            x, y = rng.uniform(100, 900), rng.uniform(100, 900)
            vx, vy = rng.uniform(-0.4, 0.4), rng.uniform(-0.4, 0.4)
            for frame in range(start, end + 1):
                cx, cy = x + vx * (frame - start), y + vy * (frame - start)
                w, h = 20 + tid, 30 + tid
                lost = 1 if (tid == 1 and 150 <= frame < 170) else 0
                occluded = 1 if frame % 50 == 0 else 0
                rows.append((tid, round(cx - w / 2), round(cy - h / 2), round(cx + w / 2), round(cy + h / 2),
                             frame, lost, occluded, 0, label))
        path = ROOT / scene / "annotations.txt"
        path.parent.mkdir(parents=True, exist_ok=True)
        with path.open("w") as f:
            for r in rows:
                f.write(" ".join(str(v) for v in r[:9]) + f' "{r[9]}"\n')


def windows_for(path):
    tracks = {}
    for line in path.read_text().splitlines():
        head, label = line.split('"')[0].split(), line.split('"')[1]
        tid, xmin, ymin, xmax, ymax, frame, lost = (int(v) for v in head[:7])
        if lost:
            continue
        t = tracks.setdefault(tid, {"label": CANON[label.lower()], "pts": {}})
        t["pts"].setdefault(frame, ((xmin + xmax) / 2, (ymin + ymax) / 2))
    pieces = []
    for tid in sorted(tracks):
        frames = sorted(f for f in tracks[tid]["pts"] if f % STRIDE == 0)
        run = []
        for f in frames:
            if run and f - run[-1] != STRIDE:
                pieces.append((tid, tracks[tid], run))
                run = []
            run.append(f)
        if run:
            pieces.append((tid, tracks[tid], run))
    first = min(p[2][0] for p in pieces)
    last = max(p[2][-1] for p in pieces)
    out = []
    start = first
    while start + (T_OBS + T_PRED - 1) * STRIDE <= last:
        end = start + (T_OBS + T_PRED - 1) * STRIDE
        agents = []
        for tid, t, run in pieces:
            if run[0] <= start and run[-1] >= end:
                pts = [t["pts"][f] for f in range(start, end + 1, STRIDE)]
                agents.append((tid, t["label"], pts))
        if agents:
            out.append((start, agents))
        start += STRIDE
    return out, {tid: t["label"] for tid, t in tracks.items()}


def main():
    write_fixture()
    summary = {"frame_stride": STRIDE, "videos": {}, "total_windows": 0, "track_classes": [0] * 6,
               "coordinate_sum": 0.0}
    for scene in sorted(VIDEOS):
        wins, labels = windows_for(ROOT / scene / "annotations.txt")
        for lab in labels.values():
            summary["track_classes"][lab] += 1
        summary["videos"][scene] = {
            "windows": len(wins),
            "first_start": wins[0][0],
            "agents_per_window": [len(a) for _, a in wins],
            "first_agent_first_point": list(wins[0][1][0][2][0]),
        }
        summary["total_windows"] += len(wins)
        summary["coordinate_sum"] += math.fsum(x + y for _, a in wins for _, _, pts in a for x, y in pts)
    (HERE.parent / "fixtures" / "sdd_expected.json").write_text(json.dumps(summary, indent=1) + "\n")


if __name__ == "__main__":
    main()
