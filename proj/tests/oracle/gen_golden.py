"""Regenerates golden/qoe/*.json from the independent oracle.

usage: python3 tests/oracle/gen_golden.py <repo-root>
"""

import json
import math
import os
import random
import sys

sys.path.insert(0, os.path.dirname(__file__))
import p1203_oracle as oracle  # noqa: E402

RESOLUTIONS = [(320, 180), (384, 216), (512, 288), (640, 360), (768, 432),
               (960, 540), (1024, 576), (1280, 720), (1600, 900), (1920, 1080),
               (2560, 1440), (3200, 1800), (3840, 2160), (5120, 2880), (7680, 4320)]
LADDER = [round(145 * (27500 / 145) ** (i / 14)) for i in range(15)]
LADDER[-1] = 27500


def rung(i, fps=30):
    w, h = RESOLUTIONS[i]
    return {"bitrate_kbps": LADDER[i], "width": w, "height": h, "framerate": fps}


def dump(path, obj):
    with open(path, "w", encoding="utf-8") as f:
        json.dump(obj, f, indent=2, sort_keys=True)
        f.write("\n")


def video_quality_cases():
    pairs = []
    displays = [(3840, 2160), (1920, 1080)]
    for i in range(15):
        pairs.append((rung(i), displays[0], "pc"))
    pairs.append((rung(14), displays[1], "pc"))
    pairs.append((rung(7, fps=15), displays[0], "pc"))
    pairs.append((rung(9, fps=20), displays[1], "pc"))
    pairs.append((rung(4), displays[1], "mobile"))
    pairs.append((rung(12), displays[0], "mobile"))
    pairs.append(({"bitrate_kbps": 1000000, "width": 1920, "height": 1080,
                   "framerate": 30}, (1920, 1080), "pc"))
    out = []
    for rep, (dw, dh), device in pairs:
        score = oracle.segment_video_quality(rep["bitrate_kbps"], rep["width"],
                                             rep["height"], rep["framerate"],
                                             dw, dh, device)
        out.append({"input": dict(rep, display_width=dw, display_height=dh,
                                  device=device),
                    "score": score})
    return out


def stall_cases():
    patterns = [
        ([], 322.0),
        ([(100.0, 2.0)], 322.0),
        ([(100.0, 10.0)], 322.0),
        ([(0.0, 3.0)], 322.0),
        ([(40.0, 1.5), (200.0, 4.0)], 322.0),
        ([(20.0, 5.0), (60.0, 5.0), (100.0, 5.0)], 322.0),
        ([(10.0, 0.5), (12.0, 0.5), (14.0, 0.5), (16.0, 0.5)], 60.0),
        ([(0.0, 2.0), (120.0, 8.0)], 240.0),
        ([(30.0, 30.0)], 120.0),
        ([(50.0, 1.0), (150.0, 2.0), (250.0, 3.0), (300.0, 4.0), (310.0, 5.0)], 322.0),
    ]
    out = []
    for events, duration in patterns:
        out.append({"input": {"events": [{"t_start": s, "duration": d} for s, d in events],
                              "playback_duration": duration},
                    "degradation": oracle.stall_degradation(events, duration)})
    return out


def integration_case(rng, idx):
    seg = 4.0
    media = rng.choice([322.0, 120.0, 64.0, 40.0, 200.0])
    count = int(math.ceil(media / seg))
    kind = idx % 5
    level = rng.randrange(15)
    reps = []
    for k in range(count):
        if kind == 0:
            level = 14
        elif kind == 1:
            level = max(0, min(14, level + rng.choice([-2, -1, 0, 0, 1, 2])))
        elif kind == 2:
            level = 14 - int(14 * k / max(1, count - 1))
        elif kind == 3:
            level = rng.randrange(15)
        else:
            level = 3 if (k // 5) % 2 else 11
        reps.append(level)
    display = rng.choice([(3840, 2160), (1920, 1080)])
    device = "mobile" if idx % 7 == 6 else "pc"
    segments = []
    for k, level in enumerate(reps):
        r = rung(level)
        dur = min(seg, media - k * seg)
        score = oracle.segment_video_quality(r["bitrate_kbps"], r["width"], r["height"],
                                             r["framerate"], display[0], display[1], device)
        segments.append({"start": k * seg, "duration": dur, "rep": r, "score": score})
    events = []
    n_stalls = [0, 1, 2, 3, 0][idx % 5] if idx % 3 else idx % 4
    starts = sorted(rng.sample(range(4, int(media) - 4, 4), n_stalls)) if n_stalls else []
    for s in starts:
        events.append((float(s), round(rng.uniform(0.5, 12.0), 3)))
    horizon = media
    result = oracle.integrate_mos([(s["start"], s["duration"], s["score"]) for s in segments],
                                  events, horizon)
    return {
        "input": {
            "display_width": display[0], "display_height": display[1], "device": device,
            "segments": [{"start": s["start"], "duration": s["duration"], **s["rep"]}
                         for s in segments],
            "stalls": [{"t_start": s, "duration": d} for s, d in events],
            "horizon": horizon,
        },
        "expected": {
            "segment_scores": [s["score"] for s in segments],
            "mos": result["mos"],
            "video_quality_mean": result["video_quality_mean"],
            "stall_degradation": result["stall_degradation"],
        },
    }


def main():
    root = sys.argv[1] if len(sys.argv) > 1 else "."
    outdir = os.path.join(root, "golden", "qoe")
    os.makedirs(outdir, exist_ok=True)
    dump(os.path.join(outdir, "video_quality.json"), {"cases": video_quality_cases()})
    dump(os.path.join(outdir, "stalls.json"), {"cases": stall_cases()})
    rng = random.Random(1203)
    cases = [integration_case(rng, i) for i in range(24)]
    dump(os.path.join(outdir, "sessions.json"), {"cases": cases})


if __name__ == "__main__":
    main()
