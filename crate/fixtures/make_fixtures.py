"""Regenerates the fixture corpus: manifests, flat frame images and 16-bit depth PNGs.

Depth is ray-cast against the axis-aligned object boxes, a floor plane and a
back wall, so it is consistent with the annotations. Run from this directory.
"""

import json
import math
from pathlib import Path

import numpy as np
from PIL import Image

HERE = Path(__file__).resolve().parent
FLOOR_Y = 0.8
BACK_WALL_Z = 7.0


def rot_y(deg):
    t = math.radians(deg)
    c, s = math.cos(t), math.sin(t)
    return np.array([[c, 0.0, s], [0.0, 1.0, 0.0], [-s, 0.0, c]])


def flat_image(path, w, h, shade):
    Image.new("RGB", (w, h), (shade, shade, shade)).save(path)


def ray_box(o, d, lo, hi):
    with np.errstate(divide="ignore", invalid="ignore"):
        t1 = (lo - o) / d
        t2 = (hi - o) / d
    tmin = np.nanmax(np.minimum(t1, t2))
    tmax = np.nanmin(np.maximum(t1, t2))
    if tmax >= max(tmin, 0.0):
        return max(tmin, 0.0)
    return math.inf


def render_depth(cam, rot, trans, boxes):
    w, h, f = cam["width"], cam["height"], cam["focal"]
    cx, cy = w / 2.0, h / 2.0
    depth = np.zeros((h, w), dtype=np.uint16)
    for v in range(h):
        for u in range(w):
            d_cam = np.array([(u + 0.5 - cx) / f, (v + 0.5 - cy) / f, 1.0])
            d = rot @ d_cam
            best = math.inf
            if d[1] > 1e-9:
                best = min(best, (FLOOR_Y - trans[1]) / d[1])
            if d[2] > 1e-9:
                best = min(best, (BACK_WALL_Z - trans[2]) / d[2])
            for c, s in boxes:
                lo = np.array(c) - np.array(s) / 2.0
                hi = np.array(c) + np.array(s) / 2.0
                best = min(best, ray_box(trans, d, lo, hi))
            if math.isfinite(best):
                depth[v, u] = min(65535, round(best * 1000.0))
    return depth


def surface_points(c, s, n_side):
    """Grid samples on the six faces of an axis-aligned box."""
    c, s = np.array(c), np.array(s)
    pts = []
    g = (np.arange(n_side) + 0.5) / n_side - 0.5
    for axis in range(3):
        a, b = [i for i in range(3) if i != axis]
        for sign in (-0.5, 0.5):
            for x in g:
                for y in g:
                    p = np.zeros(3)
                    p[axis] = sign
                    p[a], p[b] = x, y
                    pts.append((c + p * s).round(4).tolist())
    return pts


def project(cam, p):
    f = cam["focal"]
    return [f * p[0] / p[2] + cam["width"] / 2.0, f * p[1] / p[2] + cam["height"] / 2.0]


def refs_for(cam, c, s, marker):
    corners = [
        [c[0] + sx * s[0] / 2, c[1] + sy * s[1] / 2, c[2] + sz * s[2] / 2]
        for sx in (-1, 1)
        for sy in (-1, 1)
        for sz in (-1, 1)
    ]
    px = [project(cam, p) for p in corners]
    x1 = max(0.0, min(p[0] for p in px))
    y1 = max(0.0, min(p[1] for p in px))
    x2 = min(cam["width"], max(p[0] for p in px))
    y2 = min(cam["height"], max(p[1] for p in px))
    pt = project(cam, c)
    return {
        "box2d": [round(x1, 2), round(y1, 2), round(x2, 2), round(y2, 2)],
        "point": [round(pt[0], 2), round(pt[1], 2)],
        "marker": marker,
    }


def write_manifest(dir_, manifest):
    dir_.mkdir(parents=True, exist_ok=True)
    (dir_ / "manifest.json").write_text(json.dumps(manifest, indent=2) + "\n")


def printer_scene():
    d = HERE / "printer"
    d.mkdir(parents=True, exist_ok=True)
    cam = {"width": 959, "height": 696, "focal": 959 / (2 * math.tan(math.radians(69.16 / 2)))}
    flat_image(d / "rgb.png", 959, 696, 180)
    values = [
        ("printer", [-0.16, 0.12, 1.56, 0.44, 0.51, 0.41, 0.11, 0.28, 0.05]),
        ("printer", [0.40, -0.02, 1.96, 0.45, 0.51, 0.36, 0.11, 0.27, 0.05]),
        ("table", [0.19, 0.56, 1.78, 0.53, 0.52, 1.36, 0.1, 0.26, 0.04]),
    ]
    objects = []
    for i, (label, v) in enumerate(values, start=1):
        objects.append(
            {
                "id": i,
                "label": label,
                "box": {"center": v[0:3], "size": v[3:6], "angles": v[6:9]},
                "frame": 0,
                "refs": refs_for(cam, v[0:3], v[3:6], i),
            }
        )
    write_manifest(
        d,
        {
            "schema_version": 1,
            "scene_id": "printer",
            "source": "annotated",
            "frames": [{"image": "rgb.png", "camera": cam}],
            "objects": objects,
        },
    )


OFFICE = [
    ("trash can", [-1.2, 0.55, 3.0], [0.3, 0.5, 0.3]),
    ("cabinet", [-1.6, 0.2, 4.5], [0.5, 1.2, 1.0]),
    ("desk", [0.5, 0.45, 3.5], [1.4, 0.7, 0.7]),
    ("monitor", [0.3, -0.1, 3.7], [0.5, 0.35, 0.1]),
    ("bottle", [0.95, 0.0, 3.3], [0.08, 0.2, 0.08]),
    ("printer", [3.0, 0.05, 4.0], [0.45, 0.35, 0.4]),
    ("door", [0.8, -0.2, 6.95], [0.9, 2.0, 0.05]),
]


def office_scene():
    d = HERE / "office"
    d.mkdir(parents=True, exist_ok=True)
    cam = {"width": 160, "height": 120, "focal": 120.0}
    poses = [(rot_y(0.0), np.zeros(3)), (rot_y(20.0), np.array([0.5, 0.0, 0.8]))]
    boxes = [(c, s) for _, c, s in OFFICE]
    frames = []
    for i, (r, t) in enumerate(poses):
        flat_image(d / f"rgb_{i}.png", cam["width"], cam["height"], 120 + 40 * i)
        depth = render_depth(cam, r, t, boxes)
        Image.fromarray(depth).save(d / f"depth_{i}.png")
        frames.append(
            {
                "image": f"rgb_{i}.png",
                "camera": cam,
                "pose": {"rotation": r.round(12).tolist(), "translation": t.tolist()},
                "depth": f"depth_{i}.png",
            }
        )
    objects = []
    for i, (label, c, s) in enumerate(OFFICE, start=1):
        o = {"id": i, "label": label, "box": {"center": c, "size": s}, "points": surface_points(c, s, 3)}
        if abs(math.atan2(c[0], c[2])) < math.atan(80 / 120):
            o["refs"] = refs_for(cam, c, s, i)
        objects.append(o)
    write_manifest(
        d,
        {"schema_version": 1, "scene_id": "office", "source": "synthetic", "frames": frames, "objects": objects},
    )


PAN = [
    ("chair", -25.0, 2.5),
    ("table", 10.0, 3.5),
    ("chair", 45.0, 2.2),
    ("plant", 80.0, 3.0),
    ("chair", 115.0, 2.8),
    ("tv", 150.0, 3.8),
    ("lamp", 185.0, 2.6),
]


def walkthrough_scene():
    d = HERE / "walkthrough"
    d.mkdir(parents=True, exist_ok=True)
    cam = {"width": 160, "height": 120, "focal": 120.0}
    frames = []
    for i in range(6):
        r = rot_y(35.0 * i)
        flat_image(d / f"frame_{i}.png", cam["width"], cam["height"], 60 + 25 * i)
        frames.append(
            {
                "image": f"frame_{i}.png",
                "camera": cam,
                "pose": {"rotation": r.round(12).tolist(), "translation": [0.0, 0.0, 0.0]},
            }
        )
    objects = []
    for i, (label, az, dist) in enumerate(PAN, start=1):
        a = math.radians(az)
        c = [round(dist * math.sin(a), 4), 0.4, round(dist * math.cos(a), 4)]
        objects.append({"id": i, "label": label, "box": {"center": c, "size": [0.6, 0.8, 0.6]}})
    write_manifest(
        d,
        {
            "schema_version": 1,
            "scene_id": "walkthrough",
            "source": "synthetic",
            "fps": 1.0,
            "frames": frames,
            "objects": objects,
        },
    )


if __name__ == "__main__":
    printer_scene()
    office_scene()
    walkthrough_scene()
