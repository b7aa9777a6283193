"""Builds the synthetic offline fixtures under fixtures/.

Map data is laid out in a camera-centred local frame (x east, y north, metres)
and converted to WGS84 with the same equirectangular model the engine uses.
Mock model replies are keyed by the engine's input digest.

Run from the repository root: python3 tools/make_fixtures.py
"""

import hashlib
import io
import json
import math
import os
import shutil

from PIL import Image
from shapely.geometry import LineString, Point, Polygon

R = 6_371_000.0
ROOT = "fixtures"


def digest(op, *parts):
    h = hashlib.sha256()
    h.update(op.encode() + b"\0")
    for p in parts:
        h.update((p.encode() if isinstance(p, str) else p) + b"\0")
    return h.hexdigest()[:16]


def box_text(b):
    return ",".join(f"{v:.4f}" for v in b)


def polar(bearing, rng):
    t = math.radians(bearing)
    return (rng * math.sin(t), rng * math.cos(t))


class Scene:
    def __init__(self, name, lat, lon, heading, fov=70.0):
        self.name, self.lat0, self.lon0 = name, lat, lon
        self.heading, self.fov = heading, fov
        self.elements = []
        self.next_node = 1
        self.audit = []

    def geo(self, x, y):
        lat = self.lat0 + math.degrees(y / R)
        lon = self.lon0 + math.degrees(x / (R * math.cos(math.radians(self.lat0))))
        return round(lat, 7), round(lon, 7)

    def _node(self, x, y, tags=None):
        nid = self.next_node
        self.next_node += 1
        lat, lon = self.geo(x, y)
        el = {"type": "node", "id": nid, "lat": lat, "lon": lon}
        if tags:
            el["tags"] = tags
        self.elements.append(el)
        return nid, lat, lon

    def way(self, wid, pts, tags, closed=False):
        refs, geom = [], []
        for x, y in pts:
            nid, lat, lon = self._node(x, y)
            refs.append(nid)
            geom.append({"lat": lat, "lon": lon})
        if closed:
            refs.append(refs[0])
            geom.append(geom[0])
        el = {"type": "way", "id": wid, "nodes": refs, "geometry": geom}
        if tags:
            el["tags"] = tags
        self.elements.append(el)
        return el

    def area(self, wid, pts, tags):
        return self.way(wid, pts, tags, closed=True)

    def polar_block(self, wid, b0, b1, r0, r1, tags):
        """Quadrilateral with corners at the given bearings and ranges."""
        pts = [polar(b0, r0), polar(b1, r0), polar(b1, r1), polar(b0, r1)]
        return self.area(wid, pts, tags)

    def rect(self, wid, cx, cy, w, h, tags):
        pts = [(cx - w / 2, cy - h / 2), (cx + w / 2, cy - h / 2), (cx + w / 2, cy + h / 2), (cx - w / 2, cy + h / 2)]
        return self.area(wid, pts, tags)

    def poi(self, x, y, tags):
        return self._node(x, y, tags)[0]

    def relation(self, rid, members, tags):
        el = {"type": "relation", "id": rid, "members": members, "tags": tags}
        self.elements.append(el)
        return el

    def document(self):
        # nodes first, as the interpreter emits them
        order = {"node": 0, "way": 1, "relation": 2}
        els = sorted(self.elements, key=lambda e: (order[e["type"]], e["id"]))
        return {
            "version": 0.6,
            "generator": "synthetic fixture",
            "osm3s": {"copyright": "synthetic data in the OpenStreetMap JSON layout"},
            "elements": els,
        }

    def counts(self):
        c = {"nodes": 0, "ways": 0, "relations": 0}
        for e in self.elements:
            c[e["type"] + "s"] += 1
        return c


def photo_bytes(seed):
    img = Image.new("RGB", (64, 48))
    px = img.load()
    for x in range(64):
        for y in range(48):
            px[x, y] = ((x * 4 + seed * 37) % 256, (y * 5 + seed * 11) % 256, (seed * 53) % 256)
    buf = io.BytesIO()
    img.save(buf, format="PNG", optimize=False)
    return buf.getvalue()


def write(path, data, mode="w"):
    os.makedirs(os.path.dirname(path), exist_ok=True)
    with open(path, mode, **({} if "b" in mode else {"encoding": "utf-8", "newline": "\n"})) as f:
        f.write(data)


def write_json(path, obj):
    write(path, json.dumps(obj, indent=2, ensure_ascii=False) + "\n")


def emit(scene, detect_text, grounds=None, fixes=None, truth=None, seed=0):
    base = os.path.join(ROOT, scene.name)
    if os.path.isdir(base):
        shutil.rmtree(base)
    doc = scene.document()
    write_json(os.path.join(base, "overpass.json"), doc)
    photo = photo_bytes(seed)
    write(os.path.join(base, "photo.png"), photo, "wb")
    write_json(
        os.path.join(base, "scene.json"),
        {"lat": scene.lat0, "lon": scene.lon0, "heading_deg": scene.heading, "fov_deg": scene.fov, "photo": "photo.png"},
    )
    write_json(
        os.path.join(base, "manifest.json"),
        {
            "query": f"around:300,{scene.lat0},{scene.lon0}",
            "timestamp": "synthetic",
            "counts": scene.counts(),
        },
    )
    write(os.path.join(base, "vlm", "detect", "default.txt"), detect_text)
    for label, b in (grounds or {}).items():
        reply = json.dumps({"label": label, "bounding_box": b})
        write(os.path.join(base, "vlm", "ground", digest("ground", label) + ".txt"), reply + "\n")
    for label, draft, modified, b in fixes or []:
        reply = json.dumps({"label": label, "modified": modified, "bounding_box": b})
        write(os.path.join(base, "vlm", "fix", digest("fix", label, box_text(draft)) + ".txt"), reply + "\n")
    if truth is not None:
        write_json(os.path.join(base, "ground_truth.json"), truth)
    return base


CHOI_HUNG_LINES = (
    "[left 70° to left 30°] — [Multi-storey building (left)] — [White building with balconies] — [~20 m]\n"
    "[left 10° to right 10°] — [Elevated walkway] — [Pedestrian bridge with a roof] — [~5–20 m]\n"
    "[right 30° to right 70°] — [Multi-storey building (right)] — [Tall building with red/white façade] — [~30 m]\n"
)


def choi_hung_scene():
    s = Scene("choi_hung", 22.3364, 114.2655, 0.0)
    s.polar_block(101, 295, 325, 14, 26, {"building": "residential", "name": "Lok Wah Court", "building:levels": "12"})
    # hidden behind Lok Wah Court
    s.polar_block(102, 300, 320, 40, 55, {"building": "residential", "name": "Lok Wah House"})
    s.way(103, [(-6, 12), (0, 12.5), (6, 12)], {"highway": "footway", "bridge": "yes", "covered": "yes", "name": "Choi Hung Footbridge"})
    s.polar_block(104, 35, 65, 20, 38, {"building": "commercial", "name": "Kai Tak Plaza", "building:levels": "20"})
    s.way(105, [(-150, 80), (150, 80)], {"highway": "primary", "name": "Prince Edward Road East"})
    s.way(106, [(-120, -30), (120, -30)], {"highway": "secondary", "name": "Lung Cheung Road"})
    s.rect(107, 70, 0, 30, 30, {"leisure": "park", "name": "Choi Hung Park"})
    s.rect(108, 0, -70, 20, 20, {"building": "yes"})
    s.rect(109, -25, 90, 30, 8, {})
    s.rect(110, 10, 140, 30, 30, {"natural": "water", "name": "Kai Tak Pond"})
    cafe = polar(50, 30)
    s.poi(cafe[0], cafe[1], {"amenity": "cafe", "name": "Harbour Espresso"})
    s.poi(1.5, 13.5, {"amenity": "bench"})
    s.poi(-130, 150, {"shop": "convenience", "name": "Circle Corner"})
    s.poi(30, 45, {})
    s.relation(
        201,
        [{"type": "way", "ref": 105, "role": ""}, {"type": "way", "ref": 106, "role": ""}, {"type": "way", "ref": 999, "role": ""}],
        {"type": "route", "route": "bus", "name": "Route 2"},
    )
    grounds = {
        "High-rise buildings (left side)": [0.0, 0.0, 0.62, 1.0],
        "High-rise buildings (right side)": [0.30, 0.0, 1.0, 1.0],
        "Multi-storey building (left)": [0.0, 0.05, 0.31, 1.0],
        "Elevated walkway": [0.34, 0.32, 0.67, 0.55],
        "Multi-storey building (right)": [0.66, 0.0, 1.0, 1.0],
    }
    fixes = [
        ("High-rise buildings (left side)", [0.0, 0.0, 0.62, 1.0], "no", [0.0, 0.0, 0.62, 1.0]),
        ("High-rise buildings (right side)", [0.30, 0.0, 1.0, 1.0], "yes", [0.27, 0.0, 1.0, 1.0]),
        ("Multi-storey building (right)", [0.66, 0.0, 1.0, 1.0], "yes", [0.63, 0.0, 1.0, 1.0]),
    ]
    truth = {
        "scene": "choi_hung",
        "features": [
            {"name": "Lok Wah Court", "category": "building", "osm_id": "way/101"},
            {"name": "Choi Hung Footbridge", "category": "road", "osm_id": "way/103"},
            {"name": "Kai Tak Plaza", "category": "building", "osm_id": "way/104"},
        ],
    }
    emit(s, CHOI_HUNG_LINES, grounds, fixes, truth, seed=1)
    return s


def campus_scene():
    """A denser campus block used for ingestion audits."""
    s = Scene("campus_300m", 39.9990, 116.3266, 45.0)
    wid = 300
    names = ["Library", "Main Hall", "Science Building", "Gymnasium", "Dormitory 1", "Dormitory 2", "Art Centre", "Canteen"]
    k = 0
    for gx in range(-3, 4):
        for gy in range(-3, 4):
            if (gx, gy) == (0, 0):
                continue
            if (gx + gy) % 3 == 0:
                continue
            wid += 1
            tags = {"building": "university"}
            if k < len(names) and (gx * gy) % 2 == 0:
                tags["name"] = names[k]
                k += 1
            s.rect(wid, gx * 60, gy * 60, 30, 22, tags)
    for i, y in enumerate((-90, 30, 150)):
        s.way(400 + i, [(-220, y), (220, y)], {"highway": "service", "name": f"Campus Road {i + 1}"})
    s.way(410, [(-10, -200), (-10, 0), (10, 200)], {"highway": "footway"})
    s.way(420, [(-200, -150), (-50, -170), (100, -160), (200, -190)], {"waterway": "stream", "name": "Wanquan Stream"})
    s.rect(430, 150, 100, 60, 40, {"leisure": "garden", "name": "Rose Garden"})
    s.rect(431, -150, 100, 40, 40, {"natural": "wood"})
    s.rect(432, -120, -30, 20, 20, {"amenity": "parking"})
    # multipolygon built from two open outer halves plus an inner courtyard
    s.way(440, [(100, -40), (140, -40), (140, -10)], {})
    s.way(441, [(140, -10), (100, -10), (100, -40)], {})
    s.rect(442, 120, -25, 10, 10, {})
    s.relation(
        450,
        [
            {"type": "way", "ref": 440, "role": "outer"},
            {"type": "way", "ref": 441, "role": "outer"},
            {"type": "way", "ref": 442, "role": "inner"},
        ],
        {"type": "multipolygon", "building": "university", "name": "Engineering Quad"},
    )
    for i, (x, y, tags) in enumerate(
        [
            (60, 60, {"amenity": "cafe", "name": "Campus Coffee"}),
            (-60, 0, {"amenity": "atm"}),
            (0, 32, {"highway": "bus_stop", "name": "East Gate"}),
            (200, -250, {"tourism": "artwork", "name": "Weiming Stone"}),
            (-250, 250, {"amenity": "bench"}),
        ]
    ):
        s.poi(x, y, tags)
    truth = {"scene": "campus_300m", "features": []}
    emit(s, "[Library] — [left 10° to right 10°] — [Red brick library] — [~60–100 m]\n", truth=truth, seed=2)
    write_json(os.path.join(ROOT, s.name, "audit.json"), audit_features(s))
    return s


def category(tags):
    if "building" in tags or "building:part" in tags:
        return "building"
    if "highway" in tags:
        return "road"
    if tags.get("leisure") in ("park", "garden") or tags.get("landuse") == "park":
        return "park"
    if "waterway" in tags or tags.get("natural") == "water":
        return "waterway"
    if "natural" in tags:
        return "natural"
    return "other"


def audit_features(s):
    """Expected features recomputed with shapely from the local layout."""
    widths = {"footway": 2.0, "road": 6.0, "waterway": 10.0}
    nodes = {e["id"]: e for e in s.elements if e["type"] == "node"}

    def local(lat, lon):
        y = math.radians(lat - s.lat0) * R
        x = math.radians(lon - s.lon0) * R * math.cos(math.radians(s.lat0))
        return x, y

    out = []
    members_of_mp = set()
    for e in s.elements:
        if e["type"] == "relation" and e["tags"].get("type") == "multipolygon":
            outer = [m["ref"] for m in e["members"] if m["role"] == "outer"]
            members_of_mp.update(outer)
            ways = {w["id"]: w for w in s.elements if w["type"] == "way"}
            ring = []
            for ref in outer:
                pts = [local(g["lat"], g["lon"]) for g in ways[ref]["geometry"]]
                ring.extend(pts if not ring else pts[1:])
            poly = Polygon(ring)
            out.append({"id": f"relation/{e['id']}", "name": e["tags"].get("name"), "category": category(e["tags"]),
                        "distance_m": round(poly.distance(Point(0, 0)), 3), "area_m2": round(poly.area, 3)})
    for e in s.elements:
        if e["type"] != "way":
            continue
        tags = e.get("tags", {})
        cat = category(tags)
        if cat == "other" and "name" not in tags:
            continue
        pts = [local(g["lat"], g["lon"]) for g in e["geometry"]]
        closed = pts[0] == pts[-1]
        if closed and "highway" not in tags and "waterway" not in tags:
            geom = Polygon(pts)
        else:
            if cat == "waterway":
                w = widths["waterway"]
            elif cat == "road" and tags.get("highway") in ("footway", "path", "pedestrian", "steps", "cycleway"):
                w = widths["footway"]
            elif cat == "road":
                w = widths["road"]
            else:
                w = widths["footway"]
            geom = LineString(pts).buffer(w / 2, cap_style=2, join_style=2, mitre_limit=4.0)
        out.append({"id": f"way/{e['id']}", "name": tags.get("name"), "category": cat,
                    "distance_m": round(geom.distance(Point(0, 0)), 3), "area_m2": round(geom.area, 3)})
    out.sort(key=lambda f: f["id"])
    return {"features": out, "note": "standalone point features are not listed"}


def eval_scenes():
    specs = []

    # 1: two correct matches
    s = Scene("eval_01", 39.9087, 116.3975, 0.0)
    s.polar_block(501, 330, 350, 30, 45, {"building": "yes", "name": "Zhengyang Gate"})
    s.polar_block(502, 10, 30, 25, 40, {"building": "museum", "name": "National Museum"})
    det = ("[Zhengyang Gate] — [left 30° to left 10°] — [Traditional gate tower] — [~30–45 m]\n"
           "[National Museum] — [right 10° to right 30°] — [Large columned building] — [~25–40 m]\n")
    truth = {"scene": "eval_01", "features": [
        {"name": "Zhengyang Gate", "category": "building", "osm_id": "way/501"},
        {"name": "National Museum", "category": "building", "osm_id": "way/502"}],
        "ratings": {"c": 4.0, "m": 4.0, "b": 3.5, "d": 3.8}}
    specs.append((s, det, truth))

    # 2: one hallucination, one missed feature
    s = Scene("eval_02", 22.2930, 114.1694, 90.0)
    s.polar_block(511, 70, 85, 15, 30, {"building": "commercial", "name": "Ocean Terminal"})
    s.polar_block(512, 95, 110, 20, 35, {"building": "yes", "name": "Star House"})
    s.way(513, [polar(60, 40), polar(120, 40)], {"highway": "primary", "name": "Salisbury Road"})
    det = ("[Ocean Terminal] — [left 20° to left 5°] — [Long waterfront mall] — [~15–30 m]\n"
           "[Clock Tower] — [right 30° to right 40°] — [Red brick clock tower] — [~60 m]\n"
           "[Star House] — [right 5° to right 20°] — [Office tower] — [~20–35 m]\n")
    truth = {"scene": "eval_02", "features": [
        {"name": "Ocean Terminal", "category": "building", "osm_id": "way/511"},
        {"name": "Star House", "category": "building", "osm_id": "way/512"},
        {"name": "Salisbury Road", "category": "road", "osm_id": "way/513"}],
        "ratings": {"c": 3.0, "m": 3.5, "b": 3.0, "d": 3.2}}
    specs.append((s, det, truth))

    # 3: correct identification, wrong match
    s = Scene("eval_03", 31.2397, 121.4998, 180.0)
    s.polar_block(521, 170, 190, 60, 80, {"building": "yes", "name": "Oriental Pearl Tower"})
    s.polar_block(522, 172, 188, 25, 40, {"building": "yes", "name": "Riverside Pavilion"})
    det = "[Oriental Pearl Tower] — [left 10° to right 10°] — [Tower with pink spheres] — [~30 m]\n"
    truth = {"scene": "eval_03", "features": [
        {"name": "Oriental Pearl Tower", "category": "building", "osm_id": "way/521"}],
        "ratings": {"c": 3.5, "m": 2.0, "b": 3.0, "d": 3.0}}
    specs.append((s, det, truth))

    # 4: park and water
    s = Scene("eval_04", 30.2590, 120.1388, 270.0)
    s.polar_block(531, 240, 265, 20, 60, {"leisure": "park", "name": "Zhongshan Park"})
    s.polar_block(532, 275, 300, 30, 90, {"natural": "water", "name": "West Lake"})
    det = ("[Park lawn] — [left 30° to left 5°] — [Green lawn with trees] — [~20–60 m]\n"
           "[West Lake] — [right 5° to right 30°] — [Calm lake water] — [~30–90 m]\n")
    truth = {"scene": "eval_04", "features": [
        {"name": "Zhongshan Park", "category": "park", "osm_id": "way/531"},
        {"name": "West Lake", "category": "waterway", "osm_id": "way/532"}],
        "ratings": {"c": 3.8, "m": 3.6, "b": 3.4, "d": 3.9}}
    specs.append((s, det, truth))

    # 5: unmatched feature missing from the map
    s = Scene("eval_05", 34.2610, 108.9420, 0.0)
    s.polar_block(541, 350, 10, 40, 70, {"building": "yes", "name": "Bell Tower"})
    det = ("[Bell Tower] — [left 10° to right 10°] — [Ancient tower on a plinth] — [~40–70 m]\n"
           "[Food stall] — [right 25° to right 35°] — [Street food vendor] — [~8 m]\n")
    truth = {"scene": "eval_05", "features": [
        {"name": "Bell Tower", "category": "building", "osm_id": "way/541"}],
        "ratings": {"c": 3.9, "m": 3.9, "b": 3.6, "d": 3.7}}
    specs.append((s, det, truth))

    for i, (s, det, truth) in enumerate(specs):
        emit(s, det, truth=truth, seed=10 + i)


if __name__ == "__main__":
    choi_hung_scene()
    campus_scene()
    eval_scenes()
