"""Readers and writers for MVS dataset files and the package's own formats.

Layout of a scene directory (the MVSNet convention)::

    images/00000000.png      cams/00000000_cam.txt     depths/00000000.pfm
    pair.txt                 gt.ply (optional)         sparse.txt (optional)
"""

from __future__ import annotations

import math
import struct
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np
from PIL import Image

from .errors import ParseError
from .fusion import PointCloud
from .geometry import DepthMap, Extrinsics, Intrinsics, View
from .gpm import SparseCorrespondences


# ---------------------------------------------------------------------------
# camera files
# ---------------------------------------------------------------------------


@dataclass
class CameraFile:
    extrinsics: Extrinsics
    intrinsics: Intrinsics
    depth_min: float
    depth_interval: float
    depth_num: int | None = None
    depth_max: float | None = None


def _floats(tokens, path, lineno, count):
    if len(tokens) != count:
        raise ParseError(f"expected {count} numbers, found {len(tokens)}", path, lineno)
    try:
        return [float(t) for t in tokens]
    except ValueError as exc:
        raise ParseError(f"not a number: {exc}", path, lineno) from None


def parse_camera(text: str, path=None, invert_extrinsic: bool = False) -> CameraFile:
    lines = text.splitlines()

    def line(i):
        if i >= len(lines):
            raise ParseError("unexpected end of file", path, i + 1)
        return lines[i].strip()

    if line(0) != "extrinsic":
        raise ParseError("expected header 'extrinsic'", path, 1)
    T = np.array([_floats(line(i).split(), path, i + 1, 4) for i in range(1, 5)])
    if line(5) != "":
        raise ParseError("expected a blank line after the extrinsic matrix", path, 6)
    if line(6) != "intrinsic":
        raise ParseError("expected header 'intrinsic'", path, 7)
    K = np.array([_floats(line(i).split(), path, i + 1, 3) for i in range(7, 10)])
    if line(10) != "":
        raise ParseError("expected a blank line after the intrinsic matrix", path, 11)
    toks = line(11).split()
    if len(toks) not in (2, 4):
        raise ParseError(f"depth line needs 2 or 4 values, found {len(toks)}", path, 12)
    vals = _floats(toks, path, 12, len(toks))
    for extra in range(12, len(lines)):
        if lines[extra].strip():
            raise ParseError("unexpected content after the depth line", path, extra + 1)
    if invert_extrinsic:
        T = np.linalg.inv(T)
    try:
        ext = Extrinsics.from_matrix(T)
        intr = Intrinsics.from_matrix(K)
    except ValueError as exc:
        raise ParseError(str(exc), path) from None
    cam = CameraFile(ext, intr, vals[0], vals[1])
    if len(vals) == 4:
        if vals[2] != int(vals[2]):
            raise ParseError("depth_num must be an integer", path, 12)
        cam.depth_num, cam.depth_max = int(vals[2]), vals[3]
    return cam


def read_camera(path, invert_extrinsic: bool = False) -> CameraFile:
    """Read an MVSNet camera file (world-to-camera extrinsic)."""
    return parse_camera(Path(path).read_text(), path, invert_extrinsic)


def _num(x: float) -> str:
    return repr(float(x))


def format_camera(cam: CameraFile) -> str:
    T = cam.extrinsics.matrix
    K = cam.intrinsics.matrix
    out = ["extrinsic"]
    out += [" ".join(_num(x) for x in row) for row in T]
    out += ["", "intrinsic"]
    out += [" ".join(_num(x) for x in row) for row in K]
    out.append("")
    depth = [_num(cam.depth_min), _num(cam.depth_interval)]
    if cam.depth_num is not None:
        depth += [str(int(cam.depth_num)), _num(cam.depth_max)]
    out.append(" ".join(depth))
    return "\n".join(out) + "\n"


def write_camera(path, cam: CameraFile) -> None:
    Path(path).write_text(format_camera(cam))


# ---------------------------------------------------------------------------
# pair files
# ---------------------------------------------------------------------------


def parse_pair(text: str, path=None) -> dict[int, list[tuple[int, float]]]:
    """``{ref_id: [(src_id, score), ...]}`` in file order."""
    lines = [ln.strip() for ln in text.splitlines()]
    while lines and not lines[-1]:
        lines.pop()
    if not lines:
        raise ParseError("empty pair file", path, 1)
    try:
        n = int(lines[0])
    except ValueError:
        raise ParseError(f"expected a view count, found {lines[0]!r}", path, 1) from None
    if len(lines) < 1 + 2 * n:
        raise ParseError(f"declares {n} views but is truncated", path, len(lines) + 1)
    pairs = {}
    for k in range(n):
        ln_ref, ln_src = 2 + 2 * k, 3 + 2 * k
        try:
            ref = int(lines[ln_ref - 1])
        except ValueError:
            raise ParseError(f"expected a view id, found {lines[ln_ref - 1]!r}", path, ln_ref) from None
        toks = lines[ln_src - 1].split()
        if not toks:
            raise ParseError("missing source list", path, ln_src)
        try:
            m = int(toks[0])
        except ValueError:
            raise ParseError("expected a source count", path, ln_src) from None
        if len(toks) != 1 + 2 * m:
            raise ParseError(f"declares {m} sources but has {(len(toks) - 1) / 2:g}", path, ln_src)
        try:
            srcs = [(int(toks[1 + 2 * i]), float(toks[2 + 2 * i])) for i in range(m)]
        except ValueError as exc:
            raise ParseError(f"bad source entry: {exc}", path, ln_src) from None
        if any(s == ref for s, _ in srcs):
            raise ParseError(f"view {ref} lists itself as a source", path, ln_src)
        pairs[ref] = srcs
    return pairs


def read_pair(path) -> dict[int, list[tuple[int, float]]]:
    return parse_pair(Path(path).read_text(), path)


def format_pair(pairs: dict) -> str:
    out = [str(len(pairs))]
    for ref, srcs in pairs.items():
        out.append(str(int(ref)))
        out.append(" ".join([str(len(srcs))] + [f"{int(s)} {_num(sc)}" for s, sc in srcs]))
    return "\n".join(out) + "\n"


def write_pair(path, pairs: dict) -> None:
    Path(path).write_text(format_pair(pairs))


# ---------------------------------------------------------------------------
# PFM
# ---------------------------------------------------------------------------


def _read_header_line(f, path, lineno) -> str:
    raw = f.readline()
    if not raw:
        raise ParseError("unexpected end of file in header", path, lineno)
    try:
        return raw.decode("ascii").strip()
    except UnicodeDecodeError:
        raise ParseError("header is not ASCII", path, lineno) from None


def read_pfm_array(path) -> np.ndarray:
    with open(path, "rb") as f:
        magic = _read_header_line(f, path, 1)
        if magic == "PF":
            raise ParseError("unsupported: color PFM", path, 1)
        if magic != "Pf":
            raise ParseError(f"not a PFM file (magic {magic!r})", path, 1)
        dims = _read_header_line(f, path, 2).split()
        if len(dims) != 2:
            raise ParseError("expected 'width height'", path, 2)
        try:
            W, H = int(dims[0]), int(dims[1])
            scale = float(_read_header_line(f, path, 3))
        except ValueError:
            raise ParseError("malformed PFM header", path, 3) from None
        if scale == 0:
            raise ParseError("scale must be non-zero", path, 3)
        dtype = "<f4" if scale < 0 else ">f4"
        data = f.read()
    if len(data) != 4 * W * H:
        raise ParseError(f"expected {4 * W * H} data bytes, found {len(data)}", path)
    arr = np.frombuffer(data, dtype=dtype).reshape(H, W)
    # rows are stored bottom to top
    return np.flipud(arr).astype(np.float32)


def write_pfm_array(path, arr: np.ndarray, little_endian: bool = True) -> None:
    a = np.asarray(arr, dtype=np.float32)
    if a.ndim != 2:
        raise ValueError("only single-channel PFM is supported")
    H, W = a.shape
    scale = -1.0 if little_endian else 1.0
    header = f"Pf\n{W} {H}\n{scale:g}\n".encode("ascii")
    body = np.flipud(a).astype("<f4" if little_endian else ">f4").tobytes()
    with open(path, "wb") as f:
        f.write(header + body)


def read_pfm(path) -> DepthMap:
    arr = read_pfm_array(path).astype(np.float64)
    # non-finite or negative entries mark invalid pixels in some datasets
    arr[~np.isfinite(arr) | (arr < 0)] = 0.0
    return DepthMap(arr)


def write_pfm(path, depth: DepthMap | np.ndarray) -> None:
    write_pfm_array(path, depth.values if isinstance(depth, DepthMap) else depth)


# ---------------------------------------------------------------------------
# images
# ---------------------------------------------------------------------------


def read_image(path) -> np.ndarray:
    """8-bit PNG/PPM/PGM as float64 ``H×W×C`` in [0, 1]."""
    with Image.open(path) as im:
        if im.mode not in ("L", "RGB"):
            if im.mode in ("RGBA", "P", "LA"):
                im = im.convert("RGB")
            else:
                raise ParseError(f"unsupported image mode {im.mode!r} (8-bit L/RGB only)", path)
        a = np.asarray(im, dtype=np.float64) / 255.0
    return a[:, :, None] if a.ndim == 2 else a


def to_uint8(image: np.ndarray) -> np.ndarray:
    return np.clip(np.round(np.asarray(image, dtype=np.float64) * 255.0), 0, 255).astype(np.uint8)


def write_image(path, image: np.ndarray) -> None:
    a = to_uint8(image)
    if a.ndim == 3 and a.shape[2] == 1:
        a = a[:, :, 0]
    Image.fromarray(a).save(path)


# ---------------------------------------------------------------------------
# PLY (binary little endian)
# ---------------------------------------------------------------------------


def write_ply(path, cloud: PointCloud) -> None:
    P = cloud.positions.astype("<f4")
    n = len(P)
    has_color = cloud.colors is not None and cloud.colors.shape[1] in (1, 3)
    header = ["ply", "format binary_little_endian 1.0", f"element vertex {n}"]
    header += [f"property float {a}" for a in "xyz"]
    fields = [("x", "<f4"), ("y", "<f4"), ("z", "<f4")]
    if has_color:
        header += [f"property uchar {c}" for c in ("red", "green", "blue")]
        fields += [("red", "u1"), ("green", "u1"), ("blue", "u1")]
    header.append("end_header")
    rec = np.empty(n, dtype=fields)
    rec["x"], rec["y"], rec["z"] = P[:, 0], P[:, 1], P[:, 2]
    if has_color:
        col = to_uint8(cloud.colors)
        if col.shape[1] == 1:
            col = np.repeat(col, 3, axis=1)
        rec["red"], rec["green"], rec["blue"] = col[:, 0], col[:, 1], col[:, 2]
    with open(path, "wb") as f:
        f.write(("\n".join(header) + "\n").encode("ascii"))
        f.write(rec.tobytes())


_PLY_TYPES = {
    "char": "i1", "uchar": "u1", "short": "<i2", "ushort": "<u2", "int": "<i4", "uint": "<u4",
    "float": "<f4", "double": "<f8", "int8": "i1", "uint8": "u1", "int16": "<i2",
    "uint16": "<u2", "int32": "<i4", "uint32": "<u4", "float32": "<f4", "float64": "<f8",
}


def read_ply(path) -> PointCloud:
    """Read a binary little-endian PLY vertex element (x, y, z, optional colour)."""
    with open(path, "rb") as f:
        if _read_header_line(f, path, 1) != "ply":
            raise ParseError("not a PLY file", path, 1)
        fmt = _read_header_line(f, path, 2)
        if fmt != "format binary_little_endian 1.0":
            raise ParseError(f"unsupported PLY format {fmt!r}", path, 2)
        n, fields, lineno, in_vertex = None, [], 2, False
        while True:
            lineno += 1
            ln = _read_header_line(f, path, lineno)
            toks = ln.split()
            if ln == "end_header":
                break
            if not toks or toks[0] in ("comment", "obj_info"):
                continue
            if toks[0] == "element":
                if len(toks) != 3:
                    raise ParseError("expected 'element <name> <count>'", path, lineno)
                in_vertex = toks[1] == "vertex"
                if in_vertex:
                    try:
                        n = int(toks[2])
                    except ValueError:
                        raise ParseError(f"bad vertex count {toks[2]!r}", path, lineno) from None
                elif n is None:
                    raise ParseError("the vertex element must come first", path, lineno)
            elif toks[0] == "property" and in_vertex:
                if len(toks) != 3:
                    raise ParseError("expected 'property <type> <name>'", path, lineno)
                if toks[1] == "list":
                    raise ParseError("list properties on vertices are unsupported", path, lineno)
                if toks[1] not in _PLY_TYPES:
                    raise ParseError(f"unknown property type {toks[1]!r}", path, lineno)
                fields.append((toks[2], _PLY_TYPES[toks[1]]))
        if n is None:
            raise ParseError("no vertex element", path, lineno)
        dtype = np.dtype(fields)
        data = f.read(n * dtype.itemsize)
    if len(data) != n * dtype.itemsize:
        raise ParseError(f"expected {n} vertices, file is truncated", path)
    rec = np.frombuffer(data, dtype=dtype)
    names = dtype.names
    for a in "xyz":
        if a not in names:
            raise ParseError(f"missing vertex property {a!r}", path)
    P = np.stack([rec["x"], rec["y"], rec["z"]], axis=1).astype(np.float64)
    colors = None
    if all(c in names for c in ("red", "green", "blue")):
        colors = np.stack([rec["red"], rec["green"], rec["blue"]], axis=1).astype(np.float64) / 255.0
    return PointCloud(P, colors)


# ---------------------------------------------------------------------------
# sparse correspondences
# ---------------------------------------------------------------------------


def format_sparse(sparse: SparseCorrespondences) -> str:
    out = []
    for X, obs in zip(sparse.points, sparse.observations):
        toks = [_num(x) for x in X]
        for vid, u, w in obs:
            toks += [str(vid), _num(u), _num(w)]
        out.append(" ".join(toks))
    return "\n".join(out) + ("\n" if out else "")


def write_sparse(path, sparse: SparseCorrespondences) -> None:
    Path(path).write_text(format_sparse(sparse))


def parse_sparse(text: str, path=None) -> SparseCorrespondences:
    """One point per line: ``X Y Z`` then ``view col row`` triples."""
    pts, obs = [], []
    for i, ln in enumerate(text.splitlines(), start=1):
        toks = ln.split()
        if not toks or toks[0].startswith("#"):
            continue
        if len(toks) < 3 or (len(toks) - 3) % 3:
            raise ParseError("expected 'X Y Z' followed by 'view col row' triples", path, i)
        try:
            pts.append([float(t) for t in toks[:3]])
            o = []
            for k in range(3, len(toks), 3):
                o.append((int(toks[k]), float(toks[k + 1]), float(toks[k + 2])))
        except ValueError as exc:
            raise ParseError(str(exc), path, i) from None
        obs.append(o)
    return SparseCorrespondences(np.array(pts).reshape(-1, 3), obs)


def read_sparse(path) -> SparseCorrespondences:
    return parse_sparse(Path(path).read_text(), path)


# ---------------------------------------------------------------------------
# FMAP feature / embedding files
# ---------------------------------------------------------------------------

FMAP_MAGIC = b"FMAP"


def write_fmap(path, data: np.ndarray, height: int | None = None, width: int | None = None) -> None:
    """``FMAP``, u32 C, u32 H, u32 W, then C·H·W float32 little endian, channel-major.

    A 2-D ``C×M`` array needs ``height`` and ``width``; a 3-D array is ``C×H×W``.
    """
    a = np.asarray(data, dtype=np.float64)
    if a.ndim == 2:
        if height is None or width is None:
            height, width = 1, a.shape[1]
        a = a.reshape(a.shape[0], height, width)
    if a.ndim != 3:
        raise ValueError("FMAP data must be C×M or C×H×W")
    C, H, W = a.shape
    with open(path, "wb") as f:
        f.write(FMAP_MAGIC + struct.pack("<III", C, H, W))
        f.write(a.astype("<f4").tobytes())


def read_fmap(path) -> np.ndarray:
    """Returns a ``C×H×W`` float32 array."""
    with open(path, "rb") as f:
        head = f.read(16)
        if len(head) < 16 or head[:4] != FMAP_MAGIC:
            raise ParseError("not an FMAP file", path)
        C, H, W = struct.unpack("<III", head[4:])
        data = f.read()
    if len(data) != 4 * C * H * W:
        raise ParseError(f"expected {4 * C * H * W} data bytes, found {len(data)}", path)
    return np.frombuffer(data, dtype="<f4").reshape(C, H, W).astype(np.float32)


def write_embeddings(path, vectors: np.ndarray) -> None:
    """An ``n×d`` embedding set, stored as an FMAP with C=1, H=n, W=d."""
    v = np.asarray(vectors, dtype=np.float64)
    write_fmap(path, v[None], v.shape[0], v.shape[1])


def read_embeddings(path) -> np.ndarray:
    a = read_fmap(path)
    if a.shape[0] != 1:
        raise ParseError(f"embedding file must have C=1, found C={a.shape[0]}", path)
    return a[0].astype(np.float64)


# ---------------------------------------------------------------------------
# OBJ subset (v / f with positive indices)
# ---------------------------------------------------------------------------


def read_obj(path):
    verts, faces = [], []
    for i, ln in enumerate(Path(path).read_text().splitlines(), start=1):
        toks = ln.split()
        if not toks or toks[0].startswith("#"):
            continue
        if toks[0] == "v":
            if len(toks) < 4:
                raise ParseError("vertex needs three coordinates", path, i)
            try:
                verts.append([float(t) for t in toks[1:4]])
            except ValueError as exc:
                raise ParseError(str(exc), path, i) from None
        elif toks[0] == "f":
            try:
                idx = [int(t.split("/")[0]) for t in toks[1:]]
            except ValueError as exc:
                raise ParseError(str(exc), path, i) from None
            if len(idx) < 3 or min(idx) < 1:
                raise ParseError("faces need >= 3 positive indices", path, i)
            for k in range(1, len(idx) - 1):
                faces.append([idx[0] - 1, idx[k] - 1, idx[k + 1] - 1])
    V = np.array(verts, dtype=np.float64).reshape(-1, 3)
    F = np.array(faces, dtype=np.int64).reshape(-1, 3)
    if len(F) and F.max() >= len(V):
        raise ParseError("face index exceeds vertex count", path)
    return V, F


# ---------------------------------------------------------------------------
# scene manifests and views
# ---------------------------------------------------------------------------


@dataclass
class ViewPaths:
    image: Path
    camera: Path
    depth: Path | None = None


@dataclass
class SceneManifest:
    scene_id: str
    views: dict = field(default_factory=dict)  # id -> ViewPaths
    pairs: dict = field(default_factory=dict)  # id -> [(src, score)]
    root: Path | None = None

    def __post_init__(self):
        for ref, srcs in self.pairs.items():
            if ref not in self.views:
                raise ParseError(f"pair list references unknown view {ref}")
            for s, _ in srcs:
                if s not in self.views:
                    raise ParseError(f"view {ref} lists unknown source {s}")
                if s == ref:
                    raise ParseError(f"view {ref} lists itself as a source")

    @property
    def ids(self) -> list[int]:
        return sorted(self.views)


def _find_image(images: Path, stem: str) -> Path | None:
    for ext in (".png", ".ppm", ".pgm", ".jpg"):
        p = images / f"{stem}{ext}"
        if p.exists():
            return p
    return None


def load_manifest(root, scene_id: str | None = None) -> SceneManifest:
    """Index a scene directory laid out as in the module docstring."""
    root = Path(root)
    cams = sorted((root / "cams").glob("*_cam.txt"))
    if not cams:
        raise FileNotFoundError(f"no camera files under {root / 'cams'}")
    views = {}
    for cam in cams:
        stem = cam.name[: -len("_cam.txt")]
        try:
            vid = int(stem)
        except ValueError:
            raise ParseError(f"camera file name {cam.name!r} is not numeric") from None
        img = _find_image(root / "images", stem)
        if img is None:
            raise FileNotFoundError(f"no image for view {vid} in {root / 'images'}")
        depth = root / "depths" / f"{stem}.pfm"
        views[vid] = ViewPaths(img, cam, depth if depth.exists() else None)
    pair_path = root / "pair.txt"
    pairs = read_pair(pair_path) if pair_path.exists() else {}
    return SceneManifest(scene_id or root.name, views, pairs, root)


def load_view(manifest: SceneManifest, view_id: int, extrinsic_inverted: bool = False) -> View:
    """Load one calibrated view; ``extrinsic_inverted`` handles camera-to-world files."""
    if view_id not in manifest.views:
        raise KeyError(f"view {view_id} is not in scene {manifest.scene_id}")
    paths = manifest.views[view_id]
    cam = read_camera(paths.camera, invert_extrinsic=extrinsic_inverted)
    return View(read_image(paths.image), cam.intrinsics, cam.extrinsics, view_id)


def load_depth(manifest: SceneManifest, view_id: int) -> DepthMap:
    p = manifest.views[view_id].depth
    if p is None:
        raise FileNotFoundError(f"view {view_id} has no depth map")
    return read_pfm(p)


def write_scene(root, views, depths=None, pairs=None, depth_ranges=None, cloud=None, sparse=None) -> SceneManifest:
    """Write views (and optional ground truth) in the on-disk scene layout."""
    root = Path(root)
    for sub in ("images", "cams", "depths"):
        (root / sub).mkdir(parents=True, exist_ok=True)
    for k, v in enumerate(views):
        stem = f"{v.id:08d}"
        write_image(root / "images" / f"{stem}.png", v.image)
        dmin, dint, dnum, dmax = (depth_ranges[k] if depth_ranges else (0.0, 0.0, None, None))
        write_camera(root / "cams" / f"{stem}_cam.txt", CameraFile(v.extrinsics, v.intrinsics, dmin, dint, dnum, dmax))
        if depths is not None:
            write_pfm(root / "depths" / f"{stem}.pfm", depths[k])
    if pairs is not None:
        write_pair(root / "pair.txt", pairs)
    if cloud is not None:
        write_ply(root / "gt.ply", cloud)
    if sparse is not None:
        write_sparse(root / "sparse.txt", sparse)
    return load_manifest(root)


# ---------------------------------------------------------------------------
# semi-supervised splits
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class SplitSpec:
    mode: str = "by_views"  # or "by_scenes"
    ratio: float = 0.1
    seed: int = 0
    stratified: bool = False

    def __post_init__(self):
        if self.mode not in ("by_scenes", "by_views"):
            raise ValueError(f"mode must be 'by_scenes' or 'by_views', got {self.mode!r}")
        if not 0.0 < self.ratio <= 1.0:
            raise ValueError(f"ratio must lie in (0, 1], got {self.ratio}")


def _n_labeled(total: int, ratio: float) -> int:
    # guard against 0.1*100 style rounding pushing ceil up by one
    return min(total, math.ceil(ratio * total - 1e-9))


def make_split(scenes, spec: SplitSpec):
    """Split ``[(scene_id, n_views), ...]`` into labeled and unlabeled items.

    ``by_scenes`` items are scene ids; ``by_views`` items are
    ``(scene_id, view_index)`` pairs drawn globally (or per scene when
    ``spec.stratified``). Both lists come back in input order.
    """
    scenes = [(str(s), int(n)) for s, n in scenes]
    if not scenes:
        raise ValueError("no scenes to split")
    rng = np.random.default_rng(spec.seed)
    if spec.mode == "by_scenes":
        items = [s for s, _ in scenes]
        k = _n_labeled(len(items), spec.ratio)
        chosen = set(rng.choice(len(items), size=k, replace=False).tolist()) if k else set()
    else:
        items = [(s, v) for s, n in scenes for v in range(n)]
        if spec.stratified:
            chosen, offset = set(), 0
            for _, n in scenes:
                k = _n_labeled(n, spec.ratio)
                chosen.update((offset + rng.choice(n, size=k, replace=False)).tolist())
                offset += n
        else:
            k = _n_labeled(len(items), spec.ratio)
            chosen = set(rng.choice(len(items), size=k, replace=False).tolist())
    if not chosen:
        raise ValueError(f"ratio {spec.ratio} labels no items out of {len(items)}")
    labeled = [it for i, it in enumerate(items) if i in chosen]
    unlabeled = [it for i, it in enumerate(items) if i not in chosen]
    return labeled, unlabeled


def _item_str(item) -> str:
    return f"{item[0]} {item[1]}" if isinstance(item, tuple) else str(item)


def write_split(labeled_path, unlabeled_path, labeled, unlabeled) -> None:
    for path, items in ((labeled_path, labeled), (unlabeled_path, unlabeled)):
        Path(path).write_text("".join(_item_str(it) + "\n" for it in items))


def read_split_file(path) -> list:
    items = []
    for i, ln in enumerate(Path(path).read_text().splitlines(), start=1):
        toks = ln.split()
        if not toks:
            continue
        if len(toks) == 1:
            items.append(toks[0])
        elif len(toks) == 2:
            try:
                items.append((toks[0], int(toks[1])))
            except ValueError:
                raise ParseError("view index must be an integer", path, i) from None
        else:
            raise ParseError("expected 'scene' or 'scene view'", path, i)
    return items


def read_scene_list(path) -> list[tuple[str, int]]:
    """``scene_id n_views`` per line."""
    out = []
    for i, ln in enumerate(Path(path).read_text().splitlines(), start=1):
        toks = ln.split()
        if not toks or toks[0].startswith("#"):
            continue
        if len(toks) != 2:
            raise ParseError("expected 'scene_id n_views'", path, i)
        try:
            out.append((toks[0], int(toks[1])))
        except ValueError:
            raise ParseError("view count must be an integer", path, i) from None
    return out

