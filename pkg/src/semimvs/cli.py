"""Command-line entry point: ``semimvs <subcommand> [options]``.

Every run writes its metrics as CSV plus a ``run.txt`` echoing the resolved
configuration into ``--out``. Exit status is 0 on success, 1 on usage errors
and 2 on data errors.
"""

from __future__ import annotations

import argparse
import logging
import sys
from pathlib import Path

import numpy as np

from . import dataio, evaluation, fusion, geometry, gpm, losses, mmd, style, sweep, synth
from .errors import MVSError

log = logging.getLogger("semimvs")

EXIT_OK, EXIT_USAGE, EXIT_DATA = 0, 1, 2


class UsageError(Exception):
    pass


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        raise UsageError(f"{self.format_usage()}{self.prog}: error: {message}")


def _fmt(x) -> str:
    if isinstance(x, (float, np.floating)):
        return repr(float(x))
    return str(x)


def _write_csv(path: Path, header, rows) -> None:
    lines = [",".join(header)] + [",".join(_fmt(v) for v in row) for row in rows]
    path.write_text("\n".join(lines) + "\n")


def _write_run(out: Path, args) -> None:
    cfg = {k: v for k, v in sorted(vars(args).items()) if k != "func"}
    out.joinpath("run.txt").write_text("".join(f"{k}={_fmt(v)}\n" for k, v in cfg.items()))


def _load_scene(path, inverted=False):
    man = dataio.load_manifest(path)
    views = [dataio.load_view(man, i, inverted) for i in man.ids]
    return man, views


def _sources_for(man, views, ref_id, num_src):
    by_id = {v.id: v for v in views}
    if ref_id in man.pairs and man.pairs[ref_id]:
        ids = [s for s, _ in man.pairs[ref_id]]
    else:
        ids = [v.id for v in views if v.id != ref_id]
    if num_src:
        ids = ids[:num_src]
    return [by_id[i] for i in ids]


# ---------------------------------------------------------------------------
# subcommands
# ---------------------------------------------------------------------------


def cmd_synth(args) -> None:
    h, w = args.resolution
    sc = synth.generate(
        args.surface, args.views, args.texture, (h, w), radius=args.radius,
        arc_degrees=args.arc, channels=args.channels, seed=args.seed, n_sparse=args.sparse,
    )
    lo, hi = sc.depth_range
    dmin, dmax = args.margin_low * lo, args.margin_high * hi
    K = args.num_depths
    ranges = [(dmin, (dmax - dmin) / (K - 1), K, dmax)] * len(sc.views)
    pairs = {vid: src for vid, src in sc.pairs.items()}
    dataio.write_scene(args.out, sc.views, sc.gt_depths, pairs, ranges, sc.gt_cloud, sc.sparse)
    _write_csv(
        args.out / "synth.csv", ["metric", "value"],
        [("views", len(sc.views)), ("gt_points", len(sc.gt_cloud)), ("sparse_points", len(sc.sparse)),
         ("depth_min", dmin), ("depth_max", dmax), ("num_depths", K)],
    )


def _hyps_for(man, vid, args):
    cam = dataio.read_camera(man.views[vid].camera, args.extrinsic_inverted)
    K = args.num_depths or cam.depth_num
    dmin = args.depth_min if args.depth_min is not None else cam.depth_min
    if args.depth_max is not None:
        dmax = args.depth_max
    elif cam.depth_max is not None:
        dmax = cam.depth_max
    else:
        dmax = cam.depth_min + cam.depth_interval * ((K or 2) - 1)
    if not K:
        raise MVSError("number of depth hypotheses unknown; pass --num-depths")
    return sweep.DepthHypotheses.linspace(dmin, dmax, K)


def cmd_sweep(args) -> None:
    man, views = _load_scene(args.scene, args.extrinsic_inverted)
    (args.out / "depth_est").mkdir(parents=True, exist_ok=True)
    (args.out / "confidence").mkdir(parents=True, exist_ok=True)
    rows = []
    targets = args.views if args.views else man.ids
    by_id = {v.id: v for v in views}
    for vid in targets:
        ref = by_id[vid]
        hyps = _hyps_for(man, vid, args)
        depth, pv = sweep.plane_sweep_depth(
            ref, _sources_for(man, views, vid, args.num_src), hyps, args.cost, args.window, args.temperature
        )
        conf = pv.confidence()
        dataio.write_pfm(args.out / "depth_est" / f"{vid:08d}.pfm", depth)
        dataio.write_pfm_array(args.out / "confidence" / f"{vid:08d}.pfm", conf)
        err = ""
        if man.views[vid].depth is not None:
            gt = dataio.load_depth(man, vid).values
            m = gt > 0
            err = float(np.median(np.abs(depth.values[m] - gt[m]))) if m.any() else ""
        rows.append((vid, len(hyps), hyps.spacing, float(np.median(conf)), err))
    _write_csv(args.out / "sweep.csv", ["view", "num_depths", "spacing", "median_confidence", "median_abs_error"], rows)


def _depth_or_gt(man, vid, path):
    return dataio.read_pfm(path) if path else dataio.load_depth(man, vid)


def cmd_warp(args) -> None:
    man, views = _load_scene(args.scene, args.extrinsic_inverted)
    by_id = {v.id: v for v in views}
    ref = by_id[args.ref]
    depth = _depth_or_gt(man, args.ref, args.depth)
    srcs = [by_id[s] for s in args.src] if args.src else _sources_for(man, views, args.ref, 0)
    rows = []
    for s in srcs:
        img, mask = geometry.warp_image(s, ref, depth)
        dataio.write_image(args.out / f"warp_{s.id:08d}_to_{ref.id:08d}.png", img)
        dataio.write_image(args.out / f"mask_{s.id:08d}_to_{ref.id:08d}.png", mask.astype(np.float64))
    loss = geometry.photometric_loss(ref, srcs, depth)
    for s, val, n in zip(srcs, loss.per_view, loss.valid_pixels):
        rows.append((s.id, val, int(n)))
    rows.append(("total", loss.total, int(loss.valid_pixels.sum())))
    _write_csv(args.out / "warp.csv", ["source", "photometric", "valid_pixels"], rows)


def cmd_losses(args) -> None:
    pred = dataio.read_pfm(args.pred)
    gt = dataio.read_pfm(args.gt)
    sup = losses.supervised_loss(pred, gt)
    style_l = losses.style_consistency_loss(dataio.read_pfm(args.style_pred), gt) if args.style_pred else 0.0
    photo = consis = 0.0
    if args.scene:
        man, views = _load_scene(args.scene, args.extrinsic_inverted)
        by_id = {v.id: v for v in views}
        ref = by_id[args.ref]
        srcs = _sources_for(man, views, args.ref, args.num_src)
        photo = geometry.photometric_loss(ref, srcs, pred).total
        if args.consis:
            hyps = _hyps_for(man, args.ref, args)
            spec = losses.AugmentationSpec(seed=args.seed)
            _, pv = sweep.plane_sweep_depth(ref, srcs, hyps, args.cost, args.window, args.temperature)
            aug = [losses.augment(v, losses.AugmentationSpec(seed=args.seed + 1 + k)) for k, v in enumerate(srcs)]
            _, pv_aug = sweep.plane_sweep_depth(losses.augment(ref, spec), aug, hyps, args.cost, args.window, args.temperature)
            consis = losses.kl_consistency_loss(pv, pv_aug, symmetric=args.symmetric_kl)
    rep = losses.overall_loss(sup, photo, consis, style_l, args.lambda1, args.lambda2)
    (args.out / "losses.csv").write_text(rep.csv_header() + "\n" + rep.csv_row() + "\n")
    (args.out / "losses.txt").write_text(rep.key_values() + "\n")


def _features(img_path, fmap_path, levels):
    if fmap_path:
        a = dataio.read_fmap(fmap_path).astype(np.float64)
        C, H, W = a.shape
        return style.FeatureMap(a.reshape(C, H * W), H, W), None
    img = dataio.read_image(img_path)
    return style.extract_features(img, levels), img


def cmd_wct(args) -> None:
    if not (args.content or args.content_fmap) or not (args.style or args.style_fmap):
        raise UsageError("wct needs --content/--content-fmap and --style/--style-fmap")
    fc, cimg = _features(args.content, args.content_fmap, args.levels)
    fs, _ = _features(args.style, args.style_fmap, args.levels)
    out = style.wct(fc, fs, args.blend)
    rows = [("style_loss_before", style.style_loss(fc, fs)), ("style_loss_after", style.style_loss(out, fs)),
            ("content_loss", style.content_loss(out, fc))]
    if args.features_out:
        dataio.write_fmap(args.features_out, out.data, out.height, out.width)
    if cimg is not None:
        img = style.decode_features(out, cimg.shape[2])
        dataio.write_image(args.out / "transferred.png", img)
        if args.gpm_strength:
            filt = gpm.gpm_filter(img, cimg, args.gpm_strength)
            dataio.write_image(args.out / "transferred_gpm.png", filt)
    _write_csv(args.out / "wct.csv", ["metric", "value"], rows)


def cmd_gpm(args) -> None:
    if args.scene:
        _gpm_scene(args)
        return
    if not (args.input and args.guide):
        raise UsageError("gpm needs --input and --guide (or --scene with --style)")
    x = dataio.read_image(args.input)
    g = dataio.read_image(args.guide)
    y = gpm.gpm_filter(x, g, args.strength)
    dataio.write_image(args.out / "filtered.png", y)
    _write_csv(args.out / "gpm.csv", ["metric", "value"], [("mean_abs_change", float(np.abs(y - x).mean()))])


def _gpm_scene(args) -> None:
    if not args.style:
        raise UsageError("gpm --scene needs --style")
    man, views = _load_scene(args.scene, args.extrinsic_inverted)
    sty = dataio.read_image(args.style)
    gen, filt = [], []
    for v in views:
        g = style.style_transfer_image(v, sty, args.blend, args.levels)
        gen.append(v.with_image(g))
        filt.append(v.with_image(gpm.gpm_filter(g, v, args.strength)))
        dataio.write_image(args.out / f"wct_{v.id:08d}.png", g)
        dataio.write_image(args.out / f"gpm_{v.id:08d}.png", filt[-1].image)
    ref_id = args.ref if args.ref is not None else man.ids[0]
    k = man.ids.index(ref_id)
    depth = dataio.load_depth(man, ref_id)
    others = lambda vs: [x for i, x in enumerate(vs) if i != k]  # noqa: E731
    rows = [("photometric_wct", geometry.photometric_loss(gen[k], others(gen), depth).total),
            ("photometric_gpm", geometry.photometric_loss(filt[k], others(filt), depth).total)]
    sp_path = Path(args.scene) / "sparse.txt"
    sparse = dataio.read_sparse(sp_path) if sp_path.exists() else None
    rows.append(("spn_loss", gpm.spn_loss(views, [f.image for f in filt], sparse, ref_index=k).total))
    _write_csv(args.out / "gpm.csv", ["metric", "value"], rows)


def cmd_fuse(args) -> None:
    man, views = _load_scene(args.scene, args.extrinsic_inverted)
    if args.depth_dir:
        depths = [dataio.read_pfm(Path(args.depth_dir) / f"{i:08d}.pfm") for i in man.ids]
    else:
        depths = [dataio.load_depth(man, i) for i in man.ids]
    cfg = fusion.FusionConfig(args.min_views, args.rel_err, args.reproj, args.voxel)
    cloud = fusion.fuse(views, depths, cfg)
    dataio.write_ply(args.out / "fused.ply", cloud)
    _write_csv(args.out / "fuse.csv", ["metric", "value"], [("points", len(cloud))])


def cmd_eval(args) -> None:
    recon = dataio.read_ply(args.recon)
    gt = dataio.read_ply(args.gt)
    rows, last = [], None
    for d in args.threshold:
        last = evaluation.evaluate(recon, gt, d)
        rows += [tuple(r.split(",")) for r in last.csv_rows()]
    acc, comp, overall = evaluation.dtu_metrics(recon, gt, args.cap)
    rows += [("accuracy", _fmt(args.cap), _fmt(acc)), ("completeness", _fmt(args.cap), _fmt(comp)),
             ("overall", _fmt(args.cap), _fmt(overall))]
    _write_csv(args.out / "eval.csv", ["metric", "threshold", "value"], rows)
    hist = evaluation.distance_histogram(last, bins=args.bins)
    _write_csv(args.out / "eval_hist.csv", ["bin_lo", "bin_hi", "recon_to_gt", "gt_to_recon"], hist)


def _embedding_set(path: Path) -> mmd.EmbeddingSet:
    if path.is_dir():
        imgs = sorted(p for p in path.iterdir() if p.suffix.lower() in (".png", ".ppm", ".pgm"))
        if not imgs:
            imgs = sorted(p for p in (path / "images").glob("*") if p.suffix.lower() in (".png", ".ppm", ".pgm"))
        embs = [mmd.embed_view(dataio.read_image(p)) for p in imgs]
        if len({len(e) for e in embs}) > 1:
            raise MVSError(f"images under {path} mix channel counts; embeddings differ in size")
        vecs = np.stack(embs) if embs else np.zeros((0, 1))
        return mmd.EmbeddingSet(vecs, path.name)
    return mmd.EmbeddingSet(dataio.read_embeddings(path), path.stem)


def cmd_mmd(args) -> None:
    sets = [_embedding_set(Path(p)) for p in args.inputs]
    bw = args.bandwidth if args.bandwidth == "median" else float(args.bandwidth)
    M = mmd.confusion_matrix(sets, bw)
    names = [s.scene_id for s in sets]
    _write_csv(args.out / "mmd_matrix.csv", ["scene"] + names, [[n] + list(M[i]) for i, n in enumerate(names)])
    pairs = [(names[i], names[j], M[i, j]) for i in range(len(sets)) for j in range(i + 1, len(sets))]
    _write_csv(args.out / "mmd_pairs.csv", ["scene_a", "scene_b", "mmd2"], pairs)


def cmd_split(args) -> None:
    if args.scenes:
        scenes = dataio.read_scene_list(args.scenes)
    elif args.scene_dirs:
        scenes = [(Path(d).name, len(dataio.load_manifest(d).ids)) for d in args.scene_dirs]
    else:
        raise UsageError("split needs --scenes FILE or --scene-dirs DIR ...")
    spec = dataio.SplitSpec(args.mode, args.ratio, args.seed, args.stratified)
    lab, unl = dataio.make_split(scenes, spec)
    dataio.write_split(args.out / "labeled.txt", args.out / "unlabeled.txt", lab, unl)
    _write_csv(args.out / "split.csv", ["metric", "value"], [("labeled", len(lab)), ("unlabeled", len(unl))])


# ---------------------------------------------------------------------------
# parser
# ---------------------------------------------------------------------------


def _resolution(s: str):
    parts = s.lower().split("x")
    try:
        vals = [int(p) for p in parts]
    except ValueError:
        raise argparse.ArgumentTypeError(f"bad resolution {s!r}") from None
    if len(vals) == 1:
        return vals[0], vals[0]
    if len(vals) == 2:
        return vals[0], vals[1]
    raise argparse.ArgumentTypeError(f"bad resolution {s!r}")


def _add_sweep_args(p, temperature_default=0.01):
    p.add_argument("--num-depths", type=int, default=None, help="hypothesis count (default: camera file)")
    p.add_argument("--depth-min", type=float, default=None)
    p.add_argument("--depth-max", type=float, default=None)
    p.add_argument("--cost", choices=[c.value for c in sweep.CostKind], default="ssd")
    p.add_argument("--window", type=int, default=5)
    p.add_argument("--temperature", type=float, default=temperature_default,
                   help="softmax temperature on matching costs (raw-intensity SSD needs ~0.01)")
    p.add_argument("--num-src", type=int, default=4, help="sources per reference from pair.txt (0 = all)")


def build_parser() -> argparse.ArgumentParser:
    ap = _Parser(prog="semimvs", description=__doc__.splitlines()[0])
    ap.add_argument("-v", "--verbose", action="store_true")
    sub = ap.add_subparsers(dest="command", parser_class=_Parser)

    def add(name, func, help_):
        p = sub.add_parser(name, help=help_)
        p.set_defaults(func=func)
        p.add_argument("--out", type=Path, required=True, help="output directory")
        return p

    def scene_args(p, required=True):
        p.add_argument("--scene", type=Path, required=required)
        p.add_argument("--extrinsic-inverted", action="store_true",
                       help="camera files store camera-to-world (GTA-SFM style)")

    p = add("synth", cmd_synth, "render a synthetic scene to disk")
    p.add_argument("--surface", choices=synth.SURFACES, default="plane")
    p.add_argument("--views", type=int, default=5)
    p.add_argument("--texture", choices=synth.TEXTURES, default="noise")
    p.add_argument("--resolution", type=_resolution, default=(128, 128), help="N or HxW")
    p.add_argument("--channels", type=int, choices=(1, 3), default=3)
    p.add_argument("--radius", type=float, default=4.0)
    p.add_argument("--arc", type=float, default=30.0, help="arc spanned by the cameras, degrees")
    p.add_argument("--num-depths", type=int, default=64)
    p.add_argument("--margin-low", type=float, default=0.9)
    p.add_argument("--margin-high", type=float, default=1.1)
    p.add_argument("--sparse", type=int, default=200)
    p.add_argument("--seed", type=int, default=0)

    p = add("sweep", cmd_sweep, "plane-sweep depth estimation for every view")
    scene_args(p)
    _add_sweep_args(p)
    p.add_argument("--views", type=int, nargs="*", default=None)

    p = add("warp", cmd_warp, "warp source views onto a reference")
    scene_args(p)
    p.add_argument("--ref", type=int, required=True)
    p.add_argument("--src", type=int, nargs="*", default=None)
    p.add_argument("--depth", type=Path, default=None, help="reference depth PFM (default: ground truth)")

    p = add("losses", cmd_losses, "evaluate the loss terms and their weighted sum")
    p.add_argument("--pred", type=Path, required=True)
    p.add_argument("--gt", type=Path, required=True)
    p.add_argument("--style-pred", type=Path, default=None)
    scene_args(p, required=False)
    p.add_argument("--ref", type=int, default=0)
    p.add_argument("--consis", action="store_true", help="compute the KL consistency term via plane sweep")
    p.add_argument("--symmetric-kl", action="store_true")
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--lambda1", type=float, default=losses.LAMBDA1)
    p.add_argument("--lambda2", type=float, default=losses.LAMBDA2)
    _add_sweep_args(p)

    p = add("wct", cmd_wct, "whitening-colouring style transfer")
    p.add_argument("--content", type=Path)
    p.add_argument("--style", type=Path)
    p.add_argument("--content-fmap", type=Path)
    p.add_argument("--style-fmap", type=Path)
    p.add_argument("--features-out", type=Path)
    p.add_argument("--blend", type=float, default=1.0)
    p.add_argument("--levels", type=int, default=3)
    p.add_argument("--gpm-strength", type=float, default=0.0,
                   help="also write a propagation-filtered image when > 0")

    p = add("gpm", cmd_gpm, "edge-aware propagation filter")
    p.add_argument("--input", type=Path)
    p.add_argument("--guide", type=Path)
    p.add_argument("--strength", type=float, default=gpm.DEFAULT_STRENGTH)
    scene_args(p, required=False)
    p.add_argument("--style", type=Path, help="style image for --scene mode")
    p.add_argument("--ref", type=int, default=None)
    p.add_argument("--blend", type=float, default=1.0)
    p.add_argument("--levels", type=int, default=3)

    p = add("fuse", cmd_fuse, "fuse depth maps into a point cloud")
    scene_args(p)
    p.add_argument("--depth-dir", type=Path, default=None, help="estimated depths (default: ground truth)")
    p.add_argument("--min-views", type=int, default=2)
    p.add_argument("--rel-err", type=float, default=0.01)
    p.add_argument("--reproj", type=float, default=1.0)
    p.add_argument("--voxel", type=float, default=None)

    p = add("eval", cmd_eval, "precision / recall / F-score and DTU distances")
    p.add_argument("--recon", type=Path, required=True)
    p.add_argument("--gt", type=Path, required=True)
    p.add_argument("--threshold", type=float, nargs="+", required=True)
    p.add_argument("--cap", type=float, default=evaluation.DEFAULT_OUTLIER_CAP, help="DTU outlier cap")
    p.add_argument("--bins", type=int, default=50)

    p = add("mmd", cmd_mmd, "scene-by-scene MMD confusion matrix")
    p.add_argument("--inputs", nargs="+", required=True, help="embedding FMAP files or image directories")
    p.add_argument("--bandwidth", default="median")

    p = add("split", cmd_split, "labeled / unlabeled split")
    p.add_argument("--scenes", type=Path, help="file of 'scene_id n_views' lines")
    p.add_argument("--scene-dirs", nargs="*", default=None)
    p.add_argument("--mode", choices=("by_scenes", "by_views"), default="by_views")
    p.add_argument("--ratio", type=float, default=0.1)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--stratified", action="store_true")
    return ap


def run(argv=None) -> int:
    parser = build_parser()
    argv = list(sys.argv[1:] if argv is None else argv)
    try:
        args = parser.parse_args(argv)
        if not getattr(args, "func", None):
            raise UsageError(parser.format_help())
    except UsageError as exc:
        print(str(exc), file=sys.stderr)
        return EXIT_USAGE
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING, format="%(levelname)s %(message)s")
    try:
        args.out.mkdir(parents=True, exist_ok=True)
        _write_run(args.out, args)
        args.func(args)
    except UsageError as exc:
        print(str(exc), file=sys.stderr)
        return EXIT_USAGE
    except (MVSError, ValueError, KeyError, OSError) as exc:
        print(f"semimvs {args.command}: {exc}", file=sys.stderr)
        return EXIT_DATA
    return EXIT_OK


def main() -> None:
    sys.exit(run())


if __name__ == "__main__":
    main()
