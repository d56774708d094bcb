"""Command-line entry point wiring the modules into train / predict /
evaluate / verify workflows."""

import argparse
import json
import sys
from pathlib import Path

import numpy as np

from . import data, decoder, metrics, rgp
from .errors import GeanError
from .optim import resolve_seed
from .pools import DEFAULT_LAMBDA
from .text import Vocabulary, tokenize

GAZE_KINDS = ("learned", "uniform", "random", "central", "peripheral")


class _UsageError(Exception):
    pass


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        raise _UsageError("%s\n%s" % (message, self.format_usage()))


def _fixed(value):
    """Render a report value with 6-decimal fixed floats."""
    if isinstance(value, float):
        return format(value, ".6f")
    if isinstance(value, dict):
        return "{" + ", ".join('"%s": %s' % (k, _fixed(v))
                               for k, v in sorted(value.items())) + "}"
    if isinstance(value, (list, tuple)):
        return "[" + ", ".join(_fixed(v) for v in value) + "]"
    return json.dumps(value)


def write_report(path, obj):
    Path(path).parent.mkdir(parents=True, exist_ok=True)
    with open(path, "w", encoding="utf-8") as f:
        f.write(_fixed(obj))
        f.write("\n")


def _out_dir(args):
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    return out


def _load_rgp(path):
    arrays = data.load_checkpoint(path)
    kh, kw, cin, cp = arrays["p_in"].shape
    cfg = rgp.RgpConfig(in_channels=cin, proj_channels=cp,
                        hidden=arrays["u_z"].shape[-1],
                        readout_channels=(arrays["d1"].shape[2],
                                          arrays["d2"].shape[2],
                                          arrays["d3"].shape[2]))
    params = rgp.RgpParams.create(np.random.default_rng(0), cfg)
    params.load_state_dict(arrays)
    return params


def _load_decoder(ckpt_path, meta_path):
    with open(meta_path, encoding="utf-8") as f:
        meta = json.load(f)
    vocab = Vocabulary(meta["words"])
    cfg = decoder.DecoderConfig(vocab_size=len(vocab), **meta["config"])
    params = decoder.DecoderParams.create(np.random.default_rng(0), cfg)
    params.load_state_dict(data.load_checkpoint(ckpt_path))
    return params, vocab


# ---------------------------------------------------------------------------
# Subcommands
# ---------------------------------------------------------------------------

def cmd_make_synthetic(args):
    out = _out_dir(args)
    path = data.make_synthetic(out, n_clips=args.clips, n_frames=args.frames,
                               seed=resolve_seed(args.seed))
    write_report(out / "make_synthetic.json",
                 {"manifest": path.name, "clips": args.clips,
                  "frames": args.frames})
    return 0


def cmd_train_rgp(args):
    out = _out_dir(args)
    _, clips = data.load_dataset(args.manifest)
    train_clips = data.gaze_training_clips(clips)
    cfg = rgp.RgpTrainConfig(lr=args.lr, steps=args.steps,
                             seed=resolve_seed(args.seed),
                             target_loss=args.target_loss)
    params, history = rgp.train_rgp(train_clips, cfg)
    data.save_checkpoint(out / "rgp.ckpt", params.state_dict())
    write_report(out / "train_rgp.json", {
        "steps": len(history),
        "final_loss": history[-1],
        "target_entropy": rgp.target_entropy(train_clips),
    })
    return 0


def cmd_predict_gaze(args):
    out = _out_dir(args)
    params = _load_rgp(args.rgp)
    _, clips = data.load_dataset(args.manifest)
    index = {}
    for clip in clips:
        maps = rgp.predict_gaze(clip["motion"].astype(np.float32), params)
        rel = "%s_gaze.bin" % clip["id"]
        data.write_feature_file(out / rel, maps.astype(np.float64))
        index[clip["id"]] = rel
    write_report(out / "predict_gaze.json", index)
    return 0


def cmd_train_captioner(args):
    out = _out_dir(args)
    _, clips = data.load_dataset(args.manifest)
    rgp_params = _load_rgp(args.rgp) if args.rgp else None
    cfg = decoder.CaptionTrainConfig(lr=args.lr, steps=args.steps,
                                     seed=resolve_seed(args.seed),
                                     l2_coeff=args.l2, max_len=args.max_len,
                                     lam=args.lam, gaze=args.gaze)
    params, vocab, history = decoder.train_captioner(clips, rgp_params, cfg)
    data.save_checkpoint(out / "decoder.ckpt", params.state_dict())
    cfg_fields = {k: getattr(params.config, k)
                  for k in ("embed", "hidden", "att", "feat")}
    cfg_fields["agg_splits"] = list(params.config.agg_splits)
    with open(out / "decoder_meta.json", "w", encoding="utf-8") as f:
        json.dump({"words": vocab.words[3:], "config": cfg_fields},
                  f, sort_keys=True)
        f.write("\n")
    write_report(out / "train_captioner.json",
                 {"steps": len(history), "final_loss": history[-1],
                  "gaze": args.gaze})
    return 0


def cmd_caption(args):
    out = _out_dir(args)
    _, clips = data.load_dataset(args.manifest)
    params, vocab = _load_decoder(args.decoder, args.decoder_meta)
    rgp_params = _load_rgp(args.rgp) if args.rgp else None
    seed = resolve_seed(args.seed)
    captions = {}
    for i, clip in enumerate(clips):
        pools = decoder.build_clip_pools(
            clip["scene"], clip["motion"], clip["fovea"], rgp_params,
            args.gaze, args.lam, seed=seed + i)
        ids = decoder.decode_greedy(pools, params, vocab, args.max_len)
        captions[clip["id"]] = " ".join(vocab.decode(ids))
    write_report(out / "captions.json", captions)
    return 0


def cmd_eval_gaze(args):
    out = _out_dir(args)
    _, clips = data.load_dataset(args.manifest)
    manifest = json.loads(Path(args.manifest).read_text(encoding="utf-8"))
    frame_size = tuple(manifest["frame_size"])
    for clip in clips:
        clip["frame_size"] = frame_size
    if args.copy_gt:
        predictor = "copy-gt"
    else:
        if not args.rgp:
            raise _UsageError("eval-gaze requires --rgp or --copy-gt")
        params = _load_rgp(args.rgp)
        predictor = lambda clip: rgp.predict_gaze(
            clip["motion"].astype(np.float32), params)
    table = metrics.eval_protocol(clips, predictor,
                                  n_sets=args.protocol_sets,
                                  set_size=args.protocol_frames,
                                  seed=resolve_seed(args.seed))
    write_report(out / "eval_gaze.json", table)
    return 0


def cmd_eval_captions(args):
    out = _out_dir(args)
    _, clips = data.load_dataset(args.manifest)
    with open(args.captions, encoding="utf-8") as f:
        captions = json.load(f)
    cands = {c["id"]: tokenize(captions.get(c["id"], "")) for c in clips}
    refs = {c["id"]: [tokenize(r) for r in c["captions"]] for c in clips}
    ids = sorted(cands)
    report = {}
    for n in (1, 2, 3, 4):
        report["bleu%d" % n] = metrics.corpus_bleu(
            [cands[i] for i in ids], [refs[i] for i in ids], n)
    report["rouge_l"] = float(np.mean(
        [metrics.rouge_l(cands[i], refs[i]) for i in ids]))
    _, report["cider"] = metrics.cider(cands, refs)
    write_report(out / "eval_captions.json", report)
    return 0


def cmd_gradcheck(args):
    from .checks import gradient_report
    out = _out_dir(args)
    report = gradient_report(seed=resolve_seed(args.seed),
                             instances=args.instances)
    write_report(out / "gradcheck.json", report)
    worst = max(v for v in report.values())
    return 0 if worst <= 1e-4 else 2


# ---------------------------------------------------------------------------
# Parser
# ---------------------------------------------------------------------------

def build_parser():
    parser = _Parser(prog="gean", description=__doc__)
    sub = parser.add_subparsers(dest="command", required=True)

    def common(p, manifest=True):
        if manifest:
            p.add_argument("--manifest", required=True)
        p.add_argument("--out", required=True)
        p.add_argument("--seed", type=int, default=None)

    p = sub.add_parser("make-synthetic")
    common(p, manifest=False)
    p.add_argument("--clips", type=int, default=8)
    p.add_argument("--frames", type=int, default=20)
    p.set_defaults(func=cmd_make_synthetic)

    p = sub.add_parser("train-rgp")
    common(p)
    p.add_argument("--lr", type=float, default=1e-4)
    p.add_argument("--steps", type=int, default=2000)
    p.add_argument("--target-loss", type=float, default=None)
    p.set_defaults(func=cmd_train_rgp)

    p = sub.add_parser("predict-gaze")
    common(p)
    p.add_argument("--rgp", required=True)
    p.set_defaults(func=cmd_predict_gaze)

    p = sub.add_parser("train-captioner")
    common(p)
    p.add_argument("--rgp", default=None)
    p.add_argument("--gaze", choices=GAZE_KINDS, default="learned")
    p.add_argument("--lr", type=float, default=1e-4)
    p.add_argument("--steps", type=int, default=5000)
    p.add_argument("--l2", type=float, default=1e-5)
    p.add_argument("--max-len", type=int, default=80)
    p.add_argument("--lambda", dest="lam", type=float, default=DEFAULT_LAMBDA)
    p.set_defaults(func=cmd_train_captioner)

    p = sub.add_parser("caption")
    common(p)
    p.add_argument("--rgp", default=None)
    p.add_argument("--decoder", required=True)
    p.add_argument("--decoder-meta", required=True)
    p.add_argument("--gaze", choices=GAZE_KINDS, default="learned")
    p.add_argument("--max-len", type=int, default=80)
    p.add_argument("--lambda", dest="lam", type=float, default=DEFAULT_LAMBDA)
    p.set_defaults(func=cmd_caption)

    p = sub.add_parser("eval-gaze")
    common(p)
    p.add_argument("--rgp", default=None)
    p.add_argument("--copy-gt", action="store_true",
                   help="score the GT maps against themselves")
    p.add_argument("--protocol-sets", type=int, default=10)
    p.add_argument("--protocol-frames", type=int, default=3000)
    p.set_defaults(func=cmd_eval_gaze)

    p = sub.add_parser("eval-captions")
    common(p)
    p.add_argument("--captions", required=True)
    p.set_defaults(func=cmd_eval_captions)

    p = sub.add_parser("gradcheck")
    common(p, manifest=False)
    p.add_argument("--instances", type=int, default=20)
    p.set_defaults(func=cmd_gradcheck)

    return parser


def main(argv=None):
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
        return args.func(args)
    except _UsageError as e:
        print(str(e), file=sys.stderr)
        return 1
    except (GeanError, FileNotFoundError) as e:
        print("error: %s" % e, file=sys.stderr)
        return 1
    except Exception as e:  # noqa: BLE001 - runtime failures exit 2
        print("failure: %r" % e, file=sys.stderr)
        return 2


if __name__ == "__main__":
    sys.exit(main())
