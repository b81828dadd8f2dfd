"""Command line entry point.

Exit codes: 0 success, 1 training aborted on a non-finite loss, 2 invalid
configuration, 3 scorer service unreachable, 4 malformed data file.
"""

from __future__ import annotations

import json
import logging
import os
import sys
from pathlib import Path

import click
import numpy as np

from .config import TOY_OVERRIDES, RunConfig, build_config, load_config_file
from .exceptions import ConfigError, FormatError, NumericError, ScorerProtocolError, ScorerTransportError

logger = logging.getLogger("pixseg")

EXIT_NUMERIC, EXIT_CONFIG, EXIT_SERVICE, EXIT_DATA = 1, 2, 3, 4


def _config(ctx, toy_default=False, **overrides) -> RunConfig:
    file_values = load_config_file(ctx.obj["config_path"]) if ctx.obj.get("config_path") else {}
    toy = ctx.obj.get("toy")
    if toy or (toy is None and toy_default):
        file_values = {**TOY_OVERRIDES, **file_values}
    overrides.setdefault("seed", ctx.obj.get("seed"))
    return build_config(file_values, overrides)


def _dump_json(obj, path=None):
    text = json.dumps(obj, indent=2) + "\n"
    if path is None:
        click.echo(text, nl=False)
    else:
        Path(path).parent.mkdir(parents=True, exist_ok=True)
        tmp = Path(str(path) + ".tmp")
        tmp.write_text(text)
        os.replace(tmp, path)


@click.group()
@click.option("--config", "config_path", type=click.Path(dir_okay=False), default=None, help="JSON run config.")
@click.option("--seed", type=int, default=None, help="Overrides the config seed.")
@click.option("--toy/--no-toy", default=None,
              help="Apply desk-scale optimiser overrides beneath the config file (train-toy defaults to on).")
@click.option("-v", "--verbose", is_flag=True)
@click.pass_context
def cli(ctx, config_path, seed, toy, verbose):
    """Toy multi-scale mask decoder: training, evaluation and data tooling."""
    logging.basicConfig(level=logging.INFO if verbose else logging.WARNING, format="%(message)s")
    ctx.ensure_object(dict)
    ctx.obj.update(config_path=config_path, seed=seed, toy=toy)


@cli.command("train-toy")
@click.option("--out", type=click.Path(file_okay=False), required=True)
@click.option("--steps", "n_steps", type=int, default=None)
@click.option("--lambda-ref", type=float, default=None)
@click.option("--alpha", type=float, default=None)
@click.option("--n-train", type=int, default=None)
@click.option("--n-test", type=int, default=None)
@click.pass_context
def train_toy(ctx, out, **overrides):
    """Train on synthetic scenes; writes a checkpoint, a step log and held-out metrics."""
    from .toy import train_toy

    cfg = _config(ctx, toy_default=True, out=out, **overrides)
    out = Path(out)
    out.mkdir(parents=True, exist_ok=True)
    effective = cfg.model_dump(mode="json")
    with open(out / "train_log.jsonl", "w") as log:
        log.write(json.dumps({"config": effective}) + "\n")

        def record(step, loss):
            log.write(json.dumps({"step": step, "loss": loss}) + "\n")

        est, metrics = train_toy(cfg, callback=record)
    metrics = {"config": effective, **metrics}
    est.save(out / "checkpoint", extra={"config": effective})
    _dump_json(metrics, out / "metrics.json")
    click.echo(json.dumps({k: metrics[k] for k in ("final_loss", "heldout_iou")}))


@cli.command("gen")
@click.option("--n", "n_scenes", type=int, default=None, help="Number of scenes (defaults to n_test).")
@click.option("--out", type=click.Path(file_okay=False), required=True)
@click.pass_context
def gen(ctx, n_scenes, out):
    """Write synthetic scenes as PNG images plus a JSON Lines record file."""
    from .data.records import save_records, scene_to_record
    from .data.synthetic import gen_synthetic, save_png
    from .toy import scene_config

    cfg = _config(ctx)
    out = Path(out)
    (out / "images").mkdir(parents=True, exist_ok=True)
    scenes = gen_synthetic(n_scenes or cfg.n_test, scene_config(cfg), seed=cfg.seed)
    records = []
    for i, scene in enumerate(scenes):
        ref = f"images/{i:06d}.png"
        save_png(scene.image, out / ref)
        records.append(scene_to_record(scene, f"{i:06d}", ref))
    save_records(records, out / "records.jsonl")
    _dump_json({"config": cfg.model_dump(mode="json"), "scenes": len(scenes)}, out / "gen.json")
    click.echo(str(out / "records.jsonl"))


def _make_scorer(mode, endpoint, timeout):
    from .matcheval import RemoteScorer, StubScorer

    if mode.startswith("stub-"):
        return StubScorer(mode[len("stub-") :])
    endpoint = endpoint or os.environ.get("SCORER_ENDPOINT")
    if not endpoint:
        raise ConfigError("remote scorer needs --scorer-endpoint or SCORER_ENDPOINT", {"scorer_endpoint": "missing"})
    return RemoteScorer(endpoint, timeout=timeout)


def _model_predictions(checkpoint, records, base):
    from PIL import Image

    from .data.convert import parse_answer
    from .data.synthetic import SyntheticScene, attributes_from_description
    from .matcheval import Prediction
    from .model import MaskSegmenter

    est = MaskSegmenter.load(checkpoint)
    scenes = []
    for r in records:
        path = Path(r.image) if Path(r.image).is_absolute() else base / r.image
        image = np.asarray(Image.open(path).convert("RGB"), dtype=np.float64).transpose(2, 0, 1) / 255.0
        descs = parse_answer(r.answer)
        attrs = np.stack([attributes_from_description(d) for d in descs])
        scenes.append(SyntheticScene(image, [None] * len(descs), np.zeros((len(descs),) + image.shape[1:], np.uint8),
                                     descs, attrs))
    masks = est.predict(scenes)
    return [Prediction(r.answer, m) for r, m in zip(records, masks)]


@cli.command("eval")
@click.option("--dataset", type=click.Path(exists=True, dir_okay=False), required=True)
@click.option("--checkpoint", type=click.Path(exists=True, file_okay=False), default=None)
@click.option("--predictions", type=click.Path(exists=True, dir_okay=False), default=None,
              help="Record file whose answers and masks are the predictions (matched by id).")
@click.option("--scorer-mode", type=click.Choice(["stub-const", "stub-exact", "stub-jaccard", "remote"]),
              default="stub-exact")
@click.option("--scorer-endpoint", default=None)
@click.option("--scorer-timeout", type=float, default=30.0)
@click.option("--stub-fallback", is_flag=True, help="Fall back to stub-exact if the remote scorer is unreachable.")
@click.option("--workers", type=int, default=1)
@click.option("--soft-product", is_flag=True, help="Multiply IoU by the score instead of hard gating.")
@click.option("--out", type=click.Path(dir_okay=False), default=None)
@click.pass_context
def eval_cmd(ctx, dataset, checkpoint, predictions, scorer_mode, scorer_endpoint, scorer_timeout, stub_fallback,
             workers, soft_product, out):
    """Match, splice, score and report gIoU/cIoU on few/many/overall splits."""
    from .data.records import load_records
    from .matcheval import Prediction, StubScorer, evaluate_dataset

    cfg = _config(ctx)
    if (checkpoint is None) == (predictions is None):
        raise ConfigError("give exactly one of --checkpoint or --predictions", {"checkpoint": "xor predictions"})
    records = load_records(dataset)
    if predictions:
        by_id = {r.record_id: r for r in load_records(predictions)}
        missing = [r.record_id for r in records if r.record_id not in by_id]
        if missing:
            raise FormatError(f"predictions missing for records {missing[:5]}")
        preds = [
            Prediction(by_id[r.record_id].answer, np.stack([t.binary() for t in by_id[r.record_id].targets]))
            for r in records
        ]
    else:
        preds = _model_predictions(checkpoint, records, Path(dataset).parent)

    scorer = _make_scorer(scorer_mode, scorer_endpoint, scorer_timeout)
    meta = {"config": cfg.model_dump(mode="json"), "scorer_mode": scorer_mode, "dataset": str(dataset)}
    try:
        report = evaluate_dataset(records, preds, scorer, workers=workers, soft=soft_product, metadata=meta)
    except ScorerTransportError as exc:
        if not stub_fallback:
            raise
        logger.warning("%s; falling back to stub-exact scorer", exc)
        meta["scorer_mode"] = "stub-exact (fallback)"
        report = evaluate_dataset(records, preds, StubScorer("exact"), workers=workers, soft=soft_product,
                                  metadata=meta)
    _dump_json(report.to_json(), out)
    if out:
        click.echo(json.dumps(report.splits))


@cli.command("convert")
@click.option("--annotations", type=click.Path(exists=True, dir_okay=False), required=True)
@click.option("--out", type=click.Path(dir_okay=False), required=True)
@click.option("--k-min", type=int, default=1)
@click.option("--k-max", type=int, default=3)
@click.pass_context
def convert(ctx, annotations, out, k_min, k_max):
    """Build multi-referring records from per-instance annotations."""
    from .data.convert import convert_multi_referring, load_annotations
    from .data.records import save_records

    cfg = _config(ctx)
    records, report = convert_multi_referring(load_annotations(annotations), (k_min, k_max), seed=cfg.seed)
    save_records(records, out)
    _dump_json({"config": cfg.model_dump(mode="json"), "k_range": [k_min, k_max], **report.to_json()},
               str(out) + ".report.json")
    click.echo(json.dumps(report.to_json()))


@cli.command("stats")
@click.option("--records", "records_path", type=click.Path(exists=True, dir_okay=False), required=True)
@click.option("--out", type=click.Path(dir_okay=False), default=None)
@click.option("--hist", type=click.Path(dir_okay=False), default=None, help="Also write gnuplot histogram blocks.")
@click.pass_context
def stats(ctx, records_path, out, hist):
    """Category, description-length and target-count histograms."""
    from .data.records import load_records
    from .data.stats import compute_statistics, histogram_text

    cfg = _config(ctx)
    result = compute_statistics(load_records(records_path))
    if hist:
        Path(hist).write_text(histogram_text(result))
    _dump_json({"config": cfg.model_dump(mode="json"), **result}, out)


@cli.command("flops")
@click.option("--batch", type=int, default=1, help="Number of decoded targets.")
@click.option("--verify", is_flag=True, help="Also run the decoder under the multiply-add counter.")
@click.pass_context
def flops(ctx, batch, verify):
    """Closed-form multiply-add count of the pixel decoder."""
    from .decoder import DecoderConfig, flops_terms, instrumented_macs

    cfg = _config(ctx)
    dcfg = DecoderConfig(
        n_scales=cfg.n_scales,
        width=cfg.width,
        n_out=cfg.n_out,
        mlp_width=cfg.mlp_width,
        sizes=tuple((cfg.image_size // s, cfg.image_size // s) for s in cfg.strides),
    )
    terms = flops_terms(dcfg, batch)
    result = {"config": cfg.model_dump(mode="json"), "batch": batch, "macs": sum(terms.values()), "terms": terms}
    if verify:
        result["instrumented_macs"] = instrumented_macs(dcfg, batch, cfg.seed)
    _dump_json(result)


def main(argv=None) -> int:
    try:
        cli.main(args=argv, prog_name="pixseg", standalone_mode=False)
    except click.exceptions.Exit as exc:
        return exc.exit_code
    except click.ClickException as exc:
        exc.show()
        return exc.exit_code
    except click.exceptions.Abort:
        return 1
    except ConfigError as exc:
        click.echo(f"config error: {exc}", err=True)
        for field, msg in exc.fields.items():
            click.echo(f"  {field}: {msg}", err=True)
        return EXIT_CONFIG
    except (ScorerTransportError, ScorerProtocolError) as exc:
        click.echo(f"scorer error: {exc}", err=True)
        return EXIT_SERVICE
    except FormatError as exc:
        click.echo(f"data error: {exc}", err=True)
        return EXIT_DATA
    except NumericError as exc:
        click.echo(f"aborted: {exc}", err=True)
        return EXIT_NUMERIC
    return 0


if __name__ == "__main__":
    sys.exit(main())
