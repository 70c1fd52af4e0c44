"""``mando`` command line: graph building, embedding, training, detection, evaluation.

Every command exits 0 on success and 2 on error; ``detect`` exits 1 when any
contract is flagged.  Phase timings go to stderr.
"""

from __future__ import annotations

import json
import os
import sys
import time
from contextlib import contextmanager
from pathlib import Path
from typing import Optional

import click
import torch

from mando.config import RunConfig, load_config, write_echo
from mando.errors import MandoError
from mando.hetgraph import HetGraph, fuse, graph_from_dict, graph_to_dict

EXIT_CLEAN, EXIT_BUGS, EXIT_ERROR = 0, 1, 2


class Failure(click.ClickException):
    exit_code = EXIT_ERROR

    def show(self, file=None):
        click.echo(f"error: {self.format_message()}", err=True)


@contextmanager
def timed(phase: str):
    start = time.perf_counter()
    yield
    click.echo(f"[time] {phase}: {time.perf_counter() - start:.3f}s", err=True)


@contextmanager
def failures():
    try:
        yield
    except (MandoError, OSError, ValueError) as exc:
        raise Failure(str(exc)) from None


def _seed(flag: Optional[int], cfg: RunConfig) -> int:
    if flag is not None:
        return flag
    env = os.environ.get("MANDO_SEED")
    if env is not None:
        try:
            return int(env)
        except ValueError:
            raise Failure(f"MANDO_SEED must be an integer, got {env!r}") from None
    return cfg.seed


def _resolve(config: Optional[str], seed: Optional[int], **overrides) -> RunConfig:
    with failures():
        cfg = load_config(config)
        cfg = cfg.replace(**overrides)
        return cfg.replace(seed=_seed(seed, cfg))


def load_fused(path: str | Path) -> HetGraph:
    """Fused graph from a ``.sol`` file, a bundle interchange file or a fused-graph JSON file."""
    from mando.frontend import load_bundle
    from mando.frontend.interchange import bundle_from_dict

    path = Path(path)
    if path.suffix == ".json":
        data = json.loads(path.read_text(encoding="utf-8"))
        if isinstance(data, dict) and "kind" in data:
            return graph_from_dict(data)
        return fuse(bundle_from_dict(data)).graph
    return fuse(load_bundle(path)).graph


@click.group(context_settings={"help_option_names": ["-h", "--help"]})
@click.version_option(package_name="artifact")
def main():
    """Heterogeneous-graph smart-contract vulnerability detector."""
    torch.use_deterministic_algorithms(True)


@main.command("build-graph")
@click.argument("inputs", nargs=-1, required=True, type=click.Path(exists=True, dir_okay=False))
@click.option("-o", "--out-dir", required=True, type=click.Path(file_okay=False), help="Directory for graph JSON files.")
@click.option("--fused", is_flag=True, help="Write the fused graph instead of the call-graph/control-flow bundle.")
def build_graph(inputs, out_dir, fused):
    """Parse Solidity files and write one graph JSON file per input."""
    from mando.frontend import canonical_json, load_bundle
    from mando.frontend.interchange import bundle_to_dict

    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    with failures(), timed("graph build"):
        for item in inputs:
            bundle = load_bundle(item)
            data = graph_to_dict(fuse(bundle).graph) if fused else bundle_to_dict(bundle)
            target = out / f"{Path(item).stem}.json"
            target.write_text(canonical_json(data), encoding="utf-8")
            click.echo(str(target))


@main.command("embed")
@click.argument("graph", type=click.Path(exists=True, dir_okay=False))
@click.option("--method", type=click.Choice(["onehot", "node2vec", "line", "metapath2vec"]), default="onehot", show_default=True)
@click.option("-o", "--output", required=True, type=click.Path(dir_okay=False), help="Feature file to write.")
@click.option("--config", type=click.Path(exists=True, dir_okay=False), help="TOML or JSON run config.")
@click.option("--seed", type=int, help="Random seed (falls back to MANDO_SEED, then the config).")
@click.option("--dim", type=int, help="Embedding width.")
def embed(graph, method, output, config, seed, dim):
    """Compute node features for one graph and write them as a feature file."""
    from mando.topoembed import node_features, write_features

    cfg = _resolve(config, seed, embed_dim=dim, feature_method=method)
    with failures():
        with timed("graph build"):
            g = load_fused(graph)
        with timed("embed"):
            feats = node_features(g, method, cfg.walk_config(cfg.seed))
        write_features(output, feats)
    click.echo(f"{output}: {feats.shape[0]} x {feats.shape[1]}")


@main.command("extract-metapaths")
@click.argument("graph", type=click.Path(exists=True, dir_okay=False))
@click.option("-o", "--output", type=click.Path(dir_okay=False), help="Catalog JSON file (stdout if omitted).")
def extract_metapaths(graph, output):
    """List the length-2 metapaths of a graph with their neighbour sets."""
    from mando.frontend import canonical_json
    from mando.metapath import catalog_to_dict, extract_catalog

    with failures():
        text = canonical_json(catalog_to_dict(extract_catalog(load_fused(graph))))
        if output:
            Path(output).write_text(text, encoding="utf-8")
        else:
            click.echo(text, nl=False)


def _manifest_entries(cfg: RunConfig):
    from mando.detector.manifest import load_manifest

    if not cfg.manifest:
        raise Failure("no manifest given (use --manifest or set 'manifest' in the config)")
    with failures():
        entries = load_manifest(cfg.manifest)
    if not entries:
        raise Failure("empty manifest")
    return entries


def _categories(entries, cfg: RunConfig) -> list[str]:
    from mando.detector.manifest import categories_in

    found = categories_in(entries)
    if cfg.category is not None:
        if cfg.category not in found:
            raise Failure(f"category {cfg.category} does not occur in the manifest")
        return [cfg.category]
    if not found:
        raise Failure("manifest has no buggy entries")
    return found


def _run_options(f):
    for opt in reversed(
        [
            click.option("--config", type=click.Path(exists=True, dir_okay=False), help="TOML or JSON run config."),
            click.option("--manifest", type=click.Path(), help="JSON-lines dataset manifest."),
            click.option("--category", help="Bug category to train or evaluate."),
            click.option("--task", type=click.Choice(["coarse", "fine", "both"]), help="Which phases to run."),
            click.option("--feature-method", type=click.Choice(["onehot", "node2vec", "line", "metapath2vec"])),
            click.option("--seed", type=int, help="Random seed (falls back to MANDO_SEED, then the config)."),
            click.option("--coarse-epochs", type=int),
            click.option("--fine-epochs", type=int),
            click.option("-o", "--out-dir", type=click.Path(file_okay=False), help="Output directory."),
        ]
    ):
        f = opt(f)
    return f


@main.command("train")
@_run_options
def train_cmd(config, manifest, category, task, feature_method, seed, coarse_epochs, fine_epochs, out_dir):
    """Train contract- and node-level models on the training split of a manifest."""
    from mando.detector import pipeline as P
    from mando.detector.manifest import select_category
    from mando.detector.split import split
    from mando.mgnn.checkpoint import save_checkpoint

    cfg = _resolve(
        config, seed, manifest=manifest, category=category, task=task, feature_method=feature_method,
        coarse_epochs=coarse_epochs, fine_epochs=fine_epochs, output_dir=out_dir,
    )
    entries = _manifest_entries(cfg)
    cats = _categories(entries, cfg)
    if len(cats) != 1:
        raise Failure(f"manifest has several categories ({', '.join(cats)}); choose one with --category")
    cfg = cfg.replace(category=cats[0])
    if not cfg.output_dir:
        raise Failure("no output directory given (use --out-dir)")
    out = Path(cfg.output_dir)
    with failures():
        out.mkdir(parents=True, exist_ok=True)
        with timed("graph build"):
            contracts = P.load_entries(select_category(entries, cfg.category))
        parts = split(
            [(c.category or "", c.buggy) for c in contracts], cfg.seed, cfg.train_frac,
            [c.node_counts for c in contracts], cfg.split_tolerance,
        )
        train_set = [contracts[i] for i in parts.train]
        test_set = [contracts[i] for i in parts.test]
        vocab, paths = P.model_space(train_set)
        with timed("embed"):
            P.featurize(contracts, cfg, vocab if cfg.feature_method == "onehot" else None, cfg.seed)
        models, history, metrics = {}, {}, {}
        gate = None
        if cfg.task in ("coarse", "both"):
            with timed("train coarse"):
                res = P.run_coarse(train_set, test_set, cfg, cfg.seed, vocab, paths)
            models["coarse"], history["coarse"] = res.model, _loss_only(res.history)
            metrics["coarse"] = P.f1_scores(res.preds, [c.buggy for c in test_set]).to_dict()
            gate = res.preds
        if cfg.task in ("fine", "both"):
            scanned = [c for c in test_set if c.buggy]
            with timed("train fine"):
                res = P.run_fine(train_set, scanned, cfg, cfg.seed, vocab, paths)
            models["fine"], history["fine"] = res.model, _loss_only(res.history)
            gold = P._per_node([c.node_labels for c in scanned])
            metrics["fine_ungated"] = P.f1_scores(res.preds, gold).to_dict()
        # the output location is not part of the model
        stored = {k: v for k, v in cfg.to_dict().items() if k != "output_dir"}
        meta = {"category": cfg.category, "feature_vocab": vocab, "config": stored}
        save_checkpoint(out / "model.ckpt", models, meta)
        _write_json(out / "history.json", history)
        _write_json(out / "metrics.json", {"split": {"train": parts.train, "test": parts.test}, **metrics})
        write_echo(cfg, out)
    for key, rep in metrics.items():
        click.echo(f"{key}: Buggy-F1 {rep['buggy_f1']:.4f}  Macro-F1 {rep['macro_f1']:.4f}")
    click.echo(str(out / "model.ckpt"))


def _loss_only(history: dict) -> dict:
    return {"loss": history["loss"], "lr": history["lr"]}


def _write_json(path: Path, data):
    path.write_text(json.dumps(data, sort_keys=True, indent=1) + "\n", encoding="utf-8")


@main.command("detect")
@click.argument("contracts", nargs=-1, required=True, type=click.Path(exists=True, dir_okay=False))
@click.option("--model", "model_path", required=True, type=click.Path(exists=True, dir_okay=False), help="Checkpoint file.")
@click.option("--format", "fmt", type=click.Choice(["json", "csv"]), default="json", show_default=True)
@click.option("-o", "--output", type=click.Path(dir_okay=False), help="Report file (stdout if omitted).")
@click.option("--threshold", type=float, help="Decision threshold on the buggy-class probability.")
def detect_cmd(contracts, model_path, fmt, output, threshold):
    """Flag vulnerable contracts and report the suspicious source lines."""
    from mando.detector import pipeline as P
    from mando.mgnn.checkpoint import load_checkpoint

    with failures():
        models, meta = load_checkpoint(model_path)
        cfg = RunConfig.from_dict(meta.get("config", {})).replace(threshold=threshold)
        with timed("graph build"):
            loaded = [P.load_contract(c) for c in contracts]
        with timed("embed"):
            P.featurize(loaded, cfg, meta.get("feature_vocab"), cfg.seed)
        with timed("infer"):
            detections = P.detect(models, loaded, cfg, meta.get("category"))
        text = P.report_json(detections) if fmt == "json" else P.report_csv(detections)
        if output:
            Path(output).write_text(text, encoding="utf-8")
        else:
            click.echo(text, nl=False)
    sys.exit(EXIT_BUGS if any(d.buggy for d in detections) else EXIT_CLEAN)


@main.command("eval")
@_run_options
@click.option("--seeds", type=int, help="Number of independent split/train/test runs.")
def eval_cmd(config, manifest, category, task, feature_method, seed, coarse_epochs, fine_epochs, out_dir, seeds):
    """Repeated split/train/test evaluation; mean Buggy-F1 and Macro-F1 per category."""
    from mando.detector import pipeline as P

    cfg = _resolve(
        config, seed, manifest=manifest, category=category, task=task, feature_method=feature_method,
        coarse_epochs=coarse_epochs, fine_epochs=fine_epochs, output_dir=out_dir, seeds=seeds,
    )
    entries = _manifest_entries(cfg)
    cats = _categories(entries, cfg)
    results = {}
    with failures():
        for cat in cats:
            with timed(f"eval {cat}"):
                res = P.evaluate_category(entries, cat, cfg, [cfg.seed + k for k in range(cfg.seeds)])
            res.pop("timings", None)
            results[cat] = res
        if cfg.output_dir:
            out = Path(cfg.output_dir)
            out.mkdir(parents=True, exist_ok=True)
            _write_json(out / "metrics.json", results)
            write_echo(cfg, out)
    click.echo(f"{'category':<24} {'phase':<13} {'Buggy-F1':>9} {'Macro-F1':>9}")
    for cat, res in results.items():
        for key in ("coarse", "fine", "fine_ungated"):
            if key in res:
                click.echo(f"{cat:<24} {key:<13} {res[key]['buggy_f1']:>9.4f} {res[key]['macro_f1']:>9.4f}")


if __name__ == "__main__":
    main()
