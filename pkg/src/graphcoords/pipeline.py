"""Config-driven extract / train / eval / diagnose steps used by the CLI."""

from __future__ import annotations

import os
import platform
import sys
from pathlib import Path

import numpy as np
import scipy

from . import __version__, matio
from .config import ConfigError, RunConfig
from .coords import (
    AnchorSet,
    Embedding,
    compute_multilayer_coords,
    compute_tc,
    compute_vc,
    dvc_from_graph,
    load_embedding,
    save_embedding,
    select_anchors,
)
from .diagnostics import count_duplicate_coordinates, estimate_ambiguous_edges, spectrum_stability
from .errors import DataError
from .features import concat_representation, load_categories, load_labels, load_splits, one_hot
from .graph import Graph, MultilayerGraph, load_edge_list, load_multilayer_edge_list
from .nn import (
    TrainedModel,
    count_parameters,
    default_metric,
    evaluate_accuracy,
    evaluate_mean_roc_auc,
    load_model,
    save_model,
    train,
)


def write_manifest(out: str | os.PathLike, cfg: RunConfig, command: str, extra: dict | None = None) -> None:
    """Everything needed to rerun ``command`` bitwise: resolved config, seeds, versions, threads."""
    record = {
        "command": command,
        "config_sha256": cfg.digest(),
        "seed": cfg.seed,
        "threads": cfg.threads,
        "graphcoords": __version__,
        "python": platform.python_version(),
        "numpy": np.__version__,
        "scipy": scipy.__version__,
        "platform": sys.platform,
    }
    record.update(extra or {})
    record.update({f"config.{k}": v for k, v in sorted(cfg.as_dict().items())})
    matio.write_kv(Path(out) / f"manifest_{command}.txt", record)


def load_graph(cfg: RunConfig) -> Graph | MultilayerGraph:
    path = cfg.require("edges")
    kind = cfg.get("graph")
    if kind == "multilayer":
        return load_multilayer_edge_list(path, cfg.int("layers"), cfg.get("transform"))
    return load_edge_list(path, mode=kind)


def anchors_for(cfg: RunConfig, g: Graph | MultilayerGraph) -> AnchorSet:
    return select_anchors(g, cfg.int("M"), cfg.seed, cfg.bool("restrict_to_lcc"))


def extract(cfg: RunConfig, g: Graph | MultilayerGraph | None = None) -> tuple[list[Embedding], AnchorSet]:
    """Embeddings in concatenation order (one per layer for multilayer graphs)."""
    g = load_graph(cfg) if g is None else g
    anchors = anchors_for(cfg, g)
    dims = cfg.dims()
    method = cfg.get("method")
    if isinstance(g, MultilayerGraph):
        embs = compute_multilayer_coords(
            g, anchors, method=method, n_c=dims.get("n_c"), variance=dims.get("variance"),
            n_pairs=dims.get("pairs"), pair_seed=cfg.seed, threads=cfg.threads)
        return embs, anchors
    P = compute_vc(g, anchors, threads=cfg.threads)
    if method == "tc":
        emb = compute_tc(P, n_c=dims.get("n_c"), variance=dims.get("variance"))
    else:
        emb = dvc_from_graph(P, seed=cfg.seed, n_pairs=dims.get("pairs"))
    return [emb], anchors


def save_embeddings(out: str | os.PathLike, embs: list[Embedding]) -> list[str]:
    out = Path(out)
    out.mkdir(parents=True, exist_ok=True)
    names = []
    for i, emb in enumerate(embs):
        name = "embedding.gcmat" if len(embs) == 1 else f"embedding_layer{i}.gcmat"
        save_embedding(out / name, emb)
        names.append(name)
    (out / "embeddings.txt").write_text("".join(n + "\n" for n in names), encoding="utf-8")
    return names


def load_embeddings(directory: str | os.PathLike) -> list[Embedding]:
    d = Path(directory)
    index = d / "embeddings.txt"
    if not index.is_file():
        raise DataError(f"{d}: no embeddings.txt index")
    return [load_embedding(d / n) for n in index.read_text(encoding="utf-8").split()]


def cmd_extract(cfg: RunConfig) -> dict:
    cfg.validate(need=("edges",))
    out = Path(cfg.get("out"))
    embs, anchors = extract(cfg)
    names = save_embeddings(out, embs)
    (out / "anchors.txt").write_text("".join(f"{a}\n" for a in anchors.anchor_ids.tolist()), encoding="utf-8")
    summary = {
        "n_embeddings": len(embs),
        "n_nodes": embs[0].values.shape[0],
        "coords_per_layer": [e.n_coords for e in embs],
        "total_coords": sum(e.n_coords for e in embs),
        "files": names,
    }
    write_manifest(out, cfg, "extract", summary)
    return summary


def _embeddings(cfg: RunConfig) -> list[Embedding]:
    if cfg.get("embeddings"):
        return load_embeddings(cfg.get("embeddings"))
    embs, _ = extract(cfg)
    save_embeddings(Path(cfg.get("out")) / "embeddings", embs)
    return embs


def assemble_features(cfg: RunConfig, embs: list[Embedding]):
    """Coordinates, then one-hot categories, then dense node features."""
    n = embs[0].values.shape[0]
    sources: list = list(embs)
    if cfg.get("categories"):
        cats = load_categories(cfg.get("categories"), n)
        K = cfg.int("n_categories") or int(cats.max()) + 1
        sources.append(("one_hot", one_hot(cats, K)))
    if cfg.get("features"):
        dense = matio.read_dense(cfg.get("features"))
        sources.append(("features", dense))
    return concat_representation(sources)


def _targets(cfg: RunConfig, n: int):
    y = load_labels(cfg.require("labels"), n)
    head = cfg.get("head")
    if head == "softmax":
        if y.ndim != 1:
            raise DataError("softmax head needs single-integer labels")
        return y, cfg.int("n_classes") or int(y.max()) + 1
    if y.ndim != 2:
        raise DataError("sigmoid head needs 0/1 label vectors")
    return y, y.shape[1]


def _metrics(model: TrainedModel, X, y, split) -> dict:
    rec: dict = {}
    metric = default_metric(model.spec)
    for part in ("train", "valid", "test"):
        if len(split.indices(part)) == 0:
            continue
        if metric == "accuracy":
            rec[f"{part}.accuracy"] = evaluate_accuracy(model, X, y, split, part)
        else:
            rep = evaluate_mean_roc_auc(model, X, y, split, part)
            rec[f"{part}.roc_auc"] = rep.mean
            rec[f"{part}.roc_auc_excluded_labels"] = len(rep.excluded)
    return rec


def cmd_train(cfg: RunConfig, log=None) -> dict:
    cfg.validate(need=("labels", "splits"))
    out = Path(cfg.get("out"))
    out.mkdir(parents=True, exist_ok=True)
    embs = _embeddings(cfg)
    fm = assemble_features(cfg, embs)
    n = fm.shape[0]
    y, out_dim = _targets(cfg, n)
    split = load_splits(cfg.require("splits"), n)
    spec = cfg.mlp_spec(fm.shape[1], out_dim)
    model = train(fm, y, split, spec, cfg.train_config(), log=log)
    record = {
        "input_dim": spec.input_dim,
        "n_parameters": count_parameters(spec),
        "best_epoch": model.best_epoch,
        "epochs_run": model.epochs_run,
        "best_valid_metric": model.best_metric,
    }
    record.update(_metrics(model, fm, y, split))
    blocks = ",".join(f"{b.name}:{b.start}-{b.stop}" for b in fm.blocks)
    save_model(out / "model", model, {"feature_blocks": blocks, "config_sha256": cfg.digest()})
    matio.write_kv(out / "metrics.txt", record)
    write_manifest(out, cfg, "train", {"n_parameters": record["n_parameters"]})
    return record


def cmd_eval(cfg: RunConfig) -> dict:
    cfg.validate(need=("labels", "splits", "model"))
    out = Path(cfg.get("out"))
    out.mkdir(parents=True, exist_ok=True)
    model = load_model(cfg.get("model"))
    embs = _embeddings(cfg)
    fm = assemble_features(cfg, embs)
    if fm.shape[1] != model.spec.input_dim:
        raise DataError(f"features have {fm.shape[1]} columns, model expects {model.spec.input_dim}")
    y, _ = _targets(cfg, fm.shape[0])
    split = load_splits(cfg.require("splits"), fm.shape[0])
    record = {"n_parameters": model.n_parameters()}
    record.update(_metrics(model, fm, y, split))
    matio.write_kv(out / "eval_metrics.txt", record)
    write_manifest(out, cfg, "eval")
    return record


def cmd_diagnose(cfg: RunConfig) -> dict:
    cfg.validate(need=("edges",), dims=False)
    out = Path(cfg.get("out"))
    out.mkdir(parents=True, exist_ok=True)
    g = load_graph(cfg)
    if isinstance(g, MultilayerGraph):
        layer = cfg.int("diag.layer", 0)
        if not 0 <= layer < g.n_layers:
            raise ConfigError(f"diag.layer {layer} out of range")
        g = g[layer]
    anchors = anchors_for(cfg, g)
    P = compute_vc(g, anchors, threads=cfg.threads)
    diag_seed = cfg.int("diag.seed", cfg.seed)
    record: dict = {"n_nodes": g.n_nodes, "n_edges": g.n_edges, "M": anchors.M}
    if g.n_nodes * (g.n_nodes - 1) // 2 > g.n_edges:
        amb = estimate_ambiguous_edges(g, P, cfg.int("diag.samples"), diag_seed, cfg.get("diag.mode"))
        record.update(amb.records())
    record.update(count_duplicate_coordinates(P, cfg.float("diag.tolerance")).records())
    k_sets = cfg.int("diag.k_sets", 10)
    if k_sets >= 2:
        stab = spectrum_stability(g, anchors.M, k_sets, cfg.int("diag.n_leading", 7), diag_seed,
                                  cfg.bool("restrict_to_lcc"), threads=cfg.threads)
        record.update(stab.records())
    matio.write_kv(out / "diagnostics.txt", record)
    write_manifest(out, cfg, "diagnose")
    return record


# --------------------------------------------------------------------------
# Id relabeling
# --------------------------------------------------------------------------

def relabel_ids(lines) -> tuple[list[str], list[str]]:
    """Map arbitrary string ids in ``a b [rest]`` lines to dense integers by first appearance.

    Returns the rewritten lines and the id list (dense id ``i`` is ``ids[i]``).
    Comment and blank lines are dropped.
    """
    index: dict[str, int] = {}
    ids: list[str] = []
    out: list[str] = []
    for lineno, line in enumerate(lines, start=1):
        s = line.strip()
        if not s or s.startswith("#"):
            continue
        parts = s.split()
        if len(parts) < 2:
            raise DataError(f"line {lineno}: expected at least two ids")
        dense = []
        for tok in parts[:2]:
            if tok not in index:
                index[tok] = len(ids)
                ids.append(tok)
            dense.append(str(index[tok]))
        out.append(" ".join(dense + parts[2:]))
    return out, ids


def restore_ids(lines, ids: list[str]) -> list[str]:
    out = []
    for line in lines:
        parts = line.split()
        out.append(" ".join([ids[int(parts[0])], ids[int(parts[1])]] + parts[2:]))
    return out


def cmd_relabel(src: str | os.PathLike, out: str | os.PathLike) -> dict:
    out = Path(out)
    out.mkdir(parents=True, exist_ok=True)
    with open(src, encoding="utf-8") as fh:
        lines, ids = relabel_ids(fh)
    (out / "edges.txt").write_text(f"n {len(ids)}\n" + "".join(l + "\n" for l in lines), encoding="utf-8")
    (out / "idmap.txt").write_text("".join(f"{i} {raw}\n" for i, raw in enumerate(ids)), encoding="utf-8")
    return {"n_nodes": len(ids), "n_edges": len(lines)}


def read_idmap(path: str | os.PathLike) -> list[str]:
    ids = []
    for i, line in enumerate(Path(path).read_text(encoding="utf-8").splitlines()):
        k, raw = line.split(None, 1)
        if int(k) != i:
            raise DataError(f"{path}: id map is not dense at line {i + 1}")
        ids.append(raw)
    return ids
