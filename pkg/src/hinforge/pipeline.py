"""Experiment harness: config loading, splits, baselines and the run modes.

A run is described by a JSON config with a ``schema_version`` field. Every
field is checked and every referenced file must exist before the output
directory is created, so a bad config leaves nothing behind. Each mode writes
TSV artifacts plus a ``manifest.json`` echoing the resolved config, the seed
and a metric summary. Wall-clock timestamps only go to ``run.log``.
"""

from __future__ import annotations

import copy
import hashlib
import json
import logging
import os
from dataclasses import asdict, dataclass, field
from pathlib import Path

import numpy as np

from . import __version__
from .errors import ConfigError, HinforgeError
from .fed import FedConfig, make_profiles, run_simulation
from .graph import HeterogeneousGraph, MetaPath, read_graph, write_graph
from .influence import METHODS, centrality, coauthor_projection, nac_influence, topk_intersection
from .model import (
    EmbeddingTable,
    Hyperparams,
    ModelInputs,
    embed_all,
    predict,
    save_checkpoint,
    train,
)
from .seeding import unit_hash
from .synthetic import PlantedConfig, gen_synthetic
from .teams import IdentificationConfig, f1_scores, identify_teams, nmi, prefilter_graph

log = logging.getLogger("hinforge")

SCHEMA_VERSION = 1
MODES = ("gen", "train", "fedtrain", "embed", "influence", "teams", "eval", "sensitivity")
DEFAULT_META_PATHS = [["author", "paper", "author"], ["author", "paper", "venue", "paper", "author"]]
SUB_KS = (5, 10, 15, 20, 25)
NMI_KS = (5, 10, 15, 20)
SENS_EPOCHS = (1, 3, 5)
SENS_BATCHES = (64, 128, 256)
NAC_MODES = ("fixed_point", "mean")

_TOP_KEYS = {"schema_version", "seed", "graph", "truth", "target_type", "meta_paths", "hyperparams",
             "identify", "fed", "nac_mode", "out", "sensitivity_rounds", "teams_report"}


# -- config ----------------------------------------------------------------------

@dataclass
class RunConfig:
    seed: int
    out: Path
    graph_path: Path | None = None
    synthetic: PlantedConfig | None = None
    truth_path: Path | None = None
    teams_report: Path | None = None
    target_type: str = "author"
    meta_paths: list = field(default_factory=lambda: copy.deepcopy(DEFAULT_META_PATHS))
    hp: Hyperparams = field(default_factory=Hyperparams)
    identify: IdentificationConfig = field(default_factory=IdentificationConfig)
    fed: FedConfig = field(default_factory=FedConfig)
    nac_mode: str = "fixed_point"
    sensitivity_rounds: int = 5

    def echo(self) -> dict:
        """Resolved config as plain JSON data (paths as given, no absolute prefixes)."""
        return {
            "schema_version": SCHEMA_VERSION,
            "seed": self.seed,
            "graph": ({"path": str(self.graph_path)} if self.graph_path is not None
                      else {"synthetic": asdict(self.synthetic)}),
            "truth": None if self.truth_path is None else str(self.truth_path),
            "teams_report": None if self.teams_report is None else str(self.teams_report),
            "target_type": self.target_type,
            "meta_paths": self.meta_paths,
            "hyperparams": asdict(self.hp),
            "identify": asdict(self.identify),
            "fed": asdict(self.fed),
            "nac_mode": self.nac_mode,
            "sensitivity_rounds": self.sensitivity_rounds,
        }


def load_config(path, seed: int | None = None, out=None) -> RunConfig:
    path = Path(path)
    if not path.is_file():
        raise ConfigError({"config": f"file not found: {path}"})
    try:
        raw = json.loads(path.read_text(encoding="utf-8"))
    except json.JSONDecodeError as e:
        raise ConfigError({"config": f"not valid JSON: {e}"}) from None
    if not isinstance(raw, dict):
        raise ConfigError({"config": "top level must be an object"})
    return parse_config(raw, base_dir=path.parent, seed=seed, out=out)


def parse_config(raw: dict, base_dir=".", seed: int | None = None, out=None) -> RunConfig:
    """Validate ``raw`` and collect every problem before raising."""
    base_dir = Path(base_dir)
    problems: dict[str, str] = {}

    def sub(key, builder):
        val = raw.get(key, {})
        if not isinstance(val, dict):
            problems[key] = "must be an object"
            return builder({})
        try:
            obj = builder(val)
            if hasattr(obj, "validate"):
                obj.validate()
            return obj
        except ConfigError as e:
            problems.update(e.problems)
        except (HinforgeError, TypeError, ValueError) as e:
            problems[key] = str(e)
        return None

    for k in sorted(set(raw) - _TOP_KEYS):
        problems[k] = "unknown key"
    if raw.get("schema_version") != SCHEMA_VERSION:
        problems["schema_version"] = f"must be {SCHEMA_VERSION}"
    if seed is None:
        seed = raw.get("seed")
    if isinstance(seed, bool) or not isinstance(seed, int) or seed < 0:
        problems["seed"] = "a non-negative integer seed is required"
        seed = 0
    if out is None and raw.get("out"):
        out = base_dir / str(raw["out"])
    if not out:
        problems["out"] = "output directory is required (config 'out' or --out)"

    graph_path = synthetic = None
    g = raw.get("graph")
    if not isinstance(g, dict) or len(g) != 1 or next(iter(g)) not in ("path", "synthetic"):
        problems["graph"] = "must be {\"path\": file} or {\"synthetic\": {...}}"
    elif "path" in g:
        graph_path = base_dir / str(g["path"])
        if not graph_path.is_file():
            problems["graph.path"] = f"file not found: {graph_path}"
    else:
        try:
            spec = dict(g["synthetic"])
            spec["rng_seed"] = seed
            synthetic = PlantedConfig.from_dict(spec)
            synthetic.validate()
        except (HinforgeError, TypeError, ValueError) as e:
            problems["graph.synthetic"] = str(e)

    def opt_path(key):
        if raw.get(key) is None:
            return None
        p = base_dir / str(raw[key])
        if not p.is_file():
            problems[key] = f"file not found: {p}"
        return p

    truth_path = opt_path("truth")
    teams_report = opt_path("teams_report")

    target_type = raw.get("target_type", "author")
    meta_paths = raw.get("meta_paths", copy.deepcopy(DEFAULT_META_PATHS))
    try:
        mps = [MetaPath.of(m) for m in meta_paths]
        if not mps:
            problems["meta_paths"] = "at least one meta-path is required"
        for mp in mps:
            if mp.start_type != target_type or mp.end_type != target_type:
                problems["meta_paths"] = f"{mp.name} must start and end at {target_type!r}"
    except (HinforgeError, TypeError, ValueError) as e:
        problems["meta_paths"] = str(e)

    def build_hp(d):
        d = dict(d)
        d["rng_seed"] = seed
        return Hyperparams.from_dict(d)

    hp = sub("hyperparams", build_hp)
    identify = sub("identify", IdentificationConfig.from_dict)
    fed = sub("fed", FedConfig.from_dict)
    nac_mode = raw.get("nac_mode", "fixed_point")
    if nac_mode not in NAC_MODES:
        problems["nac_mode"] = f"must be one of {NAC_MODES}"
    sens_rounds = raw.get("sensitivity_rounds", 5)
    if not isinstance(sens_rounds, int) or sens_rounds < 1:
        problems["sensitivity_rounds"] = "must be an integer >= 1"
    if problems:
        raise ConfigError(problems)
    return RunConfig(seed=seed, out=Path(out), graph_path=graph_path, synthetic=synthetic,
                     truth_path=truth_path, teams_report=teams_report, target_type=target_type,
                     meta_paths=meta_paths, hp=hp, identify=identify, fed=fed, nac_mode=nac_mode,
                     sensitivity_rounds=sens_rounds)


# -- files -----------------------------------------------------------------------

def write_tsv(path, header, rows) -> None:
    with open(path, "w", encoding="utf-8", newline="\n") as fh:
        fh.write("\t".join(header) + "\n")
        for row in rows:
            fh.write("\t".join(_cell(x) for x in row) + "\n")


def _cell(x) -> str:
    if isinstance(x, (float, np.floating)):
        return repr(float(x))
    if isinstance(x, np.integer):
        return str(int(x))
    return str(x)


def export_embeddings(table: EmbeddingTable, path, labels: dict[int, str] | None = None) -> None:
    """Embedding TSV (``node_id`` + one column per dimension) and a label sidecar."""
    path = Path(path)
    d = table.h.shape[1] if table.h.ndim == 2 else 0
    order = np.argsort(table.node_ids, kind="stable")
    write_tsv(path, ["node_id"] + [f"h{j}" for j in range(d)],
              ([int(table.node_ids[r])] + [float(v) for v in table.h[r]] for r in order))
    if labels is not None:
        write_tsv(path.with_name(path.stem + ".labels.tsv"), ["node_id", "label"],
                  ((int(table.node_ids[r]), labels.get(int(table.node_ids[r]), "")) for r in order))


def read_embeddings(path) -> tuple[np.ndarray, np.ndarray]:
    with open(path, encoding="utf-8") as fh:
        header = fh.readline().rstrip("\n").split("\t")
        rows = [line.rstrip("\n").split("\t") for line in fh if line.strip()]
    d = len(header) - 1
    ids = np.array([int(r[0]) for r in rows], dtype=np.int64)
    h = np.array([[float(v) for v in r[1:]] for r in rows], dtype=np.float64).reshape(len(rows), d)
    return ids, h


def read_truth(path) -> dict[int, str]:
    """``node_id \\t team_id`` lines; a header line is skipped if present."""
    out = {}
    with open(path, encoding="utf-8") as fh:
        for k, line in enumerate(fh):
            parts = line.rstrip("\n").split("\t")
            if not line.strip():
                continue
            if len(parts) < 2:
                raise ConfigError({"truth": f"line {k + 1}: expected node_id<TAB>team_id"})
            try:
                out[int(parts[0])] = parts[1]
            except ValueError:
                if k == 0:
                    continue
                raise ConfigError({"truth": f"line {k + 1}: bad node id {parts[0]!r}"}) from None
    return out


def read_team_report(path) -> list[list[int]]:
    teams: dict[str, list[int]] = {}
    order = []
    with open(path, encoding="utf-8") as fh:
        fh.readline()
        for line in fh:
            if not line.strip():
                continue
            team_id, _role, node_id = line.rstrip("\n").split("\t")[:3]
            if team_id not in teams:
                teams[team_id] = []
                order.append(team_id)
            teams[team_id].append(int(node_id))
    return [teams[t] for t in order]


# -- shared pieces ---------------------------------------------------------------

def split_nodes(node_ids, seed: int) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
    """60/20/20 train/val/test by a seeded hash of each node id."""
    train_, val, test = [], [], []
    for nid in sorted(int(x) for x in node_ids):
        u = unit_hash(seed, "split", nid)
        (train_ if u < 0.6 else val if u < 0.8 else test).append(nid)
    return tuple(np.array(x, dtype=np.int64) for x in (train_, val, test))


def labeled_targets(g: HeterogeneousGraph, target_type: str) -> np.ndarray:
    return np.array([int(i) for i in g.nodes_of_type(target_type) if g.label_id(int(i)) is not None],
                    dtype=np.int64)


def degree_features(g: HeterogeneousGraph, node_ids) -> np.ndarray:
    """Per-node degree under each edge type, in sorted edge-type order."""
    types = list(g.edge_types.names)
    return np.array([[g.degree(int(i), t) for t in types] for i in node_ids], dtype=np.float64)


def majority_baseline(train_labels, n_test: int) -> np.ndarray:
    counts = np.bincount(train_labels)
    return np.full(n_test, int(np.argmax(counts)), dtype=np.int64)


def logistic_baseline(g, train_ids, train_labels, test_ids) -> np.ndarray:
    from sklearn.linear_model import LogisticRegression
    from sklearn.pipeline import make_pipeline
    from sklearn.preprocessing import StandardScaler

    if np.unique(train_labels).size < 2:
        return majority_baseline(train_labels, len(test_ids))
    clf = make_pipeline(StandardScaler(), LogisticRegression(max_iter=2000))
    clf.fit(degree_features(g, train_ids), train_labels)
    return clf.predict(degree_features(g, test_ids)).astype(np.int64)


@dataclass
class Loaded:
    graph: HeterogeneousGraph
    truth: dict[int, str] | None
    leaders: list[int] | None = None


def load_graph(cfg: RunConfig) -> Loaded:
    if cfg.synthetic is not None:
        pg = gen_synthetic(cfg.synthetic)
        truth = {a: f"team{t:03d}" for a, t in pg.truth.items()}
        return Loaded(pg.graph, truth, pg.leaders)
    truth = read_truth(cfg.truth_path) if cfg.truth_path is not None else None
    return Loaded(read_graph(cfg.graph_path), truth)


def classify(cfg: RunConfig, g: HeterogeneousGraph) -> dict:
    """Train AHinE on the train split and score it and both baselines on the test split."""
    inputs = ModelInputs(g, cfg.meta_paths, cfg.target_type)
    tr, va, te = split_nodes(labeled_targets(g, cfg.target_type), cfg.seed)
    params, losses = train(inputs, tr, cfg.hp)
    y_tr = inputs.labels_of(inputs.rows_of(tr))
    y_te = inputs.labels_of(inputs.rows_of(te))
    preds = {
        "AHinE": predict(params, inputs, inputs.rows_of(te)),
        "majority": majority_baseline(y_tr, te.size),
        "degree_logreg": logistic_baseline(g, tr, y_tr, te),
    }
    scores = {m: f1_scores(p, y_te) for m, p in preds.items()}
    return {"inputs": inputs, "params": params, "losses": losses, "split": (tr, va, te),
            "predictions": preds["AHinE"], "scores": scores}


def influence_scores(cfg: RunConfig, g: HeterogeneousGraph, params=None, inputs=None):
    """NAC plus the four centralities on the target co-authorship projection."""
    if params is None:
        res = classify(cfg, g)
        params, inputs = res["params"], res["inputs"]
    table = embed_all(params, inputs)
    scores = {"NAC": nac_influence(table, cfg.nac_mode)}
    proj = coauthor_projection(g, list(MetaPath.of(cfg.meta_paths[0]).node_types))
    for kind in ("DC", "BC", "CC", "EC"):
        scores[kind] = centrality(proj, kind)
    return scores, table


def run_teams(cfg: RunConfig, g: HeterogeneousGraph):
    """Prefilter, retrain on the filtered graph and extract teams (original ids)."""
    fg = prefilter_graph(g, cfg.identify, cfg.target_type)
    sub = fg.graph
    inputs = ModelInputs(sub, cfg.meta_paths, cfg.target_type)
    tr, _, _ = split_nodes(labeled_targets(sub, cfg.target_type), cfg.seed)
    params, _ = train(inputs, tr, cfg.hp)
    table = embed_all(params, inputs)
    infl = nac_influence(table, cfg.nac_mode)
    part = identify_teams(table, infl, inputs.neighbors, cfg.identify)
    back = fg.new_to_old
    return part, back, sub


# -- modes -----------------------------------------------------------------------

class Run:
    def __init__(self, cfg: RunConfig, mode: str):
        self.cfg = cfg
        self.mode = mode
        self.files: list[str] = []
        self.summary: dict = {}

    def path(self, name: str) -> Path:
        p = self.cfg.out / name
        p.parent.mkdir(parents=True, exist_ok=True)
        self.files.append(name)
        return p

    def manifest(self) -> None:
        digests = {}
        for name in sorted(set(self.files)):
            digests[name] = hashlib.sha256((self.cfg.out / name).read_bytes()).hexdigest()
        doc = {"hinforge_version": __version__, "mode": self.mode, "seed": self.cfg.seed,
               "config": self.cfg.echo(), "summary": self.summary, "files": digests}
        with open(self.cfg.out / "manifest.json", "w", encoding="utf-8", newline="\n") as fh:
            json.dump(doc, fh, indent=2, sort_keys=True, default=_json_default)
            fh.write("\n")


def _json_default(x):
    if isinstance(x, (np.integer,)):
        return int(x)
    if isinstance(x, (np.floating,)):
        return float(x)
    if isinstance(x, Path):
        return str(x)
    raise TypeError(type(x))


def mode_gen(run: Run, data: Loaded) -> None:
    cfg = run.cfg
    write_graph(data.graph, run.path("graph.tsv"))
    if data.truth is not None:
        write_tsv(run.path("truth.tsv"), ["node_id", "team_id"], sorted(data.truth.items()))
    if data.leaders is not None:
        write_tsv(run.path("leaders.tsv"), ["team_id", "node_id"],
                  ((f"team{t:03d}", a) for t, a in enumerate(data.leaders)))
    g = data.graph
    run.summary = {"nodes": g.n_nodes, "edges": sum(m for *_, m in g.edges()),
                   "targets": int(g.nodes_of_type(cfg.target_type).size)}


def mode_train(run: Run, data: Loaded) -> None:
    res = classify(run.cfg, data.graph)
    tr, va, te = res["split"]
    write_tsv(run.path("scores.tsv"), ["method", "micro_f1", "macro_f1"],
              ((m, mi, ma) for m, (mi, ma) in res["scores"].items()))
    write_tsv(run.path("loss.tsv"), ["step", "loss"], enumerate(res["losses"]))
    labels = data.graph.labels
    write_tsv(run.path("predictions.tsv"), ["node_id", "predicted", "label"],
              ((int(n), labels.name(int(p)), data.graph.node(int(n)).label)
               for n, p in zip(te, res["predictions"])))
    split_rows = [(int(n), "train") for n in tr] + [(int(n), "val") for n in va] + \
        [(int(n), "test") for n in te]
    write_tsv(run.path("split.tsv"), ["node_id", "split"], sorted(split_rows))
    save_checkpoint(res["params"], run.path("model.ckpt"))
    run.summary = {m: {"micro_f1": mi, "macro_f1": ma} for m, (mi, ma) in res["scores"].items()}
    run.summary["n_train"], run.summary["n_test"] = int(tr.size), int(te.size)


def mode_embed(run: Run, data: Loaded) -> None:
    res = classify(run.cfg, data.graph)
    table = embed_all(res["params"], res["inputs"])
    labels = {int(n): data.graph.node(int(n)).label or "" for n in table.node_ids}
    export_embeddings(table, run.path("embeddings.tsv"), labels)
    run.files.append("embeddings.labels.tsv")
    save_checkpoint(res["params"], run.path("model.ckpt"))
    run.summary = {"nodes": int(table.node_ids.size), "d": int(table.h.shape[1])}


def mode_influence(run: Run, data: Loaded) -> None:
    scores, _ = influence_scores(run.cfg, data.graph)
    ids = scores["NAC"].node_ids
    write_tsv(run.path("influence.tsv"), ["node_id", "nac", "dc", "bc", "cc", "ec"],
              ([int(n)] + [float(scores[m].scores[r]) for m in METHODS] for r, n in enumerate(ids)))
    rows = []
    for k in SUB_KS:
        if k > ids.size:
            continue
        for m in METHODS[1:]:
            rows.append((k, m, topk_intersection(scores["NAC"], scores[m], k)))
    write_tsv(run.path("intersection.tsv"), ["K", "method", "sub"], rows)
    run.summary = {"sub": {f"{m}@{k}": s for k, m, s in rows},
                   "nac_top10": [int(x) for x in scores["NAC"].top(min(10, ids.size))]}
    if data.leaders is not None:
        top5 = set(scores["NAC"].top(min(5, ids.size)).tolist())
        run.summary["leaders_in_nac_top5"] = len(top5 & set(data.leaders))


def _team_rows(part, back, g):
    for t, team in enumerate(part.teams):
        tid = f"T{t + 1:03d}"
        yield tid, "leader", back[team.leader], g.node(team.leader).display_name or ""
        for role, members in (("core", team.core), ("non_core", team.non_core)):
            for m in members:
                yield tid, role, back[m], g.node(m).display_name or ""


def _nmi_rows(clusters, truth):
    """NMI over all clustered nodes, then over the first k teams for each k."""
    truth_sub = {n: truth[n] for c in clusters for n in c}
    rows = [("all", len(clusters), nmi(clusters, truth_sub))]
    for k in NMI_KS:
        top = clusters[:k]
        nodes = {n for c in top for n in c}
        rows.append((str(k), len(top), nmi(top, {n: truth[n] for n in nodes})))
    return rows


def mode_teams(run: Run, data: Loaded) -> None:
    part, back, sub = run_teams(run.cfg, data.graph)
    write_tsv(run.path("teams.tsv"), ["team_id", "role", "node_id", "display_name"],
              _team_rows(part, back, sub))
    write_tsv(run.path("team_summary.tsv"), ["team_id", "size", "core", "non_core"],
              ((f"T{t + 1:03d}", len(team), len(team.core), len(team.non_core))
               for t, team in enumerate(part.teams)))
    if part.residual:
        write_tsv(run.path("residual.tsv"), ["node_id"], ((back[r],) for r in part.residual))
    run.summary = {"teams": len(part.teams), "residual": len(part.residual),
                   "filtered_targets": int(sub.nodes_of_type(run.cfg.target_type).size)}
    if data.truth is not None:
        clusters = [[back[n] for n in c] for c in part.clusters()]
        _check_truth(clusters, data.truth)
        rows = _nmi_rows(clusters, data.truth)
        write_tsv(run.path("nmi.tsv"), ["k", "teams", "nmi"], rows)
        run.summary["nmi"] = {k: v for k, _, v in rows}


def _check_truth(clusters, truth):
    missing = sorted({n for c in clusters for n in c} - set(truth))
    if missing:
        raise ConfigError({"truth": f"no ground truth for nodes {missing[:5]}"})


def mode_eval(run: Run, data: Loaded) -> None:
    if run.cfg.teams_report is not None:
        clusters = read_team_report(run.cfg.teams_report)
    else:
        part, back, _ = run_teams(run.cfg, data.graph)
        clusters = [[back[n] for n in c] for c in part.clusters()]
    _check_truth(clusters, data.truth)
    rows = _nmi_rows(clusters, data.truth)
    write_tsv(run.path("nmi.tsv"), ["k", "teams", "nmi"], rows)
    run.summary = {"nmi": {k: v for k, _, v in rows}}


def _simulate(cfg: RunConfig, g: HeterogeneousGraph, hp: Hyperparams, fed: FedConfig, rounds: int):
    inputs = ModelInputs(g, cfg.meta_paths, cfg.target_type)
    tr, va, _ = split_nodes(labeled_targets(g, cfg.target_type), cfg.seed)
    profiles = make_profiles(tr, fed, hp)
    return run_simulation(inputs, profiles, hp, rounds, fed.alpha, fed.threshold, va,
                          fed.asynchronous)


def mode_fedtrain(run: Run, data: Loaded) -> None:
    fed = run.cfg.fed
    res = _simulate(run.cfg, data.graph, run.cfg.hp, fed, fed.rounds)
    with open(run.path("fed_metrics.tsv"), "w", encoding="utf-8", newline="\n") as fh:
        fh.write(res.metrics_tsv())
    save_checkpoint(res.params, run.path("model.ckpt"))
    last = res.metrics[-1]
    run.summary = {"rounds": fed.rounds, "final_version": res.final_version,
                   "final_loss": last.global_loss, "final_val_micro_f1": last.val_micro_f1}


def mode_sensitivity(run: Run, data: Loaded) -> None:
    cfg = run.cfg
    summary = []
    for e in SENS_EPOCHS:
        for b in SENS_BATCHES:
            hp = Hyperparams(**{**asdict(cfg.hp), "local_epochs": e, "batch_size": b})
            res = _simulate(cfg, data.graph, hp, cfg.fed, cfg.sensitivity_rounds)
            name = f"sensitivity/e{e}_B{b}.tsv"
            with open(run.path(name), "w", encoding="utf-8", newline="\n") as fh:
                fh.write(res.metrics_tsv())
            last = res.metrics[-1]
            summary.append((e, b, last.global_loss, last.val_micro_f1))
    write_tsv(run.path("sensitivity/summary.tsv"), ["e", "B", "final_loss", "final_val_micro_f1"],
              summary)
    run.summary = {"cells": len(summary)}


MODE_FUNCS = {"gen": mode_gen, "train": mode_train, "embed": mode_embed, "influence": mode_influence,
              "teams": mode_teams, "eval": mode_eval, "fedtrain": mode_fedtrain,
              "sensitivity": mode_sensitivity}


def run_pipeline(cfg: RunConfig, mode: str) -> dict:
    """Run one mode; returns the metric summary written to the manifest."""
    if mode not in MODE_FUNCS:
        raise ConfigError({"mode": f"must be one of {MODES}"})
    data = load_graph(cfg)
    if mode == "eval" and data.truth is None:
        raise ConfigError({"truth": "eval needs a ground-truth file or a synthetic graph"})
    cfg.out.mkdir(parents=True, exist_ok=True)
    handler = logging.FileHandler(cfg.out / "run.log", mode="w", encoding="utf-8")
    handler.setFormatter(logging.Formatter("%(asctime)s %(levelname)s %(name)s: %(message)s"))
    root = logging.getLogger("hinforge")
    root.addHandler(handler)
    old_level = root.level
    root.setLevel(logging.INFO)
    try:
        run = Run(cfg, mode)
        log.info("mode=%s seed=%d out=%s", mode, cfg.seed, os.fspath(cfg.out))
        MODE_FUNCS[mode](run, data)
        run.manifest()
        log.info("done: %s", json.dumps(run.summary, sort_keys=True, default=_json_default))
    finally:
        root.removeHandler(handler)
        root.setLevel(old_level)
        handler.close()
    return run.summary
