"""Synthetic scenes and alignment pairs with exact ground truth.

Scenes are boxes of labelled objects whose features are noisy copies of
per-class prototype vectors. Frame-to-scan pairs view a radius around a
random viewpoint and re-express it in an arbitrary camera frame (full
SO(3)); subscan pairs crop two overlapping slabs and re-express each in its
own gravity-aligned frame (yaw-only rotation). Under-segmentation splits an
observed object into two frame nodes that share one map node.
"""

from __future__ import annotations

import json
import math
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from .errors import GenerationError, InvalidInputError
from .evaluation import AlignmentSample
from .scene_graph import (DEFAULT_D_TH, DEFAULT_FEATURE_DIMS, DEFAULT_N_MAX,
                          GroundTruthMap, Node, NodeFeatures, SceneGraph,
                          build_edges, graph_from_dict, graph_to_dict)

MAX_PLACEMENT_ATTEMPTS = 10 ** 5
MAX_VIEW_ATTEMPTS = 100
MAX_CROP_ATTEMPTS = 100


@dataclass(frozen=True)
class SynthConfig:
    seed: int = 0
    n_objects: tuple[int, int] = (8, 30)
    box_size: float = 8.0
    n_classes: int = 40
    feature_noise_sigma: float = 0.05
    position_noise_sigma: float = 0.02
    undersegment_prob: float = 0.05
    f2s_view_radius: float = 3.0
    s2s_crop_overlap: float = 0.5
    s2s_overlap_tol: float = 0.15
    min_separation: float = 0.3
    feature_dims: tuple[int, int] = DEFAULT_FEATURE_DIMS
    unique_classes: bool = False  # sample classes without replacement

    def __post_init__(self):
        if self.box_size <= 0 or self.min_separation <= 0 or self.f2s_view_radius <= 0:
            raise InvalidInputError("lengths must be positive")
        if not 0 <= self.undersegment_prob <= 1:
            raise InvalidInputError("undersegment_prob must be in [0, 1]")
        if not 0 < self.s2s_crop_overlap <= 1:
            raise InvalidInputError("s2s_crop_overlap must be in (0, 1]")
        if self.n_objects[0] < 1 or self.n_objects[0] > self.n_objects[1]:
            raise InvalidInputError(f"bad n_objects range {self.n_objects}")
        if self.feature_noise_sigma < 0 or self.position_noise_sigma < 0:
            raise InvalidInputError("noise sigmas must be >= 0")


@dataclass
class ClassPrototypes:
    f_vl: np.ndarray      # (n_classes, D_vl) unit rows
    f_t: np.ndarray       # (n_classes, D_t) unit rows
    extents: np.ndarray   # (n_classes, 3) in (0, 1]
    labels: list[str]


def _unit_rows(m: np.ndarray) -> np.ndarray:
    return m / np.linalg.norm(m, axis=1, keepdims=True)


def _noisy_unit(vec: np.ndarray, sigma: float, rng: np.random.Generator) -> np.ndarray:
    """Perturb a unit vector by a random direction of norm sigma, renormalize.

    sigma is relative to the (unit) feature norm, so it stays comparable
    across feature dimensionalities.
    """
    if sigma > 0:
        noise = rng.standard_normal(vec.shape)
        vec = vec + sigma * noise / np.linalg.norm(noise)
    return vec / np.linalg.norm(vec)


def _noisy_extents(ext: np.ndarray, sigma: float, rng: np.random.Generator) -> np.ndarray:
    if sigma > 0:
        ext = ext * (1.0 + rng.normal(0.0, sigma, size=ext.shape))
    return np.clip(ext, 1e-6, 1.0)


def _random_rotation(rng: np.random.Generator) -> np.ndarray:
    """Uniform SO(3) sample via a normalized random quaternion."""
    q = rng.standard_normal(4)
    w, x, y, z = q / np.linalg.norm(q)
    return np.array([
        [1 - 2 * (y * y + z * z), 2 * (x * y - w * z), 2 * (x * z + w * y)],
        [2 * (x * y + w * z), 1 - 2 * (x * x + z * z), 2 * (y * z - w * x)],
        [2 * (x * z - w * y), 2 * (y * z + w * x), 1 - 2 * (x * x + y * y)],
    ])


def _yaw_rotation(theta: float) -> np.ndarray:
    c, s = math.cos(theta), math.sin(theta)
    return np.array([[c, -s, 0.0], [s, c, 0.0], [0.0, 0.0, 1.0]])


def generate_scene(config: SynthConfig,
                   rng: np.random.Generator | None = None
                   ) -> tuple[SceneGraph, ClassPrototypes]:
    """Seed-deterministic scene in a world frame plus its class table."""
    rng = rng or np.random.default_rng(config.seed)
    d_vl, d_t = config.feature_dims

    protos = ClassPrototypes(
        f_vl=_unit_rows(rng.standard_normal((config.n_classes, d_vl))),
        f_t=_unit_rows(rng.standard_normal((config.n_classes, d_t))),
        extents=rng.uniform(0.2, 0.9, size=(config.n_classes, 3)),
        labels=[f"class_{k}" for k in range(config.n_classes)],
    )

    lo, hi = config.n_objects
    n = int(rng.integers(lo, hi + 1))
    if config.unique_classes:
        if n > config.n_classes:
            raise GenerationError(
                f"unique_classes needs n_classes >= n_objects ({config.n_classes} < {n})")
        classes = rng.permutation(config.n_classes)[:n]
    else:
        classes = rng.integers(0, config.n_classes, size=n)

    positions: list[np.ndarray] = []
    attempts = 0
    while len(positions) < n:
        attempts += 1
        if attempts > MAX_PLACEMENT_ATTEMPTS:
            raise GenerationError(
                f"placement failed after {MAX_PLACEMENT_ATTEMPTS} attempts "
                f"(box {config.box_size} m too crowded for {n} objects at "
                f"min separation {config.min_separation} m)")
        cand = rng.uniform(0.0, config.box_size, size=3)
        if all(np.linalg.norm(cand - p) >= config.min_separation for p in positions):
            positions.append(cand)

    nodes = []
    for idx in range(n):
        k = int(classes[idx])
        nodes.append(Node(
            id=idx,
            label=protos.labels[k],
            x=positions[idx],
            features=NodeFeatures(
                f_vl=_noisy_unit(protos.f_vl[k], config.feature_noise_sigma, rng),
                f_t=_noisy_unit(protos.f_t[k], config.feature_noise_sigma, rng),
                f_g=_noisy_extents(protos.extents[k], config.feature_noise_sigma, rng),
            ),
            gt_instance=idx,
        ))
    graph = SceneGraph(
        graph_id=f"scene-{config.seed}",
        frame_kind="world",
        nodes=nodes,
        edges=build_edges(nodes, DEFAULT_N_MAX, DEFAULT_D_TH),
        feature_dims=config.feature_dims,
    )
    return graph, protos


def make_f2s_pair(scene: SceneGraph, config: SynthConfig,
                  rng: np.random.Generator | None = None) -> AlignmentSample:
    """A frame graph (camera frame, possibly under-segmented) vs. the scene."""
    if len(scene.nodes) < 3:
        raise InvalidInputError("make_f2s_pair: scene needs >= 3 objects")
    rng = rng or np.random.default_rng(config.seed)

    in_view: list[Node] = []
    for _ in range(MAX_VIEW_ATTEMPTS):
        viewpoint = rng.uniform(0.0, config.box_size, size=3)
        in_view = [n for n in scene.nodes
                   if np.linalg.norm(n.x - viewpoint) <= config.f2s_view_radius]
        if len(in_view) >= 2:
            break
    else:
        raise GenerationError(
            f"no viewpoint with >= 2 visible objects in {MAX_VIEW_ATTEMPTS} attempts")

    rot = _random_rotation(rng)
    trans = rng.uniform(-config.box_size, config.box_size, size=3)

    a_nodes: list[Node] = []
    gt_pairs: set[tuple[int, int]] = set()

    def add_node(world_pos: np.ndarray, src: Node) -> None:
        cam = rot @ world_pos + trans
        if config.position_noise_sigma > 0:
            cam = cam + rng.normal(0.0, config.position_noise_sigma, size=3)
        f = src.features
        a_nodes.append(Node(
            id=len(a_nodes),
            label=src.label,
            x=cam,
            features=NodeFeatures(
                f_vl=_noisy_unit(f.f_vl, config.feature_noise_sigma, rng),
                f_t=_noisy_unit(f.f_t, config.feature_noise_sigma, rng),
                f_g=_noisy_extents(f.f_g, config.feature_noise_sigma, rng),
            ),
            gt_instance=src.id,
        ))
        gt_pairs.add((a_nodes[-1].id, src.id))

    for src in sorted(in_view, key=lambda nd: nd.id):
        if rng.uniform() < config.undersegment_prob:
            # Under-segmentation: two halves separated by half the extent
            # along a random horizontal axis, features shared.
            axis = int(rng.integers(0, 2))
            offset = np.zeros(3)
            offset[axis] = src.features.f_g[axis] / 4.0
            add_node(src.x + offset, src)
            add_node(src.x - offset, src)
        else:
            add_node(src.x, src)

    graph_a = SceneGraph(
        graph_id=f"{scene.graph_id}-frame",
        frame_kind="camera",
        nodes=a_nodes,
        edges=build_edges(a_nodes, DEFAULT_N_MAX, DEFAULT_D_TH),
        feature_dims=scene.feature_dims,
    )
    overlap = len({a for a, _ in gt_pairs}) / len(a_nodes)
    return AlignmentSample(
        graph_a=graph_a,
        graph_b=scene,
        gt=GroundTruthMap(pairs=gt_pairs),
        overlap_ratio=overlap,
        task="f2s",
        seed=config.seed,
        gt_rotation=rot.T,               # camera -> world
        gt_translation=-rot.T @ trans,
    )


def _crop_graph(scene: SceneGraph, members: list[Node], suffix: str,
                rot: np.ndarray, trans: np.ndarray, config: SynthConfig,
                rng: np.random.Generator) -> SceneGraph:
    nodes = []
    for new_id, src in enumerate(sorted(members, key=lambda nd: nd.id)):
        pos = rot @ src.x + trans
        if config.position_noise_sigma > 0:
            pos = pos + rng.normal(0.0, config.position_noise_sigma, size=3)
        f = src.features
        nodes.append(Node(
            id=new_id,
            label=src.label,
            x=pos,
            features=NodeFeatures(
                f_vl=_noisy_unit(f.f_vl, config.feature_noise_sigma, rng),
                f_t=_noisy_unit(f.f_t, config.feature_noise_sigma, rng),
                f_g=_noisy_extents(f.f_g, config.feature_noise_sigma, rng),
            ),
            gt_instance=src.id,
        ))
    return SceneGraph(
        graph_id=f"{scene.graph_id}-{suffix}",
        frame_kind="world",
        nodes=nodes,
        edges=build_edges(nodes, DEFAULT_N_MAX, DEFAULT_D_TH),
        feature_dims=scene.feature_dims,
    )


def make_s2s_pair(scene: SceneGraph, config: SynthConfig,
                  rng: np.random.Generator | None = None) -> AlignmentSample:
    """Two overlapping axis-aligned crops, each in its own yawed world frame."""
    if len(scene.nodes) < 6:
        raise InvalidInputError("make_s2s_pair: scene needs >= 6 objects")
    rng = rng or np.random.default_rng(config.seed)
    n = len(scene.nodes)
    target = config.s2s_crop_overlap

    best: tuple[float, list[Node], list[Node]] | None = None
    for _ in range(MAX_CROP_ATTEMPTS):
        axis = int(rng.integers(0, 2))
        jitter = int(rng.integers(-1, 2))
        take = round(n * (1.0 + target) / 2.0) + jitter
        take = max(1, min(n, take))
        order = sorted(scene.nodes, key=lambda nd: (nd.x[axis], nd.id))
        crop_a = order[:take]
        crop_b = order[n - take:]
        shared = {nd.id for nd in crop_a} & {nd.id for nd in crop_b}
        union = {nd.id for nd in crop_a} | {nd.id for nd in crop_b}
        achieved = len(shared) / len(union)
        if best is None or abs(achieved - target) < abs(best[0] - target):
            best = (achieved, crop_a, crop_b)
        if abs(achieved - target) <= config.s2s_overlap_tol:
            break
    else:
        assert best is not None
        raise GenerationError(
            f"could not reach overlap {target} within {config.s2s_overlap_tol} "
            f"after {MAX_CROP_ATTEMPTS} attempts; closest achieved {best[0]:.3f}")

    achieved, crop_a, crop_b = best
    rot_a = _yaw_rotation(rng.uniform(0.0, 2.0 * math.pi))
    trans_a = rng.uniform(-config.box_size, config.box_size, size=3)
    rot_b = _yaw_rotation(rng.uniform(0.0, 2.0 * math.pi))
    trans_b = rng.uniform(-config.box_size, config.box_size, size=3)

    graph_a = _crop_graph(scene, crop_a, "subA", rot_a, trans_a, config, rng)
    graph_b = _crop_graph(scene, crop_b, "subB", rot_b, trans_b, config, rng)

    b_of_instance = {nd.gt_instance: nd.id for nd in graph_b.nodes}
    gt_pairs = {(nd.id, b_of_instance[nd.gt_instance])
                for nd in graph_a.nodes if nd.gt_instance in b_of_instance}

    rot_ab = rot_b @ rot_a.T
    return AlignmentSample(
        graph_a=graph_a,
        graph_b=graph_b,
        gt=GroundTruthMap(pairs=gt_pairs),
        overlap_ratio=achieved,
        task="s2s",
        seed=config.seed,
        gt_rotation=rot_ab,
        gt_translation=trans_b - rot_ab @ trans_a,
    )


def make_sample(task: str, config: SynthConfig) -> AlignmentSample:
    """Generate one scene and one pair of the requested task from one seed."""
    rng = np.random.default_rng(config.seed)
    scene, _ = generate_scene(config, rng)
    if task == "f2s":
        return make_f2s_pair(scene, config, rng)
    if task == "s2s":
        return make_s2s_pair(scene, config, rng)
    raise InvalidInputError(f"unknown task {task!r}")


# ---------------------------------------------------------------------------
# On-disk sample layout: <dir>/a.json, b.json, gt.json


def save_sample(sample: AlignmentSample, directory) -> None:
    directory = Path(directory)
    directory.mkdir(parents=True, exist_ok=True)
    (directory / "a.json").write_text(
        json.dumps(graph_to_dict(sample.graph_a)), encoding="utf-8")
    (directory / "b.json").write_text(
        json.dumps(graph_to_dict(sample.graph_b)), encoding="utf-8")
    gt_doc = {
        "pairs": sorted([list(p) for p in sample.gt.pairs]),
        "overlap": sample.overlap_ratio,
        "task": sample.task,
        "seed": sample.seed,
        "gt_rotation": None if sample.gt_rotation is None
        else [[float(v) for v in row] for row in sample.gt_rotation],
        "gt_translation": None if sample.gt_translation is None
        else [float(v) for v in sample.gt_translation],
    }
    (directory / "gt.json").write_text(json.dumps(gt_doc), encoding="utf-8")


def load_sample(directory) -> AlignmentSample:
    directory = Path(directory)
    graph_a = graph_from_dict(
        json.loads((directory / "a.json").read_text(encoding="utf-8")))
    graph_b = graph_from_dict(
        json.loads((directory / "b.json").read_text(encoding="utf-8")))
    gt_doc = json.loads((directory / "gt.json").read_text(encoding="utf-8"))
    return AlignmentSample(
        graph_a=graph_a,
        graph_b=graph_b,
        gt=GroundTruthMap(pairs={tuple(p) for p in gt_doc["pairs"]}),
        overlap_ratio=gt_doc.get("overlap", 1.0),
        task=gt_doc.get("task", "f2s"),
        seed=gt_doc.get("seed", 0),
        gt_rotation=None if gt_doc.get("gt_rotation") is None
        else np.asarray(gt_doc["gt_rotation"], dtype=float),
        gt_translation=None if gt_doc.get("gt_translation") is None
        else np.asarray(gt_doc["gt_translation"], dtype=float),
    )
