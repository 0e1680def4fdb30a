# -*- coding: utf-8 -*-
"""Object worlds and episode sampling
"""

import collections
import itertools
import struct

import numpy as np

from . import checkpoint
from . import utils

FEATURE_MAGIC = b"EMFT"
FEATURE_VERSION = 1

KIND_SYNTHETIC = "synthetic"
KIND_FEATURE_FILE = "feature_file"

SPLIT_TRAIN = "train"
SPLIT_EVAL = "eval"
SPLIT_UNIVERSE = "universe"


class ObjectType(object):
    """Attribute combination with its multi-hot vector over ``num_values``"""

    def __init__(self, attribute_values, num_values):
        self._attribute_values = tuple(int(it) for it in attribute_values)
        self._num_values = num_values

    def __eq__(self, other):
        if not isinstance(other, ObjectType):
            return False
        return self._attribute_values == other.attribute_values

    def __hash__(self):
        return hash(self._attribute_values)

    def __repr__(self):
        return "<ObjectType %s>" % "-".join(str(it) for it in self._attribute_values)

    @property
    def attribute_values(self):
        return self._attribute_values

    @property
    def num_values(self):
        return self._num_values

    @property
    def binary_vector(self):
        vector = np.zeros(self._num_values)
        vector[list(self._attribute_values)] = 1.0
        return vector

    @property
    def label(self):
        return "-".join(str(it) for it in self._attribute_values)


class ObjectInstance(object):
    """One rendering of an object type on a patch grid

    ``boxes`` maps each attribute value to its half-open item box
    (row0, col0, row1, col1) in patch coordinates.
    """

    def __init__(self, object_type, patches, boxes, grid):
        self._object_type = object_type
        self._patches = patches
        self._boxes = dict(boxes)
        self._grid = tuple(grid)

    @property
    def object_type(self):
        return self._object_type

    @property
    def patches(self):
        """float array (P, D)"""
        return self._patches

    @property
    def boxes(self):
        return self._boxes

    @property
    def grid(self):
        return self._grid

    @property
    def attribute_locations(self):
        grid_w = self._grid[1]
        locations = {}
        for value, (row0, col0, row1, col1) in self._boxes.items():
            locations[value] = frozenset(
                row * grid_w + col
                for row in range(row0, row1)
                for col in range(col0, col1)
            )
        return locations


class WorldSpec(object):
    """Declarative description of a world

    ``attribute_arities`` switches from the K-of-N combinatorial scheme to a
    Cartesian product with one value per attribute.
    """

    def __init__(
        self,
        kind=KIND_SYNTHETIC,
        num_values=10,
        num_attributes=2,
        attribute_arities=None,
        grid_h=1,
        grid_w=8,
        item_h=1,
        item_w=1,
        feature_size=16,
        noise=0.1,
        split="30/15",
        feature_file=None,
    ):
        self.kind = kind
        self.num_values = num_values
        self.num_attributes = num_attributes
        self.attribute_arities = list(attribute_arities) if attribute_arities else None
        self.grid_h = grid_h
        self.grid_w = grid_w
        self.item_h = item_h
        self.item_w = item_w
        self.feature_size = feature_size
        self.noise = noise
        self.split = split
        self.feature_file = feature_file

    @property
    def num_patches(self):
        return self.grid_h * self.grid_w


class WorldSplit(object):
    def __init__(self, train_types, eval_types):
        self._train_types = list(train_types)
        self._eval_types = list(eval_types)

    @property
    def train_types(self):
        return self._train_types

    @property
    def eval_types(self):
        return self._eval_types


class FeatureRecord(object):
    def __init__(self, class_ids, boxes, features):
        self.class_ids = tuple(class_ids)
        self.boxes = [tuple(it) for it in boxes]
        self.features = features


class FeatureDataset(object):
    """Precomputed patch features grouped by object type"""

    def __init__(self, grid_h, grid_w, feature_size, items_per_image, records):
        self._grid_h = grid_h
        self._grid_w = grid_w
        self._feature_size = feature_size
        self._items_per_image = items_per_image
        self._records = list(records)
        self._num_values = 0
        if self._records:
            self._num_values = (
                max(max(it.class_ids) for it in self._records if it.class_ids) + 1
            )
        self._by_type = collections.OrderedDict()
        for record in sorted(self._records, key=lambda it: sorted(it.class_ids)):
            object_type = ObjectType(sorted(record.class_ids), self._num_values)
            self._by_type.setdefault(object_type, []).append(record)

    @property
    def grid(self):
        return self._grid_h, self._grid_w

    @property
    def num_patches(self):
        return self._grid_h * self._grid_w

    @property
    def feature_size(self):
        return self._feature_size

    @property
    def items_per_image(self):
        return self._items_per_image

    @property
    def records(self):
        return self._records

    @property
    def num_values(self):
        return self._num_values

    @property
    def types(self):
        return list(self._by_type)

    def instances_of(self, object_type):
        return self._by_type[object_type]


class World(object):
    """Immutable universe of object types with a train/eval split"""

    def __init__(self, spec, universe, split, base_vectors=None, dataset=None):
        self._spec = spec
        self._universe = list(universe)
        self._split = split
        self._base_vectors = base_vectors
        self._dataset = dataset
        self._index = dict((it, i) for i, it in enumerate(self._universe))
        if dataset is not None:
            self._grid = dataset.grid
            self._feature_size = dataset.feature_size
        else:
            self._grid = (spec.grid_h, spec.grid_w)
            self._feature_size = spec.feature_size

    def __str__(self):
        return "<World kind=%s types=%d train=%d eval=%d grid=%dx%d>" % (
            self._spec.kind,
            len(self._universe),
            len(self._split.train_types),
            len(self._split.eval_types),
            self._grid[0],
            self._grid[1],
        )

    @property
    def spec(self):
        return self._spec

    @property
    def universe(self):
        return self._universe

    @property
    def split(self):
        return self._split

    @property
    def base_vectors(self):
        return self._base_vectors

    @property
    def dataset(self):
        return self._dataset

    @property
    def grid(self):
        return self._grid

    @property
    def num_patches(self):
        return self._grid[0] * self._grid[1]

    @property
    def feature_size(self):
        return self._feature_size

    @property
    def num_values(self):
        return self._universe[0].num_values if self._universe else 0

    def index_of(self, object_type):
        try:
            return self._index[object_type]
        except KeyError:
            raise utils.UnknownObjectError("Object type %r not in world" % object_type)

    def types_of(self, split):
        if split == SPLIT_TRAIN:
            return self._split.train_types
        elif split == SPLIT_EVAL:
            return self._split.eval_types
        elif split == SPLIT_UNIVERSE:
            return self._universe
        raise utils.ParamError("Unknown split %s" % split)


def parse_split(split, universe_size):
    """Turn ``"30/15"`` into (train, eval) counts for ``universe_size`` types

    Counts summing to the universe size are used as is; smaller pairs are
    treated as proportions.
    """
    try:
        train_part, eval_part = [int(it) for it in str(split).split("/")]
    except ValueError:
        raise utils.ConfigError("Invalid split ratio %r" % split, ["split"])
    if train_part < 1 or eval_part < 1:
        raise utils.ConfigError("Invalid split ratio %r" % split, ["split"])
    total = train_part + eval_part
    if total > universe_size:
        raise utils.ConfigError(
            "Split %s larger than universe of %d types" % (split, universe_size),
            ["split"],
        )
    if total < universe_size:
        train_part = int(round(universe_size * train_part / float(total)))
        train_part = min(max(train_part, 1), universe_size - 1)
        eval_part = universe_size - train_part
    return train_part, eval_part


def build_universe(spec):
    if spec.attribute_arities:
        if any(it < 1 for it in spec.attribute_arities):
            raise utils.ConfigError(
                "Attribute arities must be positive", ["attribute_arities"]
            )
        offsets = np.cumsum([0] + spec.attribute_arities[:-1])
        num_values = int(np.sum(spec.attribute_arities))
        return [
            ObjectType([offset + it for offset, it in zip(offsets, values)], num_values)
            for values in itertools.product(
                *[range(arity) for arity in spec.attribute_arities]
            )
        ]
    if spec.num_attributes < 1 or spec.num_attributes > spec.num_values:
        raise utils.ConfigError(
            "Cannot pick %d of %d attribute values"
            % (spec.num_attributes, spec.num_values),
            ["num_attributes", "num_values"],
        )
    return [
        ObjectType(values, spec.num_values)
        for values in itertools.combinations(range(spec.num_values), spec.num_attributes)
    ]


def build_world(spec, seed):
    """Pure function of (spec, seed)"""
    rng = np.random.default_rng(seed)
    dataset = None
    base_vectors = None
    if spec.kind == KIND_SYNTHETIC:
        universe = build_universe(spec)
        num_attributes = len(universe[0].attribute_values)
        if spec.item_h > spec.grid_h or spec.item_w > spec.grid_w:
            raise utils.ConfigError(
                "Item %dx%d does not fit grid %dx%d"
                % (spec.item_h, spec.item_w, spec.grid_h, spec.grid_w),
                ["item_h", "item_w"],
            )
        if num_attributes * spec.item_h * spec.item_w > spec.num_patches:
            raise utils.ConfigError(
                "%d items of %dx%d patches need more than %d patches"
                % (num_attributes, spec.item_h, spec.item_w, spec.num_patches),
                ["grid_h", "grid_w"],
            )
        base_vectors = rng.standard_normal((universe[0].num_values, spec.feature_size))
    elif spec.kind == KIND_FEATURE_FILE:
        if not spec.feature_file:
            raise utils.ConfigError("Feature file not specified", ["feature_file"])
        dataset = load_feature_file(spec.feature_file)
        universe = dataset.types
    else:
        raise utils.ConfigError("Unknown world kind %s" % spec.kind, ["world_kind"])

    num_train, _ = parse_split(spec.split, len(universe))
    order = rng.permutation(len(universe))
    split = WorldSplit(
        [universe[it] for it in order[:num_train]],
        [universe[it] for it in order[num_train:]],
    )
    world = World(spec, universe, split, base_vectors, dataset)
    utils.logger.debug("[World] Built %s with seed %d" % (world, seed))
    return world


def place_items(world, count, rng, max_attempts=10000):
    """Uniform non-overlapping item boxes, one per attribute value"""
    grid_h, grid_w = world.grid
    item_h, item_w = world.spec.item_h, world.spec.item_w
    if item_h == 1 and item_w == 1:
        slots = rng.choice(grid_h * grid_w, count, replace=False)
        return [(int(it) // grid_w, int(it) % grid_w, 1, 1) for it in slots]

    rows = grid_h - item_h + 1
    cols = grid_w - item_w + 1
    for _ in range(max_attempts):
        corners = rng.integers(0, rows * cols, size=count)
        occupied = np.zeros((grid_h, grid_w), dtype=bool)
        boxes = []
        for corner in corners:
            row, col = int(corner) // cols, int(corner) % cols
            if occupied[row : row + item_h, col : col + item_w].any():
                break
            occupied[row : row + item_h, col : col + item_w] = True
            boxes.append((row, col, item_h, item_w))
        else:
            return boxes
    raise utils.ConfigError(
        "Cannot place %d items of %dx%d on a %dx%d grid"
        % (count, item_h, item_w, grid_h, grid_w),
        ["item_h", "item_w"],
    )


def render_instance(object_type, world, rng):
    world.index_of(object_type)
    grid_h, grid_w = world.grid
    if world.dataset is not None:
        records = world.dataset.instances_of(object_type)
        record = records[int(rng.integers(len(records)))]
        boxes = dict(
            (class_id, box) for class_id, box in zip(record.class_ids, record.boxes)
        )
        return ObjectInstance(object_type, record.features, boxes, world.grid)

    values = object_type.attribute_values
    patches = np.zeros((grid_h, grid_w, world.feature_size))
    boxes = {}
    for value, (row, col, height, width) in zip(
        values, place_items(world, len(values), rng)
    ):
        noise = world.spec.noise * rng.standard_normal(
            (height, width, world.feature_size)
        )
        patches[row : row + height, col : col + width] = world.base_vectors[value] + noise
        boxes[value] = (row, col, row + height, col + width)
    return ObjectInstance(
        object_type, patches.reshape(grid_h * grid_w, world.feature_size), boxes, world.grid
    )


class Episode(object):
    def __init__(self, speaker_instance, candidate_instances, target_index):
        self._speaker_instance = speaker_instance
        self._candidate_instances = list(candidate_instances)
        self._target_index = target_index

    @property
    def speaker_instance(self):
        return self._speaker_instance

    @property
    def candidate_instances(self):
        return self._candidate_instances

    @property
    def target_index(self):
        return self._target_index

    @property
    def target_type(self):
        return self._speaker_instance.object_type

    @property
    def candidate_types(self):
        return [it.object_type for it in self._candidate_instances]


def sample_episode(world, split, num_candidates, rng, distractor_source="split"):
    """Target uniform over the split, distractors without replacement

    Distractors come from the target's own split, or from the whole universe
    when ``distractor_source`` is ``"universe"``.
    """
    pool = world.types_of(split)
    if distractor_source == "split":
        distractor_pool = pool
    elif distractor_source == SPLIT_UNIVERSE:
        distractor_pool = world.universe
    else:
        raise utils.ConfigError(
            "Unknown distractor source %s" % distractor_source, ["distractor_source"]
        )
    if num_candidates < 1 or num_candidates > len(distractor_pool):
        raise utils.ConfigError(
            "%d candidates but only %d distractor types in %s"
            % (num_candidates, len(distractor_pool), distractor_source),
            ["num_candidates"],
        )
    target = pool[int(rng.integers(len(pool)))]
    others = [it for it in distractor_pool if it != target]
    picks = rng.choice(len(others), num_candidates - 1, replace=False)
    candidates = [others[int(it)] for it in picks]
    target_index = int(rng.integers(num_candidates))
    candidates.insert(target_index, target)
    speaker_instance = render_instance(target, world, rng)
    candidate_instances = [render_instance(it, world, rng) for it in candidates]
    return Episode(speaker_instance, candidate_instances, target_index)


class Batch(object):
    """Episodes stacked into arrays for batched agents"""

    def __init__(self, episodes):
        self._episodes = list(episodes)
        self._speaker_patches = np.stack(
            [it.speaker_instance.patches for it in self._episodes]
        )
        self._candidate_patches = np.stack(
            [
                np.stack([candidate.patches for candidate in it.candidate_instances])
                for it in self._episodes
            ]
        )
        self._target_index = np.array(
            [it.target_index for it in self._episodes], dtype=np.int64
        )

    def __len__(self):
        return len(self._episodes)

    @property
    def episodes(self):
        return self._episodes

    @property
    def speaker_patches(self):
        """(B, P, D)"""
        return self._speaker_patches

    @property
    def candidate_patches(self):
        """(B, C, P, D)"""
        return self._candidate_patches

    @property
    def target_index(self):
        return self._target_index

    def share_target_instance(self):
        """Show the listener the speaker's own rendering of the target"""
        for i, episode in enumerate(self._episodes):
            episode.candidate_instances[episode.target_index] = episode.speaker_instance
            self._candidate_patches[i, episode.target_index] = episode.speaker_instance.patches


def sample_batch(
    world, split, num_candidates, batch_size, rng, distractor_source="split"
):
    if batch_size < 1:
        raise utils.ParamError("Batch size must be positive, got %d" % batch_size)
    return Batch(
        [
            sample_episode(world, split, num_candidates, rng, distractor_source)
            for _ in range(batch_size)
        ]
    )


def _check_box(box, grid_h, grid_w, offset):
    row0, col0, row1, col1 = box
    if not (0 <= row0 < row1 <= grid_h and 0 <= col0 < col1 <= grid_w):
        raise utils.FormatError(
            "Bounding box %r outside %dx%d grid" % (box, grid_h, grid_w), offset
        )


def _boxes_overlap(boxes):
    for first, second in itertools.combinations(boxes, 2):
        if (
            first[0] < second[2]
            and second[0] < first[2]
            and first[1] < second[3]
            and second[1] < first[3]
        ):
            return True
    return False


def parse_feature_file(buffer):
    reader = checkpoint.BufferReader(buffer, "feature file")
    if reader.read(4) != FEATURE_MAGIC:
        raise utils.FormatError("Invalid feature file magic", 0)
    version = reader.read_u32()
    if version != FEATURE_VERSION:
        raise utils.FormatError(
            "Unsupported feature file version %d" % version, reader.offset - 4
        )
    num_instances, grid_h, grid_w, feature_size, items = reader.read_u32s(5)
    if items < 1:
        raise utils.FormatError("Feature file declares no items per image", 24)
    if grid_h < 1 or grid_w < 1 or feature_size < 1:
        raise utils.FormatError(
            "Empty feature grid %dx%dx%d" % (grid_h, grid_w, feature_size), 12
        )
    records = []
    for _ in range(num_instances):
        offset = reader.offset
        class_ids = reader.read_u32s(items)
        if len(set(class_ids)) != len(class_ids):
            raise utils.FormatError("Duplicate item classes %r" % (class_ids,), offset)
        boxes = []
        for _ in range(items):
            offset = reader.offset
            box = reader.read_u32s(4)
            _check_box(box, grid_h, grid_w, offset)
            boxes.append(box)
        if _boxes_overlap(boxes):
            raise utils.FormatError("Overlapping item boxes", offset)
        features = reader.read_array("<f4", grid_h * grid_w * feature_size)
        records.append(
            FeatureRecord(
                class_ids,
                boxes,
                features.astype(np.float64).reshape(grid_h * grid_w, feature_size),
            )
        )
    if reader.remaining():
        raise utils.FormatError(
            "%d trailing bytes in feature file" % reader.remaining(), reader.offset
        )
    return FeatureDataset(grid_h, grid_w, feature_size, items, records)


def load_feature_file(path):
    with open(path, "rb") as fp:
        dataset = parse_feature_file(fp.read())
    utils.logger.info(
        "[FeatureDataset] Loaded %d instances of %d types from %s, grid %dx%d, D=%d"
        % (
            len(dataset.records),
            len(dataset.types),
            path,
            dataset.grid[0],
            dataset.grid[1],
            dataset.feature_size,
        )
    )
    return dataset


def serialize_feature_records(grid, feature_size, items, records):
    buffer = FEATURE_MAGIC + struct.pack(
        "<6I", FEATURE_VERSION, len(records), grid[0], grid[1], feature_size, items
    )
    for record in records:
        buffer += struct.pack("<%dI" % items, *record.class_ids)
        for box in record.boxes:
            buffer += struct.pack("<4I", *box)
        buffer += np.asarray(record.features, dtype="<f4").tobytes(order="C")
    return buffer


def write_feature_file(path, world, instances_per_type, rng):
    """Render ``instances_per_type`` instances of every type into an EMFT file"""
    if world.dataset is not None:
        raise utils.ParamError("Feature files are written from synthetic worlds")
    records = []
    for object_type in world.universe:
        for _ in range(instances_per_type):
            instance = render_instance(object_type, world, rng)
            records.append(
                FeatureRecord(
                    object_type.attribute_values,
                    [instance.boxes[it] for it in object_type.attribute_values],
                    instance.patches,
                )
            )
    buffer = serialize_feature_records(
        world.grid, world.feature_size, len(world.universe[0].attribute_values), records
    )
    with open(path, "wb") as fp:
        fp.write(buffer)
    utils.logger.info(
        "[World] Wrote %d instances to %s (%d bytes)" % (len(records), path, len(buffer))
    )
    return len(records)
