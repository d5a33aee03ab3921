"""Classification trees choosing a cluster from a day's explanatory variables."""
import logging
from typing import List, Sequence, Tuple

import numpy as np
from sklearn.tree import DecisionTreeClassifier

from errors import DataValidationError, EmptyDatasetError, MissingFeatureError
from models import DayOfWeek, ExplanatoryRecord, SelectorTree, TreeNode, TreeParams

logger = logging.getLogger(__name__)

DAY_OF_WEEK = "day_of_week"
DEFAULT_SCHEMA: Tuple[str, ...] = (DAY_OF_WEEK, "outdoor_temp_c", "daily_mean_outdoor_c", "solar_wm2")
ONE_HOT_SEPARATOR = "="

NUMERIC = "numeric"
CATEGORICAL = "categorical"
LEAF = "leaf"


def feature_schema(extra: Sequence[str] = ()) -> Tuple[str, ...]:
    return DEFAULT_SCHEMA + tuple(name for name in extra if name not in DEFAULT_SCHEMA)


def encoded_columns(schema: Sequence[str]) -> List[str]:
    columns = []
    for name in schema:
        if name == DAY_OF_WEEK:
            columns.extend(f"{DAY_OF_WEEK}{ONE_HOT_SEPARATOR}{d.value}" for d in DayOfWeek)
        else:
            columns.append(name)
    return columns


def _numeric(record: ExplanatoryRecord, name: str) -> float:
    try:
        return float(record.numeric(name))
    except KeyError:
        raise MissingFeatureError(f"explanatory record has no feature '{name}'")


def encode_features(records: Sequence[ExplanatoryRecord], schema: Sequence[str]) -> np.ndarray:
    """
    Numeric design matrix of explanatory records, day of week one-hot encoded.

    Raises:
        MissingFeatureError: If a record lacks a numeric feature of the schema
    """
    rows = []
    for record in records:
        row = []
        for name in schema:
            if name == DAY_OF_WEEK:
                row.extend(1.0 if record.day_of_week is d else 0.0 for d in DayOfWeek)
            else:
                row.append(_numeric(record, name))
        rows.append(row)
    return np.asarray(rows, dtype=float).reshape(len(rows), len(encoded_columns(schema)))


def _leaf(label: int, n_samples: int) -> TreeNode:
    return TreeNode(kind=LEAF, label=label, n_samples=n_samples)


def _convert(model: DecisionTreeClassifier, columns: List[str]) -> List[TreeNode]:
    tree = model.tree_
    nodes = []
    for i in range(tree.node_count):
        n_samples = int(tree.n_node_samples[i])
        left, right = int(tree.children_left[i]), int(tree.children_right[i])
        if left == -1:
            label = int(model.classes_[int(np.argmax(tree.value[i][0]))])
            nodes.append(_leaf(label, n_samples))
            continue
        column = columns[int(tree.feature[i])]
        if column.startswith(DAY_OF_WEEK + ONE_HOT_SEPARATOR):
            # one-hot column <= 0.5 means "not this day": members go right
            day = column.split(ONE_HOT_SEPARATOR, 1)[1]
            nodes.append(
                TreeNode(kind=CATEGORICAL, feature=DAY_OF_WEEK, categories=(day,), left=left, right=right, n_samples=n_samples)
            )
        else:
            nodes.append(
                TreeNode(
                    kind=NUMERIC,
                    feature=column,
                    threshold=float(tree.threshold[i]),
                    left=left,
                    right=right,
                    n_samples=n_samples,
                )
            )
    return nodes


def train_tree(
    records: Sequence[ExplanatoryRecord],
    labels: Sequence[int],
    params: TreeParams = TreeParams(),
    schema: Sequence[str] = DEFAULT_SCHEMA,
    t: int = 1,
) -> SelectorTree:
    """
    Grow a CART tree (Gini impurity) mapping explanatory records to cluster labels.

    Args:
        records: Explanatory record of each training day at period t
        labels: Cluster label of each record
        params: Depth and leaf-size limits
        schema: Feature names, ``day_of_week`` being categorical
        t: Period the tree serves

    Returns:
        SelectorTree stored as a flat node table (root at index 0)

    Raises:
        EmptyDatasetError: If there are no records
    """
    if len(records) == 0:
        raise EmptyDatasetError(f"cannot train a selector tree at t={t} without records")
    if len(records) != len(labels):
        raise DataValidationError("one label per record required")
    y = np.asarray(labels, dtype=int)
    classes = tuple(int(c) for c in np.unique(y))
    X = encode_features(records, schema)

    if len(classes) == 1 or params.max_depth == 0:
        majority = int(np.bincount(y).argmax())
        nodes = [_leaf(majority, len(y))]
    else:
        model = DecisionTreeClassifier(
            criterion="gini",
            max_depth=params.max_depth,
            min_samples_leaf=params.min_leaf,
            random_state=0,
        )
        model.fit(X, y)
        nodes = _convert(model, encoded_columns(schema))

    tree = SelectorTree(t=t, nodes=tuple(nodes), classes=classes, training_accuracy=0.0)
    accuracy = tree_accuracy(tree, records, labels)
    return tree.model_copy(update={"training_accuracy": accuracy})


def predict_cluster(tree: SelectorTree, record: ExplanatoryRecord) -> int:
    """
    Walk the tree from the root to a leaf.

    Numeric thresholds are compared in single precision, as they were learned.

    Raises:
        MissingFeatureError: If the record lacks a tested feature
    """
    index = 0
    while True:
        node = tree.nodes[index]
        if node.kind == LEAF:
            return int(node.label)
        if node.kind == CATEGORICAL:
            index = node.right if record.day_of_week.value in node.categories else node.left
        else:
            value = float(np.float32(_numeric(record, node.feature)))
            index = node.left if value <= node.threshold else node.right


def tree_accuracy(tree: SelectorTree, records: Sequence[ExplanatoryRecord], labels: Sequence[int]) -> float:
    if len(records) == 0:
        raise EmptyDatasetError("tree accuracy needs at least one record")
    hits = sum(predict_cluster(tree, r) == int(c) for r, c in zip(records, labels))
    return hits / len(records)


def dump_tree(tree: SelectorTree, indent: str = "  ") -> str:
    """Indented if/else rendering of a selector tree."""
    lines = [f"# period {tree.t}, training accuracy {tree.training_accuracy:.3f}"]

    def visit(index: int, depth: int) -> None:
        node = tree.nodes[index]
        pad = indent * depth
        if node.kind == LEAF:
            lines.append(f"{pad}cluster {node.label}  # {node.n_samples} days")
            return
        if node.kind == CATEGORICAL:
            condition = f"{node.feature} in {{{', '.join(node.categories)}}}"
            first, second = node.right, node.left
        else:
            condition = f"{node.feature} <= {node.threshold:.3f}"
            first, second = node.left, node.right
        lines.append(f"{pad}if {condition}:")
        visit(first, depth + 1)
        lines.append(f"{pad}else:")
        visit(second, depth + 1)

    visit(0, 0)
    return "\n".join(lines) + "\n"
