import collections
import math
import os

import numpy as np
import pytest

from ehrbench import errors
from ehrbench.icd import (
    ROOT,
    IcdTree,
    avg_code_distance,
    build_tree,
    filter_broad_codes,
    hierarchy_benchmark,
    icd_distance,
    kmeans,
    lca,
    parse_order_file,
)


@pytest.fixture(scope="module")
def sibling_entries(fixtures_dir=None):
    path = os.path.join(os.path.dirname(__file__), "fixtures",
                        "sibling_codes.order")
    return parse_order_file(path)


@pytest.fixture(scope="module")
def sibling_tree(sibling_entries):
    return build_tree(filter_broad_codes(sibling_entries))


def one_hot_embeddings(codes):
    groups = sorted({c[0] for c in codes})
    return [[1.0 if c[0] == g else 0.0 for g in groups] for c in codes]


class TestParsing:
    def test_fixture_parses(self, sibling_entries):
        assert len(sibling_entries) == 12
        first = sibling_entries[0]
        assert first.code == "A000"
        assert first.order_num == 1
        assert not first.is_header
        assert first.short_desc.startswith("Synthetic category")
        assert first.long_desc.endswith("clustering tests")

    def test_blank_lines_skipped(self, tmp_path):
        path = tmp_path / "codes.order"
        line = f"{1:<5} {'A000':<7} 0 {'short':<60} long"
        path.write_text(line + "\n\n")
        assert len(parse_order_file(path)) == 1

    def test_bad_order_number(self, tmp_path):
        path = tmp_path / "codes.order"
        path.write_text(f"{'x':<5} {'A000':<7} 0 {'s':<60} l\n")
        with pytest.raises(errors.LayoutError) as err:
            parse_order_file(path)
        assert err.value.line == 1

    def test_order_must_increase(self, tmp_path):
        path = tmp_path / "codes.order"
        lines = [f"{2:<5} {'A000':<7} 0 {'s':<60} l",
                 f"{1:<5} {'A001':<7} 0 {'s':<60} l"]
        path.write_text("\n".join(lines) + "\n")
        with pytest.raises(errors.LayoutError) as err:
            parse_order_file(path)
        assert err.value.line == 2

    def test_bad_code_and_flag(self, tmp_path):
        path = tmp_path / "codes.order"
        path.write_text(f"{1:<5} {'9XX':<7} 0 {'s':<60} l\n")
        with pytest.raises(errors.LayoutError):
            parse_order_file(path)
        path.write_text(f"{1:<5} {'A000':<7} 2 {'s':<60} l\n")
        with pytest.raises(errors.LayoutError):
            parse_order_file(path)

    def test_filter_broad_codes(self, sibling_entries, tmp_path):
        assert len(filter_broad_codes(sibling_entries)) == 12
        path = tmp_path / "codes.order"
        lines = [f"{1:<5} {'A00':<7} 1 {'s':<60} l",
                 f"{2:<5} {'A0001':<7} 0 {'s':<60} l"]
        path.write_text("\n".join(lines) + "\n")
        kept = filter_broad_codes(parse_order_file(path))
        assert [e.code for e in kept] == ["A00"]


class TestTree:
    def test_parenting(self, sibling_tree):
        assert sibling_tree.parent("A000") == "A"   # no A00 in the fixture
        assert sibling_tree.parent("A") == ROOT
        assert len(sibling_tree) == 12 + 3  # codes + chapter letters

    def test_nearest_prefix_parent(self):
        entries_codes = ["A00", "A000", "A0001", "A09"]
        tree = build_tree([_FakeEntry(c) for c in entries_codes])
        assert tree.parent("A0001") == "A000"
        assert tree.parent("A000") == "A00"
        assert tree.parent("A09") == "A"

    def test_filtering_cannot_orphan(self):
        # A0001 survives even if A000 is absent: parents to A00
        tree = build_tree([_FakeEntry(c) for c in ["A00", "A0001"]])
        assert tree.parent("A0001") == "A00"

    def test_duplicate_rejected(self):
        with pytest.raises(errors.DuplicateCode):
            build_tree([_FakeEntry("A00"), _FakeEntry("A00")])

    def test_lca(self, sibling_tree):
        assert lca(sibling_tree, "A000", "A001") == "A"
        assert lca(sibling_tree, "A000", "B000") == ROOT
        assert lca(sibling_tree, "A000", "A000") == "A000"


class _FakeEntry:
    def __init__(self, code):
        self.code = code


def bfs_distance(parent, a, b):
    adj = collections.defaultdict(set)
    for child, par in parent.items():
        if par is not None:
            adj[child].add(par)
            adj[par].add(child)
    seen = {a: 0}
    queue = collections.deque([a])
    while queue:
        node = queue.popleft()
        if node == b:
            return seen[node]
        for nxt in adj[node]:
            if nxt not in seen:
                seen[nxt] = seen[node] + 1
                queue.append(nxt)
    raise AssertionError("disconnected")


def random_parent_map(rng, n):
    parent = {ROOT: None}
    nodes = [ROOT]
    for i in range(n):
        name = f"n{i}"
        parent[name] = nodes[int(rng.integers(0, len(nodes)))]
        nodes.append(name)
    return parent


class TestDistance:
    def test_sibling_and_cross_chapter(self, sibling_tree):
        assert icd_distance(sibling_tree, "A000", "A001") == 2
        assert icd_distance(sibling_tree, "A000", "B000") == 4
        assert icd_distance(sibling_tree, "A000", "A000") == 0

    def test_unknown_code(self, sibling_tree):
        with pytest.raises(errors.UnknownCode):
            icd_distance(sibling_tree, "A000", "Z999")

    def test_matches_bfs_oracle_on_random_trees(self, rng):
        for _ in range(10):
            parent = random_parent_map(rng, int(rng.integers(5, 40)))
            tree = IcdTree(parent)
            nodes = [n for n in parent if n != ROOT]
            for _ in range(30):
                a, b = (nodes[int(rng.integers(0, len(nodes)))]
                        for _ in range(2))
                assert icd_distance(tree, a, b) == bfs_distance(parent, a, b)

    def test_symmetry(self, sibling_tree):
        for a in ("A000", "B001", "E003"):
            for b in ("A002", "E000"):
                assert icd_distance(sibling_tree, a, b) == \
                    icd_distance(sibling_tree, b, a)


class TestKmeans:
    def test_recovers_separated_groups(self, sibling_tree, sibling_entries):
        codes = [e.code for e in sibling_entries]
        assignment = kmeans(one_hot_embeddings(codes), k=3, seed=0)
        by_cluster = collections.defaultdict(set)
        for code, label in zip(codes, assignment.labels):
            by_cluster[label].add(code[0])
        assert all(len(chapters) == 1 for chapters in by_cluster.values())
        assert len(by_cluster) == 3

    def test_deterministic(self, sibling_entries):
        codes = [e.code for e in sibling_entries]
        points = one_hot_embeddings(codes)
        a = kmeans(points, k=3, seed=42)
        b = kmeans(points, k=3, seed=42)
        assert a.labels == b.labels
        assert a.centroids == b.centroids

    def test_k_equals_n(self):
        points = [[float(i), 0.0] for i in range(5)]
        assignment = kmeans(points, k=5, seed=1)
        assert sorted(set(assignment.labels)) == list(range(5))

    def test_too_few_items(self):
        with pytest.raises(errors.TooFewItems):
            kmeans([[0.0], [1.0]], k=3, seed=0)

    def test_labels_in_range(self, rng):
        points = rng.normal(size=(40, 3))
        assignment = kmeans(points, k=6, seed=9)
        assert all(0 <= c < 6 for c in assignment.labels)
        assert len(assignment.labels) == 40


class TestAvgCodeDistance:
    def test_grouped_fixture_exact(self, sibling_tree, sibling_entries):
        codes = [e.code for e in sibling_entries]
        assignment = kmeans(one_hot_embeddings(codes), k=3, seed=0)
        assert avg_code_distance(sibling_tree, codes, assignment) == 2.0

    def test_brute_force_on_arbitrary_assignment(self, sibling_tree,
                                                 sibling_entries, rng):
        codes = [e.code for e in sibling_entries]
        from ehrbench.icd import ClusterAssignment
        labels = [int(rng.integers(0, 3)) for _ in codes]
        assignment = ClusterAssignment(k=3, labels=tuple(labels),
                                       centroids=(), iterations_run=0)
        got = avg_code_distance(sibling_tree, codes, assignment)
        # independent brute force over the same grouping
        clusters = collections.defaultdict(list)
        for c, l in zip(codes, labels):
            clusters[l].append(c)
        means = []
        for members in clusters.values():
            if len(members) < 2:
                continue
            dists = [icd_distance(sibling_tree, a, b)
                     for i, a in enumerate(members)
                     for b in members[i + 1:]]
            means.append(sum(dists) / len(dists))
        assert got == pytest.approx(sum(means) / len(means))

    def test_all_singletons_nan(self, sibling_tree, sibling_entries):
        from ehrbench.icd import ClusterAssignment
        codes = [e.code for e in sibling_entries]
        assignment = ClusterAssignment(k=12, labels=tuple(range(12)),
                                       centroids=(), iterations_run=0)
        assert math.isnan(avg_code_distance(sibling_tree, codes, assignment))

    def test_length_mismatch(self, sibling_tree):
        from ehrbench.icd import ClusterAssignment
        assignment = ClusterAssignment(k=1, labels=(0,), centroids=(),
                                       iterations_run=0)
        with pytest.raises(errors.InvariantViolation):
            avg_code_distance(sibling_tree, ["A000", "A001"], assignment)


class TestHierarchyBenchmark:
    def test_report_shape_and_mean(self, sibling_tree, sibling_entries):
        codes = [e.code for e in sibling_entries]
        points = one_hot_embeddings(codes)
        report = hierarchy_benchmark(sibling_tree, codes, points,
                                     ks=(2, 3), seed=0)
        assert set(report["per_k"]) == {2, 3}
        finite = [v for v in report["per_k"].values()
                  if not math.isnan(v)]
        assert report["mean"] == pytest.approx(
            sum(report["per_k"].values()) / 2) or math.isnan(report["mean"])
        assert report["per_k"][3] == 2.0

    def test_per_k_seeds_independent(self, sibling_tree, sibling_entries):
        codes = [e.code for e in sibling_entries]
        points = one_hot_embeddings(codes)
        a = hierarchy_benchmark(sibling_tree, codes, points, ks=(3,), seed=0)
        b = hierarchy_benchmark(sibling_tree, codes, points, ks=(2, 3),
                                seed=0)
        assert a["per_k"][3] == b["per_k"][3]
