import itertools
import math
import random

import pytest

from wingman.evaluation import (
    AnnotationError,
    Trajectory,
    dtw,
    load_annotations,
    similarity,
    sync_report,
)

# regression value computed by an independent scripted oracle of the same
# pipeline (normalize, resample, DTW mean step cost, 1/(1+mean)) before
# this module was written
ROTATED_CIRCLE_SIMILARITY = 0.98825863211803455
ROTATED_CIRCLE_DISTANCE = 0.39206856131825041
ROTATED_CIRCLE_PATH_LEN = 33


def test_dtw_identical_sequences():
    points = [(0.0, 0.0), (1.0, 1.0), (2.0, 0.5)]
    distance, path = dtw(points, points)
    assert distance == 0.0
    assert path == [(0, 0), (1, 1), (2, 2)]


def test_dtw_known_value():
    # brute-force enumeration of all monotone paths gives 1.0
    distance, path = dtw([0, 1, 2], [0, 2])
    assert distance == 1.0
    assert path[0] == (0, 0) and path[-1] == (2, 1)


def test_dtw_constant_sequences():
    distance, path = dtw([5], [5, 5, 5])
    assert distance == 0.0
    assert len(path) == 3


def test_dtw_empty_is_error():
    with pytest.raises(ValueError):
        dtw([], [1])
    with pytest.raises(ValueError):
        dtw([1], [])


def test_dtw_mixed_dimensionality_is_error():
    with pytest.raises(ValueError):
        dtw([(1, 2), (1, 2, 3)], [(0, 0)])


def test_dtw_path_is_monotone_and_contiguous():
    rng = random.Random(3)
    for _ in range(100):
        a = [rng.uniform(-2, 2) for _ in range(rng.randint(1, 12))]
        b = [rng.uniform(-2, 2) for _ in range(rng.randint(1, 12))]
        distance, path = dtw(a, b)
        assert path[0] == (0, 0)
        assert path[-1] == (len(a) - 1, len(b) - 1)
        assert len(path) >= max(len(a), len(b))
        for (i0, j0), (i1, j1) in zip(path, path[1:]):
            assert (i1 - i0, j1 - j0) in {(1, 0), (0, 1), (1, 1)}


def path_cost(a, b, path):
    return sum(abs(a[i] - b[j]) for i, j in path)


def test_dtw_symmetry():
    rng = random.Random(4)
    for _ in range(200):
        a = [rng.randrange(3) for _ in range(rng.randint(1, 8))]
        b = [rng.randrange(3) for _ in range(rng.randint(1, 8))]
        dist_ab, path_ab = dtw(a, b)
        dist_ba, path_ba = dtw(b, a)
        assert dist_ab == dist_ba
        # the transposed path is an optimal alignment of the swapped pair
        # (ties may pick a different one, but never a cheaper or dearer one)
        assert path_cost(b, a, [(j, i) for i, j in path_ab]) == dist_ba
        assert path_cost(a, b, [(j, i) for i, j in path_ba]) == dist_ab


def dedup(seq):
    out = []
    for v in seq:
        if not out or out[-1] != v:
            out.append(v)
    return out


def test_dtw_zero_iff_deduplicated_equal():
    rng = random.Random(5)
    for _ in range(500):
        a = [rng.randrange(3) for _ in range(rng.randint(1, 7))]
        b = [rng.randrange(3) for _ in range(rng.randint(1, 7))]
        distance, _ = dtw(a, b)
        assert (distance == 0.0) == (dedup(a) == dedup(b))


def brute_force_dtw(a, b):
    """Exhaustive minimum over all monotone alignment paths (recursion)."""
    best = math.inf

    def walk(i, j, acc):
        nonlocal best
        acc += abs(a[i] - b[j])
        if acc >= best:
            return
        if i == len(a) - 1 and j == len(b) - 1:
            best = acc
            return
        if i + 1 < len(a) and j + 1 < len(b):
            walk(i + 1, j + 1, acc)
        if i + 1 < len(a):
            walk(i + 1, j, acc)
        if j + 1 < len(b):
            walk(i, j + 1, acc)

    walk(0, 0, 0.0)
    return best


def test_dtw_equals_exhaustive_minimum_small():
    sequences = []
    for length in range(1, 5):
        sequences.extend(itertools.product(range(3), repeat=length))
    rng = random.Random(6)
    pairs = [(rng.choice(sequences), rng.choice(sequences)) for _ in range(1500)]
    for a, b in pairs:
        assert dtw(list(a), list(b))[0] == brute_force_dtw(a, b)


def circle_trajectories(n=32, rotate_by=1):
    times = tuple(k / 10.0 for k in range(n))
    angles = [2 * math.pi * k / n for k in range(n)]
    points = [(math.cos(t), math.sin(t)) for t in angles]
    rotated = points[rotate_by:] + points[:rotate_by]
    return (
        Trajectory(times, tuple(points), label="a"),
        Trajectory(times, tuple(rotated), label="b"),
    )


def test_similarity_identical_is_one():
    a, _ = circle_trajectories()
    assert similarity(a, a) == 1.0


def test_similarity_rotated_circle_regression():
    a, b = circle_trajectories()
    assert similarity(a, b) == pytest.approx(ROTATED_CIRCLE_SIMILARITY, abs=1e-9)
    report = sync_report(a, b)
    assert report.dtw_distance == pytest.approx(ROTATED_CIRCLE_DISTANCE, abs=1e-9)
    assert report.path_length == ROTATED_CIRCLE_PATH_LEN


def test_similarity_constant_trajectories():
    a = Trajectory((0.0, 1.0, 2.0), ((4.0, 4.0),) * 3)
    b = Trajectory((0.0, 1.0, 2.0), ((-100.0, 250.0),) * 3)
    # constants normalize onto the origin, so they are perfectly similar
    assert similarity(a, b) == 1.0


def test_similarity_single_points():
    a = Trajectory((0.0,), ((1.0, 2.0),))
    b = Trajectory((0.0,), ((5.0, -3.0),))
    assert similarity(a, b) == 1.0


def test_similarity_translation_and_common_scale_invariance():
    rng = random.Random(7)
    times = tuple(k / 10.0 for k in range(40))
    points = []
    x = z = 0.0
    for _ in times:
        x += rng.uniform(-0.5, 0.5)
        z += rng.uniform(-0.5, 0.5)
        points.append((x, z))
    half = [(px + 0.11 * i, pz - 0.07 * i) for i, (px, pz) in enumerate(points)]
    a = Trajectory(times, tuple(points))
    b = Trajectory(times, tuple(half))
    base = sync_report(a, b)

    shift = Trajectory(times, tuple((px + 13.0, pz - 4.0) for px, pz in points))
    report = sync_report(shift, b)
    assert report.similarity == pytest.approx(base.similarity, abs=1e-9)
    assert report.dtw_distance == pytest.approx(base.dtw_distance, abs=1e-9)
    assert report.path_length == base.path_length
    assert report.lag_estimate == pytest.approx(base.lag_estimate, abs=1e-9)

    scaled_a = Trajectory(times, tuple((3.5 * px, 3.5 * pz) for px, pz in points))
    scaled_b = Trajectory(times, tuple((3.5 * px, 3.5 * pz) for px, pz in half))
    report = sync_report(scaled_a, scaled_b)
    assert report.similarity == pytest.approx(base.similarity, abs=1e-9)
    assert report.dtw_distance == pytest.approx(base.dtw_distance, abs=1e-9)


def test_similarity_detects_shape_difference():
    times = tuple(float(k) for k in range(20))
    ramp = tuple((float(k), float(k) ** 1.5) for k in range(20))
    a = Trajectory(times, ramp)
    b = Trajectory(times, tuple(reversed(ramp)))
    assert similarity(a, b) < 1.0


def test_disjoint_time_ranges_error():
    a = Trajectory((0.0, 1.0), ((0, 0), (1, 1)))
    b = Trajectory((5.0, 6.0), ((0, 0), (1, 1)))
    with pytest.raises(ValueError):
        similarity(a, b)


def random_walk_trajectory(n, seed, dt=0.1):
    rng = random.Random(seed)
    times = []
    points = []
    x = z = 0.0
    for k in range(n):
        times.append(k * dt)
        x += rng.uniform(-0.5, 0.5)
        z += rng.uniform(-0.5, 0.5)
        points.append((x, z))
    return times, points


def test_sync_report_identical():
    times, points = random_walk_trajectory(50, seed=8)
    a = Trajectory(tuple(times), tuple(points))
    report = sync_report(a, a)
    assert report.similarity == 1.0
    assert report.lag_estimate == 0.0
    assert report.path_length >= 50


def test_sync_report_lag_of_delayed_copy():
    # b shows a's value five samples late on the same clock (10 Hz)
    times, points = random_walk_trajectory(41, seed=9)
    delayed = [points[max(k - 5, 0)] for k in range(41)]
    a = Trajectory(tuple(times), tuple(points))
    b = Trajectory(tuple(times), tuple(delayed))
    report = sync_report(a, b)
    assert report.lag_estimate == pytest.approx(0.5, abs=1e-6)


def test_sync_report_invariants():
    times, points = random_walk_trajectory(30, seed=10)
    other = [(pz, px) for px, pz in points]
    a = Trajectory(tuple(times), tuple(points))
    b = Trajectory(tuple(times), tuple(other))
    report = sync_report(a, b)
    assert 0.0 < report.similarity <= 1.0
    assert report.dtw_distance >= 0.0
    assert report.path_length >= max(len(a), len(b))


def test_trajectory_validation():
    with pytest.raises(ValueError):
        Trajectory((), ())
    with pytest.raises(ValueError):
        Trajectory((0.0, 0.0), ((0, 0), (1, 1)))
    with pytest.raises(ValueError):
        Trajectory((0.0, 1.0), ((0, 0),))


def write_annotations(path, rows):
    lines = ["frame,label,xmin,ymin,xmax,ymax"]
    lines.extend(",".join(str(v) for v in row) for row in rows)
    path.write_text("\n".join(lines) + "\n")


def test_load_annotations_box_center_example(tmp_path):
    path = tmp_path / "ann.csv"
    write_annotations(path, [(0, "head", 0, 0, 10, 20)])
    out = load_annotations(path)
    assert set(out) == {"head"}
    assert out["head"].times == (0.0,)
    assert out["head"].points == ((5.0, 10.0),)
    assert out["head"].units == "px"


def test_load_annotations_interleaved_labels_sorted(tmp_path):
    path = tmp_path / "ann.csv"
    write_annotations(
        path,
        [
            (2, "head", 0, 0, 2, 2),
            (0, "drone", 4, 4, 6, 6),
            (0, "head", 0, 0, 4, 4),
            (1, "drone", 0, 0, 2, 2),
        ],
    )
    out = load_annotations(path, fps=10.0)
    assert out["head"].times == (0.0, 0.2)
    assert out["head"].points == ((2.0, 2.0), (1.0, 1.0))
    assert out["drone"].times == (0.0, 0.1)


def test_load_annotations_header_only(tmp_path):
    path = tmp_path / "ann.csv"
    write_annotations(path, [])
    assert load_annotations(path) == {}


def test_load_annotations_errors(tmp_path):
    path = tmp_path / "ann.csv"
    path.write_text("frame,label,x1,y1,x2,y2\n")
    with pytest.raises(AnnotationError, match="header"):
        load_annotations(path)

    write_annotations(path, [(0, "head", 0, 0, 10, 20), ("x", "head", 0, 0, 1, 1)])
    with pytest.raises(AnnotationError, match="line 3"):
        load_annotations(path)

    write_annotations(path, [(0, "head", 10, 0, 0, 20)])
    with pytest.raises(AnnotationError, match="xmax"):
        load_annotations(path)

    write_annotations(path, [(0, "head", 0, 20, 10, 0)])
    with pytest.raises(AnnotationError, match="ymax"):
        load_annotations(path)

    write_annotations(path, [(-1, "head", 0, 0, 10, 20)])
    with pytest.raises(AnnotationError, match="negative frame"):
        load_annotations(path)

    write_annotations(path, [(3, "head", 0, 0, 10, 20), (3, "head", 1, 1, 2, 2)])
    with pytest.raises(AnnotationError, match="duplicate frame"):
        load_annotations(path)

    with pytest.raises(ValueError):
        load_annotations(path, fps=0.0)


def test_missing_frames_are_allowed(tmp_path):
    path = tmp_path / "ann.csv"
    write_annotations(path, [(0, "head", 0, 0, 2, 2), (10, "head", 4, 4, 6, 6)])
    out = load_annotations(path, fps=30.0)
    assert out["head"].times == pytest.approx((0.0, 10 / 30.0))
    assert len(out["head"].points) == 2  # no interpolation
