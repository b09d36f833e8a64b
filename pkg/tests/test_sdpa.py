import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from osearch.sdpa import MAX_EXPORT_N, build_clp_sdp, export_sdp, read_sdpa, write_sdpa
from osearch.spectral import gram_rank1


def row_values(prob, Ys, slack):
    """``F_i . Y`` for every constraint row, with the diagonal block holding ``slack``."""
    out = np.zeros(prob.m)
    for (mat, blk, i, j), v in zip(prob.index.tolist(), prob.values.tolist()):
        if mat == 0:
            continue
        y = slack if prob.block_struct[blk - 1] < 0 else Ys[blk - 1][i - 1, j - 1]
        out[mat - 1] += v * y * (1 if i == j else 2)
    return out


# ---------------------------------------------------------------- structure


def test_two_one_layout():
    p = build_clp_sdp(2, 1, 0.0)
    assert p.block_struct == [2, -1]
    kinds = [r[0] for r in p.row_kinds]
    # one row per forward step; here it reads Q[0,1] - Q[1,0] = 0, which is
    # empty on real symmetric blocks
    assert kinds == ["forward", "trace", "final"]
    np.testing.assert_array_equal(p.c, [0.0, 1.0, 1.0])
    assert not p.matrix(1, 1).any()
    np.testing.assert_array_equal(p.matrix(2, 1), np.eye(2))
    assert p.matrix(3, 1)[0, 0] == 1 and p.matrix(3, 2)[0, 0] == -1
    np.testing.assert_array_equal(p.matrix(0, 1), [[1, 0], [0, 0]])


@pytest.mark.parametrize("n,k", [(3, 2), (6, 3), (10, 4)])
def test_row_counts(n, k):
    p = build_clp_sdp(n, k, 0.1)
    assert p.block_struct == [n] * k + [-1]
    assert p.m == k * (n - 1) + k + 1
    assert p.c[-1] == pytest.approx(0.9)


def test_forward_rows_link_neighbouring_blocks():
    p = build_clp_sdp(5, 3)
    r = 1 + 4 + 1  # step t=2, j=2
    assert p.row_kinds[r - 1] == ("forward", 2, 2)
    np.testing.assert_array_equal(p.matrix(r, 1), -p.matrix(r, 2))
    assert not p.matrix(r, 3).any()


def test_guard_on_size(tmp_path):
    with pytest.raises(ValueError):
        build_clp_sdp(MAX_EXPORT_N + 1, 2)
    with pytest.raises(ValueError):
        build_clp_sdp(3, 0)


# ---------------------------------------------------------------- file format


@settings(max_examples=25)
@given(st.integers(1, 12), st.integers(1, 4), st.sampled_from([0.0, 0.25, 1e-3]))
def test_round_trip(tmp_path_factory, n, k, eps):
    path = tmp_path_factory.mktemp("sdpa") / "p.dat-s"
    p = export_sdp(n, k, eps, path)
    q = read_sdpa(path)
    assert p.same_data(q)
    assert q.comment.startswith("ordered search")


def test_reader_tolerates_punctuation(tmp_path):
    path = tmp_path / "x.dat-s"
    path.write_text(
        '* a comment\n"title"\n2 =mdim\n2 = nblock\n{2, -1}\n(1.0,\n 0.5)\n'
        "0 1 1 1 1.0\n1 1 1 2 0.5\n2 1 2 2 1.0\n2 2 1 1 -1.0\n"
    )
    p = read_sdpa(path)
    assert p.block_struct == [2, -1]
    np.testing.assert_array_equal(p.c, [1.0, 0.5])
    np.testing.assert_array_equal(p.matrix(1, 1), [[0, 0.5], [0.5, 0]])


def test_reader_swaps_lower_entries(tmp_path):
    path = tmp_path / "x.dat-s"
    path.write_text("1\n1\n2\n1.0\n1 1 2 1 3.0\n")
    assert read_sdpa(path).index.tolist() == [[1, 1, 1, 2]]


@pytest.mark.parametrize(
    "text",
    [
        "1\n1\n",
        "1\n1\n2\n1.0\n1 1 3 1 3.0\n",
        "1\n1\n2\n1.0\n2 1 1 1 3.0\n",
        "1\n1\n2\n1.0\n1 1 1 1\n",
    ],
)
def test_reader_rejects_malformed(tmp_path, text):
    path = tmp_path / "bad.dat-s"
    path.write_text(text)
    with pytest.raises(ValueError):
        read_sdpa(path)


def test_same_data_detects_change(tmp_path):
    p = build_clp_sdp(4, 2)
    path = tmp_path / "p.dat-s"
    write_sdpa(p, path)
    q = read_sdpa(path)
    q.values[3] += 1e-6
    assert not p.same_data(q)
    assert p.same_data(q, tol=1e-5)


# ---------------------------------------------------------------- solutions


@pytest.mark.parametrize("n,k", [(2, 1), (6, 2), (56, 3)])
def test_pipeline_grams_satisfy_every_row(certs, n, k):
    f = certs(n, k).factors
    Ys = [gram_rank1(p).real for p in f[1:]]
    prob = build_clp_sdp(n, k)
    slack = Ys[-1][0, 0] - 1.0
    assert slack >= -1e-12
    np.testing.assert_allclose(row_values(prob, Ys, slack), prob.c, atol=1e-8)


@pytest.mark.parametrize(
    "n,k,feasible", [(2, 1, True), (3, 1, False), (6, 2, True), (7, 2, False), (10, 2, False), (56, 3, True), (57, 3, False)]
)
def test_conic_solver_agrees(conic_check, n, k, feasible):
    res = conic_check(n, k)
    assert res.status in ("optimal", "optimal_inaccurate")
    assert res.feasible is feasible
