import json

import numpy as np
import pytest

from cryocavity import branch_curve
from cryocavity.export import (
    atomic_write,
    branchset_csv,
    branchset_dict,
    fmt,
    header,
    q_table_csv,
    read_regime_csv,
    regime_csv,
    to_json,
)


@pytest.fixture(scope="module")
def bs(ref, cavity44k):
    return branch_curve(ref, cavity44k, 16.7, 2.3, grid=np.geomspace(1e-3, 1, 200))


def test_fmt_round_trips_to_12_digits():
    for x in (1 / 3, 1e-300, -2.5e12, 0.0):
        assert float(fmt(x)) == pytest.approx(x, rel=1e-11)


def test_header_sorted():
    assert header({"b": 1, "a": "x"}) == ["# a = x", "# b = 1"]


def test_branchset_csv(bs):
    text = branchset_csv(bs, {"k": "v"})
    lines = text.splitlines()
    assert lines[0] == "# k = v"
    tp_lines = [ln for ln in lines if ln.startswith("# turning_point")]
    assert len(tp_lines) == 4
    body = [ln for ln in lines if not ln.startswith("#")]
    assert body[0] == "i_tilde,phi_l,delta_t_kelvin,stable,sign_branch"
    assert len(body) - 1 == len(bs.points())
    row = body[1].split(",")
    assert float(row[2]) == pytest.approx(16.7 * float(row[0]), rel=1e-11)
    assert row[3] in ("0", "1") and row[4] in ("+", "-")


def test_branchset_dict_json(bs):
    doc = json.loads(to_json(branchset_dict(bs), {"x": 1}))
    assert doc["config"] == {"x": 1}
    assert len(doc["turning_points"]) == 4
    assert set(doc["branches"]) == {"+", "-"}
    assert len(doc["branches"]["+"]["i_tilde"]) == len(bs.upper.intensity)


def test_regime_csv_round_trip():
    F = np.array([1e3, 1e4])
    P = np.array([1e-6, 1e-5, 1e-4])
    codes = np.array([["i", "i", "iii"], ["i", "iii", "X"]], dtype=object)
    f2, p2, c2 = read_regime_csv(regime_csv(F, P, codes, {"t0": 4}))
    assert np.allclose(f2, F) and np.allclose(p2, P)
    assert c2.tolist() == codes.tolist()


def test_q_table_csv():
    tab = {"temperature_K": np.array([1.0]), "q_inverse": np.array([1e-3]), "q_total": np.array([1e3]),
           "rel_freq_shift": np.array([0.0])}
    assert q_table_csv(tab).splitlines() == ["temperature_K,q_inverse,q_total,rel_freq_shift", "1,0.001,1000,0"]


def test_json_rejects_unknown_types():
    with pytest.raises(TypeError):
        to_json({"x": object()})
    assert json.loads(to_json({"a": np.arange(2), "b": np.float64(1.5)}))["a"] == [0, 1]


def test_atomic_write_replaces(tmp_path):
    p = tmp_path / "out.csv"
    atomic_write(p, "first\n")
    atomic_write(p, "second\n")
    assert p.read_text() == "second\n"
    assert [q.name for q in tmp_path.iterdir()] == ["out.csv"]


def test_atomic_write_no_partial_file(tmp_path):
    p = tmp_path / "out.csv"
    with pytest.raises(TypeError):
        atomic_write(p, 12345)  # not text: writing fails before the rename
    assert list(tmp_path.iterdir()) == []
