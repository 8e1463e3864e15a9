import numpy as np
import pytest

from gerbecalc import cellmodel


def test_circle_model_is_valid_good_cover(model):
    rep = cellmodel.validate_model(model)
    assert rep.valid and rep.good_cover, rep.as_dict()


def test_boundary_squares_to_zero(model):
    for lv in model.levels:
        for k in range(2, lv.dim + 1):
            assert (lv.boundary[k - 1] @ lv.boundary[k]).count_nonzero() == 0


def test_level_sizes(model):
    # Z_N^q with the standard cell structure has C(q, k) N^q cells of dim k
    from math import comb
    N = model.info["N"]
    for lv in model.levels:
        assert lv.n_cells == tuple(comb(lv.q, k) * N ** lv.q for k in range(lv.q + 1))
        assert lv.n_patches == model.info["n_arcs"] ** lv.q


def test_patches_are_acyclic_by_both_methods(model):
    lv = model.level(2)
    for i in range(lv.n_patches):
        assert cellmodel.betti_numbers(lv, i) == [1, 0, 0]
        assert cellmodel.coreduction_critical_cells(lv, i) == [1, 0, 0]


def test_corrupted_chain_map_is_rejected(model):
    rep = cellmodel.validate_model(cellmodel.corrupt_chain_map(model), acyclicity="skip")
    assert not rep.valid
    assert any("face map 1" in v for v in rep.violations)


def test_single_patch_cover_is_not_good():
    rep = cellmodel.validate_model(cellmodel.circle_model(single_patch=True))
    assert rep.valid
    assert not rep.good_cover
    assert cellmodel.betti_numbers(cellmodel.circle_model(Q=1, single_patch=True).level(1), 0) == [1, 1]


def test_unknown_acyclicity_method(model):
    with pytest.raises(ValueError):
        cellmodel.validate_model(model, acyclicity="guess")


@pytest.mark.parametrize("kwargs", [{"N": 10, "n_arcs": 3}, {"N": 6, "n_arcs": 3, "overlap": 2}])
def test_bad_parameters_rejected(kwargs):
    with pytest.raises(ValueError):
        cellmodel.circle_model(**kwargs)


def test_model_roundtrip(tmp_path, model):
    path = tmp_path / "model.json"
    cellmodel.write_model(path, model)
    back = cellmodel.read_model(path)
    assert back.name == model.name and back.Q == model.Q
    for a, b in zip(model.levels, back.levels):
        assert a.n_cells == b.n_cells
        assert np.array_equal(a.patch_labels, b.patch_labels)
        for k in range(1, a.dim + 1):
            assert (a.boundary[k] != b.boundary[k]).nnz == 0
        for ma, mb in zip(a.face_chain, b.face_chain):
            assert all((x != y).nnz == 0 for x, y in zip(ma, mb))


def test_read_model_rejects_foreign_file(tmp_path):
    p = tmp_path / "x.json"
    p.write_text('{"format": "other"}')
    with pytest.raises(ValueError):
        cellmodel.read_model(p)


@pytest.mark.slow
def test_four_level_model_is_valid():
    rep = cellmodel.validate_model(cellmodel.circle_model(Q=4))
    assert rep.valid and rep.good_cover, rep.as_dict()
