import sys
from pathlib import Path

import numpy as np
import pytest

sys.path.append(str(Path(__file__).resolve().parents[1]))

from core.errors import ConfigError, MaskError  # noqa: E402
from core.geometry import TokenGrid  # noqa: E402
from core.masks import (  # noqa: E402
    SwinMask,
    build_clear,
    build_full,
    build_neighborhood,
    build_strided,
    build_swin,
    builder_for,
    load_mask,
    mask_stats,
    save_mask,
    write_pbm,
    write_pgm,
)

BUILDERS = [
    ("full", {}),
    ("clear", {"r": 2.5}),
    ("neighborhood", {"half_width": 1}),
    ("swin", {"window": 2, "shift": 1}),
    ("strided", {"r": 2}),
]


def test_full_mask():
    assert build_full(TokenGrid(1, 0, 0)).to_dense().tolist() == [[True]]
    grid = TokenGrid(3, 4, 5)
    mask = build_full(grid)
    assert mask.popcount() == grid.n**2
    assert mask.sparsity() == 0.0


def test_full_mask_popcount_at_flux_size():
    grid = TokenGrid(512, 64, 64)
    assert build_full(grid).popcount() == 4608**2


def test_clear_corner_and_centre_rows():
    mask = build_clear(TokenGrid(0, 3, 3), 2)
    counts = mask.row_counts()
    assert counts[0] == 4
    assert counts[4] == 9


@pytest.mark.parametrize("layer", [0, 1, 2, 3])
@pytest.mark.parametrize("method,params", BUILDERS)
def test_every_builder_keeps_diagonal_and_text_clause(method, params, layer):
    grid = TokenGrid(3, 4, 4)
    dense = builder_for(method, layer, **params).build(grid).to_dense()
    assert np.all(np.diag(dense))
    assert np.all(dense[:3])
    assert np.all(dense[:, :3])


def test_clear_and_neighborhood_are_symmetric():
    grid = TokenGrid(2, 6, 7)
    for mask in (build_clear(grid, 2.7), build_neighborhood(grid, 2)):
        block = mask.image_block()
        assert np.array_equal(block, block.T)


def test_clear_radius_is_strict():
    grid = TokenGrid(0, 5, 5)
    # offset (2, 0) has squared length 4, outside a radius-2 circle
    assert build_clear(grid, 2) == build_neighborhood(grid, 1)
    assert build_clear(grid, 3).subset_of(build_neighborhood(grid, 2))
    assert build_clear(grid, 3).subset_of(build_full(grid))


def test_neighborhood_windows():
    grid = TokenGrid(0, 3, 3)
    assert np.array_equal(build_neighborhood(grid, 0).image_block(), np.eye(9, dtype=bool))
    assert build_neighborhood(grid, 1).row_counts()[4] == 9
    big = TokenGrid(0, 9, 9)
    assert build_neighborhood(big, 2).row_counts()[big.index_of(4, 4)] == 25


def test_swin_windows():
    grid = TokenGrid(0, 4, 4)
    assert np.all(build_swin(grid, 2).row_counts() == 4)
    assert np.all(build_swin(grid, 4, 2, layer_index=1).image_block())
    assert np.all(build_swin(TokenGrid(0, 3, 5), 5).image_block())


def test_swin_shift_applies_to_odd_layers_only():
    grid = TokenGrid(0, 8, 8)
    assert SwinMask(4, 2, 0).window_count(grid) == 4
    assert SwinMask(4, 2, 1).window_count(grid) == 9
    assert build_swin(grid, 4, 2, layer_index=2) == build_swin(grid, 4, 0)


def test_swin_rank_is_window_count():
    grid = TokenGrid(0, 8, 8)
    assert mask_stats(build_swin(grid, 4)).image_rank == 4
    assert mask_stats(build_swin(grid, 4, 2, layer_index=1)).image_rank == 9


def test_swin_shift_on_non_square_rasters():
    grid = TokenGrid(0, 4, 16)
    even = build_swin(grid, 4, 2, layer_index=0)
    odd = build_swin(grid, 4, 2, layer_index=1)
    assert odd != even
    assert SwinMask(4, 2, 1).axis_shifts(grid) == (2, 0)
    assert SwinMask(4, 2, 1).window_count(grid) == 5
    block = odd.image_block()
    # the leading window holds columns 0 and 1 of every row
    assert block[grid.index_of(0, 3), grid.index_of(1, 0)]
    assert not block[grid.index_of(1, 0), grid.index_of(2, 0)]
    assert even.image_block()[grid.index_of(1, 0), grid.index_of(2, 0)]
    assert even.popcount() == 4 * 16 * 16
    assert odd.popcount() == (2 * 2 + 3 * 4 * 4 + 2 * 2) * 4 * 4
    assert np.all(build_swin(grid, 16, 8, layer_index=1).image_block())


@pytest.mark.parametrize(
    "height,width,window,shift,layer,windows",
    [
        (16, 16, 4, 2, 1, 25),
        (12, 20, 4, 2, 1, 24),
        (4, 16, 4, 2, 1, 5),
        (32, 24, 16, 8, 1, 6),
        (32, 32, 8, 0, 0, 16),
        (32, 32, 8, 4, 1, 25),
    ],
)
def test_swin_rank_matches_window_count_up_to_32x32(height, width, window, shift, layer, windows):
    grid = TokenGrid(0, height, width)
    builder = SwinMask(window, shift, layer)
    assert builder.window_count(grid) == windows
    stats = mask_stats(builder.build(grid))
    assert stats.exact
    assert stats.image_rank == windows


@pytest.mark.parametrize("r1,r2", [(1, 1.5), (1.5, 2), (2, 2.01), (2.5, 4), (3, 10)])
def test_clear_masks_grow_with_radius(r1, r2):
    grid = TokenGrid(2, 7, 9)
    assert build_clear(grid, r1).subset_of(build_clear(grid, r2))
    assert not build_clear(grid, 4).subset_of(build_clear(grid, 1.5))


@pytest.mark.parametrize("r", [2, 3, 4.5])
def test_clear_popcount_grows_linearly_with_height(r):
    short = build_clear(TokenGrid(0, 32, 24), r).popcount()
    tall = build_clear(TokenGrid(0, 64, 24), r).popcount()
    assert 1.9 <= tall / short <= 2.1


def test_strided_patterns():
    grid = TokenGrid(0, 4, 4)
    assert np.all(build_strided(grid, 1).image_block())
    layer0 = build_strided(grid, 2, 0)
    assert np.all(layer0.row_counts() == 4)
    off = ~np.eye(16, dtype=bool)
    overlap = layer0.image_block() & build_strided(grid, 2, 1).image_block()
    assert not np.any(overlap & off)


def test_strided_symmetry_follows_residue_class():
    grid = TokenGrid(0, 6, 6)
    block0 = build_strided(grid, 3, 0).image_block()
    block1 = build_strided(grid, 3, 1).image_block()
    assert np.array_equal(block0, block0.T)
    assert not np.array_equal(block1, block1.T)


def test_strided_layer_out_of_range():
    with pytest.raises(MaskError):
        build_strided(TokenGrid(0, 4, 4), 2, 4)
    # the layer cycle is applied by builder_for
    assert builder_for("strided", 4, r=2).build(TokenGrid(0, 4, 4)) == build_strided(
        TokenGrid(0, 4, 4), 2, 0
    )


def test_builder_errors():
    with pytest.raises(ConfigError):
        builder_for("diagonal")
    with pytest.raises(ConfigError):
        builder_for("clear")
    with pytest.raises(MaskError):
        build_clear(TokenGrid(0, 2, 2), 0)
    with pytest.raises(MaskError):
        build_swin(TokenGrid(0, 2, 2), 2, 2)


def test_clear_rank_regression():
    # r = 2 gives the 3x3 king window; its 8x8 block is T (x) T with rank(T) = 7
    stats = mask_stats(build_clear(TokenGrid(0, 8, 8), 2))
    assert stats.exact
    assert stats.image_rank == 49


def test_mask_file_round_trip(tmp_path):
    mask = build_swin(TokenGrid(2, 6, 5), 3, 1, layer_index=1)
    path = tmp_path / "m.bin"
    save_mask(path, mask)
    loaded = load_mask(path)
    assert loaded == mask
    assert loaded.grid == mask.grid
    assert loaded.builder == "swin"
    assert loaded.params == {"window": 3, "shift": 1, "layer": 1}


def test_mask_file_rejects_garbage(tmp_path):
    path = tmp_path / "bad.bin"
    path.write_bytes(b"NOTAMASK")
    with pytest.raises(MaskError):
        load_mask(path)
    mask = build_full(TokenGrid(0, 3, 3))
    save_mask(path, mask)
    path.write_bytes(path.read_bytes()[:-1])
    with pytest.raises(MaskError):
        load_mask(path)


def test_image_dumps(tmp_path):
    mask = build_clear(TokenGrid(1, 3, 3), 1.5)
    write_pbm(tmp_path / "m.pbm", mask)
    data = (tmp_path / "m.pbm").read_bytes()
    assert data.startswith(b"P4\n10 10\n")
    assert len(data) == len(b"P4\n10 10\n") + 10 * 2
    write_pgm(tmp_path / "w.pgm", np.array([[0.0, 0.5], [1.0, 2.0]]))
    pgm = (tmp_path / "w.pgm").read_bytes()
    assert pgm.startswith(b"P5\n2 2\n255\n")
    assert pgm[-4:] == bytes([0, 64, 128, 255])
