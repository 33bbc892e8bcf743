from framesnap import track_segment
from framesnap.figures import plot_catalog, plot_deformation, save_figure


def test_catalog_figure_written(tmp_path, triangle_pinned, pinned_catalog):
    out = tmp_path / "catalog.png"
    save_figure(plot_catalog(triangle_pinned, pinned_catalog), str(out))
    assert out.exists() and out.stat().st_size > 1000


def test_deformation_figure_written(tmp_path, triangle_unpinned, unpinned_catalog):
    blue = next(p for p in unpinned_catalog.stable if p.free_coordinates[-1] > 0)
    green = unpinned_catalog.unstable[0]
    path = track_segment(triangle_unpinned, blue.realization, green.lengths, steps=10)
    out = tmp_path / "path.png"
    save_figure(plot_deformation(triangle_unpinned, path), str(out))
    assert out.exists() and out.stat().st_size > 1000
