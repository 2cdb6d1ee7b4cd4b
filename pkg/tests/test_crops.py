import numpy as np
import pytest

from swellkit.crops import CropConfig, Patch, context_sides, crop_patch, make_sample, mean_fill_value
from swellkit.geometry import BBox, NightImage

CFG = CropConfig()


def constant_image(w, h, value):
    px = np.full((h, w, 3), value, dtype=np.uint8)
    return NightImage(px)


class TestCropConfig:
    def test_defaults(self):
        assert (CFG.template_size, CFG.search_size, CFG.context_amount) == (127, 255, 0.5)

    def test_template_too_small(self):
        with pytest.raises(ValueError):
            CropConfig(template_size=8)

    def test_search_must_exceed_template(self):
        with pytest.raises(ValueError):
            CropConfig(template_size=127, search_size=127)

    def test_context_range(self):
        with pytest.raises(ValueError):
            CropConfig(context_amount=1.5)


class TestContextSides:
    def test_square_box_doubles(self):
        # p = 0.5*(64+64) = 64, s_z = sqrt(128*128) = 128
        s_z, s_x = context_sides(BBox(96, 96, 64, 64), CFG)
        assert s_z == 128.0
        assert s_x == pytest.approx(128 * 255 / 127, abs=1e-9)

    def test_scale_relation_exact_on_random_boxes(self):
        rng = np.random.default_rng(5)
        for _ in range(200):
            w, h = rng.uniform(1, 200, size=2)
            x, y = rng.uniform(-50, 400, size=2)
            s_z, s_x = context_sides(BBox(x, y, w, h), CFG)
            assert s_x / s_z == pytest.approx(255 / 127, rel=1e-14)


class TestCropPatch:
    def test_degenerate_box_rejected(self):
        img = constant_image(64, 64, 128)
        with pytest.raises(ValueError):
            crop_patch(img, BBox(10, 10, 0, 5), CFG, "template")

    def test_constant_image_gives_constant_patch(self):
        img = constant_image(256, 256, 77)
        for kind in ("template", "search"):
            patch = crop_patch(img, BBox(96, 96, 64, 64), CFG, kind)
            assert (patch.pixels == 77).all()

    def test_sizes_and_kinds(self):
        img = constant_image(256, 256, 50)
        t = crop_patch(img, BBox(96, 96, 64, 64), CFG, "template")
        s = crop_patch(img, BBox(96, 96, 64, 64), CFG, "search")
        assert t.size == 127 and t.pixels.shape == (127, 127, 3)
        assert s.size == 255 and s.pixels.shape == (255, 255, 3)

    def test_deterministic(self):
        rng = np.random.default_rng(3)
        img = NightImage(rng.integers(0, 256, size=(120, 150, 3), dtype=np.uint8))
        a = crop_patch(img, BBox(30.5, 20.25, 41.0, 33.5), CFG, "search")
        b = crop_patch(img, BBox(30.5, 20.25, 41.0, 33.5), CFG, "search")
        assert np.array_equal(a.pixels, b.pixels)

    def test_fully_out_of_bounds_is_all_mean_fill(self):
        rng = np.random.default_rng(4)
        img = NightImage(rng.integers(0, 256, size=(80, 80, 3), dtype=np.uint8))
        fill = mean_fill_value(img)
        patch = crop_patch(img, BBox(10_000, 10_000, 20, 20), CFG, "template")
        assert (patch.pixels == fill).all()

    def test_fully_in_bounds_ignores_everything_outside_the_crop(self):
        # repainting all pixels outside the crop region (which also changes the
        # mean fill) must not change a fully in-bounds crop
        rng = np.random.default_rng(8)
        base = rng.integers(0, 256, size=(400, 400, 3), dtype=np.uint8)
        box = BBox(180, 180, 41, 33)
        s_z, s_x = context_sides(box, CFG)
        cx, cy = box.center
        lo_x, hi_x = int(cx - s_x / 2) - 2, int(cx + s_x / 2) + 3
        lo_y, hi_y = int(cy - s_x / 2) - 2, int(cy + s_x / 2) + 3
        repainted = base.copy()
        mask = np.ones((400, 400), dtype=bool)
        mask[lo_y:hi_y, lo_x:hi_x] = False
        repainted[mask] = (255, 0, 255)
        for kind in ("template", "search"):
            a = crop_patch(NightImage(base), box, CFG, kind)
            b = crop_patch(NightImage(repainted), box, CFG, kind)
            assert np.array_equal(a.pixels, b.pixels), kind

    def test_marker_centroid_lands_on_patch_center(self):
        # box centers sit exactly on a pixel center (odd sizes, integer corner);
        # the luma centroid of the crop of a single-marker image must match the
        # patch center to well under half a pixel
        rng = np.random.default_rng(42)
        img_side = 900
        for _ in range(200):
            w = int(rng.integers(5, 50)) * 2 + 1
            h = int(rng.integers(5, 50)) * 2 + 1
            x = int(rng.integers(300, 500))
            y = int(rng.integers(300, 500))
            box = BBox(x, y, w, h)
            px = np.zeros((img_side, img_side, 3), dtype=np.uint8)
            px[y + h // 2, x + w // 2] = (255, 255, 255)
            img = NightImage(px)
            for kind, out_size in (("template", 127), ("search", 255)):
                patch = crop_patch(img, box, CFG, kind)
                weights = patch.pixels[:, :, 0].astype(np.float64)
                total = weights.sum()
                assert total > 0, "marker lost"
                ys, xs = np.mgrid[0:out_size, 0:out_size]
                cx = (weights * xs).sum() / total
                cy = (weights * ys).sum() / total
                center = (out_size - 1) / 2
                assert abs(cx - center) <= 0.5 and abs(cy - center) <= 0.5


class TestMakeSample:
    def test_contract(self):
        img = constant_image(256, 256, 90)
        sample = make_sample(img, BBox(96, 96, 64, 64), CFG, image_id="im0")
        assert sample.template.size == 127
        assert sample.search.size == 255
        assert sample.template.kind == "template"
        assert sample.search.kind == "search"
        assert sample.image_id == sample.template.image_id == sample.search.image_id == "im0"

    def test_template_center_pixel_maps_to_box_center(self):
        # 128 px crop around (128, 128) resized to 127: the center output pixel
        # samples the image exactly at the box center
        px = np.zeros((256, 256, 3), dtype=np.uint8)
        px[127:129, 127:129] = 255  # 2x2 marker around the continuous point (128, 128)
        img = NightImage(px)
        sample = make_sample(img, BBox(96, 96, 64, 64), CFG, image_id="x")
        c = (127 - 1) // 2
        assert sample.template.pixels[c, c, 0] == 255

    def test_degenerate_box_propagates(self):
        img = constant_image(64, 64, 10)
        with pytest.raises(ValueError):
            make_sample(img, BBox(5, 5, 0, 0), CFG, image_id="x")

    def test_mismatched_patch_ids_rejected(self):
        img = constant_image(64, 64, 10)
        t = crop_patch(img, BBox(5, 5, 10, 10), CFG, "template", image_id="a")
        s = crop_patch(img, BBox(5, 5, 10, 10), CFG, "search", image_id="b")
        with pytest.raises(ValueError):
            from swellkit.crops import TrainingSample
            TrainingSample(template=t, search=s, box=BBox(5, 5, 10, 10), image_id="a")
