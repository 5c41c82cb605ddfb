import os

import numpy as np
import pytest

from steerguard.core.errors import ValidationError
from steerguard.data import (TEST, TRAIN, Dataset, Sample, generate_sample, generate_synthetic,
                             load_manifest, read_png, split, steering_label, write_manifest, write_png)


class TestSynthetic:
    def test_deterministic(self):
        a = generate_synthetic(5, size=64, seed=7)
        b = generate_synthetic(5, size=64, seed=7)
        np.testing.assert_array_equal(a.images, b.images)
        np.testing.assert_array_equal(a.labels, b.labels)
        assert a.ids == b.ids == [f'syn-7-{i:06d}' for i in range(5)]

    def test_samples_regenerate_individually(self):
        dataset = generate_synthetic(4, size=16, seed=2, strict_size=False)
        np.testing.assert_array_equal(generate_sample(2, 3, 16).image, dataset[3].image)

    def test_valid_ranges(self):
        dataset = generate_synthetic(20, size=16, seed=0, strict_size=False)
        assert dataset.images.min() >= 0.0 and dataset.images.max() <= 1.0
        assert np.all(np.abs(dataset.labels) <= 1.0)
        assert dataset.image_size == 16

    def test_label_formula(self):
        assert steering_label(0.0, 0.0) == 0.0
        assert steering_label(0.5, 0.1) == pytest.approx(1.2 * 0.5 + 2.0 * 0.1)
        assert steering_label(1.0, 0.5) == 1.0

    def test_rejects_bad_arguments(self):
        with pytest.raises(ValidationError):
            generate_synthetic(0)
        with pytest.raises(ValidationError):
            generate_synthetic(2, size=32)


class TestDataset:
    def test_sample_validation(self):
        with pytest.raises(ValidationError):
            Sample(np.zeros((4, 4)), 0.0, 'flat')
        with pytest.raises(ValidationError):
            Sample(np.full((4, 4, 3), 1.5), 0.0, 'bright')
        with pytest.raises(ValidationError):
            Sample(np.zeros((4, 4, 3)), 1.5, 'sharp')

    def test_unique_ids(self):
        s = Sample(np.zeros((4, 4, 3)), 0.0, 'same')
        with pytest.raises(ValidationError):
            Dataset((s, Sample(np.ones((4, 4, 3)), 0.0, 'same')))

    def test_images_read_only(self, tiny_data):
        with pytest.raises(ValueError):
            tiny_data.images[0, 0, 0, 0] = 0.5

    def test_split_is_disjoint_and_ordered(self, tiny_data):
        train, test = split(tiny_data, 0.25, seed=1)
        assert len(train) == 9 and len(test) == 3
        assert set(train.ids).isdisjoint(test.ids)
        assert train.split_tag == TRAIN and test.split_tag == TEST
        order = {sid: i for i, sid in enumerate(tiny_data.ids)}
        assert [order[i] for i in test.ids] == sorted(order[i] for i in test.ids)

    def test_split_rejects_degenerate_fraction(self, tiny_data):
        with pytest.raises(ValidationError):
            split(tiny_data, 0.0)
        with pytest.raises(ValidationError):
            split(tiny_data.subset([0]), 0.5)

    def test_relabel(self, tiny_data):
        relabeled = tiny_data.relabel(np.zeros(len(tiny_data)))
        assert np.all(relabeled.labels == 0.0)
        np.testing.assert_array_equal(relabeled.images, tiny_data.images)


class TestManifest:
    def test_png_quantization(self, tmp_path):
        image = np.array([[[0.0, 0.5, 1.0]]])
        path = str(tmp_path / 'pixel.png')
        write_png(image, path)
        np.testing.assert_array_equal(read_png(path), [[[0.0, 128 / 255, 1.0]]])

    def test_round_trip_is_within_quantization(self, tmp_path, tiny_data):
        manifest = write_manifest(tiny_data, str(tmp_path))
        loaded = load_manifest(manifest)
        assert len(loaded) == len(tiny_data)
        np.testing.assert_array_equal(loaded.labels, tiny_data.labels)
        assert np.abs(loaded.images - tiny_data.images).max() <= 0.5 / 255 + 1e-12

    def _write(self, tmp_path, text):
        path = tmp_path / 'manifest.csv'
        path.write_text(text, encoding='utf-8')
        return str(path)

    def test_bad_header(self, tmp_path):
        with pytest.raises(ValidationError, match='header'):
            load_manifest(self._write(tmp_path, 'path,label\n'))

    def test_row_errors_name_the_row(self, tmp_path):
        write_png(np.zeros((8, 8, 3)), str(tmp_path / 'a.png'))
        with pytest.raises(ValidationError, match='row 3'):
            load_manifest(self._write(tmp_path, 'image,angle\na.png,0.1\na.png,left\n'))
        with pytest.raises(ValidationError, match='row 2'):
            load_manifest(self._write(tmp_path, 'image,angle\na.png,1.5\n'))

    def test_missing_image(self, tmp_path):
        with pytest.raises(ValidationError, match='not found'):
            load_manifest(self._write(tmp_path, 'image,angle\nmissing.png,0.0\n'))

    def test_empty_manifest(self, tmp_path):
        with pytest.raises(ValidationError):
            load_manifest(self._write(tmp_path, 'image,angle\n'))

    def test_missing_manifest(self, tmp_path):
        with pytest.raises(ValidationError):
            load_manifest(os.path.join(str(tmp_path), 'absent.csv'))
