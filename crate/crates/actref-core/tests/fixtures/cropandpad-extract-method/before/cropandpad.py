class CropAndPad:
    def _augment_keypoints(self, keypoints_on_images, random_state, parents, hooks):
        result = []
        samples = self._draw_samples(random_state, len(keypoints_on_images))
        for i, kpsoi in enumerate(keypoints_on_images):
            crop_top, crop_right, crop_bottom, crop_left = samples.croppings[i]
            pad_top, pad_right, pad_bottom, pad_left = samples.paddings[i]
            shifted = kpsoi.shift(x=-crop_left + pad_left, y=-crop_top + pad_top)
            shifted.shape = self._compute_shape_after(kpsoi.shape, samples, i)
            result.append(shifted)
        return result
