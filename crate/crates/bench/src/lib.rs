//! Fixtures shared by the kernel benchmarks.

use salsynth_core::imaging::RgbImage;

/// A deterministic textured image of the given size.
pub fn textured_image(height: usize, width: usize) -> RgbImage {
    let mut data = Vec::with_capacity(height * width * 3);
    for y in 0..height {
        for x in 0..width {
            data.push(((x * 7 + y * 3) % 256) as u8);
            data.push(((x * y) % 251) as u8);
            data.push(((x + 2 * y) * 5 % 256) as u8);
        }
    }
    RgbImage::new(height, width, data).expect("dimensions match buffer")
}
