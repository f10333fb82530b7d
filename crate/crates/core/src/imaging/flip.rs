use super::{BinaryMask, GrayMap, RgbImage, RgbaImage};

/// Horizontal mirror: column `j` moves to column `W - 1 - j`.
pub trait HFlip {
    fn hflip(&self) -> Self;
}

fn flip_rows<T: Copy>(data: &[T], width: usize, channels: usize) -> Vec<T> {
    let row_len = width * channels;
    let mut out = Vec::with_capacity(data.len());
    for row in data.chunks_exact(row_len) {
        for px in row.chunks_exact(channels).rev() {
            out.extend_from_slice(px);
        }
    }
    out
}

impl HFlip for GrayMap {
    fn hflip(&self) -> Self {
        GrayMap {
            height: self.height,
            width: self.width,
            values: flip_rows(&self.values, self.width, 1),
        }
    }
}

impl HFlip for BinaryMask {
    fn hflip(&self) -> Self {
        BinaryMask {
            height: self.height,
            width: self.width,
            values: flip_rows(&self.values, self.width, 1),
        }
    }
}

impl HFlip for RgbImage {
    fn hflip(&self) -> Self {
        RgbImage {
            height: self.height,
            width: self.width,
            data: flip_rows(&self.data, self.width, 3),
        }
    }
}

impl HFlip for RgbaImage {
    fn hflip(&self) -> Self {
        RgbaImage {
            height: self.height,
            width: self.width,
            data: flip_rows(&self.data, self.width, 4),
        }
    }
}
