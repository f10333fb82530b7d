//! Dataset statistics: object size ratio and the center-bias map.

use crate::error::{Error, Result};
use crate::imaging::{BinaryMask, GrayMap};

/// Fraction of salient pixels.
pub fn object_size_ratio(label: &BinaryMask) -> f64 {
    label.count_ones() as f64 / (label.height() * label.width()) as f64
}

/// Pixel-wise mean of all masks after bilinear resizing to `dims`.
pub fn center_bias_map(labels: &[BinaryMask], dims: (usize, usize)) -> Result<GrayMap> {
    if labels.is_empty() {
        return Err(Error::invalid("center bias needs at least one mask"));
    }
    let (h, w) = dims;
    let mut acc = vec![0.0; h * w];
    for label in labels {
        let m = label.resize_soft(h, w)?;
        for (a, v) in acc.iter_mut().zip(m.values()) {
            *a += v;
        }
    }
    let n = labels.len() as f64;
    GrayMap::from_clamped(h, w, acc.into_iter().map(|v| v / n).collect())
}

/// Histogram of size ratios over `bins` equal-width bins on `[0, 1]`.
pub fn size_histogram(ratios: &[f64], bins: usize) -> Vec<usize> {
    let mut counts = vec![0; bins];
    for &r in ratios {
        let b = ((r * bins as f64) as usize).min(bins - 1);
        counts[b] += 1;
    }
    counts
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn size_ratio_cases() {
        assert_eq!(
            object_size_ratio(&BinaryMask::new(2, 2, vec![1; 4]).unwrap()),
            1.0
        );
        assert_eq!(object_size_ratio(&BinaryMask::zeros(3, 3).unwrap()), 0.0);
        let quarter: Vec<u8> = (0..4096).map(|i| u8::from(i < 1024)).collect();
        assert_eq!(
            object_size_ratio(&BinaryMask::new(64, 64, quarter).unwrap()),
            0.25
        );
    }

    #[test]
    fn center_bias_of_one_mask_is_that_mask() {
        let m = BinaryMask::new(2, 3, vec![1, 0, 1, 0, 0, 1]).unwrap();
        assert_eq!(
            center_bias_map(std::slice::from_ref(&m), (2, 3)).unwrap(),
            m.to_gray()
        );
        assert_eq!(
            center_bias_map(&[m.clone(), m.clone(), m.clone()], (2, 3)).unwrap(),
            m.to_gray()
        );
    }

    #[test]
    fn complementary_masks_average_to_half() {
        let a = BinaryMask::new(2, 2, vec![1, 0, 0, 1]).unwrap();
        let b = BinaryMask::new(2, 2, vec![0, 1, 1, 0]).unwrap();
        let m = center_bias_map(&[a, b], (2, 2)).unwrap();
        assert!(m.values().iter().all(|&v| v == 0.5));
    }

    #[test]
    fn empty_list_rejected() {
        assert!(center_bias_map(&[], (4, 4)).is_err());
    }

    #[test]
    fn histogram_places_edges() {
        assert_eq!(
            size_histogram(&[0.0, 0.05, 0.5, 1.0], 10),
            vec![2, 0, 0, 0, 0, 1, 0, 0, 0, 1]
        );
    }
}
