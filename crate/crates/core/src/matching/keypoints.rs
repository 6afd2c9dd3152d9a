//! Minutiae extraction: mean-threshold binarization, two-subiteration
//! thinning to a one-pixel skeleton, crossing-number classification and
//! structure-tensor orientation.

use std::f64::consts::PI;

use crate::image::Image;
use crate::scalar::Scalar;

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum KeypointKind {
    RidgeEnding,
    Bifurcation,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Keypoint {
    pub row: usize,
    pub col: usize,
    pub kind: KeypointKind,
    /// Local ridge direction in `[0, pi)`.
    pub orientation: f64,
}

/// Keypoints closer than this to the image edge are dropped.
pub const BORDER: usize = 8;
const ORIENTATION_RADIUS: usize = 4;

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct BinaryImage {
    pub height: usize,
    pub width: usize,
    pub data: Vec<bool>,
}

impl BinaryImage {
    pub fn from_rows(rows: &[&str]) -> Self {
        let height = rows.len();
        let width = rows.first().map_or(0, |r| r.len());
        let data = rows
            .iter()
            .flat_map(|r| r.bytes().map(|b| b == b'#' || b == b'1'))
            .collect();
        Self { height, width, data }
    }

    #[inline]
    pub fn get(&self, r: isize, c: isize) -> bool {
        r >= 0
            && c >= 0
            && (r as usize) < self.height
            && (c as usize) < self.width
            && self.data[r as usize * self.width + c as usize]
    }

    /// Neighbours P2..P9, clockwise from north.
    fn neighbours(&self, r: usize, c: usize) -> [bool; 8] {
        let (r, c) = (r as isize, c as isize);
        [
            self.get(r - 1, c),
            self.get(r - 1, c + 1),
            self.get(r, c + 1),
            self.get(r + 1, c + 1),
            self.get(r + 1, c),
            self.get(r + 1, c - 1),
            self.get(r, c - 1),
            self.get(r - 1, c - 1),
        ]
    }
}

/// Ridge pixels (darker than the image mean) are `true`.
pub fn binarize<T: Scalar>(img: &Image<T>) -> BinaryImage {
    let mean = img.mean();
    BinaryImage {
        height: img.height(),
        width: img.width(),
        data: img.data().iter().map(|&v| v < mean).collect(),
    }
}

/// Zhang-Suen thinning iterated to a fixpoint.
pub fn thin(input: &BinaryImage) -> BinaryImage {
    let mut img = input.clone();
    loop {
        let mut changed = false;
        for pass in 0..2 {
            let mut remove = Vec::new();
            for r in 0..img.height {
                for c in 0..img.width {
                    if !img.data[r * img.width + c] {
                        continue;
                    }
                    let p = img.neighbours(r, c);
                    let b = p.iter().filter(|&&v| v).count();
                    if !(2..=6).contains(&b) {
                        continue;
                    }
                    let a = (0..8).filter(|&i| !p[i] && p[(i + 1) % 8]).count();
                    if a != 1 {
                        continue;
                    }
                    // p[0]=N, p[2]=E, p[4]=S, p[6]=W
                    let ok = if pass == 0 {
                        !(p[0] && p[2] && p[4]) && !(p[2] && p[4] && p[6])
                    } else {
                        !(p[0] && p[2] && p[6]) && !(p[0] && p[4] && p[6])
                    };
                    if ok {
                        remove.push(r * img.width + c);
                    }
                }
            }
            changed |= !remove.is_empty();
            for i in remove {
                img.data[i] = false;
            }
        }
        if !changed {
            return img;
        }
    }
}

/// Half the number of 0/1 transitions around the 8-neighbourhood.
pub fn crossing_number(skel: &BinaryImage, r: usize, c: usize) -> usize {
    let p = skel.neighbours(r, c);
    (0..8).filter(|&i| p[i] != p[(i + 1) % 8]).count() / 2
}

/// Classifies skeleton pixels with crossing number 1 or 3, skipping pixels
/// within `border` of the edge. Orientation is left at zero.
pub fn minutiae_from_skeleton(skel: &BinaryImage, border: usize) -> Vec<Keypoint> {
    let mut out = Vec::new();
    if skel.height <= 2 * border || skel.width <= 2 * border {
        return out;
    }
    for r in border..skel.height - border {
        for c in border..skel.width - border {
            if !skel.data[r * skel.width + c] {
                continue;
            }
            let kind = match crossing_number(skel, r, c) {
                1 => KeypointKind::RidgeEnding,
                3 => KeypointKind::Bifurcation,
                _ => continue,
            };
            out.push(Keypoint {
                row: r,
                col: c,
                kind,
                orientation: 0.0,
            });
        }
    }
    out
}

/// Ridge direction from the gradient structure tensor over a 9x9 window.
pub fn local_orientation<T: Scalar>(img: &Image<T>, r: usize, c: usize) -> f64 {
    let (h, w) = img.shape();
    let px = |rr: usize, cc: usize| img.get(rr, cc).as_f64();
    let (mut gxx, mut gyy, mut gxy) = (0.0, 0.0, 0.0);
    let rad = ORIENTATION_RADIUS;
    for rr in r.saturating_sub(rad).max(1)..=(r + rad).min(h.saturating_sub(2)) {
        for cc in c.saturating_sub(rad).max(1)..=(c + rad).min(w.saturating_sub(2)) {
            let gx = (px(rr, cc + 1) - px(rr, cc - 1)) / 2.0;
            let gy = (px(rr + 1, cc) - px(rr - 1, cc)) / 2.0;
            gxx += gx * gx;
            gyy += gy * gy;
            gxy += gx * gy;
        }
    }
    let gradient = 0.5 * (2.0 * gxy).atan2(gxx - gyy);
    (gradient + PI / 2.0).rem_euclid(PI)
}

pub fn extract_keypoints<T: Scalar>(img: &Image<T>) -> Vec<Keypoint> {
    let skel = thin(&binarize(img));
    let mut kps = minutiae_from_skeleton(&skel, BORDER);
    for kp in &mut kps {
        kp.orientation = local_orientation(img, kp.row, kp.col);
    }
    kps
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn blank_image_has_no_keypoints() {
        assert!(extract_keypoints(&Image::filled(40, 40, 0.0f32)).is_empty());
        assert!(extract_keypoints(&Image::filled(40, 40, 1.0f32)).is_empty());
    }

    #[test]
    fn line_ending_at_center() {
        let skel = BinaryImage::from_rows(&["...", "##.", "..."]);
        assert_eq!(crossing_number(&skel, 1, 1), 1);
        let kps = minutiae_from_skeleton(&skel, 0);
        assert!(kps
            .iter()
            .any(|k| (k.row, k.col) == (1, 1) && k.kind == KeypointKind::RidgeEnding));
    }

    #[test]
    fn y_junction_has_one_bifurcation() {
        let skel = BinaryImage::from_rows(&[
            ".......", "#.....#", ".#...#.", "..#.#..", "...#...", "...#...", "...#...",
        ]);
        assert_eq!(crossing_number(&skel, 4, 3), 3);
        let kps = minutiae_from_skeleton(&skel, 0);
        let bifurcations: Vec<_> =
            kps.iter().filter(|k| k.kind == KeypointKind::Bifurcation).collect();
        assert_eq!(bifurcations.len(), 1);
        assert_eq!((bifurcations[0].row, bifurcations[0].col), (4, 3));
        // three branch tips
        assert_eq!(kps.iter().filter(|k| k.kind == KeypointKind::RidgeEnding).count(), 3);
    }

    #[test]
    fn thinning_yields_single_pixel_line() {
        let mut rows = vec!["....................".to_string(); 9];
        for r in 3..6 {
            rows[r] = "..################..".to_string();
        }
        let refs: Vec<&str> = rows.iter().map(String::as_str).collect();
        let skel = thin(&BinaryImage::from_rows(&refs));
        for c in 4..16 {
            let count = (0..9).filter(|&r| skel.get(r, c)).count();
            assert_eq!(count, 1, "column {c}");
        }
    }

    #[test]
    fn horizontal_stripes_read_as_horizontal() {
        let img = Image::from_fn(30, 30, |r, _| if (r / 3) % 2 == 0 { 0.0f64 } else { 1.0 });
        let theta = local_orientation(&img, 15, 15);
        assert!(theta.min(PI - theta) < 1e-6, "theta {theta}");
    }

    #[test]
    fn keypoints_stay_inside_border() {
        let img = Image::from_fn(60, 60, |r, c| ((r * 7 + c * 13) % 17) as f32 / 17.0);
        for kp in extract_keypoints(&img) {
            assert!(kp.row >= BORDER && kp.row < 60 - BORDER);
            assert!(kp.col >= BORDER && kp.col < 60 - BORDER);
            assert!((0.0..PI).contains(&kp.orientation));
        }
    }
}
