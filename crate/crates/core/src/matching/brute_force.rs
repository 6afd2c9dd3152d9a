//! One-to-all keypoint matching with greedy one-to-one assignment.

use std::cmp::Ordering;
use std::f64::consts::PI;

use super::keypoints::Keypoint;

pub const MAX_DISTANCE_PX: f64 = 12.0;
pub const MAX_ANGLE_RAD: f64 = 20.0 * PI / 180.0;
/// Pixels of cost per radian of orientation difference.
pub const ANGLE_WEIGHT: f64 = 10.0;

/// Difference of two undirected orientations, in `[0, pi/2]`.
pub fn angular_distance(a: f64, b: f64) -> f64 {
    let d = (a - b).rem_euclid(PI);
    d.min(PI - d)
}

fn order_key(k: &Keypoint) -> (usize, usize, crate::matching::keypoints::KeypointKind) {
    (k.row, k.col, k.kind)
}

/// Fraction of keypoints paired: accepted pairs over `max(|a|, |b|)`.
pub fn brute_force_match(a: &[Keypoint], b: &[Keypoint]) -> f64 {
    if a.is_empty() || b.is_empty() {
        return 0.0;
    }
    let mut candidates = Vec::new();
    for (i, ka) in a.iter().enumerate() {
        for (j, kb) in b.iter().enumerate() {
            if ka.kind != kb.kind {
                continue;
            }
            let dr = ka.row as f64 - kb.row as f64;
            let dc = ka.col as f64 - kb.col as f64;
            if dr.abs() > MAX_DISTANCE_PX || dc.abs() > MAX_DISTANCE_PX {
                continue;
            }
            let dist = dr.hypot(dc);
            let ang = angular_distance(ka.orientation, kb.orientation);
            if dist <= MAX_DISTANCE_PX && ang <= MAX_ANGLE_RAD {
                candidates.push((dist + ANGLE_WEIGHT * ang, i, j));
            }
        }
    }
    // ties resolved by coordinates, not list position
    candidates.sort_by(|x, y| {
        x.0.partial_cmp(&y.0)
            .unwrap_or(Ordering::Equal)
            .then_with(|| order_key(&a[x.1]).cmp(&order_key(&a[y.1])))
            .then_with(|| order_key(&b[x.2]).cmp(&order_key(&b[y.2])))
    });
    let mut used_a = vec![false; a.len()];
    let mut used_b = vec![false; b.len()];
    let mut accepted = 0usize;
    for (_, i, j) in candidates {
        if !used_a[i] && !used_b[j] {
            used_a[i] = true;
            used_b[j] = true;
            accepted += 1;
        }
    }
    accepted as f64 / a.len().max(b.len()) as f64
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::matching::keypoints::KeypointKind::*;

    fn kp(row: usize, col: usize, kind: crate::matching::keypoints::KeypointKind, o: f64) -> Keypoint {
        Keypoint {
            row,
            col,
            kind,
            orientation: o,
        }
    }

    #[test]
    fn self_match_is_one() {
        let s = vec![kp(10, 10, RidgeEnding, 0.3), kp(40, 12, Bifurcation, 1.2), kp(20, 30, RidgeEnding, 2.0)];
        assert_eq!(brute_force_match(&s, &s), 1.0);
    }

    #[test]
    fn empty_or_far_sets_score_zero() {
        let s = vec![kp(10, 10, RidgeEnding, 0.3)];
        assert_eq!(brute_force_match(&s, &[]), 0.0);
        assert_eq!(brute_force_match(&[], &s), 0.0);
        let far = vec![kp(100, 100, RidgeEnding, 0.3)];
        assert_eq!(brute_force_match(&s, &far), 0.0);
    }

    #[test]
    fn two_of_three_matchable() {
        // pair 1: 3 px apart, same angle; pair 2: 5 px, 10 degrees;
        // third: kinds differ, so it cannot pair with anything
        let a = vec![kp(20, 20, RidgeEnding, 0.5), kp(50, 50, Bifurcation, 1.0), kp(80, 20, RidgeEnding, 0.1)];
        let b = vec![kp(23, 20, RidgeEnding, 0.5), kp(50, 55, Bifurcation, 1.0 + 10f64.to_radians()), kp(80, 22, Bifurcation, 0.1)];
        assert!((brute_force_match(&a, &b) - 2.0 / 3.0).abs() < 1e-12);
    }

    #[test]
    fn angle_wraps_modulo_pi() {
        assert!(angular_distance(0.05, PI - 0.05) < 0.1 + 1e-12);
        let a = vec![kp(20, 20, RidgeEnding, 0.05)];
        let b = vec![kp(20, 21, RidgeEnding, PI - 0.05)];
        assert_eq!(brute_force_match(&a, &b), 1.0);
    }

    #[test]
    fn greedy_prefers_cheaper_pair() {
        // a0 could take b0 or b1; b1 is the only option for a1
        let a = vec![kp(20, 20, RidgeEnding, 0.0), kp(20, 30, RidgeEnding, 0.0)];
        let b = vec![kp(20, 21, RidgeEnding, 0.0), kp(20, 29, RidgeEnding, 0.0)];
        assert_eq!(brute_force_match(&a, &b), 1.0);
    }
}
