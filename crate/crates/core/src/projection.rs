//! Exact Euclidean projections onto every [`ConstraintSet`] variant.

use crate::error::{Error, Result};
use crate::problem::ConstraintSet;
use crate::vector;

/// Absolute feasibility tolerance used when checking projected points.
pub const FEASIBILITY_TOL: f64 = 1e-12;

/// Returns `argmin_{v in set} ||y - v||`.
pub fn project(set: &ConstraintSet, y: &[f64]) -> Result<Vec<f64>> {
    if !vector::all_finite(y) {
        return Err(Error::NonFinite("projection input"));
    }
    if let Some(d) = set.dim() {
        if d != y.len() {
            return Err(Error::DimensionMismatch {
                expected: d,
                got: y.len(),
            });
        }
    }
    let out = match set {
        ConstraintSet::FullSpace => y.to_vec(),
        ConstraintSet::Box { lo, hi } => y
            .iter()
            .zip(lo.iter().zip(hi))
            .map(|(v, (l, h))| v.clamp(*l, *h))
            .collect(),
        ConstraintSet::EuclideanBall { center, radius } => {
            let r = vector::dist(y, center);
            if r <= *radius {
                y.to_vec()
            } else {
                let s = radius / r;
                y.iter()
                    .zip(center)
                    .map(|(v, c)| c + s * (v - c))
                    .collect()
            }
        }
        ConstraintSet::BudgetHalfspace { capacity } => {
            let excess = (y.iter().sum::<f64>() - capacity) / y.len() as f64;
            if excess > 0.0 {
                y.iter().map(|v| v - excess).collect()
            } else {
                y.to_vec()
            }
        }
        ConstraintSet::NonnegBudget { capacity } => project_nonneg_budget(y, *capacity),
    };
    Ok(out)
}

/// Projection onto `{x >= 0, sum x <= c}`: clamp to the orthant, and if the
/// budget is still exceeded, shift by the water-filling threshold `lambda`
/// with `sum max(0, y_i - lambda) = c`.
fn project_nonneg_budget(y: &[f64], capacity: f64) -> Vec<f64> {
    let positive_sum: f64 = y.iter().map(|v| v.max(0.0)).sum();
    if positive_sum <= capacity {
        return y.iter().map(|v| v.max(0.0)).collect();
    }
    let lambda = water_filling_threshold(y, capacity);
    y.iter().map(|v| (v - lambda).max(0.0)).collect()
}

/// Threshold `lambda` with `sum_i max(0, y_i - lambda) = capacity`, found
/// exactly from the sorted values. Requires `sum_i max(0, y_i) > capacity`.
pub(crate) fn water_filling_threshold(y: &[f64], capacity: f64) -> f64 {
    let mut sorted = y.to_vec();
    sorted.sort_by(|a, b| b.total_cmp(a));
    // the largest value is always active
    let mut cumulative = sorted[0];
    let mut lambda = sorted[0] - capacity;
    for (k, &u) in sorted.iter().enumerate().skip(1) {
        cumulative += u;
        let candidate = (cumulative - capacity) / (k + 1) as f64;
        if u - candidate > 0.0 {
            lambda = candidate;
        } else {
            break;
        }
    }
    lambda
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn approx(a: &[f64], b: &[f64], tol: f64) -> bool {
        a.len() == b.len() && a.iter().zip(b).all(|(x, y)| (x - y).abs() <= tol)
    }

    #[test]
    fn budget_halfspace_examples() {
        let set = ConstraintSet::BudgetHalfspace { capacity: 10.0 };
        assert_eq!(project(&set, &[1.0; 10]).unwrap(), vec![1.0; 10]);
        let p = project(&set, &[2.0; 10]).unwrap();
        assert!(approx(&p, &[1.0; 10], 1e-15));
    }

    #[test]
    fn budget_halfspace_matches_kkt_grid() {
        // d = 2, c = 1, y = (2, 0.5): minimize ||y - v||^2 on the line v1 + v2 = 1
        let set = ConstraintSet::BudgetHalfspace { capacity: 1.0 };
        let y = [2.0, 0.5];
        let best = (0..=40_000)
            .map(|i| -10.0 + i as f64 * 5e-4)
            .map(|v1| [v1, 1.0 - v1])
            .min_by(|a, b| vector::dist(a, &y).partial_cmp(&vector::dist(b, &y)).unwrap())
            .unwrap();
        let p = project(&set, &y).unwrap();
        assert!(approx(&p, &best, 5e-4));
        assert!(approx(&p, &[1.25, -0.25], 1e-15));
    }

    #[test]
    fn ball_boundary_point_is_fixed() {
        let set = ConstraintSet::EuclideanBall {
            center: vec![0.0, 0.0],
            radius: 5.0,
        };
        assert_eq!(project(&set, &[3.0, 4.0]).unwrap(), vec![3.0, 4.0]);
        let p = project(&set, &[6.0, 8.0]).unwrap();
        assert!(approx(&p, &[3.0, 4.0], 1e-15));
    }

    #[test]
    fn box_and_full_space() {
        let set = ConstraintSet::Box {
            lo: vec![0.0, -1.0],
            hi: vec![1.0, 1.0],
        };
        assert_eq!(project(&set, &[2.0, -3.0]).unwrap(), vec![1.0, -1.0]);
        assert_eq!(
            project(&ConstraintSet::FullSpace, &[5.0, -7.0]).unwrap(),
            vec![5.0, -7.0]
        );
    }

    #[test]
    fn nonneg_budget_water_filling() {
        let set = ConstraintSet::NonnegBudget { capacity: 1.0 };
        // clamp alone is feasible
        assert_eq!(project(&set, &[-1.0, 0.5]).unwrap(), vec![0.0, 0.5]);
        // threshold 0.5: (1.5 - 0.5, 0.5 - 0.5, -1 -> 0)
        let p = project(&set, &[1.5, 0.5, -1.0]).unwrap();
        assert!(approx(&p, &[1.0, 0.0, 0.0], 1e-15));
        // threshold 0.5 with two active coordinates: (1, 1) -> (0.5, 0.5)
        let p = project(&set, &[1.0, 1.0]).unwrap();
        assert!(approx(&p, &[0.5, 0.5], 1e-15));
        // zero capacity collapses to the origin
        let p = project(&ConstraintSet::NonnegBudget { capacity: 0.0 }, &[1.0, 2.0]).unwrap();
        assert!(approx(&p, &[0.0, 0.0], 1e-15));
    }

    #[test]
    fn errors() {
        let ball = ConstraintSet::EuclideanBall {
            center: vec![0.0; 3],
            radius: 1.0,
        };
        assert!(matches!(
            project(&ball, &[1.0, 2.0]),
            Err(Error::DimensionMismatch { expected: 3, got: 2 })
        ));
        assert!(matches!(
            project(&ConstraintSet::FullSpace, &[f64::NAN]),
            Err(Error::NonFinite(_))
        ));
    }

    fn any_set(d: usize) -> impl Strategy<Value = ConstraintSet> {
        prop_oneof![
            Just(ConstraintSet::FullSpace),
            (proptest::collection::vec(-3.0f64..0.0, d), proptest::collection::vec(0.0f64..3.0, d))
                .prop_map(|(lo, hi)| ConstraintSet::Box { lo, hi }),
            (proptest::collection::vec(-2.0f64..2.0, d), 0.1f64..4.0)
                .prop_map(|(center, radius)| ConstraintSet::EuclideanBall { center, radius }),
            (-5.0f64..5.0).prop_map(|capacity| ConstraintSet::BudgetHalfspace { capacity }),
            (0.0f64..5.0).prop_map(|capacity| ConstraintSet::NonnegBudget { capacity }),
        ]
    }

    proptest! {
        #[test]
        fn projection_is_feasible_idempotent_nonexpansive(
            (set, a, b) in (1usize..12).prop_flat_map(|d| (
                any_set(d),
                proptest::collection::vec(-10.0f64..10.0, d),
                proptest::collection::vec(-10.0f64..10.0, d),
            ))
        ) {
            let pa = project(&set, &a).unwrap();
            let pb = project(&set, &b).unwrap();
            prop_assert!(set.contains(&pa, FEASIBILITY_TOL));
            let ppa = project(&set, &pa).unwrap();
            prop_assert!(approx(&ppa, &pa, FEASIBILITY_TOL));
            prop_assert!(vector::dist(&pa, &pb) <= vector::dist(&a, &b) + 1e-12);
        }

        #[test]
        fn projection_satisfies_obtuse_angle_condition(
            (set, y, w) in (1usize..8).prop_flat_map(|d| (
                any_set(d),
                proptest::collection::vec(-10.0f64..10.0, d),
                proptest::collection::vec(-10.0f64..10.0, d),
            ))
        ) {
            // <y - p, v - p> <= 0 for any feasible v; use v = project(w)
            let p = project(&set, &y).unwrap();
            let v = project(&set, &w).unwrap();
            let inner = vector::dot(&vector::sub(&y, &p), &vector::sub(&v, &p));
            prop_assert!(inner <= 1e-9 * (1.0 + vector::norm(&y).powi(2) + vector::norm(&w).powi(2)));
        }
    }
}
