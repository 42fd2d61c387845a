//! Observe-versus-intervene policy driven by observational coverage.

use serde::{Deserialize, Serialize};

use super::ledger::Action;
use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct EpsilonPolicy {
    /// Observational sample count at which coverage saturates and
    /// observing stops.
    pub n_max: usize,
    /// Samples drawn per observe step.
    pub k_obs: usize,
}

impl Default for EpsilonPolicy {
    fn default() -> Self {
        EpsilonPolicy {
            n_max: 200,
            k_obs: 20,
        }
    }
}

/// `ε = hullvol(obs) / vol(domain) · min(n / n_max, 1)`, and 1 without data.
///
/// `n` counts every sample; only in-bounds points enter the hull.
pub fn epsilon(policy: &EpsilonPolicy, obs: &[Vec<f64>], bounds: &[(f64, f64)]) -> Result<f64> {
    let mut volume = 1.0;
    for (j, (lo, hi)) in bounds.iter().enumerate() {
        let w = hi - lo;
        if !(w > 0.0 && w.is_finite()) {
            return Err(Error::DegenerateDomain(j));
        }
        volume *= w;
    }
    if obs.is_empty() {
        return Ok(1.0);
    }
    let inside: Vec<&Vec<f64>> = obs
        .iter()
        .filter(|p| {
            p.len() == bounds.len()
                && p.iter()
                    .zip(bounds)
                    .all(|(x, (lo, hi))| *x >= *lo && *x <= *hi)
        })
        .collect();
    let ratio = (hull_volume(&inside, bounds.len()) / volume).clamp(0.0, 1.0);
    let fill = (obs.len() as f64 / policy.n_max.max(1) as f64).min(1.0);
    Ok(ratio * fill)
}

/// Convex hull volume: exact for d = 1 (interval) and d = 2 (polygon area),
/// axis-aligned bounding box for d ≥ 3.
pub fn hull_volume(points: &[&Vec<f64>], dim: usize) -> f64 {
    if points.len() < 2 || dim == 0 {
        return 0.0;
    }
    match dim {
        1 => {
            let (lo, hi) = points
                .iter()
                .fold((f64::INFINITY, f64::NEG_INFINITY), |(lo, hi), p| {
                    (lo.min(p[0]), hi.max(p[0]))
                });
            hi - lo
        }
        2 => polygon_area(&convex_hull_2d(
            points.iter().map(|p| (p[0], p[1])).collect(),
        )),
        _ => (0..dim)
            .map(|j| {
                let (lo, hi) = points
                    .iter()
                    .fold((f64::INFINITY, f64::NEG_INFINITY), |(lo, hi), p| {
                        (lo.min(p[j]), hi.max(p[j]))
                    });
                hi - lo
            })
            .product(),
    }
}

fn cross(o: (f64, f64), a: (f64, f64), b: (f64, f64)) -> f64 {
    (a.0 - o.0) * (b.1 - o.1) - (a.1 - o.1) * (b.0 - o.0)
}

/// Andrew's monotone chain; returns hull vertices counter-clockwise.
pub fn convex_hull_2d(mut pts: Vec<(f64, f64)>) -> Vec<(f64, f64)> {
    pts.sort_by(|a, b| a.partial_cmp(b).expect("finite coordinates"));
    pts.dedup();
    if pts.len() < 3 {
        return pts;
    }
    let mut hull: Vec<(f64, f64)> = Vec::with_capacity(2 * pts.len());
    for pass in 0..2 {
        let start = hull.len();
        let iter: Box<dyn Iterator<Item = &(f64, f64)>> = if pass == 0 {
            Box::new(pts.iter())
        } else {
            Box::new(pts.iter().rev())
        };
        for &p in iter {
            while hull.len() >= start + 2
                && cross(hull[hull.len() - 2], hull[hull.len() - 1], p) <= 0.0
            {
                hull.pop();
            }
            hull.push(p);
        }
        hull.pop();
    }
    hull
}

pub fn polygon_area(poly: &[(f64, f64)]) -> f64 {
    if poly.len() < 3 {
        return 0.0;
    }
    let mut s = 0.0;
    for i in 0..poly.len() {
        let (a, b) = (poly[i], poly[(i + 1) % poly.len()]);
        s += a.0 * b.1 - b.0 * a.1;
    }
    0.5 * s.abs()
}

/// Observe iff `ε > θ`, unless `n ≥ n_max`, in which case always intervene.
pub fn decide_action(eps: f64, theta: f64, n: usize, policy: &EpsilonPolicy) -> Action {
    if n < policy.n_max && eps > theta {
        Action::Observe
    } else {
        Action::Intervene
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn epsilon_examples() {
        let p = EpsilonPolicy {
            n_max: 100,
            k_obs: 20,
        };
        assert_eq!(epsilon(&p, &[], &[(0.0, 10.0)]).unwrap(), 1.0);
        let e = epsilon(&p, &[vec![2.0], vec![7.0]], &[(0.0, 10.0)]).unwrap();
        assert!((e - 0.01).abs() < 1e-15);
        let full: Vec<Vec<f64>> = (0..100).map(|i| vec![i as f64 / 99.0 * 10.0]).collect();
        assert_eq!(epsilon(&p, &full, &[(0.0, 10.0)]).unwrap(), 1.0);
        assert!(matches!(
            epsilon(&p, &[], &[(1.0, 1.0)]),
            Err(Error::DegenerateDomain(0))
        ));
    }

    #[test]
    fn hull_of_a_square_with_interior_points() {
        let pts = vec![
            (0.0, 0.0),
            (1.0, 0.0),
            (1.0, 1.0),
            (0.0, 1.0),
            (0.5, 0.5),
            (0.2, 0.7),
            (1.0, 0.5),
        ];
        let hull = convex_hull_2d(pts);
        assert_eq!(hull.len(), 4);
        assert!((polygon_area(&hull) - 1.0).abs() < 1e-15);
        assert_eq!(
            polygon_area(&convex_hull_2d(vec![(0.0, 0.0), (1.0, 1.0), (2.0, 2.0)])),
            0.0
        );
    }

    #[test]
    fn decisions() {
        let p = EpsilonPolicy::default();
        assert_eq!(decide_action(1.0, 0.999, 0, &p), Action::Observe);
        assert_eq!(decide_action(0.0, 0.0, 0, &p), Action::Intervene);
        assert_eq!(decide_action(0.5, 0.7, 10, &p), Action::Intervene);
        assert_eq!(decide_action(1.0, 0.1, 200, &p), Action::Intervene);
    }
}
