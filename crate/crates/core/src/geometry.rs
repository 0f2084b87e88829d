//! Euclidean projections onto balls and onto the shrinking epoch domain
//! `{v : ||v + anchor|| <= R, ||v|| <= delta}`.

use ndarray::{Array1, ArrayView1};

use crate::error::{Error, Result};

/// Sweep cap for Dykstra's alternating projections.
pub const DYKSTRA_MAX_SWEEPS: usize = 500;
/// Dykstra stops once successive iterates move less than this.
pub const DYKSTRA_TOL: f64 = 1e-12;
/// Slack allowed on `||anchor|| <= R` when building an [`EpochDomain`].
pub const ANCHOR_SLACK: f64 = 1e-9;

pub fn norm(v: ArrayView1<f64>) -> f64 {
    v.dot(&v).sqrt()
}

fn check_finite(w: ArrayView1<f64>) -> Result<()> {
    if w.iter().all(|v| v.is_finite()) {
        Ok(())
    } else {
        Err(Error::NonFinite("projection input"))
    }
}

/// Projects `w` onto the centered ball of the given radius.
pub fn project_ball(w: ArrayView1<f64>, radius: f64) -> Result<Array1<f64>> {
    check_finite(w)?;
    if radius.is_nan() || radius <= 0.0 {
        return Err(Error::InvalidConfig(format!("ball radius must be positive, got {radius}")));
    }
    Ok(ball(w, radius))
}

fn ball(w: ArrayView1<f64>, radius: f64) -> Array1<f64> {
    let n = norm(w);
    if n <= radius {
        w.to_owned()
    } else {
        w.mapv(|v| v * (radius / n))
    }
}

/// Projection onto `{v : ||v + shift|| <= radius}`.
fn shifted_ball(w: ArrayView1<f64>, shift: ArrayView1<f64>, radius: f64) -> Array1<f64> {
    let moved = &w + &shift;
    ball(moved.view(), radius) - shift
}

/// Feasible set of one epoch, expressed in the recentered variable.
#[derive(Debug, Clone, PartialEq)]
pub struct EpochDomain {
    anchor: Array1<f64>,
    outer_radius: f64,
    inner_radius: f64,
}

impl EpochDomain {
    /// Fails when `||anchor|| > outer_radius`, in which case the origin is
    /// not feasible and the intersection may be empty.
    pub fn new(anchor: Array1<f64>, outer_radius: f64, inner_radius: f64) -> Result<Self> {
        check_finite(anchor.view())?;
        if !(outer_radius > 0.0 && inner_radius > 0.0)
            || !outer_radius.is_finite()
            || !inner_radius.is_finite()
        {
            return Err(Error::InvalidConfig(format!(
                "epoch domain radii must be positive (R={outer_radius}, delta={inner_radius})"
            )));
        }
        let anchor_norm = norm(anchor.view());
        if anchor_norm > outer_radius + ANCHOR_SLACK {
            return Err(Error::EmptyIntersection {
                anchor_norm,
                radius: outer_radius,
            });
        }
        Ok(EpochDomain {
            anchor,
            outer_radius,
            inner_radius,
        })
    }

    pub fn anchor(&self) -> &Array1<f64> {
        &self.anchor
    }

    pub fn outer_radius(&self) -> f64 {
        self.outer_radius
    }

    pub fn inner_radius(&self) -> f64 {
        self.inner_radius
    }

    /// Largest violation of the two ball constraints at `v` (0 when feasible).
    pub fn violation(&self, v: ArrayView1<f64>) -> f64 {
        let outer = norm((&v + &self.anchor).view()) - self.outer_radius;
        let inner = norm(v) - self.inner_radius;
        outer.max(inner).max(0.0)
    }

    pub fn contains(&self, v: ArrayView1<f64>, tol: f64) -> bool {
        self.violation(v) <= tol
    }
}

/// Euclidean projection of `w` onto an [`EpochDomain`].
///
/// If projecting onto one ball lands inside the other, that point is the
/// exact answer. Otherwise both constraints are active and the projection is
/// computed with Dykstra's alternating projections.
pub fn project_epoch_domain(w: ArrayView1<f64>, domain: &EpochDomain) -> Result<Array1<f64>> {
    check_finite(w)?;
    if w.len() != domain.anchor.len() {
        return Err(Error::DimensionMismatch {
            expected: domain.anchor.len(),
            got: w.len(),
        });
    }
    let shift = domain.anchor.view();
    let (outer, inner) = (domain.outer_radius, domain.inner_radius);

    let p_inner = ball(w, inner);
    if norm((&p_inner + &shift).view()) <= outer {
        return Ok(p_inner);
    }
    let p_outer = shifted_ball(w, shift, outer);
    if norm(p_outer.view()) <= inner {
        return Ok(p_outer);
    }

    let mut x = w.to_owned();
    let mut p = Array1::<f64>::zeros(w.len());
    let mut q = Array1::<f64>::zeros(w.len());
    for _ in 0..DYKSTRA_MAX_SWEEPS {
        let y = shifted_ball((&x + &p).view(), shift, outer);
        p = &x + &p - &y;
        let next = ball((&y + &q).view(), inner);
        q = &y + &q - &next;
        let moved = norm((&next - &x).view());
        x = next;
        if moved < DYKSTRA_TOL {
            break;
        }
    }
    if x.iter().all(|v| v.is_finite()) {
        Ok(x)
    } else {
        Err(Error::NonFinite("projection output"))
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use ndarray::array;
    use proptest::prelude::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    /// Brute-force nearest feasible point on a square grid of spacing `h`.
    fn grid_nearest(w: &Array1<f64>, domain: &EpochDomain, h: f64) -> (Array1<f64>, f64) {
        let r = domain.inner_radius();
        let steps = (2.0 * r / h).ceil() as i64;
        let mut best = (Array1::zeros(2), f64::INFINITY);
        for a in 0..=steps {
            for b in 0..=steps {
                let v = array![-r + a as f64 * h, -r + b as f64 * h];
                if !domain.contains(v.view(), 0.0) {
                    continue;
                }
                let dist = norm((&v - w).view());
                if dist < best.1 {
                    best = (v, dist);
                }
            }
        }
        best
    }

    #[test]
    fn ball_examples() {
        assert_eq!(project_ball(array![0.3, 0.4].view(), 1.0).unwrap(), array![0.3, 0.4]);
        let p = project_ball(array![3.0, 4.0].view(), 1.0).unwrap();
        assert!((p[0] - 0.6).abs() < 1e-15 && (p[1] - 0.8).abs() < 1e-15);
        assert_eq!(project_ball(array![0.0, 0.0].view(), 0.1).unwrap(), array![0.0, 0.0]);
        assert!(project_ball(array![f64::NAN].view(), 1.0).is_err());
    }

    #[test]
    fn feasible_point_is_fixed() {
        let d = EpochDomain::new(array![0.5, 0.0], 1.0, 0.4).unwrap();
        let w = array![0.1, -0.2];
        assert_eq!(project_epoch_domain(w.view(), &d).unwrap(), w);
    }

    #[test]
    fn inactive_outer_ball_reduces_to_ball_projection() {
        let d = EpochDomain::new(array![0.0, 0.0], 2.0, 0.5).unwrap();
        let w = array![3.0, -4.0];
        let p = project_epoch_domain(w.view(), &d).unwrap();
        let expected = project_ball(w.view(), 0.5).unwrap();
        assert!(norm((&p - &expected).view()) < 1e-15);
    }

    #[test]
    fn matches_grid_search_on_lens() {
        let d = EpochDomain::new(array![0.8, 0.0], 1.0, 0.5).unwrap();
        let w = array![1.0, 1.0];
        let p = project_epoch_domain(w.view(), &d).unwrap();
        assert!(d.contains(p.view(), 1e-9));
        let (grid_point, grid_dist) = grid_nearest(&w, &d, 1e-3);
        let dist = norm((&p - &w).view());
        assert!(dist <= grid_dist + 1e-12);
        assert!(grid_dist - dist <= 1e-3);
        assert!(norm((&p - &grid_point).view()) <= 2e-2);
    }

    #[test]
    fn rejects_empty_intersection() {
        assert!(matches!(
            EpochDomain::new(array![2.0, 0.0], 1.0, 0.5),
            Err(Error::EmptyIntersection { .. })
        ));
        let d = EpochDomain::new(array![1.0, 0.0], 1.0, 0.5).unwrap();
        assert!(project_epoch_domain(array![f64::INFINITY, 0.0].view(), &d).is_err());
        assert!(project_epoch_domain(array![0.0].view(), &d).is_err());
    }

    #[test]
    fn non_expansive_on_seeded_pairs() {
        let mut rng = ChaCha8Rng::seed_from_u64(11);
        for _ in 0..100 {
            let anchor = array![rng.random_range(-0.7..0.7), rng.random_range(-0.7..0.7), 0.1];
            let d = EpochDomain::new(anchor, 1.0, rng.random_range(0.05..1.0)).unwrap();
            let a = Array1::from_shape_fn(3, |_| rng.random_range(-3.0..3.0));
            let b = Array1::from_shape_fn(3, |_| rng.random_range(-3.0..3.0));
            let pa = project_epoch_domain(a.view(), &d).unwrap();
            let pb = project_epoch_domain(b.view(), &d).unwrap();
            assert!(norm((&pa - &pb).view()) <= norm((&a - &b).view()) + 1e-9);
        }
    }

    proptest! {
        #[test]
        fn projection_is_feasible_and_idempotent(
            ax in -0.7f64..0.7, ay in -0.7f64..0.7,
            delta in 0.01f64..1.5,
            wx in -4.0f64..4.0, wy in -4.0f64..4.0,
        ) {
            let d = EpochDomain::new(array![ax, ay], 1.0, delta).unwrap();
            let p = project_epoch_domain(array![wx, wy].view(), &d).unwrap();
            prop_assert!(d.contains(p.view(), 1e-9));
            let pp = project_epoch_domain(p.view(), &d).unwrap();
            prop_assert!(norm((&pp - &p).view()) <= 1e-9);
        }

        #[test]
        fn ball_projection_respects_radius(
            v in proptest::collection::vec(-10.0f64..10.0, 1..6),
            r in 0.01f64..5.0,
        ) {
            let p = project_ball(Array1::from(v).view(), r).unwrap();
            prop_assert!(norm(p.view()) <= r + 1e-12);
        }
    }
}
