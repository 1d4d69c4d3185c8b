//! Green potentials, mutual energies, and the closed-form sphere kernel.
//!
//! On a closed manifold the potential of a charge `w` solves
//! `K g = w - m(w) W` (the compensating uniform background makes the right
//! side sum to zero) and is normalized to zero volume average. On Dirichlet
//! manifolds `K g = w` is solved directly, with the grounded boundary
//! playing the role of the normalization.

use crate::charge::{normalized_mass, ChargeDistribution};
use crate::error::{Error, Result};
use crate::grid::DiscreteManifold;
use crate::sparse::pcg;

/// Relative residual target for potential solves; potentials feed obstacle
/// data and must be more accurate than the LCP tolerance.
pub const GREEN_RTOL: f64 = 1e-10;

/// Iteration cap factor (times the node count).
pub const GREEN_ITER_FACTOR: usize = 20;

/// Nodal real-valued function over a fixed manifold.
#[derive(Debug, Clone, PartialEq)]
pub struct Potential {
    values: Vec<f64>,
    manifold_id: u64,
}

impl Potential {
    pub fn from_values(m: &DiscreteManifold, values: Vec<f64>) -> Result<Self> {
        if values.len() != m.node_count() {
            return Err(Error::ManifoldMismatch(format!(
                "potential has {} entries for a manifold with {} nodes",
                values.len(),
                m.node_count()
            )));
        }
        Ok(Potential { values, manifold_id: m.id() })
    }

    pub fn zero(m: &DiscreteManifold) -> Self {
        Potential { values: vec![0.0; m.node_count()], manifold_id: m.id() }
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn manifold_id(&self) -> u64 {
        self.manifold_id
    }

    pub fn max(&self) -> f64 {
        self.values.iter().cloned().fold(f64::NEG_INFINITY, f64::max)
    }

    pub fn min(&self) -> f64 {
        self.values.iter().cloned().fold(f64::INFINITY, f64::min)
    }

    pub fn check_same_manifold(&self, m: &DiscreteManifold) -> Result<()> {
        if self.manifold_id != m.id() {
            return Err(Error::ManifoldMismatch(
                "potential belongs to a different manifold".into(),
            ));
        }
        Ok(())
    }

    pub(crate) fn from_raw(manifold_id: u64, values: Vec<f64>) -> Self {
        Potential { values, manifold_id }
    }
}

/// Green potential of a charge distribution.
///
/// Closed/Neumann manifolds: solves `K g = w - m(w) W` on the complement of
/// the constants, then shifts so that `sum W_i g_i = 0`. Dirichlet
/// manifolds: solves `K g = w` directly. Profile chains use a direct
/// tridiagonal solve; everything else runs deflated conjugate gradients.
pub fn green_potential(m: &DiscreteManifold, w: &ChargeDistribution) -> Result<Potential> {
    w.check_same_manifold(m)?;
    let n = m.node_count();
    let scale = w.l1_norm();
    let tol = GREEN_RTOL * scale.max(f64::MIN_POSITIVE);
    let closed = m.boundary().is_closed_or_neumann();

    let rhs: Vec<f64> = if closed {
        let t = normalized_mass(m, w)?;
        (0..n).map(|i| w.masses()[i] - t * m.weight(i)).collect()
    } else {
        w.masses().to_vec()
    };

    let mut g = match m.stiffness().as_tridiagonal() {
        Some(tri) => {
            // kernel = constants on closed chains: ground node 0 and solve
            // the rest, with one pass of iterative refinement
            let lo = usize::from(closed);
            let mut g = vec![0.0; n];
            tri.solve_run(lo, n - 1, &rhs, &mut g);
            let kg = m.stiffness().mul_vec_alloc(&g);
            let r: Vec<f64> = rhs.iter().zip(&kg).map(|(&b, &a)| b - a).collect();
            let mut d = vec![0.0; n];
            tri.solve_run(lo, n - 1, &r, &mut d);
            for i in 0..n {
                g[i] += d[i];
            }
            let kg = m.stiffness().mul_vec_alloc(&g);
            let resid: f64 = kg
                .iter()
                .zip(&rhs)
                .map(|(&a, &b)| (a - b) * (a - b))
                .sum::<f64>()
                .sqrt();
            // attainable floor: rounding of |K||g| row sums in f64
            let float_floor = {
                let mut acc = 0.0;
                for i in 0..n {
                    let (cols, vals) = m.stiffness().row(i);
                    let row: f64 =
                        cols.iter().zip(vals).map(|(&j, &v)| v.abs() * g[j].abs()).sum();
                    acc += row * row;
                }
                32.0 * f64::EPSILON * acc.sqrt()
            };
            if resid > tol.max(float_floor) {
                return Err(Error::SolverDiverged(format!(
                    "tridiagonal potential solve left residual {resid:.3e}"
                )));
            }
            g
        }
        None => {
            let max_iter = GREEN_ITER_FACTOR * n;
            let (g, outcome) = pcg(m.stiffness(), &rhs, None, None, closed, tol, max_iter);
            if !outcome.converged {
                return Err(Error::SolverDiverged(format!(
                    "green potential solve stalled at residual {:.3e} after {} iterations",
                    outcome.residual_norm, outcome.iterations
                )));
            }
            g
        }
    };
    if closed {
        // normalization: zero volume average
        let shift: f64 =
            g.iter().zip(m.weights()).map(|(&gi, &wi)| gi * wi).sum::<f64>() / m.total_volume();
        g.iter_mut().for_each(|v| *v -= shift);
    }
    Ok(Potential { values: g, manifold_id: m.id() })
}

/// A point of the Riemann sphere in the stereographic chart.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum SpherePoint {
    Finite { re: f64, im: f64 },
    Infinity,
}

impl SpherePoint {
    pub fn finite(re: f64, im: f64) -> Self {
        SpherePoint::Finite { re, im }
    }

    /// Chart map from spherical angles, projecting from the north pole to
    /// the equatorial plane: `z = e^{i phi} cot(theta/2)`. The north pole
    /// maps to infinity.
    pub fn from_angles(theta: f64, phi: f64) -> Self {
        if theta == 0.0 {
            return SpherePoint::Infinity;
        }
        let r = (theta / 2.0).cos() / (theta / 2.0).sin();
        SpherePoint::Finite { re: r * phi.cos(), im: r * phi.sin() }
    }
}

/// Green kernel of the unit 2-sphere in stereographic coordinates:
/// `G(a,b) = -(1/4pi) (log(|a-b|^2 / ((1+|a|^2)(1+|b|^2))) + 1)`,
/// with the analytic limit when either argument is the point at infinity.
pub fn green_kernel_sphere(a: &SpherePoint, b: &SpherePoint) -> Result<f64> {
    use SpherePoint::*;
    let quarter_pi_inv = 1.0 / (4.0 * std::f64::consts::PI);
    let log_ratio = match (a, b) {
        (Infinity, Infinity) => {
            return Err(Error::InvalidArgument(
                "green kernel singular at coincident points".into(),
            ))
        }
        (Finite { re, im }, Infinity) | (Infinity, Finite { re, im }) => {
            // |a-b|^2 / |b|^2 -> 1 as b -> infinity
            -(1.0 + re * re + im * im).ln()
        }
        (Finite { re: ar, im: ai }, Finite { re: br, im: bi }) => {
            let d2 = (ar - br) * (ar - br) + (ai - bi) * (ai - bi);
            if d2 == 0.0 {
                return Err(Error::InvalidArgument(
                    "green kernel singular at coincident points".into(),
                ));
            }
            (d2 / ((1.0 + ar * ar + ai * ai) * (1.0 + br * br + bi * bi))).ln()
        }
    };
    Ok(-quarter_pi_inv * (log_ratio + 1.0))
}

/// Mutual energy `E(w1, w2) = g1^T K g2` of two charges.
pub fn mutual_energy(
    m: &DiscreteManifold,
    w1: &ChargeDistribution,
    w2: &ChargeDistribution,
) -> Result<f64> {
    let g1 = green_potential(m, w1)?;
    let g2 = green_potential(m, w2)?;
    let kg2 = m.stiffness().mul_vec_alloc(g2.values());
    Ok(g1.values().iter().zip(&kg2).map(|(&a, &b)| a * b).sum())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::charge::{atom, volume_form, ChargeDistribution};
    use crate::grid::{build_circle, build_s3_polar, build_sphere_latlong, build_sphere_polar, Point};
    use std::f64::consts::PI;

    #[test]
    fn volume_form_has_zero_potential() {
        let m = build_circle(64).unwrap();
        let g = green_potential(&m, &volume_form(&m)).unwrap();
        for &v in g.values() {
            assert!(v.abs() < 1e-12);
        }
    }

    #[test]
    fn polar_sphere_pole_potential_matches_closed_form() {
        // g = -psi with psi = (1/4pi)(log sin^2(theta/2) + 1)
        let n = 512;
        let m = build_sphere_polar(n).unwrap();
        let w = atom(&m, &Point::Radial(0.0), 1.0).unwrap();
        let g = green_potential(&m, &w).unwrap();
        let mut worst: f64 = 0.0;
        for i in 0..m.node_count() {
            let theta = match m.node(i) {
                Point::Radial(r) => r,
                _ => unreachable!(),
            };
            if theta < 0.3 {
                continue; // stay away from the singular source
            }
            let exact = (1.0 / (4.0 * PI)) * (-((theta / 2.0).sin().powi(2)).ln() - 1.0);
            worst = worst.max((g.values()[i] - exact).abs());
        }
        assert!(worst < 1e-3, "worst deviation {worst}");
    }

    #[test]
    fn s3_pole_potential_matches_closed_form() {
        // g = -psi with psi = (1/4pi^2)((xi - pi) cot(xi) + 1/2)
        let n = 512;
        let m = build_s3_polar(n).unwrap();
        let w = atom(&m, &Point::Radial(0.0), 1.0).unwrap();
        let g = green_potential(&m, &w).unwrap();
        let mut worst: f64 = 0.0;
        for i in 0..m.node_count() {
            let xi = match m.node(i) {
                Point::Radial(r) => r,
                _ => unreachable!(),
            };
            if xi < 0.3 {
                continue;
            }
            let exact = -(1.0 / (4.0 * PI * PI)) * ((xi - PI) * xi.cos() / xi.sin() + 0.5);
            worst = worst.max((g.values()[i] - exact).abs());
        }
        assert!(worst < 2e-3, "worst deviation {worst}");
    }

    #[test]
    fn normalization_and_gauge_invariance() {
        let m = build_circle(200).unwrap();
        let w = atom(&m, &Point::Circle(0.3), 2.0)
            .unwrap()
            .add(&atom(&m, &Point::Circle(0.7), -0.5).unwrap())
            .unwrap();
        let g = green_potential(&m, &w).unwrap();
        let avg: f64 = g
            .values()
            .iter()
            .zip(m.weights())
            .map(|(&gi, &wi)| gi * wi)
            .sum();
        assert!(avg.abs() < 1e-9 * w.l1_norm() * m.total_volume());

        // G^{w + s vol} = G^w
        let shifted = w.add(&volume_form(&m).scale(1.7)).unwrap();
        let g2 = green_potential(&m, &shifted).unwrap();
        for i in 0..m.node_count() {
            assert!((g.values()[i] - g2.values()[i]).abs() < 1e-8);
        }
    }

    #[test]
    fn kernel_values_and_symmetry() {
        let origin = SpherePoint::finite(0.0, 0.0);
        let one = SpherePoint::finite(1.0, 0.0);
        let inf = SpherePoint::Infinity;
        let v = green_kernel_sphere(&origin, &inf).unwrap();
        assert!((v + 1.0 / (4.0 * PI)).abs() < 1e-15);
        let v01 = green_kernel_sphere(&origin, &one).unwrap();
        let expected = -(1.0 / (4.0 * PI)) * ((0.5f64).ln() + 1.0);
        assert!((v01 - expected).abs() < 1e-15);
        let a = SpherePoint::finite(0.3, -1.2);
        let b = SpherePoint::finite(-0.9, 0.4);
        assert_eq!(
            green_kernel_sphere(&a, &b).unwrap(),
            green_kernel_sphere(&b, &a).unwrap()
        );
        assert!(green_kernel_sphere(&a, &a).is_err());
        assert!(green_kernel_sphere(&inf, &inf).is_err());
    }

    #[test]
    fn latlong_potential_matches_kernel() {
        let m = build_sphere_latlong(48, 48).unwrap();
        let a_angles = (0.9f64, 1.3f64);
        let src = atom(&m, &Point::Sphere { theta: a_angles.0, phi: a_angles.1 }, 1.0).unwrap();
        let src_node = m
            .nearest_node(&Point::Sphere { theta: a_angles.0, phi: a_angles.1 })
            .unwrap();
        let (sa_t, sa_p) = m.coord_pair(src_node);
        let a = SpherePoint::from_angles(sa_t, sa_p);
        let g = green_potential(&m, &src).unwrap();
        let h = m.grid_spacing();
        let tol = 0.5 * h * (1.0 + (1.0 / h).ln());
        let mut checked = 0;
        for i in 0..m.node_count() {
            let d = m
                .distance(i, &Point::Sphere { theta: sa_t, phi: sa_p })
                .unwrap();
            if d < 5.0 * h {
                continue;
            }
            let (t, p) = m.coord_pair(i);
            let b = SpherePoint::from_angles(t, p);
            let exact = green_kernel_sphere(&a, &b).unwrap();
            assert!(
                (g.values()[i] - exact).abs() < tol,
                "node {i}: {} vs {exact}",
                g.values()[i]
            );
            checked += 1;
        }
        assert!(checked > 100);
    }

    #[test]
    fn mutual_energy_properties() {
        let m = build_sphere_polar(128).unwrap();
        let w1 = atom(&m, &Point::Radial(0.4), 1.0).unwrap();
        let w2 = atom(&m, &Point::Radial(2.0), -0.7)
            .unwrap()
            .add(&volume_form(&m).scale(0.1))
            .unwrap();
        let e12 = mutual_energy(&m, &w1, &w2).unwrap();
        let e21 = mutual_energy(&m, &w2, &w1).unwrap();
        assert!((e12 - e21).abs() <= 1e-9 * e12.abs().max(1.0));

        let evol = mutual_energy(&m, &volume_form(&m), &w2).unwrap();
        assert!(evol.abs() < 1e-9);

        let e11 = mutual_energy(&m, &w1, &w1).unwrap();
        assert!(e11 > 0.0);

        // E(w,w) = 0 iff w is a multiple of the volume form
        let ev = mutual_energy(&m, &volume_form(&m).scale(2.5), &volume_form(&m).scale(2.5)).unwrap();
        assert!(ev.abs() < 1e-12);
    }

    #[test]
    fn mutual_energy_equals_pairing_with_compensated_charge() {
        let m = build_circle(128).unwrap();
        let w1 = atom(&m, &Point::Circle(0.2), 1.5).unwrap();
        let w2 = atom(&m, &Point::Circle(0.6), -0.4).unwrap();
        let e = mutual_energy(&m, &w1, &w2).unwrap();
        let g1 = green_potential(&m, &w1).unwrap();
        let t2 = crate::charge::normalized_mass(&m, &w2).unwrap();
        let pairing: f64 = (0..m.node_count())
            .map(|i| g1.values()[i] * (w2.masses()[i] - t2 * m.weight(i)))
            .sum();
        assert!((e - pairing).abs() < 1e-8 * (1.0 + e.abs()));
    }

    #[test]
    fn zero_charge_zero_potential() {
        let m = build_circle(16).unwrap();
        let g = green_potential(&m, &ChargeDistribution::zero(&m)).unwrap();
        assert!(g.values().iter().all(|&v| v == 0.0));
    }
}
