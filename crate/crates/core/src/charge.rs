//! Signed charge distributions as nodal mass vectors.
//!
//! A charge is an n-form current represented by absolute masses per node:
//! an absolutely continuous density `f` corresponds to `m_i = f(x_i) W_i`,
//! a point charge deposits its whole weight on the nearest node. Total-mass
//! statements are then plain vector sums.

use crate::error::{Error, Result};
use crate::grid::{DiscreteManifold, Point};

/// Signed nodal mass vector over a fixed manifold.
#[derive(Debug, Clone, PartialEq)]
pub struct ChargeDistribution {
    masses: Vec<f64>,
    manifold_id: u64,
}

impl ChargeDistribution {
    /// Wraps a raw mass vector; the length must match the manifold.
    pub fn from_masses(m: &DiscreteManifold, masses: Vec<f64>) -> Result<Self> {
        if masses.len() != m.node_count() {
            return Err(Error::ManifoldMismatch(format!(
                "mass vector has {} entries for a manifold with {} nodes",
                masses.len(),
                m.node_count()
            )));
        }
        Ok(ChargeDistribution { masses, manifold_id: m.id() })
    }

    /// The zero charge.
    pub fn zero(m: &DiscreteManifold) -> Self {
        ChargeDistribution { masses: vec![0.0; m.node_count()], manifold_id: m.id() }
    }

    pub fn masses(&self) -> &[f64] {
        &self.masses
    }

    pub fn manifold_id(&self) -> u64 {
        self.manifold_id
    }

    pub fn len(&self) -> usize {
        self.masses.len()
    }

    pub fn is_empty(&self) -> bool {
        self.masses.is_empty()
    }

    /// Total (signed) mass.
    pub fn total(&self) -> f64 {
        self.masses.iter().sum()
    }

    /// L1 norm of the masses.
    pub fn l1_norm(&self) -> f64 {
        self.masses.iter().map(|v| v.abs()).sum()
    }

    pub fn check_same_manifold(&self, m: &DiscreteManifold) -> Result<()> {
        if self.manifold_id != m.id() {
            return Err(Error::ManifoldMismatch(
                "charge belongs to a different manifold".into(),
            ));
        }
        Ok(())
    }

    pub fn add(&self, other: &ChargeDistribution) -> Result<ChargeDistribution> {
        self.binary(other, |a, b| a + b)
    }

    pub fn sub(&self, other: &ChargeDistribution) -> Result<ChargeDistribution> {
        self.binary(other, |a, b| a - b)
    }

    pub fn scale(&self, s: f64) -> ChargeDistribution {
        ChargeDistribution {
            masses: self.masses.iter().map(|v| v * s).collect(),
            manifold_id: self.manifold_id,
        }
    }

    fn binary(
        &self,
        other: &ChargeDistribution,
        op: impl Fn(f64, f64) -> f64,
    ) -> Result<ChargeDistribution> {
        if self.manifold_id != other.manifold_id || self.len() != other.len() {
            return Err(Error::ManifoldMismatch(
                "charges live on different manifolds".into(),
            ));
        }
        Ok(ChargeDistribution {
            masses: self
                .masses
                .iter()
                .zip(&other.masses)
                .map(|(&a, &b)| op(a, b))
                .collect(),
            manifold_id: self.manifold_id,
        })
    }
}

/// Point charge: the whole weight lands on the node nearest to `location`
/// (ties break to the lowest node index).
pub fn atom(m: &DiscreteManifold, location: &Point, weight: f64) -> Result<ChargeDistribution> {
    let i = m.nearest_node(location)?;
    let mut masses = vec![0.0; m.node_count()];
    masses[i] = weight;
    Ok(ChargeDistribution { masses, manifold_id: m.id() })
}

/// Absolutely continuous charge with density `f`: `m_i = f(x_i) W_i`.
pub fn from_density(m: &DiscreteManifold, f: impl Fn(&Point) -> f64) -> ChargeDistribution {
    let masses = (0..m.node_count())
        .map(|i| f(&m.node(i)) * m.weight(i))
        .collect();
    ChargeDistribution { masses, manifold_id: m.id() }
}

/// The volume form as a charge (`m_i = W_i`).
pub fn volume_form(m: &DiscreteManifold) -> ChargeDistribution {
    ChargeDistribution { masses: m.weights().to_vec(), manifold_id: m.id() }
}

/// Normalized total mass: total mass divided by the manifold volume.
pub fn normalized_mass(m: &DiscreteManifold, sigma: &ChargeDistribution) -> Result<f64> {
    sigma.check_same_manifold(m)?;
    Ok(sigma.total() / m.total_volume())
}

/// Jordan decomposition into componentwise positive and negative parts.
/// `plus - minus = sigma` and `min(plus_i, minus_i) = 0` at every node.
pub fn jordan(sigma: &ChargeDistribution) -> (ChargeDistribution, ChargeDistribution) {
    let plus = ChargeDistribution {
        masses: sigma.masses.iter().map(|&v| v.max(0.0)).collect(),
        manifold_id: sigma.manifold_id,
    };
    let minus = ChargeDistribution {
        masses: sigma.masses.iter().map(|&v| (-v).max(0.0)).collect(),
        manifold_id: sigma.manifold_id,
    };
    (plus, minus)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::grid::{build_circle, build_sphere_latlong, build_sphere_polar};
    use proptest::prelude::*;
    use std::f64::consts::PI;

    #[test]
    fn atom_snaps_to_nearest_node() {
        let m = build_circle(4).unwrap();
        let c = atom(&m, &Point::Circle(0.26), 1.0).unwrap();
        assert_eq!(c.masses(), &[0.0, 1.0, 0.0, 0.0]);
        assert_eq!(c.total(), 1.0);
    }

    #[test]
    fn atom_at_pole() {
        let m = build_sphere_latlong(8, 8).unwrap();
        let c = atom(&m, &Point::Sphere { theta: 0.0, phi: 0.0 }, 0.75).unwrap();
        assert_eq!(c.masses()[0], 0.75);
        assert_eq!(c.total(), 0.75);
    }

    #[test]
    fn atom_zero_weight() {
        let m = build_circle(5).unwrap();
        let c = atom(&m, &Point::Circle(0.4), 0.0).unwrap();
        assert!(c.masses().iter().all(|&v| v == 0.0));
    }

    #[test]
    fn atom_outside_chart_errors() {
        let m = build_circle(5).unwrap();
        assert!(atom(&m, &Point::Circle(1.0), 1.0).is_err());
    }

    #[test]
    fn density_one_is_volume_form() {
        let m = build_circle(7).unwrap();
        let c = from_density(&m, |_| 1.0);
        assert_eq!(c.masses(), m.weights());
        assert!((c.total() - m.total_volume()).abs() < 1e-15);
    }

    #[test]
    fn density_constant_on_sphere() {
        let m = build_sphere_latlong(32, 32).unwrap();
        let alpha = 0.3;
        let c = from_density(&m, |_| -alpha);
        assert!((c.total() + alpha * 4.0 * PI).abs() < 4.0 * PI * alpha * 1e-3);
    }

    #[test]
    fn normalized_mass_examples() {
        let m = build_sphere_polar(256).unwrap();
        let vol = volume_form(&m);
        assert!((normalized_mass(&m, &vol).unwrap() - 1.0).abs() < 1e-14);

        let n = atom(&m, &Point::Radial(0.0), 1.0).unwrap();
        let s = atom(&m, &Point::Radial(PI), 2.0).unwrap();
        let sigma = n.sub(&s).unwrap();
        let mm = normalized_mass(&m, &sigma).unwrap();
        assert!((mm + 1.0 / (4.0 * PI)).abs() < 1e-4);

        let zero = ChargeDistribution::zero(&m);
        assert_eq!(normalized_mass(&m, &zero).unwrap(), 0.0);
    }

    #[test]
    fn jordan_example() {
        let m = build_circle(3).unwrap();
        let c = ChargeDistribution::from_masses(&m, vec![1.0, -2.0, 0.0]).unwrap();
        let (p, n) = jordan(&c);
        assert_eq!(p.masses(), &[1.0, 0.0, 0.0]);
        assert_eq!(n.masses(), &[0.0, 2.0, 0.0]);
    }

    #[test]
    fn mismatched_manifolds_rejected() {
        let m1 = build_circle(4).unwrap();
        let m2 = build_circle(4).unwrap();
        let c1 = volume_form(&m1);
        let c2 = volume_form(&m2);
        assert!(c1.add(&c2).is_err());
        assert!(normalized_mass(&m2, &c1).is_err());
    }

    proptest! {
        #[test]
        fn jordan_parts_disjoint_and_exact(values in proptest::collection::vec(-10.0f64..10.0, 8)) {
            let m = build_circle(8).unwrap();
            let c = ChargeDistribution::from_masses(&m, values).unwrap();
            let (p, n) = jordan(&c);
            for i in 0..8 {
                prop_assert!(p.masses()[i] >= 0.0 && n.masses()[i] >= 0.0);
                prop_assert!(p.masses()[i].min(n.masses()[i]) == 0.0);
                prop_assert!(p.masses()[i] - n.masses()[i] == c.masses()[i]);
            }
        }

        #[test]
        fn from_density_linear(a in -3.0f64..3.0, b in -3.0f64..3.0) {
            let m = build_circle(12).unwrap();
            let f = |p: &Point| match p { Point::Circle(x) => a * x, _ => 0.0 };
            let g = |p: &Point| match p { Point::Circle(x) => b * (x * 7.0).sin(), _ => 0.0 };
            let fg = from_density(&m, |p| f(p) + g(p));
            let sum = from_density(&m, f).add(&from_density(&m, g)).unwrap();
            for i in 0..12 {
                let d = (fg.masses()[i] - sum.masses()[i]).abs();
                prop_assert!(d <= 1e-15 * (1.0 + fg.masses()[i].abs()));
            }
        }
    }
}
