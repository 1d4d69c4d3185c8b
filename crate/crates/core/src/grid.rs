//! Discrete manifolds: nodes, lumped volume weights and the sparse
//! stiffness (Dirichlet-energy) operator for the supported geometry
//! families.
//!
//! Three families are built here:
//!
//! * the unit circle `R/Z` with metric `dx^2`,
//! * the 2-sphere on a latitude/longitude grid with each pole collapsed
//!   to a single node,
//! * rotationally symmetric profiles `ds^2 = dr^2 + (angular part)` reduced
//!   to one radial coordinate, covering polar reductions of `S^2` and `S^3`
//!   and radial Euclidean balls with Dirichlet or Neumann outer boundary.
//!
//! The stiffness matrix is assembled in conductance (finite-volume) form,
//! so it is always a symmetric M-matrix with `v^T K v` equal to the discrete
//! Dirichlet energy, and node weights carry genuine n-dimensional volume.
//! Charge vectors over these grids are therefore absolute masses and total
//! mass statements reduce to plain sums.

use std::sync::atomic::{AtomicU64, Ordering};
use std::sync::Arc;

use crate::error::{Error, Result};
use crate::sparse::CsrMatrix;

static NEXT_MANIFOLD_ID: AtomicU64 = AtomicU64::new(1);

/// A point in the coordinate chart of one of the supported families.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Point {
    /// Circle coordinate in `[0, 1)`.
    Circle(f64),
    /// Spherical angles, `theta` in `[0, pi]`, `phi` in `[0, 2*pi)`.
    Sphere { theta: f64, phi: f64 },
    /// Radial coordinate of a symmetric profile.
    Radial(f64),
}

/// Geometry family of a manifold.
#[derive(Debug, Clone, PartialEq)]
pub enum ManifoldKind {
    Circle {
        n_nodes: usize,
    },
    SphereLatLong {
        n_theta: usize,
        n_phi: usize,
    },
    SymmetricProfile {
        family: ProfileFamily,
        r_lo: f64,
        r_hi: f64,
        surface_factor: f64,
        n_cells: usize,
    },
}

/// Identifies what a symmetric profile represents, which fixes geodesic
/// distances and analytic ball volumes for the ball operations.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ProfileFamily {
    /// `w = sin(theta)` on `[0, pi]`, surface factor `2*pi`: the 2-sphere.
    SpherePolar,
    /// `w = sin^2(xi)` on `[0, pi]`, surface factor `4*pi`: the 3-sphere.
    Sphere3Polar,
    /// `w = r^(n-1)` on `[0, R]`, surface factor `|S^(n-1)|`: flat n-ball.
    FlatBall { dim: usize },
    /// Anything else; only generic operations are available.
    Custom { dim: usize },
}

/// Boundary treatment of the grid.
#[derive(Debug, Clone, PartialEq, Eq)]
pub enum BoundaryKind {
    /// No boundary; constants lie in the kernel of the stiffness matrix.
    Closed,
    /// Outer boundary grounded (value eliminated as zero); the listed nodes
    /// are the cells adjacent to the eliminated boundary.
    Dirichlet { nodes: Vec<usize> },
    /// Zero-flux outer boundary; the listed nodes are adjacent to it.
    Neumann { nodes: Vec<usize> },
}

impl BoundaryKind {
    pub fn is_closed_or_neumann(&self) -> bool {
        matches!(self, BoundaryKind::Closed | BoundaryKind::Neumann { .. })
    }
}

/// A discretized manifold: immutable after construction and freely shared.
#[derive(Debug, Clone)]
pub struct DiscreteManifold {
    id: u64,
    kind: ManifoldKind,
    nodes: Vec<Point>,
    weights: Vec<f64>,
    stiffness: Arc<CsrMatrix>,
    boundary: BoundaryKind,
    total_volume: f64,
    /// Characteristic grid spacing.
    h: f64,
    dim: usize,
}

impl DiscreteManifold {
    fn new(
        kind: ManifoldKind,
        nodes: Vec<Point>,
        weights: Vec<f64>,
        stiffness: CsrMatrix,
        boundary: BoundaryKind,
        h: f64,
        dim: usize,
    ) -> Self {
        debug_assert_eq!(nodes.len(), weights.len());
        debug_assert_eq!(nodes.len(), stiffness.dim());
        let total_volume = weights.iter().sum();
        DiscreteManifold {
            id: NEXT_MANIFOLD_ID.fetch_add(1, Ordering::Relaxed),
            kind,
            nodes,
            weights,
            stiffness: Arc::new(stiffness),
            boundary,
            total_volume,
            h,
            dim,
        }
    }

    pub fn id(&self) -> u64 {
        self.id
    }

    pub fn kind(&self) -> &ManifoldKind {
        &self.kind
    }

    pub fn node_count(&self) -> usize {
        self.nodes.len()
    }

    pub fn node(&self, i: usize) -> Point {
        self.nodes[i]
    }

    pub fn nodes(&self) -> &[Point] {
        &self.nodes
    }

    /// Lumped volume weight of node `i`.
    pub fn weight(&self, i: usize) -> f64 {
        self.weights[i]
    }

    pub fn weights(&self) -> &[f64] {
        &self.weights
    }

    pub fn stiffness(&self) -> &CsrMatrix {
        &self.stiffness
    }

    pub fn stiffness_arc(&self) -> Arc<CsrMatrix> {
        Arc::clone(&self.stiffness)
    }

    pub fn boundary(&self) -> &BoundaryKind {
        &self.boundary
    }

    pub fn total_volume(&self) -> f64 {
        self.total_volume
    }

    pub fn grid_spacing(&self) -> f64 {
        self.h
    }

    /// Intrinsic dimension of the manifold the grid represents.
    pub fn dim(&self) -> usize {
        self.dim
    }

    /// Coordinate pair for CSV dumps (second entry 0 for 1-coordinate charts).
    pub fn coord_pair(&self, i: usize) -> (f64, f64) {
        match self.nodes[i] {
            Point::Circle(x) => (x, 0.0),
            Point::Sphere { theta, phi } => (theta, phi),
            Point::Radial(r) => (r, 0.0),
        }
    }

    /// Geodesic distance between node `i` and a chart point.
    pub fn distance(&self, i: usize, p: &Point) -> Result<f64> {
        match (&self.nodes[i], p) {
            (Point::Circle(x), Point::Circle(y)) => {
                let d = (x - y).rem_euclid(1.0);
                Ok(d.min(1.0 - d))
            }
            (Point::Sphere { theta: t1, phi: p1 }, Point::Sphere { theta: t2, phi: p2 }) => {
                let c = t1.cos() * t2.cos() + t1.sin() * t2.sin() * (p1 - p2).cos();
                Ok(c.clamp(-1.0, 1.0).acos())
            }
            (Point::Radial(r1), Point::Radial(r2)) => Ok((r1 - r2).abs()),
            _ => Err(Error::OutsideChart(
                "point family does not match manifold chart".into(),
            )),
        }
    }

    /// Index of the node nearest to `p`; ties break to the lowest index.
    pub fn nearest_node(&self, p: &Point) -> Result<usize> {
        self.check_in_chart(p)?;
        let mut best = 0usize;
        let mut best_d = f64::INFINITY;
        for i in 0..self.node_count() {
            let d = self.distance(i, p)?;
            if d < best_d {
                best_d = d;
                best = i;
            }
        }
        Ok(best)
    }

    fn check_in_chart(&self, p: &Point) -> Result<()> {
        match (&self.kind, p) {
            (ManifoldKind::Circle { .. }, Point::Circle(x)) => {
                if !(0.0..1.0).contains(x) {
                    return Err(Error::OutsideChart(format!(
                        "circle coordinate {x} not in [0,1)"
                    )));
                }
            }
            (ManifoldKind::SphereLatLong { .. }, Point::Sphere { theta, .. }) => {
                if !(0.0..=std::f64::consts::PI).contains(theta) {
                    return Err(Error::OutsideChart(format!(
                        "polar angle {theta} not in [0,pi]"
                    )));
                }
            }
            (ManifoldKind::SymmetricProfile { r_lo, r_hi, .. }, Point::Radial(r)) => {
                if !(r >= r_lo && r <= r_hi) {
                    return Err(Error::OutsideChart(format!(
                        "radius {r} not in [{r_lo},{r_hi}]"
                    )));
                }
            }
            _ => {
                return Err(Error::OutsideChart(
                    "point family does not match manifold chart".into(),
                ))
            }
        }
        Ok(())
    }

    /// Profile family tag, if this is a symmetric profile.
    pub fn profile_family(&self) -> Option<ProfileFamily> {
        match &self.kind {
            ManifoldKind::SymmetricProfile { family, .. } => Some(*family),
            _ => None,
        }
    }
}

/// Uniform periodic grid on the unit circle.
///
/// `W_i = h`, stiffness tridiagonal-periodic with `2/h` on the diagonal and
/// `-1/h` off it; total volume is exactly 1.
pub fn build_circle(n_nodes: usize) -> Result<DiscreteManifold> {
    if n_nodes < 3 {
        return Err(Error::InvalidArgument(format!(
            "circle grid needs at least 3 nodes, got {n_nodes}"
        )));
    }
    let h = 1.0 / n_nodes as f64;
    let nodes: Vec<Point> = (0..n_nodes).map(|i| Point::Circle(i as f64 * h)).collect();
    let weights = vec![h; n_nodes];
    let c = 1.0 / h;
    let mut triplets = Vec::with_capacity(4 * n_nodes);
    for i in 0..n_nodes {
        let j = (i + 1) % n_nodes;
        triplets.push((i, i, c));
        triplets.push((j, j, c));
        triplets.push((i, j, -c));
        triplets.push((j, i, -c));
    }
    let stiffness = CsrMatrix::from_triplets(n_nodes, &triplets);
    Ok(DiscreteManifold::new(
        ManifoldKind::Circle { n_nodes },
        nodes,
        weights,
        stiffness,
        BoundaryKind::Closed,
        h,
        1,
    ))
}

/// Latitude/longitude grid on the unit 2-sphere with single-node poles.
///
/// Node 0 is the north pole, node `count-1` the south pole; ring `j`
/// (`1 <= j <= n_theta-1`) sits at `theta_j = j*pi/n_theta` with `n_phi`
/// nodes. Weights are exact cell areas of the `sin(theta)` measure, so the
/// total volume is `4*pi` up to rounding.
pub fn build_sphere_latlong(n_theta: usize, n_phi: usize) -> Result<DiscreteManifold> {
    if n_theta < 4 || n_phi < 4 {
        return Err(Error::InvalidArgument(format!(
            "sphere grid needs n_theta >= 4 and n_phi >= 4, got {n_theta} x {n_phi}"
        )));
    }
    let pi = std::f64::consts::PI;
    let dth = pi / n_theta as f64;
    let dph = 2.0 * pi / n_phi as f64;
    let n_rings = n_theta - 1;
    let count = n_rings * n_phi + 2;
    let north = 0usize;
    let south = count - 1;
    let ring_node = |j: usize, k: usize| 1 + (j - 1) * n_phi + (k % n_phi);

    let mut nodes = Vec::with_capacity(count);
    let mut weights = Vec::with_capacity(count);
    nodes.push(Point::Sphere { theta: 0.0, phi: 0.0 });
    weights.push(2.0 * pi * (1.0 - (dth / 2.0).cos()));
    for j in 1..=n_rings {
        let theta = j as f64 * dth;
        // exact integral of sin over the theta-cell
        let w = dph * ((theta - dth / 2.0).cos() - (theta + dth / 2.0).cos());
        for k in 0..n_phi {
            nodes.push(Point::Sphere { theta, phi: k as f64 * dph });
            weights.push(w);
        }
    }
    nodes.push(Point::Sphere { theta: pi, phi: 0.0 });
    weights.push(2.0 * pi * (1.0 - (dth / 2.0).cos()));

    let mut triplets = Vec::new();
    let mut edge = |a: usize, b: usize, c: f64| {
        triplets.push((a, a, c));
        triplets.push((b, b, c));
        triplets.push((a, b, -c));
        triplets.push((b, a, -c));
    };
    // pole caps to the first and last rings
    let c_pole = (dth / 2.0).sin() * dph / dth;
    for k in 0..n_phi {
        edge(north, ring_node(1, k), c_pole);
        edge(south, ring_node(n_rings, k), c_pole);
    }
    for j in 1..=n_rings {
        let theta = j as f64 * dth;
        // zonal edges within the ring
        let c_zonal = dth / (theta.sin() * dph);
        for k in 0..n_phi {
            edge(ring_node(j, k), ring_node(j, k + 1), c_zonal);
        }
        // meridian edges to the next ring
        if j < n_rings {
            let c_merid = (theta + dth / 2.0).sin() * dph / dth;
            for k in 0..n_phi {
                edge(ring_node(j, k), ring_node(j + 1, k), c_merid);
            }
        }
    }
    let stiffness = CsrMatrix::from_triplets(count, &triplets);
    Ok(DiscreteManifold::new(
        ManifoldKind::SphereLatLong { n_theta, n_phi },
        nodes,
        weights,
        stiffness,
        BoundaryKind::Closed,
        dth,
        2,
    ))
}

/// Specification of a rotationally symmetric profile grid.
pub struct ProfileSpec<'a> {
    /// Angular-volume weight `w(r) >= 0`, vanishing at most at endpoints.
    pub weight_fn: &'a dyn Fn(f64) -> f64,
    pub r_lo: f64,
    pub r_hi: f64,
    /// Sphere-area constant multiplying `w`, so nodal masses are absolute
    /// n-dimensional volumes.
    pub surface_factor: f64,
    pub n_cells: usize,
    pub boundary: ProfileBoundary,
    pub family: ProfileFamily,
}

/// Boundary condition at the outer endpoint `r_hi` of a profile grid.
/// The inner endpoint is always flux-free (either `w` vanishes there or the
/// profile is a symmetry reduction through the origin).
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ProfileBoundary {
    /// Valid only when `w` vanishes at both endpoints.
    Closed,
    /// Ghost value at `r_hi` eliminated as zero.
    Dirichlet,
    /// Boundary conductance dropped.
    Neumann,
}

/// Cell-centered finite-volume grid for a symmetric profile.
///
/// `r_i = r_lo + (i + 1/2) h`, `W_i = surface_factor * w(r_i) * h`,
/// conductances `surface_factor * w(r_face) / h` between neighbours.
pub fn build_symmetric_profile(spec: &ProfileSpec) -> Result<DiscreteManifold> {
    if spec.n_cells < 3 {
        return Err(Error::InvalidArgument(format!(
            "profile grid needs at least 3 cells, got {}",
            spec.n_cells
        )));
    }
    if !(spec.r_hi > spec.r_lo) {
        return Err(Error::InvalidArgument("empty profile interval".into()));
    }
    if !(spec.surface_factor > 0.0) {
        return Err(Error::InvalidArgument("surface factor must be positive".into()));
    }
    let n = spec.n_cells;
    let h = (spec.r_hi - spec.r_lo) / n as f64;
    let w = |r: f64| (spec.weight_fn)(r);

    let endpoint_tol = 1e-12 * (1.0 + w(spec.r_lo + 0.5 * (spec.r_hi - spec.r_lo)).abs());
    if spec.boundary == ProfileBoundary::Closed
        && (w(spec.r_lo).abs() > endpoint_tol || w(spec.r_hi).abs() > endpoint_tol)
    {
        return Err(Error::InvalidArgument(
            "closed profile requires the weight to vanish at both endpoints".into(),
        ));
    }

    let mut nodes = Vec::with_capacity(n);
    let mut weights = Vec::with_capacity(n);
    for i in 0..n {
        let r = spec.r_lo + (i as f64 + 0.5) * h;
        let wi = w(r);
        if wi < 0.0 {
            return Err(Error::InvalidArgument(format!(
                "profile weight negative at r = {r}"
            )));
        }
        nodes.push(Point::Radial(r));
        weights.push(spec.surface_factor * wi * h);
    }

    let mut triplets = Vec::new();
    for i in 0..n - 1 {
        let r_face = spec.r_lo + (i as f64 + 1.0) * h;
        let c = spec.surface_factor * w(r_face) / h;
        triplets.push((i, i, c));
        triplets.push((i + 1, i + 1, c));
        triplets.push((i, i + 1, -c));
        triplets.push((i + 1, i, -c));
    }
    let boundary = match spec.boundary {
        ProfileBoundary::Closed => BoundaryKind::Closed,
        ProfileBoundary::Neumann => BoundaryKind::Neumann { nodes: vec![n - 1] },
        ProfileBoundary::Dirichlet => {
            // ghost value 0 at r_hi, half a cell away from the last center
            let c = spec.surface_factor * w(spec.r_hi) / (0.5 * h);
            triplets.push((n - 1, n - 1, c));
            BoundaryKind::Dirichlet { nodes: vec![n - 1] }
        }
    };
    let stiffness = CsrMatrix::from_triplets(n, &triplets);
    let dim = match spec.family {
        ProfileFamily::SpherePolar => 2,
        ProfileFamily::Sphere3Polar => 3,
        ProfileFamily::FlatBall { dim } => dim,
        ProfileFamily::Custom { dim } => dim,
    };
    Ok(DiscreteManifold::new(
        ManifoldKind::SymmetricProfile {
            family: spec.family,
            r_lo: spec.r_lo,
            r_hi: spec.r_hi,
            surface_factor: spec.surface_factor,
            n_cells: n,
        },
        nodes,
        weights,
        stiffness,
        boundary,
        h,
        dim,
    ))
}

/// Polar reduction of the unit 2-sphere: `w = sin(theta)` on `[0, pi]`.
pub fn build_sphere_polar(n_cells: usize) -> Result<DiscreteManifold> {
    build_symmetric_profile(&ProfileSpec {
        weight_fn: &|t: f64| t.sin(),
        r_lo: 0.0,
        r_hi: std::f64::consts::PI,
        surface_factor: 2.0 * std::f64::consts::PI,
        n_cells,
        boundary: ProfileBoundary::Closed,
        family: ProfileFamily::SpherePolar,
    })
}

/// Polar reduction of the unit 3-sphere: `w = sin^2(xi)` on `[0, pi]`.
pub fn build_s3_polar(n_cells: usize) -> Result<DiscreteManifold> {
    build_symmetric_profile(&ProfileSpec {
        weight_fn: &|t: f64| t.sin() * t.sin(),
        r_lo: 0.0,
        r_hi: std::f64::consts::PI,
        surface_factor: 4.0 * std::f64::consts::PI,
        n_cells,
        boundary: ProfileBoundary::Closed,
        family: ProfileFamily::Sphere3Polar,
    })
}

/// Radial reduction of the flat ball `B(0, radius)` in `R^dim`.
pub fn build_flat_ball(
    dim: usize,
    radius: f64,
    n_cells: usize,
    boundary: ProfileBoundary,
) -> Result<DiscreteManifold> {
    if dim == 0 {
        return Err(Error::InvalidArgument("ball dimension must be >= 1".into()));
    }
    if boundary == ProfileBoundary::Closed {
        return Err(Error::InvalidArgument(
            "flat ball profile cannot be closed (weight does not vanish at the rim)".into(),
        ));
    }
    let exponent = (dim - 1) as f64;
    let weight_fn = move |r: f64| r.powf(exponent);
    build_symmetric_profile(&ProfileSpec {
        weight_fn: &weight_fn,
        r_lo: 0.0,
        r_hi: radius,
        surface_factor: unit_sphere_area(dim),
        n_cells,
        boundary,
        family: ProfileFamily::FlatBall { dim },
    })
}

/// Surface area `|S^(n-1)|` of the unit sphere in `R^n`:
/// `2 pi^(n/2) / Gamma(n/2)`, evaluated exactly for integer `n`.
pub fn unit_sphere_area(n: usize) -> f64 {
    let pi = std::f64::consts::PI;
    2.0 * pi.powf(n as f64 / 2.0) / gamma_half_integer(n)
}

/// Volume of the unit ball in `R^n` (the factor in `t = r^n * pi^(n/2) / Gamma(n/2+1)`).
pub fn unit_ball_volume(n: usize) -> f64 {
    unit_sphere_area(n) / n as f64
}

/// `Gamma(n/2)` for positive integer `n`.
fn gamma_half_integer(n: usize) -> f64 {
    if n % 2 == 0 {
        // Gamma(k) = (k-1)!
        let k = n / 2;
        (1..k).map(|i| i as f64).product()
    } else {
        // Gamma(k + 1/2) = (2k)! / (4^k k!) * sqrt(pi)
        let k = n / 2;
        let mut v = std::f64::consts::PI.sqrt();
        for i in 1..=k {
            v *= (i as f64) - 0.5;
        }
        v
    }
}
