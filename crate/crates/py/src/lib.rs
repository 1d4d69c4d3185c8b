//! Python bindings for the balayage engine: manifolds, charges, Green
//! potentials, partial balayage, and the application operations, exposed
//! as an abi3 extension module.

use std::sync::Arc;

use pyo3::exceptions::PyValueError;
use pyo3::prelude::*;
use pyo3::types::PyTuple;

use balayage_core::apps;
use balayage_core::balayage::{self, BalayageOptions, BalayageResult};
use balayage_core::charge::{self, ChargeDistribution};
use balayage_core::error::Error;
use balayage_core::greens::{self, Potential, SpherePoint};
use balayage_core::grid::{self, DiscreteManifold, Point, ProfileBoundary};
use balayage_core::obstacle::LcpParams;
use balayage_core::radial::{self, RadialBc, RadialScenario};

fn to_py(e: Error) -> PyErr {
    PyValueError::new_err(e.to_string())
}

/// A chart point given either as a scalar coordinate or a (theta, phi) pair.
#[derive(FromPyObject)]
enum PointArg {
    Scalar(f64),
    Pair(f64, f64),
}

impl PointArg {
    fn to_point(&self, m: &DiscreteManifold) -> PyResult<Point> {
        use balayage_core::grid::ManifoldKind::*;
        match (m.kind(), self) {
            (Circle { .. }, PointArg::Scalar(x)) => Ok(Point::Circle(*x)),
            (SymmetricProfile { .. }, PointArg::Scalar(r)) => Ok(Point::Radial(*r)),
            (SphereLatLong { .. }, PointArg::Pair(theta, phi)) => {
                Ok(Point::Sphere { theta: *theta, phi: *phi })
            }
            (SphereLatLong { .. }, PointArg::Scalar(theta)) => {
                Ok(Point::Sphere { theta: *theta, phi: 0.0 })
            }
            _ => Err(PyValueError::new_err(
                "point does not match the manifold's coordinate chart",
            )),
        }
    }
}

fn solver_options(polish: bool, tolerance: f64) -> BalayageOptions {
    BalayageOptions {
        lcp: LcpParams { polish, tolerance, ..LcpParams::default() },
        ..BalayageOptions::default()
    }
}

/// A discretized manifold.
#[pyclass(name = "Manifold", frozen)]
struct PyManifold {
    inner: Arc<DiscreteManifold>,
}

#[pymethods]
impl PyManifold {
    /// Uniform periodic grid on the unit circle.
    #[staticmethod]
    fn circle(n_nodes: usize) -> PyResult<Self> {
        Ok(PyManifold { inner: Arc::new(grid::build_circle(n_nodes).map_err(to_py)?) })
    }

    /// Latitude/longitude grid on the unit 2-sphere.
    #[staticmethod]
    fn sphere_latlong(n_theta: usize, n_phi: usize) -> PyResult<Self> {
        Ok(PyManifold {
            inner: Arc::new(grid::build_sphere_latlong(n_theta, n_phi).map_err(to_py)?),
        })
    }

    /// Polar reduction of the unit 2-sphere.
    #[staticmethod]
    fn sphere_polar(n_cells: usize) -> PyResult<Self> {
        Ok(PyManifold { inner: Arc::new(grid::build_sphere_polar(n_cells).map_err(to_py)?) })
    }

    /// Polar reduction of the unit 3-sphere.
    #[staticmethod]
    fn s3_polar(n_cells: usize) -> PyResult<Self> {
        Ok(PyManifold { inner: Arc::new(grid::build_s3_polar(n_cells).map_err(to_py)?) })
    }

    /// Radial reduction of the flat ball B(0, radius) in R^dim;
    /// bc is "dirichlet" or "neumann".
    #[staticmethod]
    fn ball(dim: usize, radius: f64, n_cells: usize, bc: &str) -> PyResult<Self> {
        let boundary = match bc {
            "dirichlet" => ProfileBoundary::Dirichlet,
            "neumann" => ProfileBoundary::Neumann,
            _ => return Err(PyValueError::new_err("bc must be 'dirichlet' or 'neumann'")),
        };
        Ok(PyManifold {
            inner: Arc::new(
                grid::build_flat_ball(dim, radius, n_cells, boundary).map_err(to_py)?,
            ),
        })
    }

    #[getter]
    fn node_count(&self) -> usize {
        self.inner.node_count()
    }

    #[getter]
    fn total_volume(&self) -> f64 {
        self.inner.total_volume()
    }

    #[getter]
    fn grid_spacing(&self) -> f64 {
        self.inner.grid_spacing()
    }

    #[getter]
    fn dim(&self) -> usize {
        self.inner.dim()
    }

    /// Lumped volume weights per node.
    fn weights(&self) -> Vec<f64> {
        self.inner.weights().to_vec()
    }

    /// Node coordinates as (c1, c2) pairs (c2 is 0 for one-coordinate charts).
    fn coords(&self) -> Vec<(f64, f64)> {
        (0..self.inner.node_count()).map(|i| self.inner.coord_pair(i)).collect()
    }

    fn __repr__(&self) -> String {
        format!(
            "Manifold(nodes={}, dim={}, volume={:.6})",
            self.inner.node_count(),
            self.inner.dim(),
            self.inner.total_volume()
        )
    }
}

/// A signed charge distribution (nodal mass vector).
#[pyclass(name = "Charge", frozen)]
struct PyCharge {
    inner: ChargeDistribution,
}

#[pymethods]
impl PyCharge {
    /// Point mass deposited on the node nearest to `location`.
    #[staticmethod]
    fn atom(m: &PyManifold, location: PointArg, weight: f64) -> PyResult<Self> {
        let p = location.to_point(&m.inner)?;
        Ok(PyCharge { inner: charge::atom(&m.inner, &p, weight).map_err(to_py)? })
    }

    /// Constant density `value` (mass `value * W_i` per node).
    #[staticmethod]
    fn constant_density(m: &PyManifold, value: f64) -> Self {
        PyCharge { inner: charge::from_density(&m.inner, |_| value) }
    }

    /// The volume form as a charge.
    #[staticmethod]
    fn volume_form(m: &PyManifold) -> Self {
        PyCharge { inner: charge::volume_form(&m.inner) }
    }

    /// Wraps a raw mass vector.
    #[staticmethod]
    fn from_masses(m: &PyManifold, masses: Vec<f64>) -> PyResult<Self> {
        Ok(PyCharge { inner: ChargeDistribution::from_masses(&m.inner, masses).map_err(to_py)? })
    }

    fn masses(&self) -> Vec<f64> {
        self.inner.masses().to_vec()
    }

    #[getter]
    fn total(&self) -> f64 {
        self.inner.total()
    }

    fn add(&self, other: &PyCharge) -> PyResult<Self> {
        Ok(PyCharge { inner: self.inner.add(&other.inner).map_err(to_py)? })
    }

    fn scale(&self, s: f64) -> Self {
        PyCharge { inner: self.inner.scale(s) }
    }

    /// Jordan decomposition into (positive, negative) parts.
    fn jordan(&self) -> (Self, Self) {
        let (p, n) = charge::jordan(&self.inner);
        (PyCharge { inner: p }, PyCharge { inner: n })
    }
}

/// Total mass divided by the manifold volume.
#[pyfunction]
fn normalized_mass(m: &PyManifold, sigma: &PyCharge) -> PyResult<f64> {
    charge::normalized_mass(&m.inner, &sigma.inner).map_err(to_py)
}

/// Green potential of a charge as a list of nodal values.
#[pyfunction]
fn green_potential(m: &PyManifold, w: &PyCharge) -> PyResult<Vec<f64>> {
    Ok(greens::green_potential(&m.inner, &w.inner).map_err(to_py)?.values().to_vec())
}

/// Mutual energy of two charges.
#[pyfunction]
fn mutual_energy(m: &PyManifold, w1: &PyCharge, w2: &PyCharge) -> PyResult<f64> {
    greens::mutual_energy(&m.inner, &w1.inner, &w2.inner).map_err(to_py)
}

/// Green kernel of the unit sphere in stereographic coordinates;
/// `None` stands for the point at infinity.
#[pyfunction]
fn green_kernel_sphere(a: Option<(f64, f64)>, b: Option<(f64, f64)>) -> PyResult<f64> {
    let lift = |p: Option<(f64, f64)>| match p {
        Some((re, im)) => SpherePoint::finite(re, im),
        None => SpherePoint::Infinity,
    };
    greens::green_kernel_sphere(&lift(a), &lift(b)).map_err(to_py)
}

/// Full output of a balayage run.
#[pyclass(name = "BalResult", frozen)]
struct PyBalResult {
    inner: BalayageResult,
    manifold: Arc<DiscreteManifold>,
}

#[pymethods]
impl PyBalResult {
    fn nu(&self) -> Vec<f64> {
        self.inner.nu.masses().to_vec()
    }

    fn u(&self) -> Vec<f64> {
        self.inner.u.values().to_vec()
    }

    fn v(&self) -> Vec<f64> {
        self.inner.v.values().to_vec()
    }

    fn psi(&self) -> Vec<f64> {
        self.inner.psi.values().to_vec()
    }

    fn mu(&self) -> Vec<f64> {
        self.inner.mu.masses().to_vec()
    }

    fn omega_mask(&self) -> Vec<bool> {
        self.inner.omega_mask.clone()
    }

    #[getter]
    fn t(&self) -> f64 {
        self.inner.t
    }

    #[getter]
    fn converged(&self) -> bool {
        self.inner.diagnostics.converged
    }

    #[getter]
    fn sweeps(&self) -> usize {
        self.inner.diagnostics.sweeps
    }

    #[getter]
    fn residual_feasibility(&self) -> f64 {
        self.inner.diagnostics.residual_feasibility
    }

    /// Saturated volume including the fractional boundary cell.
    fn saturated_volume(&self) -> f64 {
        self.inner.saturated_volume(&self.manifold)
    }

    /// Componentwise bounds check `min(sigma, lambda) <= nu <= lambda`.
    fn bounds_ok(&self) -> bool {
        balayage::check_bounds(&self.inner).pass
    }
}

/// Partial balayage of `sigma` towards `lam` (default 0).
#[pyfunction]
#[pyo3(signature = (m, sigma, lam=None, polish=true, tolerance=1e-10))]
fn bal(
    m: &PyManifold,
    sigma: &PyCharge,
    lam: Option<&PyCharge>,
    polish: bool,
    tolerance: f64,
) -> PyResult<PyBalResult> {
    let opts = solver_options(polish, tolerance);
    let result = match lam {
        Some(lam) => balayage::bal(&m.inner, &sigma.inner, &lam.inner, &opts),
        None => balayage::bal_zero(&m.inner, &sigma.inner, &opts),
    }
    .map_err(to_py)?;
    Ok(PyBalResult { inner: result, manifold: Arc::clone(&m.inner) })
}

/// Harmonic ball of mass `t` centred at `center`:
/// returns (volume, mask_volume, geodesic_radius, region_mask).
#[pyfunction]
fn harmonic_ball(
    py: Python<'_>,
    m: &PyManifold,
    center: PointArg,
    t: f64,
) -> PyResult<Py<PyTuple>> {
    let c = center.to_point(&m.inner)?;
    let report =
        apps::harmonic_ball(&m.inner, &c, t, &BalayageOptions::default()).map_err(to_py)?;
    let tuple = (
        report.measured_volume,
        report.mask_volume,
        report.measured_geodesic_radius,
        report.region_mask,
    )
        .into_pyobject(py)?;
    Ok(tuple.unbind())
}

/// Geodesic ball of radius `r`: returns (volume, region_mask).
#[pyfunction]
fn geodesic_ball(
    py: Python<'_>,
    m: &PyManifold,
    center: PointArg,
    r: f64,
) -> PyResult<Py<PyTuple>> {
    let c = center.to_point(&m.inner)?;
    let report = apps::geodesic_ball(&m.inner, &c, r).map_err(to_py)?;
    let tuple = (report.measured_volume, report.region_mask).into_pyobject(py)?;
    Ok(tuple.unbind())
}

/// Laplacian growth from an empty initial domain:
/// returns the list of saturated volumes, one per schedule entry.
#[pyfunction]
fn laplacian_growth(m: &PyManifold, center: PointArg, t_schedule: Vec<f64>) -> PyResult<Vec<f64>> {
    let c = center.to_point(&m.inner)?;
    let d0 = vec![false; m.inner.node_count()];
    let trace = apps::laplacian_growth(&m.inner, &c, &d0, &t_schedule, &BalayageOptions::default())
        .map_err(to_py)?;
    Ok(trace.volumes)
}

/// Weighted equilibrium measure for the nodal field `q` and mass `t`:
/// returns (mu_masses, robin_constant, min_slack, support_mask).
#[pyfunction]
fn weighted_equilibrium(
    py: Python<'_>,
    m: &PyManifold,
    q: Vec<f64>,
    t: f64,
) -> PyResult<Py<PyTuple>> {
    let field = Potential::from_values(&m.inner, q).map_err(to_py)?;
    let report = apps::weighted_equilibrium(&m.inner, &field, t, &BalayageOptions::default())
        .map_err(to_py)?;
    let tuple = (
        report.mu.masses().to_vec(),
        report.robin_constant,
        report.min_slack,
        report.support_mask,
    )
        .into_pyobject(py)?;
    Ok(tuple.unbind())
}

/// Radial balayage experiment in B(0, r_outer):
/// returns (s_numeric, s_closed, s_matched, q_r, fraction_lost).
#[pyfunction]
fn radial_solve(
    py: Python<'_>,
    n: usize,
    rho: f64,
    t: f64,
    r_outer: f64,
    bc: &str,
    n_cells: usize,
) -> PyResult<Py<PyTuple>> {
    let bc = match bc {
        "dirichlet" => RadialBc::Dirichlet,
        "neumann" => RadialBc::Neumann,
        _ => return Err(PyValueError::new_err("bc must be 'dirichlet' or 'neumann'")),
    };
    let sc = RadialScenario { n, rho, t, r_outer, bc, n_cells };
    let result = radial::radial_solve(&sc, &BalayageOptions::default()).map_err(to_py)?;
    let tuple = (
        result.s_numeric,
        result.s_closed,
        result.s_matched,
        result.q_r,
        result.fraction_lost,
    )
        .into_pyobject(py)?;
    Ok(tuple.unbind())
}

/// Reference closed-form free-boundary radius for Dirichlet data.
#[pyfunction]
fn closed_form_s(n: usize, rho: f64, t: f64, r_outer: f64) -> PyResult<f64> {
    let sc = RadialScenario { n, rho, t, r_outer, bc: RadialBc::Dirichlet, n_cells: 1024 };
    radial::closed_form_s(&sc).map_err(to_py)
}

/// Value/flux-matched free-boundary radius for Dirichlet data.
#[pyfunction]
fn matched_s(n: usize, rho: f64, t: f64, r_outer: f64) -> PyResult<f64> {
    let sc = RadialScenario { n, rho, t, r_outer, bc: RadialBc::Dirichlet, n_cells: 1024 };
    radial::matched_s(&sc).map_err(to_py)
}

#[pymodule]
fn balayage_py(m: &Bound<'_, PyModule>) -> PyResult<()> {
    m.add("__version__", balayage_core::VERSION)?;
    m.add_class::<PyManifold>()?;
    m.add_class::<PyCharge>()?;
    m.add_class::<PyBalResult>()?;
    m.add_function(wrap_pyfunction!(normalized_mass, m)?)?;
    m.add_function(wrap_pyfunction!(green_potential, m)?)?;
    m.add_function(wrap_pyfunction!(mutual_energy, m)?)?;
    m.add_function(wrap_pyfunction!(green_kernel_sphere, m)?)?;
    m.add_function(wrap_pyfunction!(bal, m)?)?;
    m.add_function(wrap_pyfunction!(harmonic_ball, m)?)?;
    m.add_function(wrap_pyfunction!(geodesic_ball, m)?)?;
    m.add_function(wrap_pyfunction!(laplacian_growth, m)?)?;
    m.add_function(wrap_pyfunction!(weighted_equilibrium, m)?)?;
    m.add_function(wrap_pyfunction!(radial_solve, m)?)?;
    m.add_function(wrap_pyfunction!(closed_form_s, m)?)?;
    m.add_function(wrap_pyfunction!(matched_s, m)?)?;
    Ok(())
}
