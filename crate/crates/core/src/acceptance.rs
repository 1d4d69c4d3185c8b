//! The acceptance battery: one function per criterion, shared by the
//! `balayage verify` subcommand and the integration test suite. Every
//! criterion prints one pass/fail line and carries its individual checks.

use std::f64::consts::PI;
use std::time::{Duration, Instant};

use rand::prelude::*;
use rand_chacha::ChaCha8Rng;

use crate::apps::{
    ball_equivalence_check, harmonic_ball, harmonic_ball_result, laplacian_growth,
    mask_components, quadrature_verify, weighted_equilibrium,
};
use crate::balayage::{
    bal, bal_incremental, bal_zero, check_bounds, check_structure, existence_diagnostic,
    BalayageOptions, DiagnosticInstance, ExistenceClass, DEFAULT_EPS_STRUCT,
};
use crate::charge::{atom, from_density, jordan, volume_form, ChargeDistribution};
use crate::error::Result;
use crate::greens::{green_potential, Potential};
use crate::grid::{
    build_circle, build_flat_ball, build_s3_polar, build_sphere_latlong, build_sphere_polar,
    DiscreteManifold, Point, ProfileBoundary,
};
use crate::obstacle::{solve_brute, solve_pgs, LcpParams, LcpProblem};
use crate::radial::{
    excess_bound_check, excess_limit, radial_solve, RadialBc, RadialScenario,
};

/// One check inside a criterion.
#[derive(Debug, Clone)]
pub struct CheckLine {
    pub label: String,
    pub ok: bool,
}

/// Result of one acceptance criterion.
#[derive(Debug)]
pub struct CriterionReport {
    pub id: usize,
    pub name: &'static str,
    pub pass: bool,
    pub runtime: Duration,
    pub budget: Duration,
    pub checks: Vec<CheckLine>,
}

impl CriterionReport {
    pub fn line(&self) -> String {
        format!(
            "criterion {:2} [{}] {:<22} ({} checks, {:.2}s / budget {:.0}s)",
            self.id,
            if self.pass { "PASS" } else { "FAIL" },
            self.name,
            self.checks.len(),
            self.runtime.as_secs_f64(),
            self.budget.as_secs_f64(),
        )
    }
}

struct Ctx {
    checks: Vec<CheckLine>,
}

impl Ctx {
    fn new() -> Self {
        Ctx { checks: Vec::new() }
    }

    fn check(&mut self, label: impl Into<String>, ok: bool) {
        self.checks.push(CheckLine { label: label.into(), ok });
    }

    fn le(&mut self, label: &str, value: f64, bound: f64) {
        self.check(format!("{label}: {value:.3e} <= {bound:.3e}"), value <= bound);
    }
}

fn opts() -> BalayageOptions {
    BalayageOptions::default()
}

// ---------------------------------------------------------------- 1

/// Circle atoms: the swept charge, the closed-form potential and the
/// structure violation at the sink node.
pub fn criterion_circle_atoms() -> Result<Vec<CheckLine>> {
    let mut ctx = Ctx::new();
    let n = 2000;
    let (a, b) = (0.25, 0.75);
    let m = build_circle(n)?;
    let h = m.grid_spacing();
    let sigma = atom(&m, &Point::Circle(a), 1.0)?.add(&atom(&m, &Point::Circle(b), -2.0)?)?;
    let result = bal_zero(&m, &sigma, &opts())?;
    ctx.check("solver converged", result.diagnostics.converged);

    let b_node = m.nearest_node(&Point::Circle(b))?;
    let l1: f64 = (0..n)
        .map(|i| {
            let expect = if i == b_node { -1.0 } else { 0.0 };
            (result.nu.masses()[i] - expect).abs()
        })
        .sum();
    ctx.le("|nu - (-delta_b)|_1", l1, 1e-6);

    let mut u_err = 0.0f64;
    for i in 0..n {
        let x = i as f64 * h;
        let exact =
            -0.5 * (x - a).abs() + 0.5 * (x - b).abs() + (b - a) * x + (b - a) * (0.5 - b);
        u_err = u_err.max((result.u.values()[i] - exact).abs());
    }
    ctx.le("max |u - closed-form formula|", u_err, 5.0 * h);

    let structure = check_structure(&m, &result, DEFAULT_EPS_STRUCT)?;
    ctx.check("structure formula reports a violation", !structure.pass);
    let worst = structure.worst_node;
    ctx.check(
        format!("violation located at the sink node ({worst:?})"),
        worst.map(|(node, r)| node == b_node && (r - 1.0).abs() < 1e-6) == Some(true),
    );
    Ok(ctx.checks)
}

// ---------------------------------------------------------------- 2

fn cap_angle(m: &DiscreteManifold, mask: &[bool]) -> f64 {
    let mut angle = 0.0f64;
    for i in 0..m.node_count() {
        if mask[i] {
            if let Point::Radial(r) = m.node(i) {
                angle = angle.max(r);
            }
        }
    }
    angle + m.grid_spacing() / 2.0
}

/// Sphere caps on the polar profile: the free-boundary angle solves
/// `2 pi alpha (1 - cos theta0) = 1`.
pub fn criterion_sphere_cap() -> Result<Vec<CheckLine>> {
    let mut ctx = Ctx::new();
    let m = build_sphere_polar(1024)?;
    let h = m.grid_spacing();
    let run = |alpha: f64| -> Result<f64> {
        let sigma =
            atom(&m, &Point::Radial(0.0), 1.0)?.add(&from_density(&m, move |_| -alpha))?;
        let result = bal_zero(&m, &sigma, &opts())?;
        Ok(cap_angle(&m, &result.omega_mask))
    };
    let theta0 = run(1.0 / (2.0 * PI))?;
    ctx.le("alpha = 1/(2 pi): |theta0 - pi/2|", (theta0 - PI / 2.0).abs(), 2.0 * h);
    for alpha in [1.0 / PI, 0.5, 1.0] {
        let theta = run(alpha)?;
        let residual = (2.0 * PI * alpha * (1.0 - theta.cos()) - 1.0).abs();
        ctx.le(&format!("alpha = {alpha:.4}: cap-equation residual"), residual, 1e-2);
    }
    Ok(ctx.checks)
}

// ---------------------------------------------------------------- 3

/// Caps on the 3-sphere profile: `pi alpha (2 xi0 - sin 2 xi0) = 1`.
pub fn criterion_s3_cap() -> Result<Vec<CheckLine>> {
    let mut ctx = Ctx::new();
    let m = build_s3_polar(1024)?;
    for alpha in [1.0 / (2.0 * PI * PI), 1.0 / (PI * PI), 2.0 / (PI * PI)] {
        let sigma =
            atom(&m, &Point::Radial(0.0), 1.0)?.add(&from_density(&m, move |_| -alpha))?;
        let result = bal_zero(&m, &sigma, &opts())?;
        let xi0 = cap_angle(&m, &result.omega_mask);
        let residual = (PI * alpha * (2.0 * xi0 - (2.0 * xi0).sin()) - 1.0).abs();
        ctx.le(&format!("alpha = {alpha:.5}: cap-equation residual"), residual, 1e-2);
    }
    Ok(ctx.checks)
}

// ---------------------------------------------------------------- 4

/// Mesh-refinement nonexistence diagnostic for two point charges on the
/// sphere, and the mixed case with a volume hole.
pub fn criterion_nonexistence() -> Result<Vec<CheckLine>> {
    let mut ctx = Ctx::new();
    let levels = [128usize, 256, 512, 1024];

    let singular = existence_diagnostic(
        |n| {
            let m = build_sphere_polar(n)?;
            let sigma =
                atom(&m, &Point::Radial(0.0), 1.0)?.add(&atom(&m, &Point::Radial(PI), -2.0)?)?;
            Ok(DiagnosticInstance {
                sigma,
                sources: vec![Point::Radial(0.0)],
                sinks: vec![Point::Radial(PI)],
                manifold: m,
            })
        },
        &levels,
        &opts(),
    )?;
    ctx.check(
        format!("delta_N - 2 delta_S classified diverging ({:?})", singular.classification),
        singular.classification == ExistenceClass::Diverging,
    );
    ctx.check(
        format!("log(1/h) fit R^2 = {:.4} > 0.98", singular.r_squared),
        singular.r_squared > 0.98,
    );

    let alpha = 1.0 / (2.0 * PI); // >= 1/(4 pi)
    let mixed = existence_diagnostic(
        |n| {
            let m = build_sphere_polar(n)?;
            let sigma = atom(&m, &Point::Radial(0.0), 1.0)?
                .add(&atom(&m, &Point::Radial(PI), -2.0)?)?
                .add(&from_density(&m, move |_| -alpha))?;
            Ok(DiagnosticInstance {
                sigma,
                sources: vec![Point::Radial(0.0)],
                sinks: vec![Point::Radial(PI)],
                manifold: m,
            })
        },
        &levels,
        &opts(),
    )?;
    ctx.check(
        format!("mixed case classified converging ({:?})", mixed.classification),
        mixed.classification == ExistenceClass::Converging,
    );
    for level in &mixed.levels {
        ctx.le(
            &format!("level {}: atomic sink left untouched", level.resolution),
            level.sink_deviation,
            1e-6,
        );
    }
    Ok(ctx.checks)
}

// ---------------------------------------------------------------- 5

/// Harmonic-ball volume law on three manifolds, plus coincidence with
/// geodesic balls on the sphere and the closed-form-relation residual report.
pub fn criterion_harmonic_balls() -> Result<Vec<CheckLine>> {
    let mut ctx = Ctx::new();
    let circle = build_circle(2000)?;
    let sphere = build_sphere_polar(1024)?;
    let disk = build_flat_ball(2, 1.0, 2048, ProfileBoundary::Dirichlet)?;
    for (label, m, center) in [
        ("circle", &circle, Point::Circle(0.5)),
        ("sphere", &sphere, Point::Radial(0.0)),
        ("flat disk", &disk, Point::Radial(0.0)),
    ] {
        let mut worst = 0.0f64;
        for k in 1..=10 {
            let t = m.total_volume() * 0.088 * k as f64;
            let report = harmonic_ball(m, &center, t, &opts())?;
            worst = worst.max((report.measured_volume - t).abs() / t);
        }
        ctx.le(&format!("{label}: worst relative volume error"), worst, 1e-3);
    }

    let equiv = ball_equivalence_check(&sphere, &Point::Radial(0.0), PI / 3.0, &opts())?;
    ctx.check(
        format!(
            "sphere: harmonic = geodesic up to one cell ({} mismatches)",
            equiv.mismatched_nodes
        ),
        equiv.regions_agree,
    );
    ctx.check(
        format!(
            "closed-form relation residual reported: |pi sin^2(r) - t| = {:.4} (not asserted)",
            equiv.closed_form_residual
        ),
        true,
    );
    let flat = ball_equivalence_check(&disk, &Point::Radial(0.0), 0.5, &opts())?;
    ctx.check(
        format!("flat disk: closed-form relation exact ({:.2e})", flat.closed_form_residual),
        flat.closed_form_residual < 1e-12 && flat.regions_agree,
    );
    Ok(ctx.checks)
}

// ---------------------------------------------------------------- 6

/// Laplacian growth from an empty initial domain on the sphere.
pub fn criterion_laplacian_growth() -> Result<Vec<CheckLine>> {
    let mut ctx = Ctx::new();
    let m = build_sphere_polar(1024)?;
    let h = m.grid_spacing();
    let angles: Vec<f64> = (1..=5).map(|k| k as f64 * PI / 8.0).collect();
    let schedule: Vec<f64> = angles.iter().map(|&a| 2.0 * PI * (1.0 - a.cos())).collect();
    let d0 = vec![false; m.node_count()];
    let trace = laplacian_growth(&m, &Point::Radial(0.0), &d0, &schedule, &opts())?;

    let mut angle_ok = true;
    let mut volume_ok = true;
    for (k, &t) in schedule.iter().enumerate() {
        let measured = cap_angle(&m, &trace.masks[k]);
        if (measured - angles[k]).abs() > 2.0 * h {
            angle_ok = false;
        }
        if (trace.volumes[k] - t).abs() > 1e-3 * t {
            volume_ok = false;
        }
    }
    ctx.check("cap angles match 2 pi (1 - cos theta) = t within 2h", angle_ok);
    ctx.check("vol(D(t)) = t within 1e-3 t", volume_ok);

    let mut nested = true;
    for k in 1..schedule.len() {
        for i in 0..m.node_count() {
            if trace.masks[k - 1][i] && !trace.masks[k][i] {
                nested = false;
            }
        }
    }
    ctx.check("domains are nested", nested);

    // stepwise balayage matches direct balayage within a one-cell collar
    let vol = volume_form(&m);
    let sigma1 = atom(&m, &Point::Radial(0.0), schedule[2])?;
    let sigma2 = atom(&m, &Point::Radial(0.0), schedule[4] - schedule[2])?;
    let (lhs, rhs) = bal_incremental(&m, &sigma1, &sigma2, &vol, &vol, &opts())?;
    let boundary = cap_angle(&m, &rhs.omega_mask);
    let mut collar_ok = true;
    for i in 0..m.node_count() {
        if lhs.omega_mask[i] != rhs.omega_mask[i] {
            if let Point::Radial(r) = m.node(i) {
                if (r - boundary).abs() > 2.0 * h {
                    collar_ok = false;
                }
            }
        }
    }
    ctx.check("incremental stepping matches direct within one cell", collar_ok);
    Ok(ctx.checks)
}

// ---------------------------------------------------------------- 7

/// Radial Dirichlet experiments: free boundary against the reference
/// closed form, the excess-mass fraction limit, and the energy bound.
///
/// Two of the stated checks are knowingly red: for `n != 2` the reference
/// outer-matching equation carries a sign slip in its boundary constant, so
/// its root drifts from the true solution as `R` grows. The solver is
/// instead validated against `matched_s` (value/flux matching, confirmed
/// independently by ODE shooting), and those companion checks pass. The
/// affected stated checks are `n = 1, R = 10` (the closed form sits 3.07h
/// from the truth, just past the 3h gate) and the `n = 3` fraction limit
/// (the true limit is `1 - (rho^n - (rho^2-2t)^(n/2))/(nt) = 0.266`, not
/// `(n-2)/n = 1/3`; `n = 5` passes because there the two values nearly
/// coincide).
pub fn criterion_radial_dirichlet() -> Result<Vec<CheckLine>> {
    let mut ctx = Ctx::new();
    let n_cells = 4096;
    for n in [1usize, 2, 3, 5] {
        for r_outer in [10.0, 100.0] {
            let sc = RadialScenario {
                n,
                rho: 0.8,
                t: 0.1,
                r_outer,
                bc: RadialBc::Dirichlet,
                n_cells,
            };
            let result = radial_solve(&sc, &opts())?;
            let h = r_outer / n_cells as f64;
            ctx.le(
                &format!("n = {n}, R = {r_outer}: |s_numeric - s_closed| (as stated)"),
                (result.s_numeric - result.s_closed).abs(),
                3.0 * h,
            );
            ctx.le(
                &format!("n = {n}, R = {r_outer}: |s_numeric - s_matched| (solver validation)"),
                (result.s_numeric - result.s_matched).abs(),
                1.5 * h,
            );
            let bound = excess_bound_check(&sc, &opts())?;
            ctx.check(
                format!(
                    "n = {n}, R = {r_outer}: q_R^2 = {:.3e} within the support-radius bound {:.3e}",
                    bound.q_r * bound.q_r,
                    bound.bound
                ),
                bound.ok,
            );
            if n <= 3 {
                ctx.check(
                    format!(
                        "n = {n}, R = {r_outer}: hole-radius bound variant {:.3e} also holds",
                        bound.bound_hole_radius
                    ),
                    bound.ok_hole_radius,
                );
            }
        }
    }

    let sweep = [10.0, 30.0, 100.0, 300.0];
    for n in [3usize, 5] {
        let base = RadialScenario {
            n,
            rho: 0.8,
            t: 0.1,
            r_outer: 10.0,
            bc: RadialBc::Dirichlet,
            n_cells,
        };
        let rep = excess_limit(&base, &sweep, n_cells, &opts())?;
        let target = (n as f64 - 2.0) / n as f64;
        ctx.le(
            &format!("n = {n}: |extrapolated fraction - (n-2)/n| / target (as stated)"),
            (rep.extrapolated - target).abs() / target,
            0.02,
        );
        let matched = crate::radial::matched_fraction_limit(n, 0.8, 0.1)?;
        ctx.le(
            &format!(
                "n = {n}: |extrapolated - matched-profile limit {matched:.4}| (solver validation)"
            ),
            (rep.extrapolated - matched).abs() / matched,
            0.01,
        );
    }
    let base2 = RadialScenario {
        n: 2,
        rho: 0.8,
        t: 0.1,
        r_outer: 10.0,
        bc: RadialBc::Dirichlet,
        n_cells,
    };
    let rep2 = excess_limit(&base2, &sweep, n_cells, &opts())?;
    ctx.le("n = 2: relative residual of the 1/log R decay fit", rep2.fit_residual, 0.05);
    ctx.check(
        format!(
            "n = 2: fraction decreases along the sweep ({:.4} -> {:.4})",
            rep2.points.first().unwrap().fraction,
            rep2.points.last().unwrap().fraction
        ),
        rep2.points.windows(2).all(|w| w[1].fraction < w[0].fraction),
    );
    Ok(ctx.checks)
}

// ---------------------------------------------------------------- 8

/// Radial Neumann experiments: exact mass balance and the closed-form
/// free boundary.
pub fn criterion_radial_neumann() -> Result<Vec<CheckLine>> {
    let mut ctx = Ctx::new();
    let n_cells = 2048;
    let r_outer = 2.0;
    for n in [1usize, 2, 3] {
        let sc = RadialScenario { n, rho: 0.8, t: 0.1, r_outer, bc: RadialBc::Neumann, n_cells };
        let result = radial_solve(&sc, &opts())?;
        let h = r_outer / n_cells as f64;
        let expect = (0.8f64.powi(n as i32) - n as f64 * 0.1).powf(1.0 / n as f64);
        ctx.le(
            &format!("n = {n}: |s - (rho^n - n t)^(1/n)|"),
            (result.s_numeric - expect).abs(),
            3.0 * h,
        );
        ctx.le(
            &format!("n = {n}: mass balance |sum nu - sum sigma|"),
            (result.balayage.nu.total() - result.sigma.total()).abs(),
            1e-10 * result.sigma.l1_norm(),
        );
    }
    Ok(ctx.checks)
}

// ---------------------------------------------------------------- 9

/// Weighted equilibrium: uniform case exactly, two-point field on the
/// full sphere with the Robin inequalities and a two-cap complement.
pub fn criterion_equilibrium() -> Result<Vec<CheckLine>> {
    let mut ctx = Ctx::new();

    let m = build_sphere_polar(512)?;
    let t = 0.3;
    let rep = weighted_equilibrium(&m, &Potential::zero(&m), t, &opts())?;
    let exact = (0..m.node_count())
        .all(|i| (rep.mu.masses()[i] - t * m.weight(i)).abs() <= 1e-12 * (1.0 + t));
    ctx.check("Q = 0 gives mu = t vol exactly", exact);

    let m = build_sphere_latlong(48, 48)?;
    let north = atom(&m, &Point::Sphere { theta: 0.0, phi: 0.0 }, 1.0)?;
    let south = atom(&m, &Point::Sphere { theta: PI, phi: 0.0 }, 1.0)?;
    let gn = green_potential(&m, &north)?;
    let gs = green_potential(&m, &south)?;
    let q = Potential::from_values(
        &m,
        gn.values().iter().zip(gs.values()).map(|(&a, &b)| a + b).collect(),
    )?;
    let t = 0.4;
    let rep = weighted_equilibrium(&m, &q, t, &opts())?;
    ctx.check(
        format!("Robin inequality holds globally (min slack {:.2e})", rep.min_slack),
        rep.min_slack >= -1e-6,
    );
    ctx.le("|Q + G^mu - c_Robin| on supp mu", rep.support_deviation, 1e-4);
    let complement: Vec<bool> = rep.support_mask.iter().map(|&b| !b).collect();
    let components = mask_components(&m, &complement);
    ctx.check(format!("support complement = two disjoint caps ({components})"), components == 2);
    ctx.le(
        "equilibrium mass |sum mu - t vol(M)|",
        (rep.mu.total() - t * m.total_volume()).abs(),
        1e-6 * t * m.total_volume(),
    );
    Ok(ctx.checks)
}

// ---------------------------------------------------------------- 10

fn random_sigma(
    rng: &mut ChaCha8Rng,
    m: &DiscreteManifold,
    margin: f64,
) -> Result<ChargeDistribution> {
    let mut sigma = ChargeDistribution::zero(m);
    let atoms = rng.random_range(1..=3);
    for _ in 0..atoms {
        let node = rng.random_range(0..m.node_count());
        let weight = rng.random_range(0.2..1.5) * if rng.random_bool(0.5) { 1.0 } else { -1.0 };
        sigma = sigma.add(&atom(m, &m.node(node), weight)?)?;
    }
    if rng.random_bool(0.5) {
        let c = rng.random_range(-0.5..0.5);
        sigma = sigma.add(&from_density(m, move |_| c))?;
    }
    // shift by a uniform density so the total mass is exactly -margin
    let shift = (sigma.total() + margin) / m.total_volume();
    sigma = sigma.add(&from_density(m, move |_| -shift))?;
    Ok(sigma)
}

fn nonnegative_bump(rng: &mut ChaCha8Rng, m: &DiscreteManifold, mass: f64) -> Result<ChargeDistribution> {
    let node = rng.random_range(0..m.node_count());
    atom(m, &m.node(node), mass)
}

/// Randomized property battery over the core theorems.
pub fn criterion_property_battery(seed: u64) -> Result<Vec<CheckLine>> {
    let mut ctx = Ctx::new();
    let options = opts();
    let manifolds: Vec<(&str, DiscreteManifold)> = vec![
        ("circle[192]", build_circle(192)?),
        ("sphere_latlong[20x20]", build_sphere_latlong(20, 20)?),
        ("sphere_polar[256]", build_sphere_polar(256)?),
    ];

    for (label, m) in &manifolds {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let mut worst_mass = 0.0f64;
        let mut worst_bounds = true;
        let mut worst_cov = 0.0f64;
        let mut worst_mono = 0.0f64;
        let mut worst_comp = 0.0f64;
        let mut worst_v_gap = 0.0f64;
        let mut j_mono_ok = true;
        let runs = 100;
        for _ in 0..runs {
            let margin = rng.random_range(0.05..0.5);
            let sigma = random_sigma(&mut rng, m, margin)?;
            let scale = sigma.l1_norm();
            let result = bal_zero(m, &sigma, &options)?;

            worst_mass = worst_mass.max((result.nu.total() - sigma.total()).abs() / scale);
            worst_bounds &= check_bounds(&result).pass;

            // covariance under a random common shift
            let amp = rng.random_range(-1.0..1.0);
            let freq = rng.random_range(1.0..5.0);
            let tau = from_density(m, move |p| {
                let x = match p {
                    Point::Circle(x) => *x,
                    Point::Radial(r) => *r,
                    Point::Sphere { theta, .. } => *theta,
                };
                amp * (freq * x).sin()
            });
            let shifted = bal(m, &sigma.add(&tau)?, &tau, &options)?;
            for i in 0..m.node_count() {
                let want = result.nu.masses()[i] + tau.masses()[i];
                worst_cov = worst_cov.max((shifted.nu.masses()[i] - want).abs() / scale);
            }

            // monotonicity: sigma1 = sigma - bump <= sigma
            let bump_mass = rng.random_range(0.1..0.6);
            let bump = nonnegative_bump(&mut rng, m, bump_mass)?;
            let smaller = bal_zero(m, &sigma.sub(&bump)?, &options)?;
            for i in 0..m.node_count() {
                worst_mono = worst_mono
                    .max((smaller.nu.masses()[i] - result.nu.masses()[i]) / scale);
            }

            // composition in smaller steps (sigma2 >= 0, within the margin)
            let sigma2_mass = margin * rng.random_range(0.2..0.8);
            let sigma2 = nonnegative_bump(&mut rng, m, sigma2_mass)?;
            let zero = ChargeDistribution::zero(m);
            let (lhs, rhs) = bal_incremental(m, &sigma, &sigma2, &zero, &zero, &options)?;
            for i in 0..m.node_count() {
                worst_comp =
                    worst_comp.max((lhs.nu.masses()[i] - rhs.nu.masses()[i]).abs() / scale);
            }

            // v-system feasibility
            let kv = m.stiffness().mul_vec_alloc(result.v.values());
            for i in 0..m.node_count() {
                worst_v_gap = worst_v_gap
                    .max((result.psi.values()[i] - result.v.values()[i]) / scale)
                    .max((-result.t * m.weight(i) - kv[i]) / scale);
            }

            // J-monotonicity: the pointwise min of two admissible v's with
            // the same t is admissible and has no larger J
            let sigma_b = random_sigma(&mut rng, m, margin)?;
            let other = bal_zero(m, &sigma_b, &options)?;
            let vmin: Vec<f64> = result
                .v
                .values()
                .iter()
                .zip(other.v.values())
                .map(|(&x, &y)| x.min(y))
                .collect();
            let j = |v: &[f64]| -> f64 {
                let kv = m.stiffness().mul_vec_alloc(v);
                let vkv: f64 = v.iter().zip(&kv).map(|(&a, &b)| a * b).sum();
                let wv: f64 = v.iter().zip(m.weights()).map(|(&a, &w)| a * w).sum();
                vkv + 2.0 * result.t * wv
            };
            let j_min = j(&vmin);
            let tol_j = 1e-8 * (1.0 + j_min.abs());
            if j_min > j(result.v.values()) + tol_j || j_min > j(other.v.values()) + tol_j {
                j_mono_ok = false;
            }
        }
        ctx.le(&format!("{label}: mass conservation"), worst_mass, 1e-8);
        ctx.check(format!("{label}: bounds min(sigma,0) <= nu <= 0"), worst_bounds);
        ctx.le(&format!("{label}: covariance"), worst_cov, 1e-8);
        ctx.le(&format!("{label}: monotonicity"), worst_mono, 1e-8);
        ctx.le(&format!("{label}: composition"), worst_comp, 1e-6);
        ctx.le(&format!("{label}: v-system feasibility"), worst_v_gap, 1e-7);
        ctx.check(format!("{label}: J-monotonicity"), j_mono_ok);
    }

    // quadrature inequality on computed saturated sets
    let m = build_sphere_polar(256)?;
    let mut rng = ChaCha8Rng::seed_from_u64(seed ^ 0x5eed);
    let mut quad_ok = true;
    for _ in 0..10 {
        let t = rng.random_range(0.5..4.0);
        let result = harmonic_ball_result(&m, &Point::Radial(0.0), t, &opts())?;
        let source = atom(&m, &Point::Radial(0.0), t)?;
        let probes: Vec<Point> =
            (0..3).map(|_| Point::Radial(rng.random_range(2.2..3.1))).collect();
        let rep = quadrature_verify(&m, &result.omega_mask, &source, &probes)?;
        quad_ok &= rep.pass;
    }
    ctx.check("quadrature inequality on sampled harmonic balls", quad_ok);

    // PGS against the exhaustive oracle on tiny instances
    let mut rng = ChaCha8Rng::seed_from_u64(seed ^ 0xbf);
    let mut worst_oracle = 0.0f64;
    for _ in 0..100 {
        let n = rng.random_range(4..=12);
        let m = build_circle(n)?;
        let mut rhs: Vec<f64>;
        loop {
            rhs = (0..n).map(|_| rng.random_range(-1.0..1.0)).collect();
            if rhs.iter().sum::<f64>() < -0.05 {
                break;
            }
        }
        let p = LcpProblem::new(m.stiffness(), rhs, LcpParams::default())?;
        let fast = solve_pgs(&p)?;
        let slow = solve_brute(&p)?;
        let u_inf = slow.u.iter().fold(0.0f64, |a, &b| a.max(b.abs()));
        for i in 0..n {
            worst_oracle =
                worst_oracle.max((fast.u[i] - slow.u[i]).abs() / (1.0 + u_inf));
        }
    }
    ctx.le("PGS vs brute-force oracle (<= 12 nodes)", worst_oracle, 1e-8);

    // Jordan decomposition sanity over the random pool
    let m = build_circle(64)?;
    let mut rng = ChaCha8Rng::seed_from_u64(seed ^ 0x70);
    let mut jordan_ok = true;
    for _ in 0..50 {
        let sigma = random_sigma(&mut rng, &m, 0.3)?;
        let (p, n) = jordan(&sigma);
        for i in 0..m.node_count() {
            jordan_ok &= p.masses()[i].min(n.masses()[i]) == 0.0
                && (p.masses()[i] - n.masses()[i] - sigma.masses()[i]).abs() == 0.0;
        }
    }
    ctx.check("Jordan decomposition exact on random charges", jordan_ok);

    Ok(ctx.checks)
}

// ----------------------------------------------------------------

type CriterionFn = fn(u64) -> Result<Vec<CheckLine>>;

fn criteria() -> Vec<(usize, &'static str, &'static [&'static str], Duration, CriterionFn)> {
    vec![
        (1, "circle atoms", &["circle", "balayage"][..], Duration::from_secs(1), |_| {
            criterion_circle_atoms()
        }),
        (2, "sphere cap", &["sphere", "balayage"][..], Duration::from_secs(2), |_| {
            criterion_sphere_cap()
        }),
        (3, "s3 cap", &["sphere", "s3", "balayage"][..], Duration::from_secs(2), |_| {
            criterion_s3_cap()
        }),
        (4, "nonexistence diagnostic", &["diagnostic", "sphere"][..], Duration::from_secs(10), |_| {
            criterion_nonexistence()
        }),
        (5, "harmonic balls", &["balls", "apps"][..], Duration::from_secs(5), |_| {
            criterion_harmonic_balls()
        }),
        (6, "laplacian growth", &["growth", "apps"][..], Duration::from_secs(10), |_| {
            criterion_laplacian_growth()
        }),
        (7, "radial dirichlet", &["radial"][..], Duration::from_secs(60), |_| {
            criterion_radial_dirichlet()
        }),
        (8, "radial neumann", &["radial"][..], Duration::from_secs(10), |_| {
            criterion_radial_neumann()
        }),
        (9, "weighted equilibrium", &["equilibrium", "apps"][..], Duration::from_secs(20), |_| {
            criterion_equilibrium()
        }),
        (10, "property battery", &["battery", "properties"][..], Duration::from_secs(60), |seed| {
            criterion_property_battery(seed)
        }),
    ]
}

/// Runs the criteria whose name or tags contain `filter` (all when `None`),
/// printing one line per criterion.
pub fn run_all(filter: Option<&str>, seed: u64) -> Vec<CriterionReport> {
    let mut reports = Vec::new();
    for (id, name, tags, budget, f) in criteria() {
        if let Some(pat) = filter {
            let pat = pat.to_ascii_lowercase();
            if !name.contains(&pat) && !tags.iter().any(|t| t.contains(&pat)) {
                continue;
            }
        }
        let start = Instant::now();
        let (checks, pass) = match f(seed) {
            Ok(checks) => {
                let pass = checks.iter().all(|c| c.ok);
                (checks, pass)
            }
            Err(e) => (
                vec![CheckLine { label: format!("criterion errored: {e}"), ok: false }],
                false,
            ),
        };
        let report = CriterionReport { id, name, pass, runtime: start.elapsed(), budget, checks };
        println!("{}", report.line());
        if !report.pass || log_verbose() {
            for check in &report.checks {
                println!("    [{}] {}", if check.ok { "ok" } else { "FAIL" }, check.label);
            }
        }
        reports.push(report);
    }
    reports
}

fn log_verbose() -> bool {
    crate::scenario::log_level() >= crate::scenario::LogLevel::Debug
}

/// Exit code of a verify run: 0 when every criterion passed, 2 otherwise.
pub fn exit_code(reports: &[CriterionReport]) -> i32 {
    if reports.iter().all(|r| r.pass) {
        0
    } else {
        2
    }
}
