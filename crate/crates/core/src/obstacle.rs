//! The discrete linear complementarity problem behind partial balayage:
//!
//! ```text
//! u >= 0,    K u - sigma >= 0,    u^T (K u - sigma) = 0.
//! ```
//!
//! `solve_pgs` runs projected Gauss-Seidel (PSOR) sweeps in fixed ascending
//! node order, optionally tightened by an active-set refinement that solves
//! the reduced system on the inactive nodes directly. `solve_brute`
//! enumerates all active sets on tiny instances and serves as the
//! independent oracle against which the iterative path is tested.

use crate::error::{Error, Result};
use crate::sparse::{pcg, CircularTridiagonal, CsrMatrix, Tridiagonal};

/// Direct-solve structure of the stiffness pattern, detected once per solve.
enum ChainKind {
    Open(Tridiagonal),
    Cyclic(CircularTridiagonal),
    General,
}

/// Parameters of the projected Gauss-Seidel solver.
#[derive(Debug, Clone, Copy)]
pub struct LcpParams {
    /// Relaxation factor in (0, 2).
    pub relaxation: f64,
    /// Relative tolerance; residuals are compared against `tolerance * |sigma|_1`.
    pub tolerance: f64,
    /// Sweep cap; defaults to `200 n` when `None`.
    pub max_sweeps: Option<usize>,
    /// Enable active-set refinement at checkpoints and after convergence,
    /// tightening residuals to near machine precision.
    pub polish: bool,
}

impl Default for LcpParams {
    fn default() -> Self {
        LcpParams { relaxation: 1.5, tolerance: 1e-10, max_sweeps: None, polish: false }
    }
}

/// A symmetric positive semidefinite LCP instance.
#[derive(Debug, Clone)]
pub struct LcpProblem<'a> {
    pub matrix: &'a CsrMatrix,
    pub rhs: Vec<f64>,
    pub params: LcpParams,
}

impl<'a> LcpProblem<'a> {
    pub fn new(matrix: &'a CsrMatrix, rhs: Vec<f64>, params: LcpParams) -> Result<Self> {
        if rhs.len() != matrix.dim() {
            return Err(Error::InvalidArgument(format!(
                "rhs has {} entries for a {}-dim matrix",
                rhs.len(),
                matrix.dim()
            )));
        }
        if !(params.relaxation > 0.0 && params.relaxation < 2.0) {
            return Err(Error::InvalidArgument(format!(
                "relaxation factor {} not in (0, 2)",
                params.relaxation
            )));
        }
        if !(params.tolerance > 0.0) {
            return Err(Error::InvalidArgument("tolerance must be positive".into()));
        }
        Ok(LcpProblem { matrix, rhs, params })
    }
}

/// Solution of an LCP instance with its residuals.
#[derive(Debug, Clone)]
pub struct LcpSolution {
    pub u: Vec<f64>,
    /// `max_i max(0, (sigma - K u)_i)`, in mass units.
    pub residual_feasibility: f64,
    /// `max_i |u_i (K u - sigma)_i|`, scaled by `max(1, |u|_inf)`.
    pub residual_complementarity: f64,
    pub sweeps_used: usize,
    pub polish_rounds: usize,
    pub converged: bool,
}

fn residuals(k: &CsrMatrix, sigma: &[f64], u: &[f64]) -> (f64, f64) {
    let ku = k.mul_vec_alloc(u);
    let u_scale = u.iter().fold(0.0f64, |m, &v| m.max(v.abs())).max(1.0);
    let mut feas = 0.0f64;
    let mut comp = 0.0f64;
    for i in 0..u.len() {
        let lam = ku[i] - sigma[i];
        feas = feas.max(-lam);
        comp = comp.max((u[i] * lam).abs());
    }
    (feas.max(0.0), comp / u_scale)
}

/// Whether the matrix annihilates constants (closed / Neumann grids).
fn has_constant_kernel(k: &CsrMatrix) -> bool {
    let diag_scale = k
        .diagonal()
        .iter()
        .fold(0.0f64, |m, &v| m.max(v.abs()))
        .max(f64::MIN_POSITIVE);
    k.row_sums().iter().all(|&s| s.abs() <= 1e-9 * diag_scale)
}

/// Projected Gauss-Seidel with fixed ascending sweep order.
///
/// On matrices with constants in the kernel the right side must satisfy
/// the mass side condition `sum(sigma) <= 0`; a positive total mass is
/// rejected outright. Non-convergence within the sweep cap is flagged on
/// the returned solution, not an error.
pub fn solve_pgs(p: &LcpProblem) -> Result<LcpSolution> {
    let k = p.matrix;
    let sigma = &p.rhs;
    let n = k.dim();
    let scale = sigma.iter().map(|v| v.abs()).sum::<f64>().max(f64::MIN_POSITIVE);
    let closed = has_constant_kernel(k);
    if closed {
        let total: f64 = sigma.iter().sum();
        if total > 1e-10 * scale {
            return Err(Error::Infeasible(format!(
                "no feasible u: total mass {total:.6e} > 0 on a closed manifold \
                 (the side condition  integral(sigma) <= integral(lambda)  fails)"
            )));
        }
    }

    let diag = k.diagonal();
    let chain = match k.as_tridiagonal() {
        Some(tri) => ChainKind::Open(tri),
        None => match k.as_circular_tridiagonal() {
            Some(circ) => ChainKind::Cyclic(circ),
            None => ChainKind::General,
        },
    };
    let relax = p.params.relaxation;
    let max_sweeps = p.params.max_sweeps.unwrap_or(200 * n);
    let tol_feas = p.params.tolerance * scale;
    let tol_comp = p.params.tolerance * scale;

    let mut u = vec![0.0; n];
    let mut sweeps = 0usize;
    let mut polish_rounds = 0usize;
    let mut next_polish = 10usize;
    let mut converged = false;
    let check_every = 8usize;

    while sweeps < max_sweeps {
        // one PSOR sweep
        for i in 0..n {
            let d = diag[i];
            if d <= 0.0 {
                continue; // degenerate row (single-node closed manifold)
            }
            let (cols, vals) = k.row(i);
            let mut ku_i = 0.0;
            for (&j, &v) in cols.iter().zip(vals) {
                ku_i += v * u[j];
            }
            let cand = u[i] + relax * (sigma[i] - ku_i) / d;
            u[i] = cand.max(0.0);
        }
        sweeps += 1;

        let at_cap = sweeps == max_sweeps;
        if sweeps % check_every == 0 || at_cap || sweeps == 1 {
            let (feas, comp) = residuals(k, sigma, &u);
            if feas <= tol_feas && comp <= tol_comp {
                converged = true;
                break;
            }
        }
        if p.params.polish && (sweeps >= next_polish || at_cap) {
            next_polish = next_polish.saturating_mul(5);
            let rounds = active_set_refine(k, &chain, sigma, &diag, closed, tol_feas, &mut u);
            polish_rounds += rounds;
            let (feas, comp) = residuals(k, sigma, &u);
            if feas <= tol_feas && comp <= tol_comp {
                converged = true;
                break;
            }
        }
    }
    // optional final tightening once the sweeps have converged
    if converged && p.params.polish && polish_rounds == 0 {
        polish_rounds += active_set_refine(k, &chain, sigma, &diag, closed, tol_feas, &mut u);
    }

    let (residual_feasibility, residual_complementarity) = residuals(k, sigma, &u);
    let converged = residual_feasibility <= tol_feas && residual_complementarity <= tol_comp;
    Ok(LcpSolution {
        u,
        residual_feasibility,
        residual_complementarity,
        sweeps_used: sweeps,
        polish_rounds,
        converged,
    })
}

/// Solve `K_II x = sigma_I` with the complement pinned at zero. Open and
/// cyclic chains are solved directly run by run; anything else falls back
/// to masked conjugate gradients, warm-started from the previous round.
fn masked_solve(
    k: &CsrMatrix,
    chain: &ChainKind,
    sigma: &[f64],
    pinned: &[bool],
    warm: Option<&[f64]>,
    tol_abs: f64,
) -> Vec<f64> {
    let n = k.dim();
    match chain {
        ChainKind::Open(tri) => {
            let mut x = vec![0.0; n];
            let mut i = 0;
            while i < n {
                if pinned[i] {
                    i += 1;
                    continue;
                }
                let lo = i;
                while i + 1 < n && !pinned[i + 1] {
                    i += 1;
                }
                tri.solve_run(lo, i, sigma, &mut x);
                i += 1;
            }
            x
        }
        ChainKind::Cyclic(circ) => {
            // any pinned node cuts the ring into ordinary chains
            match (0..n).find(|&i| pinned[i]) {
                Some(anchor) => {
                    let mut x = vec![0.0; n];
                    let mut offset = 1;
                    while offset < n {
                        if pinned[(anchor + offset) % n] {
                            offset += 1;
                            continue;
                        }
                        let start = (anchor + offset) % n;
                        let mut len = 1;
                        while offset + len < n && !pinned[(anchor + offset + len) % n] {
                            len += 1;
                        }
                        circ.solve_run(start, len, sigma, &mut x);
                        offset += len;
                    }
                    x
                }
                None => {
                    let (x, _) = pcg(k, sigma, Some(pinned), warm, false, tol_abs, 40 * n);
                    x
                }
            }
        }
        ChainKind::General => {
            let (x, _) = pcg(k, sigma, Some(pinned), warm, false, tol_abs, 40 * n);
            x
        }
    }
}

/// Primal-dual active-set refinement (Hintermueller-Ito-Kunisch rule with
/// the diagonal as scaling). Starts from the current iterate, returns the
/// number of reduced solves performed, and keeps the best refined point.
///
/// Free-boundary fronts move at most one grid cell per round, so the round
/// cap must allow the front to cross the domain: chains get a cap of the
/// node count (rounds are O(n) Thomas solves), other grids a flat cap.
fn active_set_refine(
    k: &CsrMatrix,
    chain: &ChainKind,
    sigma: &[f64],
    diag: &[f64],
    closed: bool,
    tol_feas: f64,
    u: &mut Vec<f64>,
) -> usize {
    let n = k.dim();
    let max_rounds = if matches!(chain, ChainKind::General) { 200 } else { n + 8 };
    let entry = residuals(k, sigma, u);
    let mut best_score = entry.0.max(entry.1);

    let mut ku = k.mul_vec_alloc(u);
    let mut active: Vec<bool> = (0..n)
        .map(|i| diag[i] <= 0.0 || (ku[i] - sigma[i]) > diag[i] * u[i])
        .collect();
    let mut rounds = 0usize;
    let mut prev: Option<Vec<f64>> = None;

    for _ in 0..max_rounds {
        let n_active = active.iter().filter(|&&a| a).count();
        let (x, fixed_point) = if n_active == n {
            // all nodes pinned: u = 0, feasible iff sigma <= 0
            (vec![0.0; n], true)
        } else if n_active == 0 && closed {
            break; // reduced system would be singular
        } else {
            rounds += 1;
            let x = masked_solve(k, chain, sigma, &active, prev.as_deref(), 0.05 * tol_feas);
            ku = k.mul_vec_alloc(&x);
            let new_active: Vec<bool> = (0..n)
                .map(|i| diag[i] <= 0.0 || (ku[i] - sigma[i]) > diag[i] * x[i])
                .collect();
            let fixed = new_active == active;
            active = new_active;
            prev = Some(x.clone());
            (x, fixed)
        };
        // clamp the machine-level negatives left by the inner solver and
        // keep the best iterate seen, fixed point or not
        let clamped: Vec<f64> = x.iter().map(|&v| v.max(0.0)).collect();
        let r = residuals(k, sigma, &clamped);
        let score = r.0.max(r.1);
        if score <= best_score {
            best_score = score;
            *u = clamped;
        }
        if fixed_point {
            break;
        }
    }
    rounds
}

/// Exhaustive active-set oracle for instances of dimension at most 16.
///
/// Every subset of nodes is tried as the zero set; the reduced linear
/// system is solved densely and candidates are kept when `u >= 0` and
/// `K u - sigma >= 0` hold within 1e-12 (absolute, scaled by the data).
/// All surviving candidates must agree within 1e-9, which asserts the
/// discrete uniqueness of the solution.
pub fn solve_brute(p: &LcpProblem) -> Result<LcpSolution> {
    let k = p.matrix;
    let sigma = &p.rhs;
    let n = k.dim();
    if n > 16 {
        return Err(Error::InvalidArgument(format!(
            "brute-force oracle limited to 16 nodes, got {n}"
        )));
    }
    let mut dense = vec![vec![0.0; n]; n];
    for i in 0..n {
        let (cols, vals) = k.row(i);
        for (&j, &v) in cols.iter().zip(vals) {
            dense[i][j] = v;
        }
    }
    let sig_scale = sigma.iter().fold(0.0f64, |m, &v| m.max(v.abs()));

    let mut best: Option<Vec<f64>> = None;
    for mask in 0u32..(1u32 << n) {
        // bit set = node active (u = 0); solve on the complement
        let free: Vec<usize> = (0..n).filter(|&i| mask & (1 << i) == 0).collect();
        let u = if free.is_empty() {
            vec![0.0; n]
        } else {
            let m = free.len();
            let mut a = vec![vec![0.0; m + 1]; m];
            for (r, &i) in free.iter().enumerate() {
                for (c, &j) in free.iter().enumerate() {
                    a[r][c] = dense[i][j];
                }
                a[r][m] = sigma[i];
            }
            match gauss_solve(&mut a) {
                Some(x) => {
                    let mut u = vec![0.0; n];
                    for (r, &i) in free.iter().enumerate() {
                        u[i] = x[r];
                    }
                    u
                }
                None => continue, // singular subsystem
            }
        };
        let u_scale = u.iter().fold(0.0f64, |m, &v| m.max(v.abs()));
        let atol_u = 1e-12 * (1.0 + u_scale);
        let atol_f = 1e-12 * (1.0 + sig_scale);
        if u.iter().any(|&v| v < -atol_u) {
            continue;
        }
        let ku = k.mul_vec_alloc(&u);
        if (0..n).any(|i| ku[i] - sigma[i] < -atol_f) {
            continue;
        }
        match &best {
            None => best = Some(u),
            Some(b) => {
                let diff = b
                    .iter()
                    .zip(&u)
                    .fold(0.0f64, |m, (&x, &y)| m.max((x - y).abs()));
                if diff > 1e-9 {
                    return Err(Error::SolverDiverged(format!(
                        "brute-force candidates disagree by {diff:.3e}; instance is degenerate"
                    )));
                }
            }
        }
    }
    let u = best.ok_or_else(|| {
        Error::Infeasible("no feasible active set: the discrete balayage does not exist".into())
    })?;
    let (residual_feasibility, residual_complementarity) = residuals(k, sigma, &u);
    Ok(LcpSolution {
        u,
        residual_feasibility,
        residual_complementarity,
        sweeps_used: 0,
        polish_rounds: 0,
        converged: true,
    })
}

/// Gaussian elimination with partial pivoting on an augmented system;
/// returns `None` when a pivot degenerates.
fn gauss_solve(a: &mut [Vec<f64>]) -> Option<Vec<f64>> {
    let m = a.len();
    let scale = a
        .iter()
        .flat_map(|row| row[..m].iter())
        .fold(0.0f64, |acc, &v| acc.max(v.abs()))
        .max(f64::MIN_POSITIVE);
    for col in 0..m {
        let (pivot_row, pivot) = (col..m)
            .map(|r| (r, a[r][col].abs()))
            .max_by(|x, y| x.1.total_cmp(&y.1))
            .unwrap();
        if pivot <= 1e-12 * scale {
            return None;
        }
        a.swap(col, pivot_row);
        for r in col + 1..m {
            let f = a[r][col] / a[col][col];
            if f == 0.0 {
                continue;
            }
            for c in col..=m {
                a[r][c] -= f * a[col][c];
            }
        }
    }
    let mut x = vec![0.0; m];
    for r in (0..m).rev() {
        let mut acc = a[r][m];
        for c in r + 1..m {
            acc -= a[r][c] * x[c];
        }
        x[r] = acc / a[r][r];
    }
    Some(x)
}

/// The discrete obstacle functional `u^T K u - 2 u^T sigma` whose
/// constrained minimizer the LCP solution is.
pub fn objective(p: &LcpProblem, u: &[f64]) -> f64 {
    let ku = p.matrix.mul_vec_alloc(u);
    let uku: f64 = u.iter().zip(&ku).map(|(&a, &b)| a * b).sum();
    let us: f64 = u.iter().zip(&p.rhs).map(|(&a, &b)| a * b).sum();
    uku - 2.0 * us
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::charge::atom;
    use crate::grid::{build_circle, build_flat_ball, Point, ProfileBoundary};
    use proptest::prelude::*;
    use rand::prelude::*;
    use rand_chacha::ChaCha8Rng;

    fn random_negative_total_rhs(rng: &mut ChaCha8Rng, n: usize) -> Vec<f64> {
        loop {
            let v: Vec<f64> = (0..n).map(|_| rng.random_range(-1.0..1.0)).collect();
            let total: f64 = v.iter().sum();
            if total < -0.05 {
                return v;
            }
        }
    }

    #[test]
    fn zero_rhs_gives_zero_solution() {
        let m = build_circle(8).unwrap();
        let p = LcpProblem::new(m.stiffness(), vec![0.0; 8], LcpParams::default()).unwrap();
        let s = solve_pgs(&p).unwrap();
        assert!(s.converged);
        assert!(s.u.iter().all(|&v| v == 0.0));
        assert_eq!(s.residual_feasibility, 0.0);
        assert_eq!(s.residual_complementarity, 0.0);
    }

    #[test]
    fn positive_total_on_closed_manifold_rejected() {
        let m = build_circle(8).unwrap();
        let mut rhs = vec![0.0; 8];
        rhs[2] = 1.0;
        let p = LcpProblem::new(m.stiffness(), rhs, LcpParams::default()).unwrap();
        assert!(matches!(solve_pgs(&p), Err(Error::Infeasible(_))));
    }

    #[test]
    fn brute_zero_rhs_all_active() {
        let m = build_circle(6).unwrap();
        let p = LcpProblem::new(m.stiffness(), vec![0.0; 6], LcpParams::default()).unwrap();
        let s = solve_brute(&p).unwrap();
        assert!(s.u.iter().all(|&v| v == 0.0));
    }

    #[test]
    fn degenerate_single_node() {
        // a 1-node closed manifold has K = [0]; with sigma < 0 nothing moves
        let k = CsrMatrix::from_triplets(1, &[(0, 0, 0.0)]);
        let p = LcpProblem::new(&k, vec![-0.3], LcpParams::default()).unwrap();
        let s = solve_pgs(&p).unwrap();
        assert!(s.converged);
        assert_eq!(s.u, vec![0.0]);
        let b = solve_brute(&p).unwrap();
        assert_eq!(b.u, vec![0.0]);
    }

    #[test]
    fn pgs_matches_brute_on_seeded_instances() {
        let mut rng = ChaCha8Rng::seed_from_u64(42);
        for trial in 0..60 {
            let n = rng.random_range(4..=12);
            let m = build_circle(n).unwrap();
            let rhs = random_negative_total_rhs(&mut rng, n);
            let p = LcpProblem::new(m.stiffness(), rhs, LcpParams::default()).unwrap();
            let fast = solve_pgs(&p).unwrap();
            let slow = solve_brute(&p).unwrap();
            assert!(fast.converged, "trial {trial} did not converge");
            let u_inf = slow.u.iter().fold(0.0f64, |a, &b| a.max(b.abs()));
            for i in 0..n {
                assert!(
                    (fast.u[i] - slow.u[i]).abs() <= 1e-8 * (1.0 + u_inf),
                    "trial {trial}, node {i}: {} vs {}",
                    fast.u[i],
                    slow.u[i]
                );
            }
        }
    }

    #[test]
    fn dirichlet_instances_allow_positive_total() {
        let mut rng = ChaCha8Rng::seed_from_u64(7);
        for _ in 0..20 {
            let m = build_flat_ball(2, 1.0, 10, ProfileBoundary::Dirichlet).unwrap();
            let rhs: Vec<f64> = (0..10).map(|_| rng.random_range(-1.0..1.0)).collect();
            let p = LcpProblem::new(m.stiffness(), rhs, LcpParams::default()).unwrap();
            let fast = solve_pgs(&p).unwrap();
            let slow = solve_brute(&p).unwrap();
            assert!(fast.converged);
            for i in 0..10 {
                assert!((fast.u[i] - slow.u[i]).abs() <= 1e-8 * (1.0 + slow.u[i].abs()));
            }
        }
    }

    #[test]
    fn complementarity_and_nonempty_active_set() {
        let m = build_circle(32).unwrap();
        let sigma = atom(&m, &Point::Circle(0.25), 1.0)
            .unwrap()
            .add(&atom(&m, &Point::Circle(0.75), -2.0).unwrap())
            .unwrap();
        let p =
            LcpProblem::new(m.stiffness(), sigma.masses().to_vec(), LcpParams::default()).unwrap();
        let s = solve_pgs(&p).unwrap();
        assert!(s.converged);
        let ku = m.stiffness().mul_vec_alloc(&s.u);
        let scale = sigma.l1_norm();
        let u_scale = s.u.iter().fold(1.0f64, |a, &b| a.max(b));
        for i in 0..32 {
            let mn = (s.u[i] / u_scale).min((ku[i] - sigma.masses()[i]) / scale);
            assert!(mn.abs() <= 1e-8, "node {i}: min {mn}");
        }
        // the free additive constant is pinned: at least one contact node
        assert!(s.u.iter().any(|&v| v == 0.0));
    }

    #[test]
    fn objective_monotone_across_sweeps() {
        let m = build_circle(24).unwrap();
        let sigma = atom(&m, &Point::Circle(0.1), 0.8)
            .unwrap()
            .add(&atom(&m, &Point::Circle(0.6), -1.5).unwrap())
            .unwrap();
        let mut previous = f64::INFINITY;
        for cap in 1..=40 {
            let p = LcpProblem::new(
                m.stiffness(),
                sigma.masses().to_vec(),
                LcpParams { max_sweeps: Some(cap), ..LcpParams::default() },
            )
            .unwrap();
            let s = solve_pgs(&p).unwrap();
            let obj = objective(&p, &s.u);
            assert!(obj <= previous + 1e-12, "sweep {cap}: {obj} > {previous}");
            previous = obj;
        }
    }

    #[test]
    fn objective_minimal_against_feasible_perturbations() {
        let m = build_circle(16).unwrap();
        let sigma = atom(&m, &Point::Circle(0.3), 0.5)
            .unwrap()
            .add(&atom(&m, &Point::Circle(0.8), -1.0).unwrap())
            .unwrap();
        let p =
            LcpProblem::new(m.stiffness(), sigma.masses().to_vec(), LcpParams::default()).unwrap();
        let s = solve_pgs(&p).unwrap();
        let base = objective(&p, &s.u);
        for i in 0..16 {
            let mut pert = s.u.clone();
            pert[i] += 1e-3;
            assert!(objective(&p, &pert) >= base - 1e-12);
        }
    }

    #[test]
    fn polish_tightens_residuals() {
        let m = build_circle(400).unwrap();
        let sigma = atom(&m, &Point::Circle(0.25), 1.0)
            .unwrap()
            .add(&atom(&m, &Point::Circle(0.75), -2.0).unwrap())
            .unwrap();
        let p = LcpProblem::new(
            m.stiffness(),
            sigma.masses().to_vec(),
            LcpParams { polish: true, ..LcpParams::default() },
        )
        .unwrap();
        let s = solve_pgs(&p).unwrap();
        assert!(s.converged);
        assert!(s.polish_rounds > 0);
        assert!(s.residual_feasibility <= 1e-12);
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(24))]
        #[test]
        fn oracle_agreement_property(seed in 0u64..5000) {
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            let n = rng.random_range(4..=10);
            let m = build_circle(n).unwrap();
            let rhs = random_negative_total_rhs(&mut rng, n);
            let p = LcpProblem::new(m.stiffness(), rhs, LcpParams::default()).unwrap();
            let fast = solve_pgs(&p).unwrap();
            let slow = solve_brute(&p).unwrap();
            prop_assert!(fast.converged);
            let u_inf = slow.u.iter().fold(0.0f64, |a, &b| a.max(b.abs()));
            for i in 0..n {
                prop_assert!((fast.u[i] - slow.u[i]).abs() <= 1e-8 * (1.0 + u_inf));
            }
        }
    }
}
