//! Shared generators and independent oracles for the integration suites.
//!
//! The oracles deliberately avoid the production solve path: the equilibrium
//! oracle runs damped Newton with finite-difference Jacobians on the raw
//! quadratic equations, the relaxation oracle integrates the fast subsystem
//! to stationarity, and the derivative oracle differentiates the solver
//! numerically. Agreement between any two is evidence neither is wrong.

use rand::Rng;
use rand_chacha::ChaCha8Rng;
use tqssa::full::FullState;
use tqssa::matrix::{lu_solve, DenseMatrix};
use tqssa::network::{validate_network, NetworkSpec, Severity};
use tqssa::ode::{integrate, IntegratorConfig};
use tqssa::reduction::solve_complexes;

/// Log-uniform draw in [lo, hi].
pub fn log_uniform(rng: &mut ChaCha8Rng, lo: f64, hi: f64) -> f64 {
    let t: f64 = rng.gen();
    (lo.ln() + t * (hi.ln() - lo.ln())).exp()
}

/// Random class-conforming network: rates log-uniform in [0.3, 3] so every
/// ratio tier stays O(1), totals log-uniform in [0.5, 5], p0 interior.
/// `dense` activates every edge (including autocatalytic diagonals); sparse
/// keeps each edge with probability 0.4 but guarantees at least one edge so
/// the manifold systems are non-trivial.
pub fn random_spec(rng: &mut ChaCha8Rng, n: usize, dense: bool) -> NetworkSpec {
    let mut pp = vec![vec![false; n]; n];
    let mut ep = vec![vec![false; n]; n];
    loop {
        let mut any = false;
        for i in 0..n {
            for j in 0..n {
                pp[i][j] = dense || rng.gen::<f64>() < 0.4;
                ep[i][j] = dense || rng.gen::<f64>() < 0.4;
                any |= pp[i][j] || ep[i][j];
            }
        }
        if any {
            break;
        }
    }

    let triple = |mask: &Vec<Vec<bool>>, rng: &mut ChaCha8Rng| {
        let mut out = [
            DenseMatrix::zeros(n, n),
            DenseMatrix::zeros(n, n),
            DenseMatrix::zeros(n, n),
        ];
        for i in 0..n {
            for j in 0..n {
                if mask[i][j] {
                    for m in out.iter_mut() {
                        m[(i, j)] = log_uniform(rng, 0.3, 3.0);
                    }
                }
            }
        }
        out
    };
    let [k1, k_neg1, k2] = triple(&pp, rng);
    let [l1, l_neg1, l2] = triple(&ep, rng);

    let u_total: Vec<f64> = (0..n).map(|_| log_uniform(rng, 0.5, 5.0)).collect();
    let e_total: Vec<f64> = (0..n).map(|_| log_uniform(rng, 0.5, 5.0)).collect();
    let p0: Vec<f64> = u_total
        .iter()
        .map(|u| u * rng.gen_range(0.05..0.95))
        .collect();

    let spec = NetworkSpec { n, k1, k_neg1, k2, l1, l_neg1, l2, u_total, e_total, p0 };
    assert!(
        !validate_network(&spec)
            .iter()
            .any(|d| d.severity == Severity::Error),
        "generator produced an invalid network"
    );
    spec
}

/// Interior active-protein point whose manifold image is physical: derived
/// free species non-negative and every total-protein coordinate within its
/// conserved budget. The reduction's guarantees are scoped to that region,
/// and outside it the fast subsystem need not relax to the manifold, so
/// unphysical draws are rejected (shrinking the range until one lands).
pub fn random_interior_p(rng: &mut ChaCha8Rng, spec: &NetworkSpec) -> Vec<f64> {
    let mut hi = 0.9;
    loop {
        let p: Vec<f64> = spec
            .u_total
            .iter()
            .map(|u| u * rng.gen_range(0.02..hi))
            .collect();
        if let Ok(sol) = solve_complexes(spec, &p) {
            let state = FullState::assemble(spec, p.clone(), sol.c_u, sol.c_e);
            let physical = state.u.iter().all(|v| *v >= 0.0)
                && state.e.iter().all(|v| *v >= 0.0)
                && state
                    .p_bar()
                    .iter()
                    .zip(spec.u_total.iter())
                    .all(|(pb, u)| pb <= u);
            if physical {
                return p;
            }
        }
        hi = (hi * 0.95).max(0.03);
    }
}

/// Row sums of C_U: per-protein substrate bound in PP complexes.
pub fn cu_shares(c_u: &DenseMatrix) -> Vec<f64> {
    (0..c_u.rows())
        .map(|i| (0..c_u.cols()).map(|j| c_u[(i, j)]).sum())
        .collect()
}

/// Column sums of C_E: per-protein share bound in EP complexes.
pub fn ce_shares(c_e: &DenseMatrix) -> Vec<f64> {
    (0..c_e.cols())
        .map(|j| (0..c_e.rows()).map(|i| c_e[(i, j)]).sum())
        .collect()
}

fn active_entries(rate: &DenseMatrix) -> Vec<(usize, usize)> {
    let mut out = Vec::new();
    for i in 0..rate.rows() {
        for j in 0..rate.cols() {
            if rate[(i, j)] > 0.0 {
                out.push((i, j));
            }
        }
    }
    out
}

/// Active complexes reconstructed from an unknown vector, plus the free
/// species implied by conservation at active-protein point `p`.
struct DaeState {
    c_u: DenseMatrix,
    c_e: DenseMatrix,
    u: Vec<f64>,
    e: Vec<f64>,
}

fn dae_state(spec: &NetworkSpec, p: &[f64], act_u: &[(usize, usize)], act_e: &[(usize, usize)], x: &[f64]) -> DaeState {
    let n = spec.n;
    let mut c_u = DenseMatrix::zeros(n, n);
    let mut c_e = DenseMatrix::zeros(n, n);
    for (m, &(i, j)) in act_u.iter().enumerate() {
        c_u[(i, j)] = x[m];
    }
    for (m, &(i, j)) in act_e.iter().enumerate() {
        c_e[(i, j)] = x[act_u.len() + m];
    }
    let mut u = vec![0.0; n];
    let mut e = vec![0.0; n];
    for j in 0..n {
        let as_enzyme: f64 = (0..n).map(|s| c_u[(j, s)]).sum();
        let as_substrate: f64 = (0..n).map(|r| c_u[(r, j)]).sum();
        let in_ep: f64 = (0..n).map(|r| c_e[(r, j)]).sum();
        let p_bar = p[j] + as_enzyme + in_ep;
        u[j] = spec.u_total[j] - p_bar - as_substrate + c_u[(j, j)];
    }
    for i in 0..n {
        let bound: f64 = (0..n).map(|s| c_e[(i, s)]).sum();
        e[i] = spec.e_total[i] - bound;
    }
    DaeState { c_u, c_e, u, e }
}

fn dae_residual(spec: &NetworkSpec, p: &[f64], act_u: &[(usize, usize)], act_e: &[(usize, usize)], x: &[f64]) -> Vec<f64> {
    let st = dae_state(spec, p, act_u, act_e, x);
    let mut f = Vec::with_capacity(x.len());
    for &(i, j) in act_u {
        f.push(
            spec.k1[(i, j)] * p[i] * st.u[j]
                - (spec.k_neg1[(i, j)] + spec.k2[(i, j)]) * st.c_u[(i, j)],
        );
    }
    for &(i, j) in act_e {
        f.push(
            spec.l1[(i, j)] * st.e[i] * p[j]
                - (spec.l_neg1[(i, j)] + spec.l2[(i, j)]) * st.c_e[(i, j)],
        );
    }
    f
}

fn norm_inf(v: &[f64]) -> f64 {
    v.iter().fold(0.0f64, |a, b| a.max(b.abs()))
}

/// Damped-Newton equilibrium of the raw quadratic complex equations, started
/// from zero, with a finite-difference Jacobian. Returns (C_U, C_E).
pub fn newton_dae_oracle(spec: &NetworkSpec, p: &[f64]) -> (DenseMatrix, DenseMatrix) {
    let act_u = active_entries(&spec.k1);
    let act_e = active_entries(&spec.l1);
    let m = act_u.len() + act_e.len();
    let mut x = vec![0.0; m];
    if m == 0 {
        return (DenseMatrix::zeros(spec.n, spec.n), DenseMatrix::zeros(spec.n, spec.n));
    }

    let mut f = dae_residual(spec, p, &act_u, &act_e, &x);
    for _ in 0..100 {
        let fnorm = norm_inf(&f);
        if fnorm <= 1e-12 {
            break;
        }
        let mut jac = DenseMatrix::zeros(m, m);
        for k in 0..m {
            let h = 1e-7 * (1.0 + x[k].abs());
            let mut xp = x.clone();
            xp[k] += h;
            let mut xm = x.clone();
            xm[k] -= h;
            let fp = dae_residual(spec, p, &act_u, &act_e, &xp);
            let fm = dae_residual(spec, p, &act_u, &act_e, &xm);
            for r in 0..m {
                jac[(r, k)] = (fp[r] - fm[r]) / (2.0 * h);
            }
        }
        let rhs = DenseMatrix::from_fn(m, 1, |r, _| -f[r]);
        let step = lu_solve(&jac, &rhs).expect("oracle Newton system singular");

        let mut lambda = 1.0;
        loop {
            let trial: Vec<f64> = (0..m).map(|r| x[r] + lambda * step[(r, 0)]).collect();
            let ft = dae_residual(spec, p, &act_u, &act_e, &trial);
            if norm_inf(&ft) < fnorm || lambda < 1e-8 {
                x = trial;
                f = ft;
                break;
            }
            lambda *= 0.5;
        }
    }
    assert!(
        norm_inf(&f) <= 1e-10,
        "oracle Newton failed to converge: |F| = {:e}",
        norm_inf(&f)
    );

    let st = dae_state(spec, p, &act_u, &act_e, &x);
    (st.c_u, st.c_e)
}

/// Long-time limit of the fast complex subsystem with the total-protein
/// coordinate frozen at the value implied by (p, C_U_ref, C_E_ref). Started
/// from zero complexes; the limit is the manifold point, so agreement with
/// the candidate certifies it. Returns (C_U, C_E) at the final time.
pub fn relaxation_oracle(
    spec: &NetworkSpec,
    p: &[f64],
    c_u_ref: &DenseMatrix,
    c_e_ref: &DenseMatrix,
) -> (DenseMatrix, DenseMatrix) {
    let n = spec.n;
    let act_u = active_entries(&spec.k1);
    let act_e = active_entries(&spec.l1);
    let m = act_u.len() + act_e.len();
    if m == 0 {
        return (DenseMatrix::zeros(n, n), DenseMatrix::zeros(n, n));
    }

    let su_ref = cu_shares(c_u_ref);
    let se_ref = ce_shares(c_e_ref);
    let p_bar: Vec<f64> = (0..n).map(|i| p[i] + su_ref[i] + se_ref[i]).collect();

    let rhs = |_t: f64, y: &[f64], dy: &mut [f64]| -> Result<(), tqssa::ode::RhsError> {
        let mut c_u = DenseMatrix::zeros(n, n);
        let mut c_e = DenseMatrix::zeros(n, n);
        for (k, &(i, j)) in act_u.iter().enumerate() {
            c_u[(i, j)] = y[k];
        }
        for (k, &(i, j)) in act_e.iter().enumerate() {
            c_e[(i, j)] = y[act_u.len() + k];
        }
        let su = cu_shares(&c_u);
        let se = ce_shares(&c_e);
        let pv: Vec<f64> = (0..n).map(|i| p_bar[i] - su[i] - se[i]).collect();
        let mut u = vec![0.0; n];
        let mut e = vec![0.0; n];
        for j in 0..n {
            let as_substrate: f64 = (0..n).map(|r| c_u[(r, j)]).sum();
            u[j] = spec.u_total[j] - p_bar[j] - as_substrate + c_u[(j, j)];
        }
        for i in 0..n {
            let bound: f64 = (0..n).map(|s| c_e[(i, s)]).sum();
            e[i] = spec.e_total[i] - bound;
        }
        for (k, &(i, j)) in act_u.iter().enumerate() {
            dy[k] = spec.k1[(i, j)] * pv[i] * u[j]
                - (spec.k_neg1[(i, j)] + spec.k2[(i, j)]) * c_u[(i, j)];
        }
        for (k, &(i, j)) in act_e.iter().enumerate() {
            dy[act_u.len() + k] = spec.l1[(i, j)] * e[i] * pv[j]
                - (spec.l_neg1[(i, j)] + spec.l2[(i, j)]) * c_e[(i, j)];
        }
        Ok(())
    };

    let mut cfg = IntegratorConfig::new(200.0, 100.0);
    cfg.rtol = 1e-10;
    cfg.atol = 1e-12;
    let sol = integrate(rhs, &vec![0.0; m], &cfg).expect("relaxation oracle integration failed");
    let last = sol.states.last().unwrap();
    let prev = &sol.states[sol.states.len() - 2];
    let drift: f64 = last
        .iter()
        .zip(prev.iter())
        .fold(0.0f64, |a, (x, y)| a.max((x - y).abs()));
    assert!(drift <= 1e-8, "fast subsystem not stationary: drift {drift:e}");

    let mut c_u = DenseMatrix::zeros(n, n);
    let mut c_e = DenseMatrix::zeros(n, n);
    for (k, &(i, j)) in act_u.iter().enumerate() {
        c_u[(i, j)] = last[k];
    }
    for (k, &(i, j)) in act_e.iter().enumerate() {
        c_e[(i, j)] = last[act_u.len() + k];
    }
    (c_u, c_e)
}

/// 5-point central-difference derivatives of the complex shares: returns
/// (∂(C_U V)/∂P, ∂(C_Eᵗ V)/∂P) with step 1e−5·scale per coordinate.
pub fn fd_share_jacobians(spec: &NetworkSpec, p: &[f64]) -> (DenseMatrix, DenseMatrix) {
    let n = spec.n;
    let shares_at = |q: &[f64]| -> (Vec<f64>, Vec<f64>) {
        let sol = solve_complexes(spec, q).expect("finite-difference probe solve failed");
        (cu_shares(&sol.c_u), ce_shares(&sol.c_e))
    };
    let mut d_su = DenseMatrix::zeros(n, n);
    let mut d_se = DenseMatrix::zeros(n, n);
    for k in 0..n {
        let h = 1e-5 * (1.0 + p[k].abs());
        let probe = |mult: f64| {
            let mut q = p.to_vec();
            q[k] += mult * h;
            shares_at(&q)
        };
        let (su_m2, se_m2) = probe(-2.0);
        let (su_m1, se_m1) = probe(-1.0);
        let (su_p1, se_p1) = probe(1.0);
        let (su_p2, se_p2) = probe(2.0);
        for i in 0..n {
            d_su[(i, k)] = (su_m2[i] - 8.0 * su_m1[i] + 8.0 * su_p1[i] - su_p2[i]) / (12.0 * h);
            d_se[(i, k)] = (se_m2[i] - 8.0 * se_m1[i] + 8.0 * se_p1[i] - se_p2[i]) / (12.0 * h);
        }
    }
    (d_su, d_se)
}
