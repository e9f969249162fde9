//! The reduced model: complex concentrations on the slow manifold, their
//! derivatives with respect to the active-protein vector, the resulting
//! n-dimensional flow, and projection of initial conditions onto the
//! manifold.
//!
//! The manifold equations are linear in the complexes once the conservation
//! identities are substituted — that linearity is what makes this network
//! class reducible at all, and it structurally selects the physical branch
//! (no root disambiguation as in the scalar sqrt form). The C_E block is
//! uncoupled from C_U and is solved first; its solution feeds the C_U
//! right-hand side.

use crate::full::{self, FullState, TableMeta, TableMode, TrajectoryTable};
use crate::matrix::{
    hadamard, hat, kron, lu_factor, lu_solve, unvec, vec_of, DenseMatrix, LuFactors, MatrixError,
};
use crate::network::{masks, NetworkSpec};
use crate::ode::{self, IntegratorConfig, OdeError, RhsError};
use thiserror::Error;

#[derive(Debug, Error)]
pub enum ReductionError {
    #[error("singular coefficient matrix in the {system} manifold system: {source}")]
    Singular {
        system: &'static str,
        #[source]
        source: MatrixError,
    },
    #[error("mass matrix is singular: {source}")]
    MassMatrix {
        #[source]
        source: MatrixError,
    },
    #[error("initial-condition projection did not converge after {iterations} iterations (last residual {residual:.3e})")]
    ProjectionDiverged { iterations: usize, residual: f64 },
    #[error(transparent)]
    Integration(#[from] OdeError),
}

/// Manifold complexes at a given P, with optional derivative blocks.
///
/// `d_cu_vn_dp` holds ∂(C̃_U V_n)/∂P (entry (i,k) = ∂(row-sum i)/∂P_k) and
/// `d_cet_vn_dp` holds ∂(C̃_Eᵗ V_n)/∂P; both are zero until
/// `complex_jacobian` fills them.
#[derive(Debug, Clone)]
pub struct ComplexSolution {
    pub c_u: DenseMatrix,
    pub c_e: DenseMatrix,
    pub d_cu_vn_dp: DenseMatrix,
    pub d_cet_vn_dp: DenseMatrix,
    pub residual: f64,
}

/// The reduced model: the network plus the manifold-projected initial value.
#[derive(Debug, Clone)]
pub struct ReducedModel<'a> {
    pub spec: &'a NetworkSpec,
    pub p_hat0: Vec<f64>,
}

// Column-major flat indices of the mask-active entries; these are the only
// vectorized unknowns (the principal-submatrix restriction — inactive
// complexes are identically zero and excluded so the systems stay
// nonsingular when edges are absent).
fn active_indices(mask: &DenseMatrix) -> Vec<usize> {
    let n = mask.rows();
    let mut idx = Vec::new();
    for j in 0..n {
        for i in 0..n {
            if mask[(i, j)] != 0.0 {
                idx.push(j * n + i);
            }
        }
    }
    idx
}

fn restrict(a: &DenseMatrix, idx: &[usize]) -> DenseMatrix {
    DenseMatrix::from_fn(idx.len(), idx.len(), |r, c| a[(idx[r], idx[c])])
}

fn gather(v: &[f64], idx: &[usize]) -> Vec<f64> {
    idx.iter().map(|&i| v[i]).collect()
}

fn scatter(vals: &[f64], idx: &[usize], n: usize) -> DenseMatrix {
    let mut flat = vec![0.0; n * n];
    for (v, &i) in vals.iter().zip(idx) {
        flat[i] = *v;
    }
    unvec(&flat, n, n)
}

// Full (unrestricted) vectorized C_E system:
//   A_E = L̂₁·(PV_nᵗ ⊗ I_n) + (L̂₋₁ + L̂₂),  b_E = vec(L₁ ∗ (E_T Pᵗ))
fn ce_system(spec: &NetworkSpec, p: &[f64]) -> (DenseMatrix, Vec<f64>) {
    let n = spec.n;
    let pv = DenseMatrix::col_from(p).matmul(&DenseMatrix::ones_col(n).transpose());
    let a = hat(&spec.l1)
        .matmul(&kron(&pv, &DenseMatrix::identity(n)))
        .add(&hat(&spec.l_neg1.add(&spec.l2)));
    let et_pt = DenseMatrix::col_from(&spec.e_total).matmul(&DenseMatrix::col_from(p).transpose());
    let b = vec_of(&hadamard(&spec.l1, &et_pt).expect("square by construction"));
    (a, b)
}

// Full vectorized C_U system given the solved C_E:
//   A_U = K̂₁·[(I_n⊗P)(V_nᵗ⊗I_n) + (I_n⊗PV_nᵗ)(I_{n²}−Î_n)] + (K̂₋₁ + K̂₂)
//   b_U = vec(K₁ ∗ [P(U_T−P)ᵗ − (PV_nᵗ)C_E])
// The three A_U terms are, in order: binding loss of free substrate to the
// row protein, loss of substrate bound in other complexes of the same
// column (the Î_n correction keeps the diagonal complex from double
// counting), and unbinding/turnover.
fn cu_system(spec: &NetworkSpec, p: &[f64], c_e: &DenseMatrix) -> (DenseMatrix, Vec<f64>) {
    let n = spec.n;
    let eye = DenseMatrix::identity(n);
    let pcol = DenseMatrix::col_from(p);
    let pv = pcol.matmul(&DenseMatrix::ones_col(n).transpose());
    let off_diag = DenseMatrix::identity(n * n).sub(&hat(&eye));
    let structural = kron(&eye, &pcol)
        .matmul(&kron(&DenseMatrix::ones_col(n).transpose(), &eye))
        .add(&kron(&eye, &pv).matmul(&off_diag));
    let a = hat(&spec.k1)
        .matmul(&structural)
        .add(&hat(&spec.k_neg1.add(&spec.k2)));

    let u_minus_p: Vec<f64> = (0..n).map(|i| spec.u_total[i] - p[i]).collect();
    let rhs_mat = pcol
        .matmul(&DenseMatrix::col_from(&u_minus_p).transpose())
        .sub(&pv.matmul(c_e));
    let b = vec_of(&hadamard(&spec.k1, &rhs_mat).expect("square by construction"));
    (a, b)
}

// Restricted LU factorizations plus the manifold complexes; shared by the
// plain solve and the implicit-differentiation pass.
struct ManifoldSolve {
    c_u: DenseMatrix,
    c_e: DenseMatrix,
    act_e: Vec<usize>,
    act_u: Vec<usize>,
    lu_e: Option<LuFactors>,
    lu_u: Option<LuFactors>,
    residual: f64,
}

fn solve_inner(spec: &NetworkSpec, p: &[f64]) -> Result<ManifoldSolve, ReductionError> {
    let n = spec.n;
    let m = masks(spec);
    let act_e = active_indices(&m.i_l);
    let act_u = active_indices(&m.i_k);

    let (c_e, lu_e) = if act_e.is_empty() {
        (DenseMatrix::zeros(n, n), None)
    } else {
        let (a, b) = ce_system(spec, p);
        let lu = lu_factor(&restrict(&a, &act_e))
            .map_err(|source| ReductionError::Singular { system: "C_E", source })?;
        let x = lu.solve(&DenseMatrix::col_from(&gather(&b, &act_e)));
        (scatter(x.data(), &act_e, n), Some(lu))
    };

    let (c_u, lu_u) = if act_u.is_empty() {
        (DenseMatrix::zeros(n, n), None)
    } else {
        let (a, b) = cu_system(spec, p, &c_e);
        let lu = lu_factor(&restrict(&a, &act_u))
            .map_err(|source| ReductionError::Singular { system: "C_U", source })?;
        let x = lu.solve(&DenseMatrix::col_from(&gather(&b, &act_u)));
        (scatter(x.data(), &act_u, n), Some(lu))
    };

    // residual against the defining equations: on the manifold the complex
    // rates of the full system vanish, so reuse that evaluation verbatim
    let state = FullState::assemble(spec, p.to_vec(), c_u.clone(), c_e.clone());
    let d = full::full_rhs(spec, &state);
    let residual = d.dc_u.max_abs().max(d.dc_e.max_abs());

    Ok(ManifoldSolve { c_u, c_e, act_e, act_u, lu_e, lu_u, residual })
}

/// Manifold complexes at P (derivative blocks left zero).
pub fn solve_complexes(spec: &NetworkSpec, p: &[f64]) -> Result<ComplexSolution, ReductionError> {
    let n = spec.n;
    let s = solve_inner(spec, p)?;
    Ok(ComplexSolution {
        c_u: s.c_u,
        c_e: s.c_e,
        d_cu_vn_dp: DenseMatrix::zeros(n, n),
        d_cet_vn_dp: DenseMatrix::zeros(n, n),
        residual: s.residual,
    })
}

/// Manifold complexes plus ∂(C̃_U V_n)/∂P and ∂(C̃_Eᵗ V_n)/∂P by implicit
/// differentiation: for each k solve A·(∂x/∂P_k) = ∂b/∂P_k − (∂A/∂P_k)·x on
/// the active entries, reusing the LU factors from the base solve; the C_E
/// sensitivities chain into the C_U right-hand side.
pub fn complex_jacobian(spec: &NetworkSpec, p: &[f64]) -> Result<ComplexSolution, ReductionError> {
    let n = spec.n;
    let s = solve_inner(spec, p)?;
    let mut d_cu_vn_dp = DenseMatrix::zeros(n, n);
    let mut d_cet_vn_dp = DenseMatrix::zeros(n, n);

    let had = |a: &DenseMatrix, b: &DenseMatrix| hadamard(a, b).expect("square by construction");
    let ones = DenseMatrix::ones_col(n);
    // free enzyme and free substrate at the manifold point; the per-k
    // right-hand sides below collapse to expressions in these
    let state = FullState::assemble(spec, p.to_vec(), s.c_u.clone(), s.c_e.clone());

    for k in 0..n {
        // ∂C_E/∂P_k: ∂b_E − (∂A_E/∂P_k)·vec(C_E) = vec(L₁ ∗ (E e_kᵗ))
        // with E the free enzyme (E_T − C_E V_n)
        let d_ce_k = if let Some(lu) = &s.lu_e {
            let mut rhs_mat = DenseMatrix::zeros(n, n);
            for i in 0..n {
                rhs_mat[(i, k)] = state.e[i];
            }
            let rhs = vec_of(&had(&spec.l1, &rhs_mat));
            let x = lu.solve(&DenseMatrix::col_from(&gather(&rhs, &s.act_e)));
            scatter(x.data(), &s.act_e, n)
        } else {
            DenseMatrix::zeros(n, n)
        };

        // ∂C_U/∂P_k: ∂b_U − (∂A_U/∂P_k)·vec(C_U)
        //   = vec(K₁ ∗ [e_k Uᵗ − P e_kᵗ − (PV_nᵗ)·∂C_E/∂P_k])
        // with U the free substrate after all conservation shares
        let d_cu_k = if let Some(lu) = &s.lu_u {
            let pv_dce = DenseMatrix::col_from(p)
                .matmul(&ones.transpose())
                .matmul(&d_ce_k);
            let mut rhs_mat = pv_dce.scale(-1.0);
            for j in 0..n {
                rhs_mat[(k, j)] += state.u[j];
            }
            for i in 0..n {
                rhs_mat[(i, k)] -= p[i];
            }
            let rhs = vec_of(&had(&spec.k1, &rhs_mat));
            let x = lu.solve(&DenseMatrix::col_from(&gather(&rhs, &s.act_u)));
            scatter(x.data(), &s.act_u, n)
        } else {
            DenseMatrix::zeros(n, n)
        };

        for i in 0..n {
            d_cu_vn_dp[(i, k)] = (0..n).map(|j| d_cu_k[(i, j)]).sum();
            d_cet_vn_dp[(i, k)] = (0..n).map(|r| d_ce_k[(r, i)]).sum();
        }
    }

    Ok(ComplexSolution {
        c_u: s.c_u,
        c_e: s.c_e,
        d_cu_vn_dp,
        d_cet_vn_dp,
        residual: s.residual,
    })
}

/// Mass matrix M(p) = I + ∂(C̃_U V_n)/∂P + ∂(C̃_Eᵗ V_n)/∂P.
pub fn mass_matrix(sol: &ComplexSolution) -> DenseMatrix {
    DenseMatrix::identity(sol.d_cu_vn_dp.rows())
        .add(&sol.d_cu_vn_dp)
        .add(&sol.d_cet_vn_dp)
}

/// Manifold production rate r(p) = (K₂∗C̃_U)ᵗV_n − (L₂∗C̃_E)ᵗV_n.
pub fn manifold_rate(spec: &NetworkSpec, sol: &ComplexSolution) -> Vec<f64> {
    let n = spec.n;
    (0..n)
        .map(|i| {
            let gain: f64 = (0..n).map(|r| spec.k2[(r, i)] * sol.c_u[(r, i)]).sum();
            let loss: f64 = (0..n).map(|r| spec.l2[(r, i)] * sol.c_e[(r, i)]).sum();
            gain - loss
        })
        .collect()
}

/// Right-hand side of the reduced system: solves M(p)·(dP/dt) = r(p).
pub fn reduced_rhs(spec: &NetworkSpec, p: &[f64]) -> Result<Vec<f64>, ReductionError> {
    let sol = complex_jacobian(spec, p)?;
    let m = mass_matrix(&sol);
    let r = manifold_rate(spec, &sol);
    let dp = lu_solve(&m, &DenseMatrix::col_from(&r))
        .map_err(|source| ReductionError::MassMatrix { source })?;
    Ok(dp.data().to_vec())
}

// g(P̂) = P̂ + C̃_U(P̂)V_n + C̃_Eᵗ(P̂)V_n − p0 and its ∞-norm.
fn projection_gap(
    spec: &NetworkSpec,
    p_hat: &[f64],
    sol: &ComplexSolution,
) -> (Vec<f64>, f64) {
    let n = spec.n;
    let g: Vec<f64> = (0..n)
        .map(|i| {
            let cu: f64 = (0..n).map(|s| sol.c_u[(i, s)]).sum();
            let ce: f64 = (0..n).map(|r| sol.c_e[(r, i)]).sum();
            p_hat[i] + cu + ce - spec.p0[i]
        })
        .collect();
    let norm = g.iter().fold(0.0_f64, |m, v| m.max(v.abs()));
    (g, norm)
}

/// Project p0 onto the slow manifold: Newton on
/// g(P̂) = P̂ + C̃_U(P̂)V_n + C̃_Eᵗ(P̂)V_n − p0, whose Jacobian is exactly the
/// mass matrix, with backtracking clipped to [0, u_total].
pub fn project_initial(spec: &NetworkSpec) -> Result<ReducedModel<'_>, ReductionError> {
    let n = spec.n;
    let p0_norm = spec.p0.iter().fold(0.0_f64, |m, v| m.max(v.abs()));
    let tol = 1e-10 * (1.0 + p0_norm);
    let clamp = |v: &mut Vec<f64>| {
        for i in 0..n {
            v[i] = v[i].clamp(0.0, spec.u_total[i]);
        }
    };

    let mut p_hat = spec.p0.clone();
    clamp(&mut p_hat);
    let mut last_residual = f64::INFINITY;

    for _ in 0..100 {
        let sol = complex_jacobian(spec, &p_hat)?;
        let (g, g_norm) = projection_gap(spec, &p_hat, &sol);
        last_residual = g_norm;
        if g_norm <= tol {
            return Ok(ReducedModel { spec, p_hat0: p_hat });
        }

        let m = mass_matrix(&sol);
        let neg_g: Vec<f64> = g.iter().map(|v| -v).collect();
        let step = lu_solve(&m, &DenseMatrix::col_from(&neg_g))
            .map_err(|source| ReductionError::MassMatrix { source })?;

        // backtrack until the gap shrinks; fall back to the full clipped
        // step if no scaling helps (the iteration cap catches divergence)
        let mut accepted = None;
        let mut lambda = 1.0;
        while lambda > 1e-9 {
            let mut cand: Vec<f64> =
                (0..n).map(|i| p_hat[i] + lambda * step[(i, 0)]).collect();
            clamp(&mut cand);
            let cand_sol = solve_complexes(spec, &cand)?;
            let (_, cand_norm) = projection_gap(spec, &cand, &cand_sol);
            if cand_norm < g_norm {
                accepted = Some(cand);
                break;
            }
            lambda *= 0.5;
        }
        p_hat = accepted.unwrap_or_else(|| {
            let mut full_step: Vec<f64> =
                (0..n).map(|i| p_hat[i] + step[(i, 0)]).collect();
            clamp(&mut full_step);
            full_step
        });
    }
    Err(ReductionError::ProjectionDiverged { iterations: 100, residual: last_residual })
}

/// Integrate the reduced system from the projected initial value. Sampled
/// states carry the reconstructed manifold complexes so the table has the
/// same shape as a full-model table.
pub fn integrate_reduced(
    spec: &NetworkSpec,
    cfg: &IntegratorConfig,
) -> Result<TrajectoryTable, ReductionError> {
    let model = project_initial(spec)?;
    let sol = ode::integrate(
        |_t, y, dy| {
            let dp = reduced_rhs(spec, y).map_err(|e| -> RhsError { Box::new(e) })?;
            dy.copy_from_slice(&dp);
            Ok(())
        },
        &model.p_hat0,
        cfg,
    )?;
    let mut states = Vec::with_capacity(sol.times.len());
    for y in &sol.states {
        let c = solve_complexes(spec, y)?;
        states.push(FullState::assemble(spec, y.clone(), c.c_u, c.c_e));
    }
    Ok(TrajectoryTable {
        times: sol.times,
        states,
        meta: TableMeta {
            model_hash: spec.content_hash(),
            rtol: cfg.rtol,
            atol: cfg.atol,
            mode: TableMode::Reduced,
        },
    })
}

/// Parameterization of the one-substrate, one-enzyme reduced flow.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum MmForm {
    /// Total-substrate coordinate X̄; the rate is the stable (negative)
    /// branch of the quadratic manifold relation.
    SqrtForm,
    /// Free-substrate coordinate X; the manifold relation is linear in the
    /// complex, giving a rational rate with the chain-rule mass factor.
    LinearForm,
}

/// Closed forms for the isolated Michaelis–Menten system.
#[derive(Debug, Clone)]
pub struct IsolatedMmReduced {
    pub form: MmForm,
    pub x_total: f64,
    pub e_total: f64,
    pub k_m: f64,
    pub k2: f64,
    /// positive root of X̂ + E_T·X̂/(X̂+k_m) = X_T
    pub x_hat0: f64,
}

pub fn isolated_mm_reduced(
    x_total: f64,
    e_total: f64,
    k1: f64,
    k_neg1: f64,
    k2: f64,
    form: MmForm,
) -> IsolatedMmReduced {
    let k_m = (k_neg1 + k2) / k1;
    IsolatedMmReduced {
        form,
        x_total,
        e_total,
        k_m,
        k2,
        x_hat0: positive_root(k_m, e_total, x_total),
    }
}

// positive root of x² + (k_m + e_t − target)x − k_m·target = 0
fn positive_root(k_m: f64, e_t: f64, target: f64) -> f64 {
    let b = k_m + e_t - target;
    let disc = (b * b + 4.0 * k_m * target).max(0.0);
    (-b + disc.sqrt()) / 2.0
}

impl IsolatedMmReduced {
    /// dX̄/dt at X̄ (SqrtForm) or dX/dt at X (LinearForm).
    pub fn rate(&self, y: f64) -> f64 {
        match self.form {
            MmForm::SqrtForm => {
                let s = y + self.e_total + self.k_m;
                let disc = (s * s - 4.0 * y * self.e_total).max(0.0);
                -self.k2 * (s - disc.sqrt()) / 2.0
            }
            MmForm::LinearForm => {
                let km = self.k_m;
                let mass = 1.0 + km * self.e_total / ((km + y) * (km + y));
                -self.k2 / mass * y * self.e_total / (km + y)
            }
        }
    }

    /// Invert X̄ = X + E_T·X/(k_m+X) for the free-substrate coordinate.
    pub fn x_from_xbar(&self, x_bar: f64) -> f64 {
        positive_root(self.k_m, self.e_total, x_bar)
    }

    pub fn xbar_from_x(&self, x: f64) -> f64 {
        x + self.e_total * x / (self.k_m + x)
    }

    /// Integrate the flow from t = 0; returns (times, X(t)) in the
    /// free-substrate coordinate for either form.
    pub fn integrate(&self, cfg: &IntegratorConfig) -> Result<(Vec<f64>, Vec<f64>), OdeError> {
        let y0 = match self.form {
            MmForm::SqrtForm => self.x_total, // all substrate free: X̄(0) = X_T
            MmForm::LinearForm => self.x_hat0,
        };
        let sol = ode::integrate(
            |_t, y, dy| {
                dy[0] = self.rate(y[0]);
                Ok(())
            },
            &[y0],
            cfg,
        )?;
        let xs = sol
            .states
            .iter()
            .map(|y| match self.form {
                MmForm::SqrtForm => self.x_from_xbar(y[0]),
                MmForm::LinearForm => y[0],
            })
            .collect();
        Ok((sol.times, xs))
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::network::parse_network;
    use crate::network::test_models::{g2m, isolated_mm};

    fn zero_rate_spec() -> NetworkSpec {
        parse_network(
            r#"{"n":2,"k1":[[0,0],[0,0]],"k_neg1":[[0,0],[0,0]],"k2":[[0,0],[0,0]],"l1":[[0,0],[0,0]],"l_neg1":[[0,0],[0,0]],"l2":[[0,0],[0,0]],"u_total":[2,3],"e_total":[1,1],"p0":[0.5,1.5]}"#,
        )
        .unwrap()
    }

    #[test]
    fn single_node_complex_matches_rational_closed_form() {
        // E_T·P/(l_m+P) with l_m = 4 at P = 1
        let spec = isolated_mm();
        let sol = solve_complexes(&spec, &[1.0]).unwrap();
        assert!((sol.c_e[(0, 0)] - 0.2).abs() < 1e-14);
        assert_eq!(sol.c_u.max_abs(), 0.0);
        assert!(sol.residual <= 1e-10 * 2.0);
    }

    #[test]
    fn complexes_vanish_at_zero_activity() {
        let spec = g2m();
        let sol = solve_complexes(&spec, &[0.0, 0.0]).unwrap();
        assert_eq!(sol.c_u.max_abs(), 0.0);
        assert_eq!(sol.c_e.max_abs(), 0.0);
    }

    #[test]
    fn single_node_derivative_matches_closed_form() {
        // d/dP [E_T·P/(l_m+P)] = E_T·l_m/(l_m+P)² = 4/25
        let spec = isolated_mm();
        let sol = complex_jacobian(&spec, &[1.0]).unwrap();
        assert!((sol.d_cet_vn_dp[(0, 0)] - 0.16).abs() < 1e-14);
        assert_eq!(sol.d_cu_vn_dp.max_abs(), 0.0);
    }

    #[test]
    fn zero_rate_spec_has_zero_blocks() {
        let spec = zero_rate_spec();
        let sol = complex_jacobian(&spec, &[0.3, 0.4]).unwrap();
        assert_eq!(sol.c_u.max_abs(), 0.0);
        assert_eq!(sol.c_e.max_abs(), 0.0);
        assert_eq!(sol.d_cu_vn_dp.max_abs(), 0.0);
        assert_eq!(sol.d_cet_vn_dp.max_abs(), 0.0);
    }

    #[test]
    fn reduced_rate_single_node_closed_form() {
        // M = 1 + 0.16, r = −l2·C̃ = −0.2
        let spec = isolated_mm();
        let dp = reduced_rhs(&spec, &[1.0]).unwrap();
        assert!((dp[0] - (-0.2 / 1.16)).abs() < 1e-14);
    }

    #[test]
    fn reduced_rate_vanishes_at_origin() {
        let spec = g2m();
        let dp = reduced_rhs(&spec, &[0.0, 0.0]).unwrap();
        assert_eq!(dp, vec![0.0, 0.0]);
    }

    #[test]
    fn residual_invariant_on_interior_grid() {
        let spec = g2m();
        for &(x, y) in &[(0.12, 0.83), (1.0, 1.0), (5.0, 9.0), (9.9, 10.0)] {
            let sol = solve_complexes(&spec, &[x, y]).unwrap();
            let (_, b_e) = ce_system(&spec, &[x, y]);
            let (_, b_u) = cu_system(&spec, &[x, y], &sol.c_e);
            let scale = 1.0
                + b_e
                    .iter()
                    .chain(&b_u)
                    .fold(0.0_f64, |m, v| m.max(v.abs()));
            assert!(
                sol.residual <= 1e-10 * scale,
                "residual {} at ({x},{y})",
                sol.residual
            );
        }
    }

    #[test]
    fn general_solver_matches_hand_coded_two_protein_system() {
        // the four manifold equations written out by hand for the
        // two-protein network, unknowns z = (C_x, C_y, C_x^e, C_y^e):
        //   5·Y_p·(10 − X_p − z₀ − z₁ − z₂) = 2·z₀
        //   5·X_p·(10.1 − Y_p − z₀ − z₁ − z₃) = 2·z₁
        //   5·(10 − z₂)·X_p = 2·z₂
        //   5·(2 − z₃)·Y_p = 2·z₃
        let spec = g2m();
        for &(xp, yp) in &[(0.12, 0.83), (3.0, 4.0), (0.5, 9.0)] {
            let mut a = DenseMatrix::zeros(4, 4);
            let mut b = DenseMatrix::zeros(4, 1);
            a[(0, 0)] = 5.0 * yp + 2.0;
            a[(0, 1)] = 5.0 * yp;
            a[(0, 2)] = 5.0 * yp;
            b[(0, 0)] = 5.0 * yp * (10.0 - xp);
            a[(1, 0)] = 5.0 * xp;
            a[(1, 1)] = 5.0 * xp + 2.0;
            a[(1, 3)] = 5.0 * xp;
            b[(1, 0)] = 5.0 * xp * (10.1 - yp);
            a[(2, 2)] = 5.0 * xp + 2.0;
            b[(2, 0)] = 50.0 * xp;
            a[(3, 3)] = 5.0 * yp + 2.0;
            b[(3, 0)] = 10.0 * yp;
            let z = lu_solve(&a, &b).unwrap();

            let sol = solve_complexes(&spec, &[xp, yp]).unwrap();
            assert!((sol.c_u[(1, 0)] - z[(0, 0)]).abs() < 1e-12, "C_x at ({xp},{yp})");
            assert!((sol.c_u[(0, 1)] - z[(1, 0)]).abs() < 1e-12, "C_y at ({xp},{yp})");
            assert!((sol.c_e[(0, 0)] - z[(2, 0)]).abs() < 1e-12, "C_x^e at ({xp},{yp})");
            assert!((sol.c_e[(1, 1)] - z[(3, 0)]).abs() < 1e-12, "C_y^e at ({xp},{yp})");
        }
    }

    #[test]
    fn projection_single_node_reference_value() {
        let spec = isolated_mm();
        let model = project_initial(&spec).unwrap();
        let expect = -2.0 + 2.0 * 2.0_f64.sqrt();
        assert!((model.p_hat0[0] - expect).abs() < 1e-10);

        let sol = solve_complexes(&spec, &model.p_hat0).unwrap();
        let (_, gap) = projection_gap(&spec, &model.p_hat0, &sol);
        assert!(gap <= 1e-10 * 2.0);
    }

    #[test]
    fn projection_identity_for_zero_rates() {
        let spec = zero_rate_spec();
        let model = project_initial(&spec).unwrap();
        assert_eq!(model.p_hat0, vec![0.5, 1.5]);
    }

    #[test]
    fn projection_two_protein_closed_form() {
        // with X̂_p pinned at zero by positivity, the second component solves
        // 5Ŷ² + 17Ŷ − 18 = 0
        let spec = g2m();
        let model = project_initial(&spec).unwrap();
        assert!(model.p_hat0[0].abs() < 1e-9, "got {}", model.p_hat0[0]);
        let expect = (649.0_f64.sqrt() - 17.0) / 10.0;
        assert!(
            (model.p_hat0[1] - expect).abs() < 1e-9,
            "got {} want {expect}",
            model.p_hat0[1]
        );
    }

    #[test]
    fn mass_matrix_is_directional_derivative_of_bound_shares() {
        // chain rule: moving along the reduced flow, d/dt[P + C̃_U V + C̃_Eᵗ V]
        // must equal the manifold production rate r(P)
        let spec = g2m();
        let p = [3.0, 4.0];
        let sol = complex_jacobian(&spec, &p).unwrap();
        let dp = reduced_rhs(&spec, &p).unwrap();
        let r = manifold_rate(&spec, &sol);

        let share = |q: &[f64]| -> Vec<f64> {
            let s = solve_complexes(&spec, q).unwrap();
            (0..2)
                .map(|i| {
                    q[i] + (0..2).map(|j| s.c_u[(i, j)]).sum::<f64>()
                        + (0..2).map(|j| s.c_e[(j, i)]).sum::<f64>()
                })
                .collect()
        };
        let h = 1e-6;
        let plus = share(&[p[0] + h * dp[0], p[1] + h * dp[1]]);
        let minus = share(&[p[0] - h * dp[0], p[1] - h * dp[1]]);
        for i in 0..2 {
            let fd = (plus[i] - minus[i]) / (2.0 * h);
            assert!((fd - r[i]).abs() < 1e-6 * (1.0 + r[i].abs()), "fd {fd} vs {}", r[i]);
        }
    }

    #[test]
    fn reduced_integration_conserves_nothing_but_stays_constant_for_zero_rates() {
        let spec = zero_rate_spec();
        let table = integrate_reduced(&spec, &IntegratorConfig::new(2.0, 0.5)).unwrap();
        for state in &table.states {
            assert_eq!(state.p, vec![0.5, 1.5]);
        }
    }

    #[test]
    fn reduced_integration_matches_scalar_closed_form() {
        let spec = isolated_mm();
        let cfg = IntegratorConfig::new(10.0, 0.5);
        let table = integrate_reduced(&spec, &cfg).unwrap();
        let scalar = isolated_mm_reduced(1.0, 1.0, 1.0, 3.0, 1.0, MmForm::LinearForm);
        let (times, xs) = scalar.integrate(&cfg).unwrap();
        assert_eq!(times.len(), table.times.len());
        for ((t, state), x) in table.times.iter().zip(&table.states).zip(&xs) {
            assert!(
                (state.p[0] - x).abs() < 1e-8,
                "t={t}: general {} vs scalar {x}",
                state.p[0]
            );
        }
    }

    #[test]
    fn scalar_forms_agree_through_coordinate_change() {
        let cfg = IntegratorConfig { rtol: 1e-10, atol: 1e-12, ..IntegratorConfig::new(8.0, 0.25) };
        let sqrt_form = isolated_mm_reduced(1.0, 1.0, 1.0, 3.0, 1.0, MmForm::SqrtForm);
        let linear_form = isolated_mm_reduced(1.0, 1.0, 1.0, 3.0, 1.0, MmForm::LinearForm);
        let (_, xs_sqrt) = sqrt_form.integrate(&cfg).unwrap();
        let (_, xs_lin) = linear_form.integrate(&cfg).unwrap();
        for (a, b) in xs_sqrt.iter().zip(&xs_lin) {
            assert!((a - b).abs() < 1e-8, "{a} vs {b}");
        }
    }

    #[test]
    fn scalar_reference_values() {
        let mm = isolated_mm_reduced(1.0, 1.0, 1.0, 3.0, 1.0, MmForm::SqrtForm);
        assert!((mm.x_hat0 - (-2.0 + 2.0 * 2.0_f64.sqrt())).abs() < 1e-14);
        assert_eq!(mm.rate(0.0), 0.0);
        // at X̄ = 0 the discriminant argument collapses to (E_T+k_m)²
        let lin = isolated_mm_reduced(1.0, 1.0, 1.0, 3.0, 1.0, MmForm::LinearForm);
        assert_eq!(lin.rate(0.0), 0.0);
        // round trip of the coordinate change
        let x = 0.37;
        assert!((lin.x_from_xbar(lin.xbar_from_x(x)) - x).abs() < 1e-12);
    }
}
