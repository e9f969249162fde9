//! The full mass-action system: one ODE per active protein plus one per
//! intermediate complex, (2n² + n)-dimensional before mask sparsification.
//! Free substrate U and free enzyme E are always derived from the
//! conservation identities, never integrated, so the redundant coordinates
//! cannot drift apart.

use std::io;

use crate::matrix::DenseMatrix;
use crate::network::NetworkSpec;
use crate::ode::{self, IntegratorConfig, OdeError};

/// State of the full system. `u` and `e` are derived at construction from
/// the conservation identities:
///   u_j = U_j^T − P̄_j − Σ_r C^U_{rj} + C^U_{jj},   P̄_j = P_j + Σ_s C^U_{js} + Σ_r C^E_{rj}
///   e_i = E_i^T − Σ_s C^E_{is}
#[derive(Debug, Clone)]
pub struct FullState {
    pub p: Vec<f64>,
    pub c_u: DenseMatrix,
    pub c_e: DenseMatrix,
    pub u: Vec<f64>,
    pub e: Vec<f64>,
}

impl FullState {
    pub fn assemble(spec: &NetworkSpec, p: Vec<f64>, c_u: DenseMatrix, c_e: DenseMatrix) -> Self {
        let n = spec.n;
        let p_bar: Vec<f64> = (0..n)
            .map(|j| {
                let bound_as_enzyme: f64 = (0..n).map(|s| c_u[(j, s)]).sum();
                let bound_in_ep: f64 = (0..n).map(|r| c_e[(r, j)]).sum();
                p[j] + bound_as_enzyme + bound_in_ep
            })
            .collect();
        let u: Vec<f64> = (0..n)
            .map(|j| {
                let bound_as_substrate: f64 = (0..n).map(|r| c_u[(r, j)]).sum();
                spec.u_total[j] - p_bar[j] - bound_as_substrate + c_u[(j, j)]
            })
            .collect();
        let e: Vec<f64> = (0..n)
            .map(|i| {
                let bound: f64 = (0..n).map(|s| c_e[(i, s)]).sum();
                spec.e_total[i] - bound
            })
            .collect();
        FullState { p, c_u, c_e, u, e }
    }

    /// Initial state: P = p0, all complexes zero.
    pub fn initial(spec: &NetworkSpec) -> Self {
        let n = spec.n;
        FullState::assemble(
            spec,
            spec.p0.clone(),
            DenseMatrix::zeros(n, n),
            DenseMatrix::zeros(n, n),
        )
    }

    /// Total active protein P̄_i = P_i + Σ_s C^U_{is} + Σ_r C^E_{ri}.
    pub fn p_bar(&self) -> Vec<f64> {
        let n = self.p.len();
        (0..n)
            .map(|i| {
                let as_enzyme: f64 = (0..n).map(|s| self.c_u[(i, s)]).sum();
                let in_ep: f64 = (0..n).map(|r| self.c_e[(r, i)]).sum();
                self.p[i] + as_enzyme + in_ep
            })
            .collect()
    }
}

/// Time derivative of (P, C_U, C_E).
#[derive(Debug, Clone)]
pub struct FullDerivative {
    pub dp: Vec<f64>,
    pub dc_u: DenseMatrix,
    pub dc_e: DenseMatrix,
}

/// Entrywise mass-action rates:
///   dP_i/dt   = Σ_s(−k¹_{is}P_iU_s + (k⁻¹_{is}+k²_{is})C^U_{is})
///             + Σ_r(k²_{ri}C^U_{ri} − l¹_{ri}E_rP_i + l⁻¹_{ri}C^E_{ri})
///   dC^U_{ij}/dt = k¹_{ij}P_iU_j − (k⁻¹_{ij}+k²_{ij})C^U_{ij}
///   dC^E_{ij}/dt = l¹_{ij}E_iP_j − (l⁻¹_{ij}+l²_{ij})C^E_{ij}
pub fn full_rhs(spec: &NetworkSpec, state: &FullState) -> FullDerivative {
    let n = spec.n;
    let mut dp = vec![0.0; n];
    let mut dc_u = DenseMatrix::zeros(n, n);
    let mut dc_e = DenseMatrix::zeros(n, n);

    for i in 0..n {
        let mut acc = 0.0;
        for s in 0..n {
            acc += -spec.k1[(i, s)] * state.p[i] * state.u[s]
                + (spec.k_neg1[(i, s)] + spec.k2[(i, s)]) * state.c_u[(i, s)];
        }
        for r in 0..n {
            acc += spec.k2[(r, i)] * state.c_u[(r, i)]
                - spec.l1[(r, i)] * state.e[r] * state.p[i]
                + spec.l_neg1[(r, i)] * state.c_e[(r, i)];
        }
        dp[i] = acc;
    }
    for i in 0..n {
        for j in 0..n {
            dc_u[(i, j)] = spec.k1[(i, j)] * state.p[i] * state.u[j]
                - (spec.k_neg1[(i, j)] + spec.k2[(i, j)]) * state.c_u[(i, j)];
            dc_e[(i, j)] = spec.l1[(i, j)] * state.e[i] * state.p[j]
                - (spec.l_neg1[(i, j)] + spec.l2[(i, j)]) * state.c_e[(i, j)];
        }
    }
    FullDerivative { dp, dc_u, dc_e }
}

/// Same rates assembled through the matrix identities
///   dC_U/dt = K₁∗(PUᵗ) − (K₋₁+K₂)∗C_U
///   dC_E/dt = L₁∗(EPᵗ) − (L₋₁+L₂)∗C_E
///   dP̄/dt  = (K₂∗C_U)ᵗ·1 − (L₂∗C_E)ᵗ·1
/// with dP recovered from dP̄ by subtracting the complex-bound shares.
/// Exists as an independent evaluation path; tests pin entrywise agreement.
pub fn full_rhs_matrix(spec: &NetworkSpec, state: &FullState) -> FullDerivative {
    let n = spec.n;
    let p = DenseMatrix::col_from(&state.p);
    let u = DenseMatrix::col_from(&state.u);
    let e = DenseMatrix::col_from(&state.e);
    let ones = DenseMatrix::ones_col(n);

    let had = |a: &DenseMatrix, b: &DenseMatrix| {
        crate::matrix::hadamard(a, b).expect("shapes fixed by construction")
    };

    let dc_u = had(&spec.k1, &p.matmul(&u.transpose()))
        .sub(&had(&spec.k_neg1.add(&spec.k2), &state.c_u));
    let dc_e = had(&spec.l1, &e.matmul(&p.transpose()))
        .sub(&had(&spec.l_neg1.add(&spec.l2), &state.c_e));
    let dp_bar = had(&spec.k2, &state.c_u)
        .transpose()
        .matmul(&ones)
        .sub(&had(&spec.l2, &state.c_e).transpose().matmul(&ones));

    // P̄_i = P_i + Σ_s C^U_{is} + Σ_r C^E_{ri}  ⇒  dP = dP̄ − dC_U·1 − dC_Eᵗ·1
    let row_sums_cu = dc_u.matmul(&ones);
    let col_sums_ce = dc_e.transpose().matmul(&ones);
    let dp: Vec<f64> = (0..n)
        .map(|i| dp_bar[(i, 0)] - row_sums_cu[(i, 0)] - col_sums_ce[(i, 0)])
        .collect();

    FullDerivative { dp, dc_u, dc_e }
}

/// Reconstruct the conserved totals from a state by direct species count.
/// Written independently of the derivation in `FullState::assemble` so a
/// sign error in either shows up as a mismatch.
pub fn conserved_totals(spec: &NetworkSpec, state: &FullState) -> (Vec<f64>, Vec<f64>) {
    let n = spec.n;
    let u_tot: Vec<f64> = (0..n)
        .map(|j| {
            let as_pp_enzyme: f64 = (0..n).map(|s| state.c_u[(j, s)]).sum();
            let as_pp_substrate: f64 = (0..n).map(|r| state.c_u[(r, j)]).sum();
            let in_ep: f64 = (0..n).map(|r| state.c_e[(r, j)]).sum();
            state.u[j] + state.p[j] + as_pp_enzyme + as_pp_substrate + in_ep
                - state.c_u[(j, j)]
        })
        .collect();
    let e_tot: Vec<f64> = (0..n)
        .map(|i| {
            let bound: f64 = (0..n).map(|s| state.c_e[(i, s)]).sum();
            state.e[i] + bound
        })
        .collect();
    (u_tot, e_tot)
}

// Flat layout for the integrator: [P; C_U row-major; C_E row-major].
pub(crate) fn flatten(state: &FullState) -> Vec<f64> {
    let mut flat = state.p.clone();
    flat.extend_from_slice(state.c_u.data());
    flat.extend_from_slice(state.c_e.data());
    flat
}

pub(crate) fn state_from_flat(spec: &NetworkSpec, flat: &[f64]) -> FullState {
    let n = spec.n;
    let p = flat[..n].to_vec();
    let mut c_u = DenseMatrix::zeros(n, n);
    let mut c_e = DenseMatrix::zeros(n, n);
    for i in 0..n {
        for j in 0..n {
            c_u[(i, j)] = flat[n + i * n + j];
            c_e[(i, j)] = flat[n + n * n + i * n + j];
        }
    }
    FullState::assemble(spec, p, c_u, c_e)
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum TableMode {
    Full,
    Reduced,
}

impl TableMode {
    pub fn as_str(&self) -> &'static str {
        match self {
            TableMode::Full => "full",
            TableMode::Reduced => "reduced",
        }
    }
}

#[derive(Debug, Clone)]
pub struct TableMeta {
    pub model_hash: String,
    pub rtol: f64,
    pub atol: f64,
    pub mode: TableMode,
}

/// Time-stamped state samples plus provenance metadata. Reduced-model
/// trajectories store the reconstructed manifold complexes in `states`, so
/// both modes expose the same shape.
#[derive(Debug, Clone)]
pub struct TrajectoryTable {
    pub times: Vec<f64>,
    pub states: Vec<FullState>,
    pub meta: TableMeta,
}

/// Integrate the full system from t = 0 (complexes zero, P = p0).
pub fn integrate_full(spec: &NetworkSpec, cfg: &IntegratorConfig) -> Result<TrajectoryTable, OdeError> {
    let y0 = flatten(&FullState::initial(spec));
    let sol = ode::integrate(
        |_t, y, dy| {
            let state = state_from_flat(spec, y);
            let d = full_rhs(spec, &state);
            dy[..spec.n].copy_from_slice(&d.dp);
            dy[spec.n..spec.n + spec.n * spec.n].copy_from_slice(d.dc_u.data());
            dy[spec.n + spec.n * spec.n..].copy_from_slice(d.dc_e.data());
            Ok(())
        },
        &y0,
        cfg,
    )?;
    Ok(TrajectoryTable {
        times: sol.times,
        states: sol.states.iter().map(|y| state_from_flat(spec, y)).collect(),
        meta: TableMeta {
            model_hash: spec.content_hash(),
            rtol: cfg.rtol,
            atol: cfg.atol,
            mode: TableMode::Full,
        },
    })
}

/// CSV emission. Full tables get `t,P_1..P_n,CU_i_j..,CE_i_j..` with
/// masked-out complexes omitted; reduced tables get `t,P_1..P_n` unless
/// `with_complexes` asks for the reconstructed C̃ columns too. Values in
/// shortest round-trip decimal.
pub fn write_csv<W: io::Write>(
    table: &TrajectoryTable,
    spec: &NetworkSpec,
    with_complexes: bool,
    w: &mut W,
) -> io::Result<()> {
    let n = spec.n;
    let m = crate::network::masks(spec);
    let complexes = table.meta.mode == TableMode::Full || with_complexes;

    let mut header = String::from("t");
    for i in 1..=n {
        header.push_str(&format!(",P_{i}"));
    }
    if complexes {
        for i in 0..n {
            for j in 0..n {
                if m.i_k[(i, j)] != 0.0 {
                    header.push_str(&format!(",CU_{}_{}", i + 1, j + 1));
                }
            }
        }
        for i in 0..n {
            for j in 0..n {
                if m.i_l[(i, j)] != 0.0 {
                    header.push_str(&format!(",CE_{}_{}", i + 1, j + 1));
                }
            }
        }
    }
    writeln!(w, "{header}")?;

    for (t, state) in table.times.iter().zip(&table.states) {
        let mut line = format!("{t}");
        for i in 0..n {
            line.push_str(&format!(",{}", state.p[i]));
        }
        if complexes {
            for i in 0..n {
                for j in 0..n {
                    if m.i_k[(i, j)] != 0.0 {
                        line.push_str(&format!(",{}", state.c_u[(i, j)]));
                    }
                }
            }
            for i in 0..n {
                for j in 0..n {
                    if m.i_l[(i, j)] != 0.0 {
                        line.push_str(&format!(",{}", state.c_e[(i, j)]));
                    }
                }
            }
        }
        writeln!(w, "{line}")?;
    }
    Ok(())
}
