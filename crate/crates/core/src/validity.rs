//! Validity diagnostics for the reduction: Michaelis–Menten constants and
//! scaling factors, the timescale-separation parameter ε, O(1)-ratio
//! heuristics, the slow-manifold Jacobian spectrum, and invariant-region
//! checks along trajectories.

use serde::Serialize;
use thiserror::Error;

use crate::full::{FullState, TrajectoryTable};
use crate::matrix::{eigenvalues, hadamard, hat, kron, DenseMatrix, MatrixError, Spectrum};
use crate::network::{masks, NetworkSpec};
use crate::reduction::{solve_complexes, ReductionError};

#[derive(Debug, Error)]
pub enum ValidityError {
    #[error(transparent)]
    Reduction(#[from] ReductionError),
    #[error(transparent)]
    Matrix(#[from] MatrixError),
}

/// MM constants, bound-complex scales, and the slow timescale.
#[derive(Debug, Clone)]
pub struct ScalingFactors {
    pub k_m: DenseMatrix,
    pub l_m: DenseMatrix,
    pub alpha: DenseMatrix,
    pub beta: DenseMatrix,
    /// T_Ū: max over active edges of U_j^T/(l²_{ij}β_{ij}) and
    /// U_j^T/(k²_{ij}α_{ij}); zero when the network has no edges.
    pub t_bar: f64,
}

/// k^m_{ij} = (k⁻¹+k²)/k¹ and the α/β complex scales, zero where masked.
pub fn scaling_factors(spec: &NetworkSpec) -> ScalingFactors {
    let n = spec.n;
    let m = masks(spec);
    let mm = |r1: &DenseMatrix, rn: &DenseMatrix, r2: &DenseMatrix, mask: &DenseMatrix| {
        DenseMatrix::from_fn(n, n, |i, j| {
            if mask[(i, j)] != 0.0 {
                (rn[(i, j)] + r2[(i, j)]) / r1[(i, j)]
            } else {
                0.0
            }
        })
    };
    let k_m = mm(&spec.k1, &spec.k_neg1, &spec.k2, &m.i_k);
    let l_m = mm(&spec.l1, &spec.l_neg1, &spec.l2, &m.i_l);

    let alpha = DenseMatrix::from_fn(n, n, |i, j| {
        if m.i_k[(i, j)] != 0.0 {
            let (ui, uj) = (spec.u_total[i], spec.u_total[j]);
            ui * uj / (ui + uj + k_m[(i, j)])
        } else {
            0.0
        }
    });
    let beta = DenseMatrix::from_fn(n, n, |i, j| {
        if m.i_l[(i, j)] != 0.0 {
            let (ei, uj) = (spec.e_total[i], spec.u_total[j]);
            ei * uj / (ei + uj + l_m[(i, j)])
        } else {
            0.0
        }
    });

    let mut t_bar = 0.0_f64;
    for i in 0..n {
        for j in 0..n {
            if m.i_k[(i, j)] != 0.0 && alpha[(i, j)] > 0.0 {
                t_bar = t_bar.max(spec.u_total[j] / (spec.k2[(i, j)] * alpha[(i, j)]));
            }
            if m.i_l[(i, j)] != 0.0 && beta[(i, j)] > 0.0 {
                t_bar = t_bar.max(spec.u_total[j] / (spec.l2[(i, j)] * beta[(i, j)]));
            }
        }
    }
    ScalingFactors { k_m, l_m, alpha, beta, t_bar }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Verdict {
    Valid,
    Marginal,
    Invalid,
}

impl Verdict {
    pub fn as_str(&self) -> &'static str {
        match self {
            Verdict::Valid => "valid",
            Verdict::Marginal => "marginal",
            Verdict::Invalid => "invalid",
        }
    }
}

/// ε components, the ratio heuristics, and the manifold spectrum at a point.
#[derive(Debug, Clone)]
pub struct ValidityReport {
    pub eps_pp: DenseMatrix,
    pub eps_ep: DenseMatrix,
    pub eps: f64,
    pub ratio_flags: Vec<String>,
    pub jacobian_spectrum: Spectrum,
    pub verdict: Verdict,
}

#[derive(Serialize)]
struct ReportDoc<'a> {
    epsilon: f64,
    epsilon_pp: Vec<Vec<f64>>,
    epsilon_ep: Vec<Vec<f64>>,
    max_real_eig: Option<f64>,
    ratio_flags: &'a [String],
    verdict: &'a str,
}

fn matrix_rows(m: &DenseMatrix) -> Vec<Vec<f64>> {
    (0..m.rows())
        .map(|i| (0..m.cols()).map(|j| m[(i, j)]).collect())
        .collect()
}

impl ValidityReport {
    pub fn to_json(&self) -> String {
        let doc = ReportDoc {
            epsilon: self.eps,
            epsilon_pp: matrix_rows(&self.eps_pp),
            epsilon_ep: matrix_rows(&self.eps_ep),
            max_real_eig: if self.jacobian_spectrum.max_real_part.is_finite() {
                Some(self.jacobian_spectrum.max_real_part)
            } else {
                None
            },
            ratio_flags: &self.ratio_flags,
            verdict: self.verdict.as_str(),
        };
        serde_json::to_string(&doc).expect("report serialization cannot fail")
    }
}

pub const DEFAULT_RATIO_BOUND: f64 = 100.0;

/// The timescale-separation parameter and verdict at `p_query`.
pub fn epsilon_report(spec: &NetworkSpec, p_query: &[f64]) -> Result<ValidityReport, ValidityError> {
    epsilon_report_with_bound(spec, p_query, DEFAULT_RATIO_BOUND)
}

pub fn epsilon_report_with_bound(
    spec: &NetworkSpec,
    p_query: &[f64],
    ratio_bound: f64,
) -> Result<ValidityReport, ValidityError> {
    let n = spec.n;
    let m = masks(spec);
    let s = scaling_factors(spec);

    let eps_pp = DenseMatrix::from_fn(n, n, |i, j| {
        if m.i_k[(i, j)] != 0.0 {
            let denom = spec.u_total[i] + spec.u_total[j] + s.k_m[(i, j)];
            (spec.k2[(i, j)] / spec.k1[(i, j)]) * spec.u_total[i] / (denom * denom)
        } else {
            0.0
        }
    });
    let eps_ep = DenseMatrix::from_fn(n, n, |i, j| {
        if m.i_l[(i, j)] != 0.0 {
            let denom = spec.e_total[i] + spec.u_total[j] + s.l_m[(i, j)];
            (spec.l2[(i, j)] / spec.l1[(i, j)]) * spec.e_total[i] / (denom * denom)
        } else {
            0.0
        }
    });
    let eps = eps_pp.max_abs().max(eps_ep.max_abs());

    let ratio_flags = ratio_heuristics(spec, ratio_bound);
    let (_, jacobian_spectrum) = slow_manifold_jacobian(spec, p_query)?;

    let verdict = if eps < 0.05 && ratio_flags.is_empty() && jacobian_spectrum.max_real_part < 0.0
    {
        Verdict::Valid
    } else if eps < 0.25 {
        Verdict::Marginal
    } else {
        Verdict::Invalid
    };
    Ok(ValidityReport { eps_pp, eps_ep, eps, ratio_flags, jacobian_spectrum, verdict })
}

// The timescale-separation analysis assumes rate and concentration ratios
// stay O(1) as ε shrinks. A single parameter point cannot witness an
// asymptotic statement, so each tier of like quantities is screened for a
// spread beyond `bound` and flagged rather than failed.
fn ratio_heuristics(spec: &NetworkSpec, bound: f64) -> Vec<String> {
    let m = masks(spec);
    let n = spec.n;
    let mut flags = Vec::new();
    let mut screen = |name: &str, values: Vec<f64>| {
        let lo = values.iter().cloned().fold(f64::INFINITY, f64::min);
        let hi = values.iter().cloned().fold(0.0_f64, f64::max);
        if values.len() >= 2 && lo > 0.0 && hi / lo > bound {
            flags.push(format!(
                "{name} span a factor of {:.3e} (bound {bound})",
                hi / lo
            ));
        }
    };

    let collect = |pp: &DenseMatrix, ep: &DenseMatrix| -> Vec<f64> {
        let mut v = Vec::new();
        for i in 0..n {
            for j in 0..n {
                if m.i_k[(i, j)] != 0.0 {
                    v.push(pp[(i, j)]);
                }
                if m.i_l[(i, j)] != 0.0 {
                    v.push(ep[(i, j)]);
                }
            }
        }
        v
    };
    screen("binding rates", collect(&spec.k1, &spec.l1));
    screen("unbinding rates", collect(&spec.k_neg1, &spec.l_neg1));
    screen("catalytic rates", collect(&spec.k2, &spec.l2));
    let mut totals: Vec<f64> = spec.u_total.clone();
    totals.extend(spec.e_total.iter().copied().filter(|v| *v > 0.0));
    screen("concentration totals", totals);
    flags
}

/// ε for a single enzyme–substrate pair and the hard bound ε ≤ 1/4, which
/// holds for every positive parameter combination.
pub fn pair_epsilon_bound(k1: f64, k2: f64, k_neg1: f64, e: f64, x: f64) -> (f64, bool) {
    let k_m = (k_neg1 + k2) / k1;
    let denom = e + x + k_m;
    let eps = (k2 / k1) * e / (denom * denom);
    (eps, eps <= 0.25 + 1e-12)
}

/// Jacobian of the fast (complex) subsystem on the slow manifold,
/// restricted to the active complexes, plus its spectrum.
///
/// Assembled in the stacked coordinates C = [C_U : C_Eᵗ] (n×2n):
///   J = −Q̂₁[(Z V₂ₙᵗ ⊗ I_n) + (I₂ₙ ⊗ P V_nᵗ)(I₂ₙ² − hat((I₂ₙⁿ)ᵗ))] − Q̂₂
/// with Q₁ = [K₁ : L₁ᵗ], Q₂ = [K₋₁+K₂ : L₋₁ᵗ+L₂ᵗ] and Z = [U; E] the free
/// species from the conservation identities Z = Z̄ − (Cᵗ − I₂ₙⁿ∗Cᵗ)V_n,
/// Z̄ = [U_T − P̄; E_T].
pub fn slow_manifold_jacobian(
    spec: &NetworkSpec,
    p: &[f64],
) -> Result<(DenseMatrix, Spectrum), ValidityError> {
    let n = spec.n;
    let sol = solve_complexes(spec, p)?;
    let state = FullState::assemble(spec, p.to_vec(), sol.c_u.clone(), sol.c_e.clone());

    let stack = |left: &DenseMatrix, right_t: &DenseMatrix| {
        DenseMatrix::from_fn(n, 2 * n, |i, j| {
            if j < n {
                left[(i, j)]
            } else {
                right_t[(j - n, i)]
            }
        })
    };
    let c = stack(&sol.c_u, &sol.c_e);
    let q1 = stack(&spec.k1, &spec.l1);
    let q2 = stack(&spec.k_neg1.add(&spec.k2), &spec.l_neg1.add(&spec.l2));

    // Z via the conservation identity in stacked form
    let p_bar = state.p_bar();
    let z_bar = DenseMatrix::from_fn(2 * n, 1, |i, _| {
        if i < n {
            spec.u_total[i] - p_bar[i]
        } else {
            spec.e_total[i - n]
        }
    });
    let i2n_n = DenseMatrix::from_fn(2 * n, n, |i, j| if i == j { 1.0 } else { 0.0 });
    let ct = c.transpose();
    let bound_shares = ct
        .sub(&hadamard(&i2n_n, &ct).expect("shapes agree"))
        .matmul(&DenseMatrix::ones_col(n));
    let z = z_bar.sub(&bound_shares);

    let eye_n = DenseMatrix::identity(n);
    let term1 = kron(&z.matmul(&DenseMatrix::ones_col(2 * n).transpose()), &eye_n);
    let pv = DenseMatrix::col_from(p).matmul(&DenseMatrix::ones_col(n).transpose());
    let off = DenseMatrix::identity(2 * n * n).sub(&hat(&i2n_n.transpose()));
    let term2 = kron(&DenseMatrix::identity(2 * n), &pv).matmul(&off);
    let j_full = hat(&q1)
        .matmul(&term1.add(&term2))
        .add(&hat(&q2))
        .scale(-1.0);

    // principal submatrix on the active complexes: column-major positions of
    // the C_U block, then of the transposed EP mask for the C_Eᵗ block
    let m = masks(spec);
    let mut idx = Vec::new();
    for j in 0..n {
        for i in 0..n {
            if m.i_k[(i, j)] != 0.0 {
                idx.push(j * n + i);
            }
        }
    }
    for j in 0..n {
        for i in 0..n {
            if m.i_l[(j, i)] != 0.0 {
                idx.push(n * n + j * n + i);
            }
        }
    }
    let restricted = DenseMatrix::from_fn(idx.len(), idx.len(), |r, c| j_full[(idx[r], idx[c])]);
    let spectrum = eigenvalues(&restricted)?;
    Ok((restricted, spectrum))
}

/// Check the invariant region along a trajectory: 0 ≤ P̄_i ≤ U_i^T,
/// 0 ≤ C^U_{ij} ≤ 2α_{ij}, 0 ≤ C^E_{ij} ≤ 2β_{ij}, with slack 10·atol.
pub fn omega_invariance_check(spec: &NetworkSpec, trajectory: &TrajectoryTable) -> Vec<String> {
    let n = spec.n;
    let m = masks(spec);
    let s = scaling_factors(spec);
    let slack = 10.0 * trajectory.meta.atol;
    let mut violations = Vec::new();

    for (t, state) in trajectory.times.iter().zip(&trajectory.states) {
        let p_bar = state.p_bar();
        for i in 0..n {
            if p_bar[i] < -slack || p_bar[i] > spec.u_total[i] + slack {
                violations.push(format!(
                    "t={t}: total active protein {} = {} outside [0, {}]",
                    i + 1,
                    p_bar[i],
                    spec.u_total[i]
                ));
            }
        }
        for i in 0..n {
            for j in 0..n {
                if m.i_k[(i, j)] != 0.0 {
                    let v = state.c_u[(i, j)];
                    let cap = 2.0 * s.alpha[(i, j)];
                    if v < -slack || v > cap + slack {
                        violations.push(format!(
                            "t={t}: CU({},{}) = {v} outside [0, {cap}]",
                            i + 1,
                            j + 1
                        ));
                    }
                }
                if m.i_l[(i, j)] != 0.0 {
                    let v = state.c_e[(i, j)];
                    let cap = 2.0 * s.beta[(i, j)];
                    if v < -slack || v > cap + slack {
                        violations.push(format!(
                            "t={t}: CE({},{}) = {v} outside [0, {cap}]",
                            i + 1,
                            j + 1
                        ));
                    }
                }
            }
        }
    }
    violations
}
