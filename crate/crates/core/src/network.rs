//! Network data model: the six rate matrices, totals, initial active levels,
//! the JSON file format, and validation of membership in the reducible class
//! (all-or-none edge triples, physical totals, non-degeneracy warnings).

use crate::matrix::DenseMatrix;
use serde::{Deserialize, Serialize};
use std::fmt;
use thiserror::Error;

/// A network of n protein nodes and n enzyme nodes.
///
/// PP-edge (i,j): active protein i catalyzes activation of protein j, rates
/// k1/k_neg1/k2 at entry (i,j). EP-edge (i,j): enzyme i deactivates active
/// protein j, rates l1/l_neg1/l2 at entry (i,j).
#[derive(Debug, Clone, PartialEq)]
pub struct NetworkSpec {
    pub n: usize,
    pub k1: DenseMatrix,
    pub k_neg1: DenseMatrix,
    pub k2: DenseMatrix,
    pub l1: DenseMatrix,
    pub l_neg1: DenseMatrix,
    pub l2: DenseMatrix,
    pub u_total: Vec<f64>,
    pub e_total: Vec<f64>,
    pub p0: Vec<f64>,
}

/// 0/1 connectivity masks; a complex variable exists only where the mask is 1.
#[derive(Debug, Clone, PartialEq)]
pub struct ConnectivityMasks {
    pub i_k: DenseMatrix,
    pub i_l: DenseMatrix,
    pub active_complex_count: usize,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Severity {
    Error,
    Warning,
    Info,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Diagnostic {
    pub severity: Severity,
    pub message: String,
}

impl fmt::Display for Diagnostic {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let tag = match self.severity {
            Severity::Error => "error",
            Severity::Warning => "warning",
            Severity::Info => "info",
        };
        write!(f, "{tag}: {}", self.message)
    }
}

#[derive(Debug, Error)]
pub enum NetworkError {
    /// The document is not valid JSON for the schema (syntax error, missing
    /// field, wrong type).
    #[error("malformed model document: {0}")]
    Json(#[from] serde_json::Error),
    /// The document parsed but violates model invariants.
    #[error("invalid model: {}", format_diagnostics(.0))]
    Invalid(Vec<Diagnostic>),
}

fn format_diagnostics(diags: &[Diagnostic]) -> String {
    diags
        .iter()
        .filter(|d| d.severity == Severity::Error)
        .map(|d| d.message.clone())
        .collect::<Vec<_>>()
        .join("; ")
}

/// On-disk JSON schema. Matrices are row-major n×n; vectors length n.
#[derive(Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct NetworkDocument {
    n: usize,
    k1: Vec<Vec<f64>>,
    k_neg1: Vec<Vec<f64>>,
    k2: Vec<Vec<f64>>,
    l1: Vec<Vec<f64>>,
    l_neg1: Vec<Vec<f64>>,
    l2: Vec<Vec<f64>>,
    u_total: Vec<f64>,
    e_total: Vec<f64>,
    p0: Vec<f64>,
}

fn matrix_from_doc(
    name: &str,
    raw: &[Vec<f64>],
    n: usize,
    errors: &mut Vec<Diagnostic>,
) -> DenseMatrix {
    if raw.len() != n {
        errors.push(Diagnostic {
            severity: Severity::Error,
            message: format!("{name} must have {n} rows, found {}", raw.len()),
        });
        return DenseMatrix::zeros(n, n);
    }
    for (i, row) in raw.iter().enumerate() {
        if row.len() != n {
            errors.push(Diagnostic {
                severity: Severity::Error,
                message: format!("{name} row {} must have {n} entries, found {}", i + 1, row.len()),
            });
            return DenseMatrix::zeros(n, n);
        }
    }
    DenseMatrix::from_rows(raw)
}

fn vector_from_doc(name: &str, raw: &[f64], n: usize, errors: &mut Vec<Diagnostic>) -> Vec<f64> {
    if raw.len() != n {
        errors.push(Diagnostic {
            severity: Severity::Error,
            message: format!("{name} must have length {n}, found {}", raw.len()),
        });
        return vec![0.0; n];
    }
    raw.to_vec()
}

/// Parse a JSON model document. Complexes always start at zero and are not
/// part of the file format. Fails on schema violations and on any
/// error-severity validation diagnostic.
pub fn parse_network(text: &str) -> Result<NetworkSpec, NetworkError> {
    let doc: NetworkDocument = serde_json::from_str(text)?;
    let n = doc.n;
    let mut errors = Vec::new();
    if n == 0 {
        errors.push(Diagnostic {
            severity: Severity::Error,
            message: "n must be positive".into(),
        });
        return Err(NetworkError::Invalid(errors));
    }
    let spec = NetworkSpec {
        n,
        k1: matrix_from_doc("k1", &doc.k1, n, &mut errors),
        k_neg1: matrix_from_doc("k_neg1", &doc.k_neg1, n, &mut errors),
        k2: matrix_from_doc("k2", &doc.k2, n, &mut errors),
        l1: matrix_from_doc("l1", &doc.l1, n, &mut errors),
        l_neg1: matrix_from_doc("l_neg1", &doc.l_neg1, n, &mut errors),
        l2: matrix_from_doc("l2", &doc.l2, n, &mut errors),
        u_total: vector_from_doc("u_total", &doc.u_total, n, &mut errors),
        e_total: vector_from_doc("e_total", &doc.e_total, n, &mut errors),
        p0: vector_from_doc("p0", &doc.p0, n, &mut errors),
    };
    if !errors.is_empty() {
        return Err(NetworkError::Invalid(errors));
    }
    let diags = validate_network(&spec);
    if diags.iter().any(|d| d.severity == Severity::Error) {
        return Err(NetworkError::Invalid(diags));
    }
    Ok(spec)
}

impl NetworkSpec {
    /// Canonical single-line JSON serialization (round-trips exactly:
    /// shortest-decimal text re-parses to identical floats).
    pub fn to_json(&self) -> String {
        let to_rows = |m: &DenseMatrix| -> Vec<Vec<f64>> {
            (0..self.n).map(|i| (0..self.n).map(|j| m[(i, j)]).collect()).collect()
        };
        let doc = NetworkDocument {
            n: self.n,
            k1: to_rows(&self.k1),
            k_neg1: to_rows(&self.k_neg1),
            k2: to_rows(&self.k2),
            l1: to_rows(&self.l1),
            l_neg1: to_rows(&self.l_neg1),
            l2: to_rows(&self.l2),
            u_total: self.u_total.clone(),
            e_total: self.e_total.clone(),
            p0: self.p0.clone(),
        };
        serde_json::to_string(&doc).expect("model serialization cannot fail")
    }

    /// FNV-1a hash of the canonical serialization; identifies the model in
    /// trajectory metadata.
    pub fn content_hash(&self) -> String {
        let mut h: u64 = 0xcbf29ce484222325;
        for b in self.to_json().as_bytes() {
            h ^= u64::from(*b);
            h = h.wrapping_mul(0x100000001b3);
        }
        format!("{h:016x}")
    }
}

fn check_triple(
    name: char,
    a: &DenseMatrix,
    b: &DenseMatrix,
    c: &DenseMatrix,
    n: usize,
    out: &mut Vec<Diagnostic>,
) {
    for i in 0..n {
        for j in 0..n {
            let vals = [a[(i, j)], b[(i, j)], c[(i, j)]];
            let zeros = vals.iter().filter(|v| **v == 0.0).count();
            if zeros != 0 && zeros != 3 {
                out.push(Diagnostic {
                    severity: Severity::Error,
                    message: format!(
                        "all-or-none triple violated at {name}({},{})",
                        i + 1,
                        j + 1
                    ),
                });
            }
        }
    }
}

/// Check all model invariants and class hypotheses. Returns diagnostics;
/// error severity marks invariant violations, warnings mark degeneracies the
/// reduction theory cautions about, info marks accepted oddities.
pub fn validate_network(spec: &NetworkSpec) -> Vec<Diagnostic> {
    let n = spec.n;
    let mut out = Vec::new();

    let rate_matrices: [(&str, &DenseMatrix); 6] = [
        ("k1", &spec.k1),
        ("k_neg1", &spec.k_neg1),
        ("k2", &spec.k2),
        ("l1", &spec.l1),
        ("l_neg1", &spec.l_neg1),
        ("l2", &spec.l2),
    ];
    for (name, m) in rate_matrices {
        for i in 0..n {
            for j in 0..n {
                let v = m[(i, j)];
                if !v.is_finite() {
                    out.push(Diagnostic {
                        severity: Severity::Error,
                        message: format!("{name}({},{}) is not finite", i + 1, j + 1),
                    });
                } else if v < 0.0 {
                    out.push(Diagnostic {
                        severity: Severity::Error,
                        message: format!("{name}({},{}) is negative: {v}", i + 1, j + 1),
                    });
                }
            }
        }
    }
    for (name, vv) in [("u_total", &spec.u_total), ("e_total", &spec.e_total), ("p0", &spec.p0)] {
        for (i, v) in vv.iter().enumerate() {
            if !v.is_finite() {
                out.push(Diagnostic {
                    severity: Severity::Error,
                    message: format!("{name}({}) is not finite", i + 1),
                });
            }
        }
    }
    for (i, u) in spec.u_total.iter().enumerate() {
        if *u <= 0.0 {
            out.push(Diagnostic {
                severity: Severity::Error,
                message: format!("u_total({}) must be positive, found {u}", i + 1),
            });
        }
    }
    for (i, e) in spec.e_total.iter().enumerate() {
        if *e < 0.0 {
            out.push(Diagnostic {
                severity: Severity::Error,
                message: format!("e_total({}) is negative: {e}", i + 1),
            });
        }
    }
    for i in 0..n {
        let p = spec.p0[i];
        if p < 0.0 || p > spec.u_total[i] {
            out.push(Diagnostic {
                severity: Severity::Error,
                message: format!(
                    "p0({}) = {p} outside [0, u_total({}) = {}]",
                    i + 1,
                    i + 1,
                    spec.u_total[i]
                ),
            });
        }
    }

    check_triple('K', &spec.k1, &spec.k_neg1, &spec.k2, n, &mut out);
    check_triple('L', &spec.l1, &spec.l_neg1, &spec.l2, n, &mut out);

    // non-degeneracy: each node should be producible by some PP edge
    for j in 0..n {
        let has_incoming = (0..n).any(|i| spec.k2[(i, j)] > 0.0);
        if !has_incoming {
            out.push(Diagnostic {
                severity: Severity::Warning,
                message: format!("node {} has no activation pathway", j + 1),
            });
        }
    }
    // enzymes with edges but no material can never act
    for i in 0..n {
        let has_edges = (0..n).any(|j| spec.l1[(i, j)] > 0.0);
        if has_edges && spec.e_total[i] == 0.0 {
            out.push(Diagnostic {
                severity: Severity::Warning,
                message: format!("enzyme {} has EP edges but e_total({}) = 0", i + 1, i + 1),
            });
        }
    }
    // autocatalysis flows through the general formulas unchanged; just note it
    for i in 0..n {
        if spec.k1[(i, i)] > 0.0 {
            out.push(Diagnostic {
                severity: Severity::Info,
                message: format!("autocatalytic PP edge at K({},{})", i + 1, i + 1),
            });
        }
    }
    out
}

/// Zero/one connectivity masks and the number of active complex variables.
pub fn masks(spec: &NetworkSpec) -> ConnectivityMasks {
    let n = spec.n;
    let i_k = DenseMatrix::from_fn(n, n, |i, j| if spec.k1[(i, j)] > 0.0 { 1.0 } else { 0.0 });
    let i_l = DenseMatrix::from_fn(n, n, |i, j| if spec.l1[(i, j)] > 0.0 { 1.0 } else { 0.0 });
    let active_complex_count =
        i_k.data().iter().filter(|v| **v > 0.0).count() + i_l.data().iter().filter(|v| **v > 0.0).count();
    ConnectivityMasks { i_k, i_l, active_complex_count }
}
