//! JSON interchange formats.
//!
//! * element: `[{"exp": [r1, …, rn], "re": x, "im": y}, …]`
//! * deformation matrix: row-major flat array of `n²` numbers
//! * matrix: `{"q": q, "entries": [element, …]}` (row-major)
//! * module: `{"q": q, "p": "free" | matrix}`
//! * connection: `{"n", "theta", "truncation", "convention", "module", "potentials"}`
//! * descent trace: one iteration record per line

use std::sync::Arc;

use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::connection::{Connection, Convention, ProjectiveModule};
use crate::error::{Error, Result};
use crate::matrix::TorusMatrix;
use crate::optimize::IterationRecord;
use crate::torus::{DeformationMatrix, Exponent, TorusElement, TruncationPolicy};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct TermJson {
    pub exp: Vec<i32>,
    pub re: f64,
    pub im: f64,
}

pub type ElementJson = Vec<TermJson>;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct MatrixJson {
    pub q: usize,
    pub entries: Vec<ElementJson>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum ProjectionJson {
    Named(String),
    Matrix(MatrixJson),
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ModuleJson {
    pub q: usize,
    pub p: ProjectionJson,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ConnectionJson {
    pub n: usize,
    pub theta: Vec<f64>,
    pub truncation: TruncationPolicy,
    pub convention: Convention,
    pub module: ModuleJson,
    pub potentials: Vec<MatrixJson>,
}

pub fn element_to_json(a: &TorusElement) -> ElementJson {
    a.terms()
        .iter()
        .map(|(e, c)| TermJson {
            exp: e.as_slice().to_vec(),
            re: c.re,
            im: c.im,
        })
        .collect()
}

pub fn element_from_json(
    theta: &Arc<DeformationMatrix>,
    policy: TruncationPolicy,
    json: &ElementJson,
) -> Result<TorusElement> {
    let n = theta.n();
    let mut terms = Vec::with_capacity(json.len());
    for t in json {
        if t.exp.len() != n {
            return Err(Error::Malformed(format!(
                "exponent {:?} has length {}, expected {n}",
                t.exp,
                t.exp.len()
            )));
        }
        if !(t.re.is_finite() && t.im.is_finite()) {
            return Err(Error::Malformed(format!("non-finite coefficient at {:?}", t.exp)));
        }
        terms.push((Exponent::new(&t.exp), Complex64::new(t.re, t.im)));
    }
    TorusElement::from_terms(theta, policy, terms)
}

/// Parses a row-major deformation matrix; skew-symmetry is checked at
/// [`crate::torus::THETA_LOAD_TOL`].
pub fn theta_from_json(n: usize, row_major: &[f64]) -> Result<DeformationMatrix> {
    DeformationMatrix::new(n, row_major.to_vec())
}

pub fn matrix_to_json(m: &TorusMatrix) -> MatrixJson {
    MatrixJson {
        q: m.q(),
        entries: m.entries().iter().map(element_to_json).collect(),
    }
}

pub fn matrix_from_json(
    theta: &Arc<DeformationMatrix>,
    policy: TruncationPolicy,
    json: &MatrixJson,
) -> Result<TorusMatrix> {
    if json.q == 0 || json.entries.len() != json.q * json.q {
        return Err(Error::Malformed(format!(
            "{} entries for a {}x{} matrix",
            json.entries.len(),
            json.q,
            json.q
        )));
    }
    let entries = json
        .entries
        .iter()
        .map(|e| element_from_json(theta, policy, e))
        .collect::<Result<Vec<_>>>()?;
    TorusMatrix::from_entries(json.q, entries)
}

pub fn module_from_json(
    theta: &Arc<DeformationMatrix>,
    policy: TruncationPolicy,
    json: &ModuleJson,
) -> Result<ProjectiveModule> {
    match &json.p {
        ProjectionJson::Named(s) if s == "free" => {
            if json.q == 0 {
                return Err(Error::Malformed("module rank must be positive".into()));
            }
            Ok(ProjectiveModule::free(theta, policy, json.q))
        }
        ProjectionJson::Named(s) => Err(Error::Malformed(format!("unknown projection \"{s}\""))),
        ProjectionJson::Matrix(m) => {
            if m.q != json.q {
                return Err(Error::Malformed(format!("module rank {} but p is {}x{}", json.q, m.q, m.q)));
            }
            ProjectiveModule::new(matrix_from_json(theta, policy, m)?)
        }
    }
}

pub fn module_to_json(m: &ProjectiveModule) -> ModuleJson {
    ModuleJson {
        q: m.q(),
        p: ProjectionJson::Matrix(matrix_to_json(m.p())),
    }
}

pub fn connection_to_json(c: &Connection) -> ConnectionJson {
    let theta = c.module().theta();
    ConnectionJson {
        n: theta.n(),
        theta: theta.row_major().to_vec(),
        truncation: c.module().policy(),
        convention: c.convention(),
        module: module_to_json(c.module()),
        potentials: c.potentials().iter().map(matrix_to_json).collect(),
    }
}

pub fn connection_from_json(json: &ConnectionJson) -> Result<Connection> {
    json.truncation.validate()?;
    let theta = Arc::new(theta_from_json(json.n, &json.theta)?);
    let module = module_from_json(&theta, json.truncation, &json.module)?;
    let potentials = json
        .potentials
        .iter()
        .map(|m| matrix_from_json(&theta, json.truncation, m))
        .collect::<Result<Vec<_>>>()?;
    Connection::new(module, json.convention, potentials)
}

/// One JSON object per line, newline terminated.
pub fn trace_to_jsonl(records: &[IterationRecord]) -> Result<String> {
    let mut out = String::new();
    for r in records {
        out.push_str(&serde_json::to_string(r)?);
        out.push('\n');
    }
    Ok(out)
}

pub fn trace_from_jsonl(text: &str) -> Result<Vec<IterationRecord>> {
    text.lines()
        .filter(|l| !l.trim().is_empty())
        .map(|l| serde_json::from_str(l).map_err(Error::from))
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::random;

    #[test]
    fn element_round_trip() {
        let th = Arc::new(DeformationMatrix::planar(0.3));
        let pol = TruncationPolicy::strict(2);
        let mut rng = random::rng(1);
        let a = random::element(&mut rng, &th, pol, 1, 1.0);
        let back = element_from_json(&th, pol, &element_to_json(&a)).unwrap();
        assert_eq!(a.sub(&back).unwrap().l1_norm(), 0.0);
    }

    #[test]
    fn element_rejects_bad_exponents() {
        let th = Arc::new(DeformationMatrix::planar(0.3));
        let pol = TruncationPolicy::strict(2);
        let bad = vec![TermJson {
            exp: vec![1],
            re: 1.0,
            im: 0.0,
        }];
        assert!(matches!(element_from_json(&th, pol, &bad), Err(Error::Malformed(_))));
        let outside = vec![TermJson {
            exp: vec![3, 0],
            re: 1.0,
            im: 0.0,
        }];
        assert!(element_from_json(&th, pol, &outside).is_err());
    }

    #[test]
    fn theta_validation() {
        assert!(theta_from_json(2, &[0.0, -0.2, 0.2, 0.0]).is_ok());
        assert!(theta_from_json(2, &[0.0, 0.3, 0.2, 0.0]).is_err());
        assert!(theta_from_json(2, &[0.0, 0.2, 0.2]).is_err());
    }

    #[test]
    fn connection_round_trip() {
        let th = Arc::new(DeformationMatrix::planar(0.3));
        let pol = TruncationPolicy::lossy(3);
        let mut rng = random::rng(7);
        let p = random::rank_one_projection(&mut rng, &th, pol, 1);
        let m = ProjectiveModule::new(p).unwrap();
        let c = random::dynamical_connection(&mut rng, &m, 1, 0.4).unwrap();
        let text = serde_json::to_string(&connection_to_json(&c)).unwrap();
        let back = connection_from_json(&serde_json::from_str(&text).unwrap()).unwrap();
        for (a, b) in c.potentials().iter().zip(back.potentials()) {
            assert_eq!(a.distance(b).unwrap(), 0.0);
        }
        assert_eq!(back.convention(), Convention::Dynamical);
    }

    #[test]
    fn named_projection() {
        let th = Arc::new(DeformationMatrix::planar(0.3));
        let pol = TruncationPolicy::strict(2);
        let free: ModuleJson = serde_json::from_str(r#"{"q": 2, "p": "free"}"#).unwrap();
        assert_eq!(module_from_json(&th, pol, &free).unwrap().q(), 2);
        let other: ModuleJson = serde_json::from_str(r#"{"q": 2, "p": "bogus"}"#).unwrap();
        assert!(module_from_json(&th, pol, &other).is_err());
    }

    #[test]
    fn trace_lines_round_trip() {
        let recs = vec![
            IterationRecord {
                iteration: 0,
                ym: 2.0,
                grad_norm: 1.5,
                step: 0.0,
            },
            IterationRecord {
                iteration: 1,
                ym: 0.0,
                grad_norm: 0.0,
                step: 0.5,
            },
        ];
        let text = trace_to_jsonl(&recs).unwrap();
        assert_eq!(text.lines().count(), 2);
        assert_eq!(trace_from_jsonl(&text).unwrap(), recs);
    }
}
