//! JSON model documents.

use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

use super::{MapModel, PhaseType};
use crate::error::{Error, Result};
use crate::numerics::RMatrix;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ModelDocument {
    pub states: usize,
    #[serde(rename = "Q")]
    pub q: Vec<Vec<f64>>,
    pub premium: Vec<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub sigma: Option<Vec<f64>>,
    pub claim_rate: Vec<f64>,
    pub claims: Vec<PhaseDocument>,
    pub omega: Vec<f64>,
    /// Keys are `"i,j"` with 0-based state indices.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub jumps: Option<BTreeMap<String, PhaseDocument>>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "type", rename_all = "lowercase", deny_unknown_fields)]
pub enum PhaseDocument {
    Exponential {
        rate: f64,
    },
    Phase {
        alpha: Vec<f64>,
        #[serde(rename = "T")]
        t: Vec<Vec<f64>>,
    },
}

fn square(rows: &[Vec<f64>], n: usize, what: &str) -> Result<RMatrix> {
    if rows.len() != n || rows.iter().any(|r| r.len() != n) {
        return Err(Error::InvalidModel(format!(
            "dimension mismatch: {what} must be {n}x{n}"
        )));
    }
    Ok(RMatrix::from_fn(n, n, |i, j| rows[i][j]))
}

impl PhaseDocument {
    fn into_law(self) -> Result<PhaseType> {
        match self {
            PhaseDocument::Exponential { rate } => PhaseType::exponential(rate),
            PhaseDocument::Phase { alpha, t } => {
                let m = alpha.len();
                PhaseType::new(alpha, square(&t, m, "phase-type T")?)
            }
        }
    }

    fn from_law(law: &PhaseType) -> Self {
        if let Some(rate) = law.as_exponential() {
            return PhaseDocument::Exponential { rate };
        }
        let t = law.sub_generator();
        PhaseDocument::Phase {
            alpha: law.alpha().iter().copied().collect(),
            t: t.row_iter().map(|r| r.iter().copied().collect()).collect(),
        }
    }
}

fn parse_key(key: &str) -> Result<(usize, usize)> {
    let bad = || Error::InvalidModel(format!("jump key {key:?} is not of the form \"i,j\""));
    let (a, b) = key.split_once(',').ok_or_else(bad)?;
    let i = a.trim().parse().map_err(|_| bad())?;
    let j = b.trim().parse().map_err(|_| bad())?;
    Ok((i, j))
}

impl ModelDocument {
    pub fn into_model(self) -> Result<MapModel> {
        let n = self.states;
        let q = square(&self.q, n, "Q")?;
        if self.claims.len() != n {
            return Err(Error::InvalidModel(format!(
                "dimension mismatch: claims has length {}, expected {n}",
                self.claims.len()
            )));
        }
        let claims = self
            .claims
            .into_iter()
            .map(PhaseDocument::into_law)
            .collect::<Result<Vec<_>>>()?;
        let mut jumps = BTreeMap::new();
        for (key, law) in self.jumps.unwrap_or_default() {
            jumps.insert(parse_key(&key)?, law.into_law()?);
        }
        MapModel::new(
            q,
            self.premium,
            self.sigma.unwrap_or_else(|| vec![0.0; n]),
            self.claim_rate,
            claims,
            self.omega,
            jumps,
        )
    }

    pub fn from_model(model: &MapModel) -> Self {
        let n = model.states();
        let q = model.generator();
        let sigma = model.sigma();
        ModelDocument {
            states: n,
            q: q.row_iter().map(|r| r.iter().copied().collect()).collect(),
            premium: model.premium().to_vec(),
            sigma: sigma.iter().any(|&s| s != 0.0).then(|| sigma.to_vec()),
            claim_rate: model.claim_rate().to_vec(),
            claims: model.claims().iter().map(PhaseDocument::from_law).collect(),
            omega: model.omega().to_vec(),
            jumps: (!model.jumps().is_empty()).then(|| {
                model
                    .jumps()
                    .iter()
                    .map(|(&(i, j), law)| (format!("{i},{j}"), PhaseDocument::from_law(law)))
                    .collect()
            }),
        }
    }
}
