//! Serialization of states and sample clouds: a JSON document format for
//! single states with parameters, and a CSV format for classified clouds
//! with full round-trip precision.

use std::io::{self, Write};

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::sampler::CloudRow;
use crate::state::{Params, State};

#[derive(Debug, Error)]
pub enum IoError {
    #[error("i/o failure: {0}")]
    Io(#[from] io::Error),
    #[error("malformed document: {0}")]
    Parse(#[from] serde_json::Error),
}

/// The on-disk JSON document: a state plus its parameters.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct StateDoc {
    #[serde(flatten)]
    pub state: State,
    pub params: Params,
}

pub fn read_state_doc(text: &str) -> Result<StateDoc, IoError> {
    Ok(serde_json::from_str(text)?)
}

pub fn write_state_doc(doc: &StateDoc) -> Result<String, IoError> {
    Ok(serde_json::to_string_pretty(doc)?)
}

/// Full-precision decimal rendering (17 significant digits round-trips
/// every finite double).
pub fn fmt_full(x: f64) -> String {
    format!("{x:.16e}")
}

pub const CSV_HEADER: &str = "alpha_x,alpha_y,alpha_z,beta_x,beta_y,beta_z,\
m_xx,m_xy,m_xz,m_yx,m_yy,m_yz,m_zx,m_zy,m_zz,verdict,nuclear_norm,g_defect,ohm_defect";

/// Write a classified cloud as CSV, one row per sample, in index order.
pub fn write_cloud_csv<W: Write>(mut w: W, rows: &[CloudRow]) -> Result<(), IoError> {
    writeln!(w, "{CSV_HEADER}")?;
    for row in rows {
        let z = &row.state;
        let mut fields = Vec::with_capacity(19);
        for i in 0..3 {
            fields.push(fmt_full(z.alpha[i]));
        }
        for i in 0..3 {
            fields.push(fmt_full(z.beta[i]));
        }
        for i in 0..3 {
            for j in 0..3 {
                fields.push(fmt_full(z.m[(i, j)]));
            }
        }
        fields.push(row.verdict.tag().to_string());
        fields.push(fmt_full(row.nuclear_norm));
        fields.push(fmt_full(row.g_defect));
        fields.push(fmt_full(row.ohm_defect));
        writeln!(w, "{}", fields.join(","))?;
    }
    Ok(())
}
