//! JSON and CSV dumps of state vectors and density matrices.
//!
//! Entries are listed row-major. Hybrid states use the qubit as the slow
//! index, so entry `q·(N+1) + n` belongs to qubit level `q`, Fock level `n`.

use serde::{Deserialize, Serialize};

use crate::error::{GkpError, Result};
use crate::fock::{DensityOp, HybridState, OscillatorKet};
use crate::gkp::OscillatorState;
use crate::scalar::{to_f64, CMatrix, Real};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum StateKind {
    Ket,
    Density,
}

/// One complex entry; `col` is 0 for kets.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Entry {
    pub row: usize,
    pub col: usize,
    pub re: f64,
    pub im: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StateDump {
    pub kind: StateKind,
    /// Fock cutoff `N` of the oscillator factor.
    pub cutoff: usize,
    /// Whether a qubit factor precedes the oscillator.
    pub hybrid: bool,
    pub dim: usize,
    pub entries: Vec<Entry>,
}

impl StateDump {
    pub fn from_ket<T: Real>(ket: &OscillatorKet<T>) -> Self {
        let entries = ket
            .amplitudes()
            .iter()
            .enumerate()
            .map(|(row, z)| Entry {
                row,
                col: 0,
                re: to_f64(z.re),
                im: to_f64(z.im),
            })
            .collect();
        Self {
            kind: StateKind::Ket,
            cutoff: ket.cutoff(),
            hybrid: false,
            dim: ket.amplitudes().len(),
            entries,
        }
    }

    pub fn from_density<T: Real>(rho: &DensityOp<T>) -> Self {
        Self {
            kind: StateKind::Density,
            cutoff: rho.cutoff(),
            hybrid: false,
            dim: rho.matrix().nrows(),
            entries: matrix_entries(rho.matrix()),
        }
    }

    pub fn from_state<T: Real>(state: &OscillatorState<T>) -> Self {
        match state {
            OscillatorState::Pure(k) => Self::from_ket(k),
            OscillatorState::Mixed(r) => Self::from_density(r),
        }
    }

    pub fn from_hybrid<T: Real>(state: &HybridState<T>) -> Self {
        let cutoff = state.osc_dim() - 1;
        match state {
            HybridState::Pure(v) => Self {
                kind: StateKind::Ket,
                cutoff,
                hybrid: true,
                dim: v.len(),
                entries: v
                    .iter()
                    .enumerate()
                    .map(|(row, z)| Entry {
                        row,
                        col: 0,
                        re: to_f64(z.re),
                        im: to_f64(z.im),
                    })
                    .collect(),
            },
            HybridState::Mixed(m) => Self {
                kind: StateKind::Density,
                cutoff,
                hybrid: true,
                dim: m.nrows(),
                entries: matrix_entries(m),
            },
        }
    }

    pub fn to_json(&self) -> Result<String> {
        serde_json::to_string_pretty(self).map_err(|e| GkpError::invalid("dump", e.to_string()))
    }

    pub fn from_json(text: &str) -> Result<Self> {
        serde_json::from_str(text).map_err(|e| GkpError::invalid("dump", e.to_string()))
    }

    /// `row,col,re,im` with a header line.
    pub fn to_csv(&self) -> Result<String> {
        let mut w = csv::Writer::from_writer(Vec::new());
        for e in &self.entries {
            w.serialize(e).map_err(|e| GkpError::invalid("dump", e.to_string()))?;
        }
        let bytes = w.into_inner().map_err(|e| GkpError::invalid("dump", e.to_string()))?;
        String::from_utf8(bytes).map_err(|e| GkpError::invalid("dump", e.to_string()))
    }
}

fn matrix_entries<T: Real>(m: &CMatrix<T>) -> Vec<Entry> {
    let (r, c) = m.shape();
    let mut out = Vec::with_capacity(r * c);
    for row in 0..r {
        for col in 0..c {
            let z = m[(row, col)];
            out.push(Entry {
                row,
                col,
                re: to_f64(z.re),
                im: to_f64(z.im),
            });
        }
    }
    out
}
