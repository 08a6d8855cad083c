//! CSV form of [`IdsCurve`]: one row per energy, run metadata repeated on
//! every row.

use std::io::{Read, Write};

use serde::{Deserialize, Serialize};

use super::{IdsCurve, IdsError};

#[allow(non_snake_case)]
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CurveRow {
    pub E: f64,
    pub n_dirichlet: f64,
    pub stderr_d: f64,
    pub n_neumann: f64,
    pub stderr_n: f64,
    pub realizations: usize,
    pub L: f64,
    pub d: usize,
    pub M: u32,
    pub model: String,
    pub master_seed: u64,
}

pub fn write_curve_csv<W: Write>(curve: &IdsCurve, out: W) -> Result<(), IdsError> {
    let mut writer = csv::Writer::from_writer(out);
    for k in 0..curve.energies.len() {
        writer.serialize(CurveRow {
            E: curve.energies[k],
            n_dirichlet: curve.n_dirichlet[k],
            stderr_d: curve.stderr_d[k],
            n_neumann: curve.n_neumann[k],
            stderr_n: curve.stderr_n[k],
            realizations: curve.realizations,
            L: curve.side,
            d: curve.dim,
            M: curve.cells_per_unit,
            model: curve.model.clone(),
            master_seed: curve.master_seed,
        })?;
    }
    writer.flush()?;
    Ok(())
}

pub fn read_curve_csv<R: Read>(input: R) -> Result<IdsCurve, IdsError> {
    let mut reader = csv::Reader::from_reader(input);
    let rows: Vec<CurveRow> = reader.deserialize().collect::<Result<_, _>>()?;
    let first = rows.first().ok_or_else(|| IdsError::MalformedCurve("no rows".into()))?;
    let same_run = |r: &CurveRow| {
        r.realizations == first.realizations
            && r.L == first.L
            && r.d == first.d
            && r.M == first.M
            && r.model == first.model
            && r.master_seed == first.master_seed
    };
    if !rows.iter().all(same_run) {
        return Err(IdsError::MalformedCurve("rows carry different run metadata".into()));
    }
    if rows.windows(2).any(|w| w[1].E <= w[0].E) {
        return Err(IdsError::MalformedCurve("energies must be strictly ascending".into()));
    }
    Ok(IdsCurve {
        energies: rows.iter().map(|r| r.E).collect(),
        n_dirichlet: rows.iter().map(|r| r.n_dirichlet).collect(),
        stderr_d: rows.iter().map(|r| r.stderr_d).collect(),
        n_neumann: rows.iter().map(|r| r.n_neumann).collect(),
        stderr_n: rows.iter().map(|r| r.stderr_n).collect(),
        floor: 0.0,
        realizations: first.realizations,
        side: first.L,
        dim: first.d,
        cells_per_unit: first.M,
        model: first.model.clone(),
        master_seed: first.master_seed,
    })
}
