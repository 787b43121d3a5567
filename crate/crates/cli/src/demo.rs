//! Synthetic four-country inputs for trying the pipeline without real data.

use std::fs;
use std::path::Path;

use fiscal_svar::dgp::{simulate_var, synthetic_dataset, DgpSpec};
use fiscal_svar::ingest::{ColumnSchema, TransformedPanel};
use fiscal_svar::QuarterRange;

use crate::config::CountryEntry;
use crate::CliError;

/// Country codes paired with how strongly output loads on lagged spending.
pub const DEMO_COUNTRIES: [(&str, f64); 4] = [("AA", 0.30), ("BB", 0.45), ("CC", 0.60), ("DD", -0.15)];

/// Writes `<code>.csv` level files covering the default window into `dir`.
pub fn write_demo_inputs(dir: &Path, seed: u64) -> Result<Vec<CountryEntry>, CliError> {
    fs::create_dir_all(dir).map_err(|e| CliError::Io(format!("cannot create {}: {e}", dir.display())))?;
    let window = QuarterRange::default();
    let rows = window.len() - 1;
    DEMO_COUNTRIES
        .iter()
        .enumerate()
        .map(|(i, (code, loading))| {
            let mut spec = DgpSpec::fiscal_reference(rows, seed.wrapping_add(i as u64));
            spec.lags[0][2][0] = *loading;
            let err = |e: String| CliError::Data {
                country: code.to_string(),
                message: e,
            };
            let sim = simulate_var(&spec).map_err(|e| err(e.to_string()))?;
            // Shift so the level data start at the window's first quarter.
            let panel = TransformedPanel::new(
                window.start.next(),
                sim.labels().to_vec(),
                sim.x().clone(),
                sim.exog_labels().to_vec(),
                sim.z().clone(),
            )
            .map_err(|e| err(e.to_string()))?;
            let data = synthetic_dataset(&panel, code, seed ^ (0x5eed + i as u64)).map_err(|e| err(e.to_string()))?;
            let path = dir.join(format!("{code}.csv"));
            let file =
                fs::File::create(&path).map_err(|e| CliError::Io(format!("cannot write {}: {e}", path.display())))?;
            data.write_csv(file, &ColumnSchema::default())
                .map_err(|e| err(e.to_string()))?;
            Ok(CountryEntry {
                code: code.to_string(),
                csv: format!("{code}.csv").into(),
                name: None,
                schema: ColumnSchema::default(),
            })
        })
        .collect()
}
