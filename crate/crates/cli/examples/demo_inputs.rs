//! Writes four synthetic country CSVs and a minimal config into a directory.
//!
//! cargo run -p fiscal-svar-cli --example demo_inputs -- demo/ [seed]

use std::path::PathBuf;

use fiscal_svar_cli::config::RunConfig;
use fiscal_svar_cli::demo::write_demo_inputs;

fn main() {
    let mut args = std::env::args().skip(1);
    let dir = PathBuf::from(args.next().unwrap_or_else(|| "demo".into()));
    let seed = args.next().map_or(11, |s| s.parse().expect("seed must be an integer"));
    let countries = write_demo_inputs(&dir, seed).expect("demo inputs");
    let entries: Vec<_> = countries
        .iter()
        .map(|c| serde_json::json!({ "code": c.code, "csv": c.csv }))
        .collect();
    let text = serde_json::to_string_pretty(&serde_json::json!({ "countries": entries })).unwrap();
    RunConfig::from_json(&text).expect("demo config is valid");
    std::fs::write(dir.join("config.json"), text + "\n").expect("write config");
    println!("wrote {}", dir.join("config.json").display());
}
