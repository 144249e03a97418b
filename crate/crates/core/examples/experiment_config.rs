//! Drives the experiment layer from a JSON config, as the command-line tool
//! does, and writes the reports to a temporary directory.

use sacovest::experiment::{canonical_json, emit_reports_to, execute, load_config_str, CliOverrides};

fn main() -> sacovest::Result<()> {
    let text = r#"{
        "command": "rate",
        "problem": "l1quad",
        "n_grid": [1024, 2048, 4096],
        "reps": 8,
        "seed": 2,
        "threads": 2
    }"#;
    let config = load_config_str(text, "inline", &CliOverrides::default())?;
    let reports = execute(&config)?;
    print!("{}", canonical_json(&reports.summary["r_squared"]));

    let dir = std::env::temp_dir().join("sacovest-example");
    for path in emit_reports_to(&reports, &dir)? {
        println!("wrote {}", path.display());
    }
    Ok(())
}
