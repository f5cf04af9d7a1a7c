//! Driving an experiment from a JSON configuration, as the binary does.

use riccdiff::cli::{parse_config, read_report, run_experiment};

fn main() -> Result<(), Box<dyn std::error::Error>> {
    let dir = std::env::temp_dir().join("riccdiff-example");
    let text = format!(
        r#"{{
            "schema_version": 1,
            "experiment": "moments",
            "model": {{ "dim": 2, "A": 0, "R": 1, "S": 1, "kappa": 1, "eps": 0.3 }},
            "run": {{ "T": 1, "dt": 0.01, "n_paths": 500, "seed": 1, "n_orders": [1, 2] }},
            "output": {{ "directory": {:?} }}
        }}"#,
        dir.display().to_string()
    );
    let parsed = parse_config(&text)?;
    for w in &parsed.warnings {
        println!("warning: {w}");
    }
    let out = run_experiment(&parsed.config, &parsed.warnings);
    println!("exit code {}", out.exit_code);
    for line in read_report(&dir)?.1 {
        println!("{line}");
    }
    Ok(())
}
