//! Driving the command-line interface from code.

use clap::Parser;
use pcem::cli::{execute, Cli};

pub fn run_example() -> Result<String, Box<dyn std::error::Error>> {
    let out = std::env::temp_dir().join("pcem-reproduce-example");
    let cli = Cli::try_parse_from([
        "pcem",
        "stability",
        "--scheme",
        "symmetric-PCEM",
        "--no-header",
        "--out",
        out.to_str().ok_or("temp dir is not utf-8")?,
    ])?;
    let mut buffer = Vec::new();
    execute(&cli, &mut buffer)?;
    let text = String::from_utf8(buffer)?;
    print!("{text}");
    println!(
        "region written to {}",
        out.join("stability_symmetric-PCEM.csv").display()
    );
    Ok(text)
}

fn main() -> Result<(), Box<dyn std::error::Error>> {
    run_example().map(|_| ())
}
