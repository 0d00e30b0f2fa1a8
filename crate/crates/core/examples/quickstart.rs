//! Runs the bundled quickstart config end to end and prints the grid.
//!
//! Same as `mmsb run configs/quickstart.json --out <tmp> --overwrite`.

use std::path::Path;

use mmsb::eval::{render_table, TableStyle};
use mmsb::runner::{run_experiment, RunOptions};

fn main() -> mmsb::Result<()> {
    let config = Path::new(env!("CARGO_MANIFEST_DIR")).join("configs/quickstart.json");
    let opts = RunOptions {
        out: Some(std::env::temp_dir().join("mmsb-quickstart")),
        overwrite: true,
        ..Default::default()
    };
    let summary = run_experiment(&config, &opts)?;
    print!("{}", render_table(&summary.table, TableStyle::Text));
    println!("{} files in {}", summary.files.len(), summary.out_dir.display());
    Ok(())
}
