//! Generates the four synthetic geometries, writes them as CSV and prints
//! how each one splits into separable and strongly convex rows.
//!
//! cargo run --example synth_datasets -- [out_dir]

use implicit_ray::{partition, synth, SynthKind};

fn main() -> Result<(), Box<dyn std::error::Error>> {
    let out = std::env::args().nth(1).map(std::path::PathBuf::from);
    for kind in SynthKind::ALL {
        let data = synth(kind, 20, 0)?;
        let dec = partition(&data.to_margin_matrix())?;
        println!(
            "{:<10} n = {:>3}  separable rows = {:>3}  remaining rows = {:>2}  dim S = {}",
            kind.to_string(),
            data.len(),
            dec.sep_rows.len(),
            dec.sc_rows.len(),
            dec.basis_s.rank()
        );
        if let Some(dir) = &out {
            std::fs::create_dir_all(dir)?;
            data.save_csv(dir.join(format!("{kind}.csv")))?;
        }
    }
    Ok(())
}
