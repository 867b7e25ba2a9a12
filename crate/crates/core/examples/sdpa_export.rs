//! Writes the diagonal relaxation as an SDPA sparse file and reads it back.

use infodesign::{build_diagonal_sdp, export_sdpa, import_sdpa, load_scenario};

fn main() -> infodesign::Result<()> {
    let sc = load_scenario(concat!(env!("CARGO_MANIFEST_DIR"), "/data/two_link_affine.scn"))?;
    let program = build_diagonal_sdp(&sc, 1.0)?;
    let path = std::env::temp_dir().join("two_link_affine.dat-s");
    export_sdpa(&program, &path)?;
    let back = import_sdpa(&path)?;
    println!("{}: {} variables, block sizes {:?}, {} entries", path.display(), back.num_vars, back.block_sizes, back.entries.len());
    let text = std::fs::read_to_string(&path)?;
    println!("round trip identical: {}", back.to_text() == text);
    for line in text.lines().take(6) {
        println!("  {line}");
    }
    Ok(())
}
