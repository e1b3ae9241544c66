//! Regenerates `fixtures/deployment.jsonl`.

use std::path::Path;

fn main() -> std::io::Result<()> {
    let path = Path::new(env!("CARGO_MANIFEST_DIR")).join("fixtures/deployment.jsonl");
    std::fs::write(&path, hintdesk_analytics::fixture::deployment_jsonl())?;
    println!("wrote {}", path.display());
    Ok(())
}
