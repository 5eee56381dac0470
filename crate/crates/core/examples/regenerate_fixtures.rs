//! Rewrites the shipped N = 4 trajectory fixtures from their seeds.

use gausscover::selftest::fixture_spec;
use gausscover::Statistics;

fn main() -> Result<(), Box<dyn std::error::Error>> {
    let dir = std::path::Path::new(env!("CARGO_MANIFEST_DIR")).join("fixtures");
    for (stats, name) in [(Statistics::Fermion, "trajectory_fermion_n4.json"), (Statistics::Boson, "trajectory_boson_n4.json")] {
        let text = serde_json::to_string_pretty(&fixture_spec(stats))?;
        std::fs::write(dir.join(name), text + "\n")?;
        println!("wrote {name}");
    }
    Ok(())
}
