//! Parse a config, run it through the same code path as `cav-nrc simulate`,
//! and list the CSV files produced.

use cav_nrc::cli;
use cav_nrc::config::ScenarioConfig;

const CONFIG: &str = "\
network.rows = 2
network.cols = 3
demand.vehicles = 40
demand.horizon = 600
demand.penetration = 50%
seed = 11
engine.end_time = 1200
closure.edges = central
closure.start = 100
closure.end = 400
";

fn main() {
    let cfg = ScenarioConfig::parse(CONFIG, None).expect("config parses");
    let dir = std::env::temp_dir().join(format!("cav-nrc-example-{}", std::process::id()));
    let row = cli::simulate(&cfg, &dir).expect("simulation succeeds");
    println!("{row:?}");
    let mut files: Vec<_> = std::fs::read_dir(&dir).unwrap().map(|e| e.unwrap().file_name()).collect();
    files.sort();
    for f in files {
        let text = std::fs::read_to_string(dir.join(&f)).unwrap();
        println!("{:16} {} rows", f.to_string_lossy(), text.lines().count() - 1);
    }
    std::fs::remove_dir_all(&dir).ok();
}
