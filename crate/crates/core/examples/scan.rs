//! Scratch probe round 3: full-scale (100 realizations × 200 trials)
//! verification of the two bundled positioning campaigns, exercising the
//! same config-loading + scale-bump path the acceptance test uses.

use std::time::Instant;

use ofdm_toa::leo::{leo_campaign, LeoCampaignSpec};
use ofdm_toa::montecarlo::percentile;

fn load_campaign(path: &str) -> LeoCampaignSpec {
    let raw: serde_json::Value =
        serde_json::from_str(&std::fs::read_to_string(path).unwrap()).unwrap();
    serde_json::from_value(raw["campaign"].clone()).unwrap()
}

fn run(path: &str) -> Result<(), Box<dyn std::error::Error>> {
    let mut spec = load_campaign(path);
    spec.n_channel = 100;
    spec.n_trials = 200;
    let t0 = Instant::now();
    let res = leo_campaign(&spec)?;
    println!("--- {path} at 100x200 ({:?})", t0.elapsed());
    let mut p90s = Vec::new();
    for m in &res.modes {
        let h50 = percentile(&m.horizontal_rmse_m, 0.5)?;
        let h90 = percentile(&m.horizontal_rmse_m, 0.9)?;
        println!(
            "  {:<11} h_p50 {:9.3} m  h_p90 {:9.3} m  ellipse semi-major {:9.3} m  unconv {}",
            m.mode.label(),
            h50,
            h90,
            m.empirical_ellipse.semi_major_m,
            m.unconverged_trials
        );
        p90s.push(h90);
    }
    let (pilot, data, pd, dd) = (p90s[0], p90s[1], p90s[2], p90s[3]);
    println!(
        "  benign? pilot>dd {}  dd>data {}  data/pd {:.3}",
        pilot > dd,
        dd > data,
        data / pd
    );
    println!(
        "  harsh?  data>pilot {} (ratio {:.2})  pd lowest {}",
        data > pilot,
        data / pilot,
        pd < pilot.min(data).min(dd)
    );
    Ok(())
}

fn main() -> Result<(), Box<dyn std::error::Error>> {
    run("configs/leo_benign.json")?;
    Ok(())
}
