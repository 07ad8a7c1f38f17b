// Scratch driver used while tuning presets; prints rows for a small run.
use vortex_core::experiments::{preset_config, run};

fn main() {
    let name = std::env::args().nth(1).unwrap_or_else(|| "cfree-basic".into());
    let dims: Option<Vec<usize>> = std::env::args().nth(2).map(|s| {
        s.split(',').map(|x| x.parse().unwrap()).collect()
    });
    let trials: Option<usize> = std::env::args().nth(3).map(|s| s.parse().unwrap());
    let mut cfg = preset_config(&name).expect("preset");
    if let Some(d) = dims {
        cfg.dims = d;
    }
    if let Some(t) = trials {
        cfg.trials = t;
    }
    let t0 = std::time::Instant::now();
    let report = run(&cfg).expect("run");
    println!("elapsed: {:?}", t0.elapsed());
    for row in &report.rows {
        println!(
            "{:28} N={:4} {:22} est={:+.6} ({:+.3e}) stderr={:.3e} pred={:+.6} z={:.3} {}",
            row.word,
            row.n,
            row.mode,
            row.estimate.re,
            row.estimate.im,
            row.stderr,
            row.prediction.re,
            row.zscore,
            if row.gated { "[gated]" } else { "" },
        );
    }
    for c in &report.criteria {
        println!("{} {}: {}", if c.passed { "PASS" } else { "FAIL" }, c.name, c.details);
    }
}
