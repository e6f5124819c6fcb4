use silentwave::isolate::{MotionTrace, TraceProvenance};
use silentwave::segment::{segment_units, SegmenterParams};
use silentwave::signal::RealSeries;
use silentwave::sim::splitmix64;

fn rng_norm(state: &mut u64) -> f64 {
    *state = splitmix64(*state);
    let u1 = ((*state >> 11) as f64 / (1u64 << 53) as f64).max(1e-12);
    *state = splitmix64(*state);
    let u2 = (*state >> 11) as f64 / (1u64 << 53) as f64;
    (-2.0 * u1.ln()).sqrt() * (2.0 * std::f64::consts::PI * u2).cos()
}

fn main() {
    let rate = 1000.0;
    let sigma = 0.15;
    let c1 = 6.0;
    let c2 = c1 + 2.0 + 6.0 * sigma;
    let total = c2 + 6.0;
    let n = (total * rate) as usize;
    let mut state = 0xABCDEFu64;
    let values: Vec<f64> = (0..n)
        .map(|k| {
            let t = k as f64 / rate;
            let carrier = (2.0 * std::f64::consts::PI * 20.0 * t).sin();
            let env = (-((t - c1) / sigma).powi(2) / 2.0).exp()
                + (-((t - c2) / sigma).powi(2) / 2.0).exp();
            env * carrier + 0.006 * rng_norm(&mut state)
        })
        .collect();
    let trace = MotionTrace {
        values: RealSeries::new(values, rate),
        gaps: Vec::new(),
        provenance: TraceProvenance::default(),
    };
    let result = segment_units(&trace, &SegmenterParams::default()).unwrap();
    println!("global baseline: {}", result.used_global_baseline);
    println!("expected: [{:.3} {:.3}] [{:.3} {:.3}]", c1 - 0.45, c1 + 0.45, c2 - 0.45, c2 + 0.45);
    for s in &result.segments {
        println!("segment [{:.3}, {:.3}] dur {:.3}", s.start_s, s.end_s, s.end_s - s.start_s);
    }
}
