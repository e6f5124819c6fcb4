use silentwave::features::extract_features;
use silentwave::segment::UnitSegment;
use silentwave::signal::RealSeries;

fn main() {
    let rate = 1000.0;
    let n = 120;
    let values: Vec<f64> = (0..n)
        .map(|k| {
            let t = k as f64 / rate;
            (2.0 * std::f64::consts::PI * 20.0 * t).sin()
                + 0.5 * (2.0 * std::f64::consts::PI * 45.0 * t + 0.3).cos()
        })
        .collect();
    let seg = UnitSegment {
        start_s: 0.0,
        end_s: n as f64 / rate,
        values: RealSeries::new(values, rate),
        source_utterance: String::new(),
    };
    let f = extract_features(&seg).unwrap();
    for (i, v) in f.iter().enumerate() {
        let sep = if i % 4 == 3 { ",\n" } else { ", " };
        print!("{v:?}{sep}");
    }
    println!();
}
