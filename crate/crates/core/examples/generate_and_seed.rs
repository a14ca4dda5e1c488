//! Draws a synthetic mixture, writes it as CSV, reads it back and picks the
//! best of several k-means++ starts.

use riemmix::data::{kmeanspp_candidates, random_mixture, read_csv, sample_gmm, write_csv, CsvOptions};
use riemmix::objective::PenaltyConfig;

fn main() {
    let truth = random_mixture(3, 2, 5.0, 9).unwrap();
    let ds = sample_gmm(&truth, 600, 9).unwrap();
    let mut buf = Vec::new();
    write_csv(&ds.rows, &mut buf).unwrap();
    let back = read_csv(buf.as_slice(), &CsvOptions::default()).unwrap();
    println!("{} rows written and read back, identical: {}", back.n(), back.rows == ds.rows);

    let cfg = PenaltyConfig::from_data(&ds.rows, 2.0, 1.0, 1.0, None, 0.01).unwrap();
    let candidates = kmeanspp_candidates(&ds.rows, 3, 10, 0, &cfg).unwrap();
    for (i, c) in candidates.iter().enumerate() {
        println!("candidate {i}: k-means cost {:.2}, penalized log-likelihood {:.4}", c.cost, c.objective);
    }
    let best = candidates.iter().map(|c| c.objective).fold(f64::NEG_INFINITY, f64::max);
    println!("best start: {best:.4}");
}
