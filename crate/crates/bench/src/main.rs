use std::time::Instant;

use attrib_core::linalg::{matmul, DenseMatrix};

fn main() {
    let d: usize = std::env::args()
        .nth(1)
        .and_then(|s| s.parse().ok())
        .unwrap_or(1024);
    let reps: usize = std::env::args()
        .nth(2)
        .and_then(|s| s.parse().ok())
        .unwrap_or(6);
    let a = DenseMatrix::from_fn(d, d, |i, j| ((i * 31 + j * 17) % 97) as f64 / 97.0);
    let b = DenseMatrix::from_fn(d, d, |i, j| ((i * 13 + j * 29) % 89) as f64 / 89.0);
    let _ = matmul(&a, &b).unwrap();
    let t0 = Instant::now();
    for _ in 0..reps {
        let c = matmul(&a, &b).unwrap();
        std::hint::black_box(c.get(0, 0));
    }
    let dt = t0.elapsed().as_secs_f64();
    let gflops = (2.0 * (d as f64).powi(3) * reps as f64) / dt / 1e9;
    println!("d={d} reps={reps} total {dt:.2}s -> {gflops:.1} GFLOP/s");
}
