use fvar::density::{estimate_density, DensityCurve, Support};
use fvar::lqd::{lqd_forward, lqd_inverse};
use fvar::numerics::{linspace, trapezoid};
use rand::SeedableRng;
use rand_chacha::ChaCha20Rng;
use rand_distr::{Distribution, Uniform};

fn density_from_shape(support: Support, n: usize, shape: impl Fn(f64) -> f64) -> DensityCurve {
    let grid = linspace(support.lower, support.upper, n);
    let vals: Vec<f64> = grid.iter().map(|&x| shape(x)).collect();
    DensityCurve::from_unnormalized(support, grid, vals).unwrap()
}

fn mise(a: &DensityCurve, b: &DensityCurve) -> f64 {
    let diff: Vec<f64> = a
        .values()
        .iter()
        .zip(b.values())
        .map(|(x, y)| (x - y) * (x - y))
        .collect();
    trapezoid(a.grid(), &diff)
}

fn main() {
    let support = Support::new(0.0, 6.0).unwrap();
    let shapes: Vec<(&str, Box<dyn Fn(f64) -> f64>)> = vec![
        ("beta15_20", Box::new(|x: f64| (x / 6.0).powf(1.5) * (1.0 - x / 6.0).powf(2.0))),
        ("beta08_08", Box::new(|x: f64| (x / 6.0).powf(0.8) * (1.0 - x / 6.0).powf(0.8))),
        ("gauss_bump", Box::new(|x: f64| (-(x - 2.5) * (x - 2.5) / 0.8).exp() + 0.02)),
        ("gamma21", Box::new(|x: f64| x * (-x).exp())),
    ];
    for (name, shape) in shapes {
        let p = density_from_shape(support, 1000, shape);
        let f = lqd_forward(&p, 1000).unwrap();
        let back = lqd_inverse(&f, support, 1000).unwrap();
        let m = mise(&back, &p);
        // локate worst point
        let mut worst = (0usize, 0.0f64);
        for (i, (a, b)) in back.values().iter().zip(p.values()).enumerate() {
            let d = (a - b).abs();
            if d > worst.1 {
                worst = (i, d);
            }
        }
        println!(
            "{name}: mise={m:.3e} worst|d|={:.3e} at x={:.4} p={:.4}",
            worst.1,
            p.grid()[worst.0],
            p.values()[worst.0]
        );
    }

    // sweep beta exponents
    let mut worst_all = (0.0f64, 0.0f64, 0.0f64);
    for ia in 0..14 {
        for ib in 0..14 {
            let a = 1.0 + 0.25 * ia as f64;
            let b = 1.0 + 0.25 * ib as f64;
            let p = density_from_shape(support, 1000, |x| {
                (x / 6.0).powf(a - 1.0) * (1.0 - x / 6.0).powf(b - 1.0)
            });
            let f = lqd_forward(&p, 1000).unwrap();
            let back = lqd_inverse(&f, support, 1000).unwrap();
            let m = mise(&back, &p);
            if m > worst_all.0 {
                worst_all = (m, a, b);
            }
        }
    }
    println!(
        "worst beta mise={:.3e} at a={} b={}",
        worst_all.0, worst_all.1, worst_all.2
    );
    // gamma family truncated to [0,6]
    let mut worst_g = (0.0f64, 0.0f64, 0.0f64);
    for is in 0..12 {
        for ir in 0..6 {
            let shape = 1.0 + 0.25 * is as f64;
            let rate = 0.6 + 0.25 * ir as f64;
            let p = density_from_shape(support, 1000, |x| {
                (x.max(1e-300)).powf(shape - 1.0) * (-rate * x).exp()
            });
            let f = lqd_forward(&p, 1000).unwrap();
            let back = lqd_inverse(&f, support, 1000).unwrap();
            let m = mise(&back, &p);
            if m > worst_g.0 {
                worst_g = (m, shape, rate);
            }
        }
    }
    println!(
        "worst gamma mise={:.3e} at shape={} rate={}",
        worst_g.0, worst_g.1, worst_g.2
    );

    // shifted support
    let src = Support::new(0.0, 6.0).unwrap();
    let dst = Support::new(1.0, 7.0).unwrap();
    let p = density_from_shape(src, 800, |x| (-(x - 2.0) * (x - 2.0)).exp() + 0.01);
    let f = lqd_forward(&p, 800).unwrap();
    let moved = lqd_inverse(&f, dst, 800).unwrap();
    let mut worst = 0.0f64;
    let mut worst_rel = 0.0f64;
    for (a, b) in p.values().iter().zip(moved.values()) {
        worst = worst.max((a - b).abs());
        if *a > 1e-3 {
            worst_rel = worst_rel.max((a - b).abs() / a);
        }
    }
    println!("shифted: worst abs={worst:.3e} worst rel={worst_rel:.3e}");

    // uniform KDE sup norm for several seeds
    for seed in [20240611u64, 1, 2, 3, 4, 5, 6, 7, 8, 9, 10, 11, 12] {
        let support = Support::new(0.0, 1.0).unwrap();
        let mut rng = ChaCha20Rng::seed_from_u64(seed);
        let unif = Uniform::new_inclusive(0.0, 1.0).unwrap();
        let sample: Vec<f64> = (0..8000).map(|_| unif.sample(&mut rng)).collect();
        let curve = estimate_density(&sample, support, 1000, None).unwrap();
        let sup_err = curve
            .values()
            .iter()
            .map(|v| (v - 1.0).abs())
            .fold(0.0, f64::max);
        println!("seed {seed}: uniform sup err = {sup_err:.4}");
    }
}
