use std::time::Instant;

use fvar::density::Support;
use fvar::derive_seed;
use fvar::lqd::{lqd_forward, lqd_inverse};
use fvar::numerics::trapezoid;
use fvar::simlab::{
    build_gamma_mixture_basis, build_omega, dgp_var_coefficients, mc_correlation_study,
    simulate_dgp, BasisKind, DgpBasis, DgpSpec, KChoice, OmegaRecipe,
};
use nalgebra::DMatrix;

fn rescale_to_vector_norm(basis: &DgpBasis) -> DgpBasis {
    let mut columns = basis.columns.clone();
    for c in 0..columns.ncols() {
        let norm = columns.column(c).norm();
        for r in 0..columns.nrows() {
            columns[(r, c)] /= norm;
        }
    }
    DgpBasis {
        kind: basis.kind,
        grid: basis.grid.clone(),
        mean: basis.mean.clone(),
        columns,
    }
}

fn scale_columns(basis: &DgpBasis, s: f64) -> DgpBasis {
    DgpBasis {
        kind: basis.kind,
        grid: basis.grid.clone(),
        mean: basis.mean.clone(),
        columns: &basis.columns * s,
    }
}

fn build_spec(norm: &str, recipe: OmegaRecipe, seed: u64) -> DgpSpec {
    let support = Support::new(0.0, 6.0).unwrap();
    let (intercept, lags) = dgp_var_coefficients();
    let omega = build_omega(5, recipe, derive_seed(seed, "omega"));
    let fnorm = build_gamma_mixture_basis(
        BasisKind::Lqd,
        50,
        3,
        derive_seed(seed, "basis"),
        support,
        1000,
        1000,
    )
    .unwrap();
    let basis = match norm {
        "function" => fnorm,
        "vector" => rescale_to_vector_norm(&fnorm),
        "mid" => scale_columns(&rescale_to_vector_norm(&fnorm), 8.0),
        _ => panic!("unknown norm"),
    };
    DgpSpec::new(intercept, lags, omega, basis, support, 2, 8000, 500, 500).unwrap()
}

fn diagnostics(label: &str, spec: &DgpSpec) {
    // modes of variation scale and density sanity
    let sim = simulate_dgp(&spec.clone().with_sizes(60, 50), 4).unwrap();
    let mut alpha_sd = [0.0f64; 3];
    for k in 0..3 {
        let col: Vec<f64> = (0..60).map(|t| sim.alpha[(t, k)]).collect();
        let m = col.iter().sum::<f64>() / 60.0;
        alpha_sd[k] = (col.iter().map(|v| (v - m) * (v - m)).sum::<f64>() / 59.0).sqrt();
    }
    let p0 = spec.density_from_scores(&[0.0, 0.0, 0.0]).unwrap();
    let mut mode_max = 0.0f64;
    let mut dens_max = 0.0f64;
    for k in 0..3 {
        let mut a = [0.0; 3];
        a[k] = 2.0 * alpha_sd[k];
        let p = spec.density_from_scores(&a).unwrap();
        dens_max = dens_max.max(p.values().iter().cloned().fold(0.0, f64::max));
        for (x, y) in p.values().iter().zip(p0.values()) {
            mode_max = mode_max.max((x - y).abs());
        }
    }
    // round trip of simulated densities
    let mut worst = 0.0f64;
    for p in sim.densities.iter() {
        let f = lqd_forward(p, 1000).unwrap();
        let back = lqd_inverse(&f, p.support(), 1000).unwrap();
        let sq: Vec<f64> = back
            .values()
            .iter()
            .zip(p.values())
            .map(|(x, y)| (x - y) * (x - y))
            .collect();
        worst = worst.max(trapezoid(p.grid(), &sq));
    }
    println!(
        "{label}: alpha_sd={:.2?} mode_max={mode_max:.3} dens_max={dens_max:.2} worst_rt={worst:.2e}",
        alpha_sd
    );
}

fn main() {
    let args: Vec<String> = std::env::args().collect();
    let which = args.get(1).map(|s| s.as_str()).unwrap_or("diag");
    let configs: Vec<(&str, &str, OmegaRecipe)> = vec![
        ("mid+avg20", "mid", OmegaRecipe::AveragedProducts { count: 20 }),
        ("mid+avg10", "mid", OmegaRecipe::AveragedProducts { count: 10 }),
        ("mid+avg5", "mid", OmegaRecipe::AveragedProducts { count: 5 }),
    ];
    for (label, norm, recipe) in &configs {
        let spec = build_spec(norm, *recipe, 2024);
        diagnostics(label, &spec);
        if which == "mc" {
            let t0 = Instant::now();
            let ks = [KChoice::Fixed(1), KChoice::Fixed(3), KChoice::Fixed(7), KChoice::Fixed(15)];
            let hs = [0usize, 4, 12];
            let table = mc_correlation_study(&spec, &ks, &hs, 5, 300, 777).unwrap();
            for h in hs {
                let row: Vec<String> = ["1", "3", "7", "15"]
                    .iter()
                    .map(|k| format!("K{k}:{:.3}", table.avg_over_shocks(k, h).unwrap()))
                    .collect();
                println!("    h={h:2}  {}", row.join(" "));
            }
            println!("    ({:?})", t0.elapsed());
        }
    }
    let _ = DMatrix::<f64>::zeros(1, 1);
}
