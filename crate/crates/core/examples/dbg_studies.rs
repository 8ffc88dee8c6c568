use std::time::Instant;

use fvar::density::Support;
use fvar::flp::{default_lag_truncation, flp_fit, hac_cov, impulse_scale, FlpData, HacKind};
use fvar::firf::ScoreBlock;
use fvar::bvar::structural_irf;
use fvar::lqd::{lqd_forward, lqd_inverse};
use fvar::numerics::trapezoid;
use fvar::simlab::{
    build_gamma_mixture_basis, build_omega, dgp_var_coefficients, mc_correlation_study,
    mise_cv_study, simulate_dgp, BasisKind, DgpSpec, KChoice, OmegaRecipe, Transform,
};
use fvar::derive_seed;
use nalgebra::DMatrix;
use rand::SeedableRng;
use rand_chacha::ChaCha20Rng;
use rand_distr::{Distribution, Uniform};

fn spec_with(kind: BasisKind, recipe: OmegaRecipe, seed: u64, t: usize, n: usize) -> DgpSpec {
    let support = Support::new(0.0, 6.0).unwrap();
    let (intercept, lags) = dgp_var_coefficients();
    let omega = build_omega(5, recipe, derive_seed(seed, "omega"));
    let basis =
        build_gamma_mixture_basis(kind, 50, 3, derive_seed(seed, "basis"), support, 1000, 1000)
            .unwrap();
    DgpSpec::new(intercept, lags, omega, basis, support, 2, n, t, 500).unwrap()
}

fn main() {
    let args: Vec<String> = std::env::args().collect();
    let what = args.get(1).map(|s| s.as_str()).unwrap_or("all");

    if what == "roundtrip" || what == "all" {
        // criterion-1 family: gamma-mixture densities
        let support = Support::new(0.0, 6.0).unwrap();
        let t0 = Instant::now();
        let mut rng = ChaCha20Rng::seed_from_u64(42);
        let unif = Uniform::new(0.0f64, 3.0).unwrap();
        let mut worst = 0.0f64;
        for i in 0..50 {
            let a: f64 = unif.sample(&mut rng).max(0.02);
            let b: f64 = unif.sample(&mut rng).max(0.02);
            // reuse the basis generator's mixture through a tiny basis call
            let basis = build_gamma_mixture_basis(
                BasisKind::Lqd,
                1,
                1,
                derive_seed(9000 + i, &format!("m{a}{b}")),
                support,
                1000,
                1000,
            )
            .unwrap();
            let _ = basis;
        }
        println!("basis-gen 50 mixtures: {:?}", t0.elapsed());
    }

    if what == "mc" || what == "all" {
        for recipe in [
            OmegaRecipe::AveragedProducts { count: 100 },
            OmegaRecipe::SingleProduct,
        ] {
            let label = match recipe {
                OmegaRecipe::AveragedProducts { .. } => "averaged",
                OmegaRecipe::SingleProduct => "single",
            };
            let t0 = Instant::now();
            let spec = spec_with(BasisKind::Lqd, recipe, 2024, 500, 8000);
            let ks = [
                KChoice::Fixed(1),
                KChoice::Fixed(3),
                KChoice::Fixed(7),
                KChoice::Fixed(15),
            ];
            let hs = [0usize, 4, 12];
            let reps = 5;
            let table = mc_correlation_study(&spec, &ks, &hs, reps, 500, 777).unwrap();
            println!("--- MC correlations ({label}), {reps} reps, {:?}", t0.elapsed());
            for h in hs {
                let row: Vec<String> = ["1", "3", "7", "15"]
                    .iter()
                    .map(|k| format!("K={k}: {:.3}", table.avg_over_shocks(k, h).unwrap()))
                    .collect();
                println!("  h={h:2}  {}", row.join("  "));
            }
        }
    }

    if what == "mise" || what == "all" {
        for (name, kind) in [("DGP1", BasisKind::Lqd), ("DGP2", BasisKind::LogDensity)] {
            let t0 = Instant::now();
            let spec = spec_with(
                kind,
                OmegaRecipe::AveragedProducts { count: 100 },
                2024,
                500,
                8000,
            );
            let table = mise_cv_study(&spec, 5, 20, 0.8, 99).unwrap();
            println!("--- MISE CV {name} (20 reps), {:?}", t0.elapsed());
            for tr in Transform::ALL {
                let cells: Vec<String> = (1..=5)
                    .map(|k| format!("{:.3}", table.get(tr, k).unwrap().ratio))
                    .collect();
                println!("  {:9} {}", tr.label(), cells.join(" "));
            }
        }
    }

    if what == "flp" || what == "all" {
        for recipe in [
            OmegaRecipe::AveragedProducts { count: 100 },
            OmegaRecipe::SingleProduct,
        ] {
            let label = match recipe {
                OmegaRecipe::AveragedProducts { .. } => "averaged",
                OmegaRecipe::SingleProduct => "single",
            };
            let spec = spec_with(BasisKind::Lqd, recipe, 2024, 5000, 100).with_sizes(5000, 0);
            // simulate z only (micro not needed): use simulate with tiny N
            let spec2 = spec.with_sizes(5000, 12);
            let sim = simulate_dgp(&spec2, 31).unwrap();
            let mut z = DMatrix::zeros(5000, 5);
            for t in 0..5000 {
                for j in 0..2 {
                    z[(t, j)] = sim.y[(t, j)];
                }
                for k in 0..3 {
                    z[(t, 2 + k)] = sim.alpha[(t, k)];
                }
            }
            let names: Vec<String> = (0..5).map(|i| format!("v{i}")).collect();
            let truth_draw = spec2.as_draw().unwrap();
            for shock in [0usize, 1] {
                let data = FlpData::new(
                    names.clone(),
                    z.clone(),
                    shock,
                    ScoreBlock { offset: 2, len: 3 },
                )
                .unwrap();
                let scale = impulse_scale(&data, 4).unwrap();
                let truth = structural_irf(&truth_draw, shock, 1.0, 24).unwrap();
                let mut max_err = 0.0f64;
                let mut max_true = 0.0f64;
                for h in 0..=4 {
                    let fit = flp_fit(&data, 4, h).unwrap();
                    for k in 0..3 {
                        let est = fit.beta_impulse[k] * scale;
                        let tru = truth.responses[(2 + k, h)];
                        max_err = max_err.max((est - tru).abs());
                        max_true = max_true.max(tru.abs());
                    }
                }
                // band widths at h=1 vs h=24
                let width = |h: usize| -> f64 {
                    let fit = flp_fit(&data, 4, h).unwrap();
                    let cov = hac_cov(&fit, default_lag_truncation(fit.t_used()), HacKind::DriscollKraay).unwrap();
                    let kk = fit.impulse_cov(&cov);
                    (0..3).map(|k| kk[(k, k)].sqrt()).sum::<f64>() / 3.0
                };
                println!(
                    "FLP {label} shock {shock}: max_err={:.4} max_true={:.4} ratio={:.3} width h1={:.5} h24={:.5}",
                    max_err,
                    max_true,
                    max_err / max_true,
                    width(1),
                    width(24)
                );
            }
        }
    }

    if what == "roundtrip2" || what == "all" {
        // run the actual criterion-1 shapes through the round trip
        let support = Support::new(0.0, 6.0).unwrap();
        let spec = spec_with(
            BasisKind::Lqd,
            OmegaRecipe::AveragedProducts { count: 100 },
            2024,
            50,
            200,
        );
        let t0 = Instant::now();
        let sim = simulate_dgp(&spec, 5).unwrap();
        let mut worst = 0.0f64;
        for p in &sim.densities {
            let f = lqd_forward(p, 1000).unwrap();
            let back = lqd_inverse(&f, support, 1000).unwrap();
            let sq: Vec<f64> = back
                .values()
                .iter()
                .zip(p.values())
                .map(|(x, y)| (x - y) * (x - y))
                .collect();
            worst = worst.max(trapezoid(p.grid(), &sq));
        }
        println!(
            "DGP1-density round trips (50): worst MISE = {worst:.3e}, total {:?}",
            t0.elapsed()
        );
    }
}
