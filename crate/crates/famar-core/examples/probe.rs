use std::time::Instant;

use famar_core::sim::{
    self, normality_experiment, preset_normality, preset_setting1, run_setting, RegMethod,
    RunSettingOptions, SimConfig,
};

fn main() {
    let args: Vec<String> = std::env::args().collect();
    let which = args.get(1).map(String::as_str).unwrap_or("all");

    if which == "normality" || which == "all" {
        let mut config = preset_normality(42);
        config.replications = 400;
        let t0 = Instant::now();
        let result = normality_experiment(&config, 0.01).unwrap();
        println!(
            "normality(400 reps): pass_r={:.3} pass_c={:.3} critical={:.4} elapsed={:.1}s",
            result.pass_rate_r,
            result.pass_rate_c,
            result.ks_critical,
            t0.elapsed().as_secs_f64()
        );
    }

    if which == "setting1" || which == "all" {
        let mut grid = preset_setting1(42);
        for (_, c) in &mut grid.points {
            c.replications = 8;
            c.n_new = 0;
        }
        let t0 = Instant::now();
        let table = run_setting("setting1", &grid.points, &RunSettingOptions::estimation_only())
            .unwrap();
        for (label, _) in &grid.points {
            println!(
                "{label}: rel_err_f={:.5} rel_err_u_avg={:.5} rel_err_u_noavg={:.5}",
                table.median_of(label, "mfm", "rel_err_f").unwrap(),
                table.median_of(label, "mfm", "rel_err_u_avg").unwrap(),
                table.median_of(label, "mfm", "rel_err_u_noavg").unwrap(),
            );
        }
        println!("setting1 estimation-only 8 reps: {:.1}s", t0.elapsed().as_secs_f64());
    }

    if which == "reg40" || which == "all" {
        let config = SimConfig {
            p1: 40,
            p2: 40,
            n_new: 1000,
            seed: 42,
            replications: 2,
            ..SimConfig::experiment_base()
        };
        let mut opts = RunSettingOptions::default();
        if args.get(2).map(String::as_str) == Some("proj") {
            opts.u_mode = famar_core::mfm::UMode::Projection;
        }
        let t0 = Instant::now();
        let table =
            run_setting("probe", &[("p=40".into(), config)], &opts).unwrap();
        for m in [RegMethod::Oracle, RegMethod::Famar, RegMethod::BaselineX] {
            println!(
                "p=40 {}: rel_err_b={:.4} rel_err_y={:.4} rank={:?} lambda*={:.4}",
                m.label(),
                table.median_of("p=40", m.label(), "rel_err_b").unwrap(),
                table.median_of("p=40", m.label(), "rel_err_y_new").unwrap(),
                table.median_of("p=40", m.label(), "rank_b_hat").unwrap(),
                table.median_of("p=40", m.label(), "lambda_star").unwrap(),
            );
        }
        println!("p=40 regression 2 reps x 3 methods: {:.1}s", t0.elapsed().as_secs_f64());
    }

    if which == "reg2" || which == "all" {
        let config = SimConfig {
            n: 2000,
            p1: 80,
            p2: 50,
            k1: 2,
            k2: 4,
            n_new: 1000,
            seed: 42,
            replications: 1,
            ..SimConfig::experiment_base()
        };
        let opts = RunSettingOptions::default();
        let t0 = Instant::now();
        let table = run_setting("probe", &[("n=2000".into(), config)], &opts).unwrap();
        for m in [RegMethod::Oracle, RegMethod::Famar, RegMethod::BaselineX] {
            println!(
                "n=2000 {}: rel_err_b={:.4} rel_err_y={:.4} rank={:?}",
                m.label(),
                table.median_of("n=2000", m.label(), "rel_err_b").unwrap(),
                table.median_of("n=2000", m.label(), "rel_err_y_new").unwrap(),
                table.median_of("n=2000", m.label(), "rank_b_hat").unwrap(),
            );
        }
        println!("setting2 n=2000 regression 1 rep: {:.1}s", t0.elapsed().as_secs_f64());
    }

    if which == "sweep" {
        use famar_core::mfm::{self, MfmOptions, UMode};
        use famar_core::solver::{self, RegressionData, SolverConfig};
        let config = SimConfig {
            p1: 40,
            p2: 40,
            n_new: 1000,
            seed: 42,
            replications: 1,
            ..SimConfig::experiment_base()
        };
        let data = sim::generate(&config, 0).unwrap();
        let u_mode = if args.get(2).map(String::as_str) == Some("proj") {
            UMode::Projection
        } else {
            UMode::Kronecker
        };
        let fit = mfm::fit_mfm(&data.pretrain, &data.panel, 2, 2, MfmOptions { demean: false, u_mode }).unwrap();
        let oracle = sim::OracleRotation::from_truth(&fit.projections, &data.truth.r_star, &data.truth.c_star).unwrap();
        for (name, f_pan, u_pan) in [
            ("oracle", data.truth.f.clone(), data.truth.u.clone()),
            ("famar", fit.f_hat.clone(), fit.u_hat.clone()),
        ] {
            let train = RegressionData::new(data.y.clone(), f_pan, u_pan).unwrap();
            let lmax = solver::nuclear_null_threshold(&train).unwrap();
            println!("{name}: lambda_max = {lmax:.4}");
            for frac in [0.3, 0.1, 0.03, 0.01, 0.003] {
                let cfg = SolverConfig { lambda: frac * lmax, epsilon: 1e-6, max_iter: 20000, ..Default::default() };
                let f = solver::apgd_nuclear(&train, &cfg).unwrap();
                let rel_b = (&f.b_hat - &data.truth.b_star).norm() / data.truth.b_star.norm();
                let adj = if name == "famar" {
                    oracle.h1.transpose() * &f.a_hat * &oracle.h2
                } else {
                    f.a_hat.clone()
                };
                let rel_a = (adj - &data.truth.a_star).norm() / data.truth.a_star.norm();
                println!(
                    "  frac={frac:<6} rel_b={rel_b:.4} rel_a={rel_a:.6} rank={} iters={} conv={}",
                    f.rank_b, f.iterations, f.converged
                );
            }
        }
    }

    if which == "crit5" {
        // both criterion-5 points, small rep count, default grid depth
        let reps: usize = args.get(2).and_then(|s| s.parse().ok()).unwrap_or(4);
        let points = vec![
            ("setting1/p=40".to_string(), SimConfig {
                p1: 40, p2: 40, n_new: 1000, seed: 42, replications: reps,
                ..SimConfig::experiment_base()
            }),
            ("setting2/n=2000".to_string(), SimConfig {
                n: 2000, p1: 80, p2: 50, k1: 2, k2: 4, n_new: 1000, seed: 42, replications: reps,
                ..SimConfig::experiment_base()
            }),
        ];
        for (label, config) in points {
            let opts = RunSettingOptions {
                lambda_points: 20,
                lambda_min_frac: 1e-4,
                cv_epsilon: 1e-3,
                cv_max_iter: 800,
                final_epsilon: 1e-4,
                final_max_iter: 4000,
                ..RunSettingOptions::default()
            };
            let t0 = Instant::now();
            let table = run_setting("crit5", &[(label.clone(), config)], &opts).unwrap();
            for m in [RegMethod::Oracle, RegMethod::Famar, RegMethod::BaselineX] {
                println!(
                    "{label} {}: rel_b={:.4} y={:.6} rank={:?} lam*={:.5}",
                    m.label(),
                    table.median_of(&label, m.label(), "rel_err_b").unwrap(),
                    table.median_of(&label, m.label(), "rel_err_y_new").unwrap(),
                    table.median_of(&label, m.label(), "rank_b_hat").unwrap(),
                    table.median_of(&label, m.label(), "lambda_star").unwrap(),
                );
            }
            let fb = table.median_of(&label, "famar", "rel_err_b").unwrap();
            let bb = table.median_of(&label, "baseline_x", "rel_err_b").unwrap();
            let fy = table.median_of(&label, "famar", "rel_err_y_new").unwrap();
            let oy = table.median_of(&label, "oracle", "rel_err_y_new").unwrap();
            println!("{label}: b-ratio={:.3} y-ratio={:.3} elapsed={:.0}s", fb / bb, fy / oy, t0.elapsed().as_secs_f64());
        }
    }

    if which == "cvcurve" {
        use famar_core::mfm::{self, MfmOptions, UMode};
        use famar_core::solver::{self, FitMethod, RegressionData, SolverConfig};
        let p: usize = args.get(2).and_then(|s| s.parse().ok()).unwrap_or(40);
        let config = SimConfig {
            p1: p,
            p2: p,
            n_new: 1000,
            seed: 42,
            replications: 1,
            ..SimConfig::experiment_base()
        };
        let data = sim::generate(&config, 0).unwrap();
        let fit = mfm::fit_mfm(&data.pretrain, &data.panel, 2, 2, MfmOptions { demean: false, u_mode: UMode::Kronecker }).unwrap();
        let empty = famar_core::MatrixPanel::zeros(config.n, 0, 0).unwrap();
        for (name, f_pan, u_pan) in [
            ("oracle", data.truth.f.clone(), data.truth.u.clone()),
            ("famar", fit.f_hat.clone(), fit.u_hat.clone()),
            ("baseline", empty, data.panel.clone()),
        ] {
            let train = RegressionData::new(data.y.clone(), f_pan, u_pan).unwrap();
            let lmax = solver::nuclear_null_threshold(&train).unwrap();
            let grid = solver::log_lambda_grid(lmax, 20, 1e-4);
            let t0 = Instant::now();
            let cfg = SolverConfig { epsilon: 1e-3, max_iter: 2000, ..Default::default() };
            let cv = solver::cross_validate(&train, FitMethod::Nuclear, &grid, 2, 7, &cfg).unwrap();
            let best_idx = grid.iter().position(|&l| l == cv.lambda_star).unwrap();
            println!("{name}: lmax={lmax:.4} lambda*={:.6} (index {best_idx}/20) cv_time={:.1}s", cv.lambda_star, t0.elapsed().as_secs_f64());
            for (i, (l, m)) in grid.iter().zip(&cv.cv_curve).enumerate() {
                if i % 3 == 0 || i == best_idx {
                    println!("   frac={:.5} mse={m:.6}", l / lmax);
                }
            }
            let t1 = Instant::now();
            let final_fit = solver::apgd_nuclear(&train, &SolverConfig { lambda: cv.lambda_star, epsilon: 1e-4, max_iter: 4000, ..Default::default() }).unwrap();
            let rel_b = (&final_fit.b_hat - &data.truth.b_star).norm() / data.truth.b_star.norm();
            println!("   final: rel_b={rel_b:.4} rank={} iters={} conv={} time={:.1}s", final_fit.rank_b, final_fit.iterations, final_fit.converged, t1.elapsed().as_secs_f64());
        }
    }

    if which == "c9" {
        use famar_core::sim::rolling::{rolling_predict, RollingMethod, RollingOptions};
        use famar_core::sim::AMode;
        let seeds: u64 = args.get(2).and_then(|s| s.parse().ok()).unwrap_or(10);
        // (label, p1, p2, k1, k2, window, pretrain_len, horizon, idio, noise, b_mean, b_sd, rank_b, a_mean, a_sd)
        let candidates = vec![
            ("M", 12, 16, 2, 2, 68, 32, 37, 1.2, 1.2, 0.35, 0.3, 1, 2.5, 1.2),
            ("N", 10, 14, 2, 2, 68, 32, 37, 1.2, 1.2, 0.4, 0.3, 1, 2.5, 1.2),
            ("O", 12, 16, 2, 2, 68, 32, 37, 1.5, 1.0, 0.4, 0.3, 1, 2.5, 1.2),
            ("P", 10, 14, 2, 2, 68, 32, 37, 1.5, 1.0, 0.5, 0.3, 1, 3.0, 1.5),
        ];
        let loading_override: Option<f64> = args.get(4).and_then(|s| s.parse().ok());
        let frac: f64 = args.get(3).and_then(|s| s.parse().ok()).unwrap_or(0.15);
        let mut opts = RollingOptions { lambda_rule: famar_core::sim::LambdaRule::FixedFraction(frac), folds: 3, lambda_points: 5, lambda_min_frac: 3e-2, ..RollingOptions::default() };
        if args.get(5).map(String::as_str) == Some("proj") { opts.u_mode = famar_core::mfm::UMode::Projection; }
        for (label, p1, p2, k1, k2, window, pre, horizon, idio, noise, bm, bs, rb, am, asd) in candidates {
            let mut med = vec![Vec::new(); 4];
            for seed in 0..seeds {
                let mut config = SimConfig {
                    n: window + horizon, n_pretrain: 1, n_new: 0,
                    p1, p2, k1, k2, rank_b: rb,
                    idio_sd: idio, noise_sd: noise,
                    b_dist: (bm, bs),
                    a_mode: AMode::IidNormal { mean: am, sd: asd },
                    seed: 4242, replications: seeds as usize,
                    ..SimConfig::experiment_base()
                };
                if let Some(lm) = loading_override { config.loading_dist = (lm, 2.0); }
                let data = sim::generate(&config, seed).unwrap();
                for (slot, m) in [RollingMethod::Famar, RollingMethod::FactorsOnly, RollingMethod::IdioOnly, RollingMethod::BaselineX].iter().enumerate() {
                    let r = rolling_predict(&data.panel, &data.y, window, pre, k1, k2, *m, &opts).unwrap();
                    med[slot].push(r.r2);
                }
            }
            let meds: Vec<f64> = med.iter().map(|v| famar_core::stats::median(v)).collect();
            let ok = meds[0] >= meds[1] && meds[1] > meds[2] && meds[2] > meds[3];
            println!("{label}: famar={:.3} factors={:.3} idio={:.3} baseline={:.3} ordering_ok={ok}", meds[0], meds[1], meds[2], meds[3]);
        }
    }

    let _ = sim::SimConfig::experiment_base();
}
// quick variant: projection-mode u for the famar regression
