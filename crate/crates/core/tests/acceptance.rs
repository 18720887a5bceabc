//! Acceptance gate: one PASS/FAIL line per criterion, non-zero exit if any fails.

use std::time::{Duration, Instant};

use manifool::classifier::{class_weights_median_frequency, Architecture, Classifier, Model};
use manifool::geodesic::{path_length, random_transform_at_distance, DEFAULT_DISTANCE_TOL};
use manifool::group::{compose, exp_map, log_map, AlgebraVector, GeneratorSet, GroupKind};
use manifool::manifool::{CraftConfig, Crafter, ManiFoolResult};
use manifool::pipeline::experiment::{train_crafter, ExperimentReport};
use manifool::pipeline::{generate_synthetic_dataset, run_experiment, AugmentMode, ExperimentConfig, SyntheticSpec};
use manifool::warp::{appearance_jacobian, warp_image};
use manifool::{Image, Result};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;

struct Outcome {
    pass: bool,
    detail: String,
}

fn outcome(pass: bool, detail: String) -> Result<Outcome> {
    Ok(Outcome { pass, detail })
}

fn random_direction(rng: &mut ChaCha8Rng, d: usize) -> Vec<f64> {
    let g: Vec<f64> = (0..d).map(|_| rng.sample(StandardNormal)).collect();
    let n = g.iter().map(|a| a * a).sum::<f64>().sqrt();
    g.into_iter().map(|a| a / n).collect()
}

/// Uniform in the unit ball.
fn random_ball(rng: &mut ChaCha8Rng, d: usize, radius: f64) -> AlgebraVector<f64> {
    let r = radius * rng.random::<f64>().powf(1.0 / d as f64);
    AlgebraVector(random_direction(rng, d).into_iter().map(|a| a * r).collect())
}

fn noise_image(rng: &mut ChaCha8Rng, n: usize) -> Image<f64> {
    Image::from_fn(n, n, |_, _| rng.random::<f64>())
}

/// Chord sum recomputed from scratch, as an oracle for the library's path length.
fn chord_oracle(img: &Image<f64>, v: &AlgebraVector<f64>, basis: &GeneratorSet<f64>, n: usize) -> f64 {
    let frames: Vec<Vec<f64>> = (0..=n)
        .map(|k| {
            let t = exp_map(&v.scale(k as f64 / n as f64), basis).unwrap();
            warp_image(img, &t).unwrap().into_data()
        })
        .collect();
    let total: f64 = frames
        .windows(2)
        .map(|w| w[0].iter().zip(&w[1]).map(|(a, b)| (a - b) * (a - b)).sum::<f64>().sqrt())
        .sum();
    let norm = img.data().iter().map(|a| a * a).sum::<f64>().sqrt();
    total / norm
}

fn c1_lie_round_trips() -> Result<Outcome> {
    let mut rng = ChaCha8Rng::seed_from_u64(101);
    let (mut worst_log, mut worst_inv) = (0.0f64, 0.0f64);
    for kind in GroupKind::ALL {
        let basis = GeneratorSet::for_image(kind, 32, 32)?;
        for _ in 0..1000 {
            let v = random_ball(&mut rng, kind.dim(), 1.0);
            let t = exp_map(&v, &basis)?;
            let back = log_map(&t, &basis)?;
            worst_log = worst_log.max(back.0.iter().zip(&v.0).map(|(a, b)| (a - b).powi(2)).sum::<f64>().sqrt());
            let prod = compose(&t, &exp_map(&v.scale(-1.0), &basis)?);
            let id = manifool::linalg::Mat3::<f64>::identity();
            worst_inv = worst_inv.max((*prod.matrix() - id).frobenius());
        }
    }
    outcome(
        worst_log <= 1e-8 && worst_inv <= 1e-9,
        format!("max |log(exp v) - v| = {worst_log:.2e}, max |exp(v)exp(-v) - I| = {worst_inv:.2e} over 5 x 1000 draws"),
    )
}

fn c2_jacobian() -> Result<Outcome> {
    let mut rng = ChaCha8Rng::seed_from_u64(202);
    let n = 32;
    let basis = GeneratorSet::for_image(GroupKind::Affine, n, n)?;
    let eps = 1e-3;
    let (mut good, mut total, mut raw_good, mut raw_total) = (0usize, 0usize, 0usize, 0usize);
    for _ in 0..20 {
        let img = noise_image(&mut rng, n);
        let v = random_ball(&mut rng, 6, 0.3);
        let t = exp_map(&v, &basis)?;
        let jac = appearance_jacobian(&img, &t, &basis)?;
        let inv = t.inverse()?;
        let mut fd_warps = Vec::new();
        for j in 0..6 {
            let e = AlgebraVector::basis(6, j);
            let plus = warp_image(&img, &compose(&exp_map(&e.scale(eps), &basis)?, &t))?;
            let minus = warp_image(&img, &compose(&exp_map(&e.scale(-eps), &basis)?, &t))?;
            fd_warps.push((plus, minus));
        }
        for _ in 0..200 {
            let (r, c) = (rng.random_range(2..n - 2), rng.random_range(2..n - 2));
            let i = r * n + c;
            let ok = (0..6).all(|j| {
                let (p, m) = &fd_warps[j];
                let fd = (p.data()[i] - m.data()[i]) / (2.0 * eps);
                (jac.get(i, j) - fd).abs() <= 1e-2 * fd.abs().max(1e-3)
            });
            raw_good += usize::from(ok);
            raw_total += 1;
            // Source position in pixel units; the interpolant has kinks on integer lines.
            let centre = |k: usize| (2 * k + 1) as f64 / n as f64 - 1.0;
            let (qx, qy) = inv.apply(centre(c), centre(r)).unwrap();
            let near_kink = [qx, qy].iter().any(|q| {
                let p = (q + 1.0) * n as f64 / 2.0 - 0.5;
                (p - p.round()).abs() < 0.1
            });
            if !near_kink {
                good += usize::from(ok);
                total += 1;
            }
        }
    }
    let frac = good as f64 / total as f64;
    outcome(
        frac >= 0.95,
        format!(
            "{good}/{total} sampled interior pixels at least 0.1 px from a cell line agree on all 6 columns ({:.1}%); all sampled: {raw_good}/{raw_total}",
            100.0 * frac
        ),
    )
}

fn c3_gradients() -> Result<Outcome> {
    let mut rng = ChaCha8Rng::seed_from_u64(303);
    let (inputs, classes) = (64, 4);
    let mut worst = 0.0f64;
    for arch in [Architecture::Linear, Architecture::Mlp { hidden: 16 }] {
        let shapes = Model::<f64>::zeros(arch, inputs, classes).tensor_shapes();
        let tensors: Vec<(String, Vec<usize>, Vec<f64>)> = shapes
            .into_iter()
            .map(|(name, dims)| {
                let len = dims.iter().product();
                let data = (0..len).map(|_| 0.5 * rng.sample::<f64, _>(StandardNormal)).collect();
                (name, dims, data)
            })
            .collect();
        let model = Model::from_tensors(arch, inputs, classes, &tensors)?;
        for _ in 0..10 {
            let img = Image::from_fn(8, 8, |_, _| rng.random::<f64>());
            let (l, k) = (rng.random_range(0..classes), rng.random_range(1..classes));
            let k = (l + k) % classes;
            let g = model.input_gradient(&img, l, k)?;
            let scale = g.iter().fold(0.0f64, |m, v| m.max(v.abs()));
            let h = 1e-4;
            for p in 0..inputs {
                let mut plus = img.clone();
                plus.data_mut()[p] += h;
                let mut minus = img.clone();
                minus.data_mut()[p] -= h;
                let fd = (model.margin(&plus, l, k) - model.margin(&minus, l, k)) / (2.0 * h);
                worst = worst.max((g[p] - fd).abs() / fd.abs().max(1e-3 * scale));
            }
        }
    }
    outcome(worst <= 1e-4, format!("max relative error {worst:.2e} (linear and mlp, 10 inputs each)"))
}

fn c4_refinement() -> Result<Outcome> {
    let mut rng = ChaCha8Rng::seed_from_u64(404);
    let n = 32;
    let basis = GeneratorSet::for_image(GroupKind::Affine, n, n)?;
    let mut worst = 0.0f64;
    let mut failing = 0;
    let mut oracle_gap = 0.0f64;
    for _ in 0..20 {
        let img = noise_image(&mut rng, n);
        let v = random_ball(&mut rng, 6, 1.0);
        let coarse = path_length(&img, &v, &basis, 64)?;
        let fine = path_length(&img, &v, &basis, 512)?;
        let rel = (coarse - fine).abs() / fine;
        failing += usize::from(rel > 0.01);
        worst = worst.max(rel);
        let norm = img.l2_norm();
        oracle_gap = oracle_gap.max((coarse / norm - chord_oracle(&img, &v, &basis, 64)).abs());
    }
    let mut exact = true;
    for _ in 0..20 {
        let img = noise_image(&mut rng, n);
        let v = random_ball(&mut rng, 6, 1.0);
        let base = manifool::geodesic::normalized_distance(&img, &v, &basis, 64)?;
        for alpha in [0.5, 2.0] {
            exact &= manifool::geodesic::normalized_distance(&img.scaled(alpha), &v, &basis, 64)? == base;
        }
    }
    outcome(
        failing == 0 && exact && oracle_gap < 1e-12,
        format!(
            "N=64 vs N=512: worst {:.2}% ({failing}/20 pairs above 1%); scale invariance exact: {exact}; chord oracle gap {oracle_gap:.1e}",
            100.0 * worst
        ),
    )
}

fn c5_crafting() -> Result<Outcome> {
    let cfg = ExperimentConfig::default();
    let train_set = generate_synthetic_dataset::<f64>(&cfg.synthetic)?;
    let (crafter, _) = train_crafter(&cfg, &train_set)?;
    let (h, w, _) = train_set.image_shape()?;
    let engine = Crafter::new(CraftConfig::default(), h, w)?;
    let (mut eligible, mut success, mut sandwich, mut audited, mut audit_ok) = (0, 0, 0, 0, 0);
    for (img, &l) in train_set.images.iter().zip(&train_set.labels) {
        if crafter.predict(img) != l {
            continue;
        }
        eligible += 1;
        let res = engine.craft_multiclass(&crafter, img, l)?;
        if res.success {
            success += 1;
            let flipped = crafter.predict(&warp_image(img, &res.boundary_transform)?) != l;
            let restored = crafter.predict(&res.warped) == l;
            sandwich += usize::from(flipped && restored);
        }
        if audited < 50 {
            audited += 1;
            let per_class: Vec<ManiFoolResult<f64>> =
                (0..crafter.n_classes()).filter(|&k| k != l).map(|k| engine.craft_pair(&crafter, img, l, k)).collect::<Result<_>>()?;
            let recomputed: Vec<(usize, bool, f64, usize)> = per_class
                .iter()
                .map(|r| {
                    let v = log_map(&r.transform, engine.basis()).unwrap();
                    (r.target_class, r.success, chord_oracle(img, &v, engine.basis(), 64), r.iterations)
                })
                .collect();
            let best = recomputed
                .iter()
                .filter(|c| c.1)
                .min_by(|a, b| a.2.total_cmp(&b.2))
                .or_else(|| recomputed.iter().max_by_key(|c| c.3))
                .unwrap();
            audit_ok += usize::from(best.0 == res.target_class && (!best.1 || (best.2 - res.distance).abs() <= 1e-9));
        }
    }
    let rate = success as f64 / eligible as f64;
    outcome(
        rate >= 0.8 && sandwich == success && audit_ok == audited && audited == 50,
        format!(
            "success {success}/{eligible} ({:.1}%), sandwich {sandwich}/{success}, multi-class audit {audit_ok}/{audited}",
            100.0 * rate
        ),
    )
}

fn c6_sampler() -> Result<Outcome> {
    let ds = generate_synthetic_dataset::<f64>(&SyntheticSpec::default())?;
    let (h, w, _) = ds.image_shape()?;
    let basis = GeneratorSet::for_image(GroupKind::Affine, h, w)?;
    let mut rng = ChaCha8Rng::seed_from_u64(606);
    let (mut worst, mut drawn, mut skipped) = (0.0f64, 0, 0);
    for r in [0.5, 1.0, 2.0, 3.0] {
        for i in 0..100 {
            let img = &ds.images[i % ds.len()];
            match random_transform_at_distance(img, &basis, r, &mut rng, DEFAULT_DISTANCE_TOL) {
                Ok(draw) => {
                    let v = log_map(&draw.transform, &basis)?;
                    worst = worst.max((chord_oracle(img, &v, &basis, 64) - r).abs() / r);
                    drawn += 1;
                }
                Err(manifool::Error::Unreachable { .. }) => skipped += 1,
                Err(e) => return Err(e),
            }
        }
    }
    outcome(
        worst <= 0.02 && skipped == 0,
        format!("{drawn} draws, {skipped} unreachable, worst recomputed deviation {:.2}%", 100.0 * worst),
    )
}

fn replication_run() -> Result<ExperimentReport> {
    let mut cfg = ExperimentConfig::default();
    cfg.seed = 42;
    cfg.modes = vec![AugmentMode::None, AugmentMode::Manifool];
    run_experiment(&cfg)
}

fn c7_replication(report: &ExperimentReport) -> Result<Outcome> {
    let none = report.mode(AugmentMode::None).unwrap();
    let mf = report.mode(AugmentMode::Manifool).unwrap();
    let d = &report.config.eval_distances;
    let at = |counts: &[manifool::geodesic::TrialCounts], r: f64| {
        let i = d.iter().position(|&x| x == r).unwrap();
        counts[i].correct as f64 / counts[i].trials as f64
    };
    let clean_gain = 100.0 * (mf.clean_accuracy - none.clean_accuracy);
    let affine_gain = 100.0 * (at(&mf.affine, 2.0) - at(&none.affine, 2.0));
    let mut curve_ok = true;
    let mut min_trials = usize::MAX;
    let mut gaps = Vec::new();
    for (a, b) in mf.robustness.curve.iter().zip(&none.robustness.curve).filter(|(a, _)| a.distance >= 1.0) {
        curve_ok &= a.rate <= b.rate + 0.02;
        min_trials = min_trials.min(a.trials).min(b.trials);
        gaps.push(format!("r={}: {:+.1}", a.distance, 100.0 * (a.rate - b.rate)));
    }
    outcome(
        clean_gain >= 2.0 && affine_gain >= 5.0 && curve_ok && min_trials >= 500,
        format!(
            "clean {:.1}% -> {:.1}% ({clean_gain:+.1}), affine r=2 {:.1}% -> {:.1}% ({affine_gain:+.1}), curve gap [{}], min trials {min_trials}",
            100.0 * none.clean_accuracy,
            100.0 * mf.clean_accuracy,
            100.0 * at(&none.affine, 2.0),
            100.0 * at(&mf.affine, 2.0),
            gaps.join(", ")
        ),
    )
}

fn c8_rho(report: &ExperimentReport) -> Result<Outcome> {
    let none = report.mode(AugmentMode::None).unwrap().robustness.rho;
    let mf = report.mode(AugmentMode::Manifool).unwrap().robustness.rho;
    let pass = matches!((none, mf), (Some(a), Some(b)) if b >= a);
    outcome(pass, format!("rho none = {none:?}, rho manifool = {mf:?}"))
}

fn c9_weights() -> Result<Outcome> {
    let labels: Vec<usize> = [(0, 10), (1, 30), (2, 60)].iter().flat_map(|&(c, n)| std::iter::repeat_n(c, n)).collect();
    let w: Vec<f64> = class_weights_median_frequency(&labels, 3)?;
    outcome(w == vec![3.0, 1.0, 0.5], format!("weights {w:?}"))
}

fn c10_determinism() -> Result<Outcome> {
    let mut cfg = ExperimentConfig::parse_str(
        "samples_per_class = 8\ntest_per_class = 10\neval_distances = 1,2\ntrials = 1\nmodel_epochs = 20\ncrafter_epochs = 20\n",
    )?;
    let dirs = [tempfile::tempdir().unwrap(), tempfile::tempdir().unwrap(), tempfile::tempdir().unwrap()];
    let mut listings = Vec::new();
    for (dir, threads) in dirs.iter().zip([1, 1, 4]) {
        cfg.threads = threads;
        cfg.out_dir = dir.path().to_path_buf();
        run_experiment(&cfg)?.write(dir.path())?;
        let mut files: Vec<(String, Vec<u8>)> = std::fs::read_dir(dir.path())
            .unwrap()
            .map(|e| e.unwrap().path())
            .filter(|p| p.extension().is_some_and(|x| x == "csv"))
            .map(|p| (p.file_name().unwrap().to_string_lossy().into_owned(), std::fs::read(&p).unwrap()))
            .collect();
        files.sort();
        listings.push(files);
    }
    let same = listings[0] == listings[1] && listings[0] == listings[2];
    outcome(same && listings[0].len() >= 7, format!("{} CSVs identical across two 1-thread runs and a 4-thread run: {same}", listings[0].len()))
}

fn main() {
    let mut all_pass = true;
    let mut report_line = |name: &str, limit: Duration, run: &mut dyn FnMut() -> Result<Outcome>| {
        let start = Instant::now();
        let result = run();
        let elapsed = start.elapsed();
        let (pass, detail) = match result {
            Ok(o) => (o.pass && elapsed <= limit, o.detail),
            Err(e) => (false, format!("error: {e}")),
        };
        all_pass &= pass;
        println!("{} {name}: {detail} [{:.1}s, limit {}s]", if pass { "PASS" } else { "FAIL" }, elapsed.as_secs_f64(), limit.as_secs());
    };
    let min = |m: u64| Duration::from_secs(60 * m);
    report_line("1 lie-group round trips", Duration::from_secs(5), &mut c1_lie_round_trips);
    report_line("2 jacobian vs finite differences", Duration::from_secs(30), &mut c2_jacobian);
    report_line("3 classifier gradient check", Duration::from_secs(10), &mut c3_gradients);
    report_line("4 geodesic refinement", Duration::from_secs(30), &mut c4_refinement);
    report_line("5 crafting contracts", min(5), &mut c5_crafting);
    report_line("6 random-at-distance sampler", min(1), &mut c6_sampler);
    let start = Instant::now();
    let replication = replication_run();
    let budget = min(15).saturating_sub(start.elapsed());
    let shared = |f: fn(&ExperimentReport) -> Result<Outcome>| -> Result<Outcome> {
        match &replication {
            Ok(r) => f(r),
            Err(e) => outcome(false, format!("experiment failed: {e}")),
        }
    };
    report_line("7 directional replication", budget, &mut || shared(c7_replication));
    report_line("8 robustness score ordering", budget, &mut || shared(c8_rho));
    report_line("9 median-frequency weights", Duration::from_secs(1), &mut c9_weights);
    report_line("10 determinism across thread counts", min(15), &mut c10_determinism);
    if !all_pass {
        std::process::exit(1);
    }
}
