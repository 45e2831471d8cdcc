use std::path::{Path, PathBuf};
use std::process::Command;

use nalgebra::DMatrix;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use outsample::diagnostics::{error_bounds, perturbation_estimate, perturbation_scaling, spectrum_comparison};
use outsample::diffusion::{diffusion_extend, diffusion_fit, exchange_identity_check, random_walk_kernel};
use outsample::kernels::{build_kernel, kernel_distance, validate_mercer, TOL_PSD};
use outsample::measure::{random_test_indices, split};
use outsample::nystrom::{
    exactness_check, extended_kernel, fit, minimal_norm_check, run_split, SplitRun, RESIDUAL_TOL,
};
use outsample::persist::{from_json, Model};
use outsample::spectral::{feature_map, reconstruct_kernel, spectral_decompose, DEFAULT_RANK_TOL};
use outsample::synth::{generate, Shape};
use outsample::{KernelSpec, MeasuredSet, SplitView};

type Outcome = Result<String, String>;
type Criterion = (&'static str, fn() -> Outcome);

fn random_set(rng: &mut ChaCha8Rng, n: usize, d: usize) -> MeasuredSet {
    let points = (0..n)
        .map(|_| (0..d).map(|_| rng.random_range(-1.0..1.0)).collect())
        .collect();
    let weights = (0..n).map(|_| rng.random_range(0.5..2.0)).collect();
    MeasuredSet::new(points, weights).unwrap()
}

fn gauss(rng: &mut ChaCha8Rng) -> KernelSpec {
    KernelSpec::gaussian(rng.random_range(0.3..3.0), 0.0).unwrap()
}

/// Random gaussian split with at least one test point.
fn random_run(seed: u64) -> SplitRun {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let n = rng.random_range(4..30);
    let d = rng.random_range(1..6);
    let s = random_set(&mut rng, n, d);
    let n_test = rng.random_range(1..=n / 2);
    let test: Vec<usize> = (n - n_test..n).collect();
    let view = split(&s, &test).unwrap();
    let spec = gauss(&mut rng);
    run_split(&view, &spec, DEFAULT_RANK_TOL).unwrap()
}

fn count(passed: usize, total: usize, worst: f64, what: &str) -> Outcome {
    let msg = format!("{passed}/{total} instances, worst {what} {worst:e}");
    if passed == total {
        Ok(msg)
    } else {
        Err(msg)
    }
}

fn c1_mercer() -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(1);
    let mut ok = 0;
    let mut worst = f64::INFINITY;
    for _ in 0..100 {
        let n = rng.random_range(2..60);
        let d = rng.random_range(1..8);
        let s = random_set(&mut rng, n, d);
        let k = build_kernel(&gauss(&mut rng), &s, &s).unwrap();
        let c = validate_mercer(&k, TOL_PSD).unwrap();
        let r = c.min_eigenvalue / c.max_eigenvalue;
        worst = worst.min(r);
        if c.certified && r >= -1e-10 {
            ok += 1;
        }
    }
    count(ok, 100, worst, "min/max eigenvalue")
}

fn c2_roundtrip() -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(2);
    let mut ok = 0;
    let mut worst = 0.0f64;
    for _ in 0..100 {
        let n = rng.random_range(2..60);
        let d = rng.random_range(1..8);
        let s = random_set(&mut rng, n, d);
        let k = build_kernel(&gauss(&mut rng), &s, &s).unwrap().certify(TOL_PSD).unwrap();
        let m = spectral_decompose(&k, &s, DEFAULT_RANK_TOL).unwrap();
        let back = reconstruct_kernel(&feature_map(&m));
        let e = (back.values() - k.values()).amax() / m.lambda_max();
        worst = worst.max(e);
        if e <= 1e-8 {
            ok += 1;
        }
    }
    count(ok, 100, worst, "relative entry error")
}

fn c3_isometry() -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(3);
    let mut ok = 0;
    let mut worst = 0.0f64;
    for _ in 0..100 {
        let n = rng.random_range(2..40);
        let d = rng.random_range(1..8);
        let s = random_set(&mut rng, n, d);
        let k = build_kernel(&gauss(&mut rng), &s, &s).unwrap();
        let fm = feature_map(&spectral_decompose(&k, &s, DEFAULT_RANK_TOL).unwrap());
        let mut e = 0.0f64;
        for i in 0..n {
            for j in i + 1..n {
                let dk = kernel_distance(&k, i, j).unwrap();
                e = e.max((fm.feature_distance(i, j) - dk).abs() / dk);
            }
        }
        worst = worst.max(e);
        if e <= 1e-8 {
            ok += 1;
        }
    }
    count(ok, 100, worst, "relative distance error")
}

fn c4_extension_consistency() -> Outcome {
    let mut ok = 0;
    let mut worst = 0.0f64;
    for seed in 0..100 {
        let run = random_run(400 + seed);
        let e = (run.embedding.train_rows() - run.model.train_features().features()).amax();
        worst = worst.max(e);
        if e <= 1e-8 {
            ok += 1;
        }
    }
    count(ok, 100, worst, "max abs error")
}

fn c5_residual_kernel() -> Outcome {
    let mut ok = 0;
    let mut worst = 0.0f64;
    for seed in 0..100 {
        let run = random_run(500 + seed);
        let l1 = run.full_spectra.lambda_max();
        let k0 = run.residual.k0();
        let cert = validate_mercer(k0, f64::INFINITY).unwrap();
        let view = run.embedding.view();
        let n = view.parent().len();
        let mut touching = 0.0f64;
        for &x in view.train_indices() {
            for y in 0..n {
                touching = touching.max(k0.get(x, y).abs()).max(k0.get(y, x).abs());
            }
        }
        let e = (touching / l1).max(-cert.min_eigenvalue / l1);
        worst = worst.max(e);
        if cert.min_eigenvalue >= -1e-8 * l1 && touching <= 1e-8 * l1 {
            ok += 1;
        }
    }
    count(ok, 100, worst, "relative defect")
}

fn c6_pythagorean() -> Outcome {
    let mut ok = 0;
    let mut worst = 0.0f64;
    for seed in 0..100 {
        let run = random_run(600 + seed);
        let l1 = run.full_spectra.lambda_max();
        let kh = extended_kernel(&run.embedding);
        let n = kh.nrows();
        let mut e = 0.0f64;
        for x in 0..n {
            for y in 0..n {
                let dk = kernel_distance(&run.full_kernel, x, y).unwrap().powi(2);
                let dh = kernel_distance(&kh, x, y).unwrap().powi(2);
                let d0 = kernel_distance(run.residual.k0(), x, y).unwrap().powi(2);
                e = e.max((dk - dh - d0).abs() / l1);
            }
        }
        worst = worst.max(e);
        if e <= 1e-8 {
            ok += 1;
        }
    }
    count(ok, 100, worst, "relative defect")
}

/// Linear kernel, training points spanning a random `r`-dimensional subspace of
/// `R^5`. Test points stay in it (`leave = false`) or leave it.
fn subspace_run(seed: u64, leave: bool) -> SplitRun {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let r = rng.random_range(1..4);
    let basis: Vec<Vec<f64>> = (0..r).map(|_| (0..5).map(|_| rng.random_range(-1.0..1.0)).collect()).collect();
    let combo = |rng: &mut ChaCha8Rng| -> Vec<f64> {
        let c: Vec<f64> = (0..r).map(|_| rng.random_range(-1.0..1.0)).collect();
        (0..5).map(|i| (0..r).map(|a| c[a] * basis[a][i]).sum()).collect()
    };
    let n_train = rng.random_range(r + 1..r + 6);
    let train = MeasuredSet::uniform((0..n_train).map(|_| combo(&mut rng)).collect()).unwrap();
    let n_test = rng.random_range(1..4);
    let test_pts: Vec<Vec<f64>> = (0..n_test)
        .map(|_| {
            let mut p = combo(&mut rng);
            if leave {
                // basis has at most 3 vectors in R^5, so a random direction leaves the span.
                for v in p.iter_mut() {
                    *v += rng.random_range(-0.5..0.5);
                }
            }
            p
        })
        .collect();
    let test = MeasuredSet::uniform(test_pts).unwrap();
    let view = SplitView::from_parts(&train, Some(&test)).unwrap();
    run_split(&view, &KernelSpec::Linear, DEFAULT_RANK_TOL).unwrap()
}

fn c7_exactness() -> Outcome {
    let mut ok_exact = 0;
    let mut ok_inexact = 0;
    let mut worst = 0.0f64;
    for seed in 0..20 {
        let run = subspace_run(700 + seed, false);
        let l1 = run.full_spectra.lambda_max();
        let ex = exactness_check(&run.residual, RESIDUAL_TOL);
        worst = worst.max(run.residual.spectral_norm() / l1);
        if ex.exact && run.residual.spectral_norm() <= 1e-8 * l1 {
            ok_exact += 1;
        }
        let run = subspace_run(800 + seed, true);
        let ex = exactness_check(&run.residual, RESIDUAL_TOL);
        if !ex.exact && ex.s >= 1 {
            ok_inexact += 1;
        }
    }
    let msg = format!(
        "rank-preserving {ok_exact}/20 exact (worst ||k0||/lambda_1 {worst:e}), rank-increasing {ok_inexact}/20 inexact"
    );
    if ok_exact == 20 && ok_inexact == 20 {
        Ok(msg)
    } else {
        Err(msg)
    }
}

/// Gaussian split whose full kernel keeps every eigenvalue above the rank floor.
fn well_conditioned_run(seed: u64) -> SplitRun {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let n = rng.random_range(4..16);
    let d = rng.random_range(2..6);
    let s = random_set(&mut rng, n, d);
    let n_test = rng.random_range(1..=n / 2);
    let test: Vec<usize> = (n - n_test..n).collect();
    let view = split(&s, &test).unwrap();
    let spec = KernelSpec::gaussian(rng.random_range(0.1..0.5), 0.0).unwrap();
    run_split(&view, &spec, DEFAULT_RANK_TOL).unwrap()
}

fn c8_minimal_norm() -> Outcome {
    let mut ok = 0;
    let mut worst = 0.0f64;
    for seed in 0..100 {
        let run = well_conditioned_run(900 + seed);
        let rep = match minimal_norm_check(&run.embedding, &run.residual, 1, seed) {
            Ok(r) => r,
            Err(e) => return Err(format!("instance {seed}: {e}")),
        };
        worst = worst.max(rep.max_violation);
        if !rep.vacuous && rep.max_violation <= 1e-8 {
            ok += 1;
        }
    }
    count(ok, 100, worst, "norm defect")
}

fn c9_bound_chain() -> Outcome {
    let mut ok = 0;
    let mut worst = f64::INFINITY;
    for seed in 0..100 {
        let run = random_run(1000 + seed);
        let b = error_bounds(&run.residual, run.embedding.view()).unwrap();
        worst = worst
            .min(b.trace_bound - b.avg_distance)
            .min(b.spectral_bound - b.trace_bound);
        if b.trace_bound - b.avg_distance >= -1e-10
            && b.spectral_bound - b.trace_bound >= -1e-10
        {
            ok += 1;
        }
    }
    count(ok, 100, worst, "slack")
}

fn c10_gaps() -> Outcome {
    let mut ok = 0;
    let mut worst = f64::INFINITY;
    for seed in 0..100 {
        let run = random_run(1100 + seed);
        let l1 = run.full_spectra.lambda_max();
        let tol = 1e-8 * l1;
        let Ok(c) = spectrum_comparison(&run.full_spectra, &run.embedding, &run.model) else {
            continue;
        };
        let mut slack = f64::INFINITY;
        for g in &c.lambda_gamma_gaps {
            slack = slack.min(*g + tol).min(c.k0_norm + tol - g);
        }
        for g in &c.gamma_sigma_gaps {
            slack = slack.min(*g + tol).min(c.t_norm + tol - g);
        }
        for l in &c.tail {
            slack = slack.min(*l + tol).min(c.k0_norm + tol - l);
        }
        worst = worst.min(slack / l1);
        if slack >= 0.0 {
            ok += 1;
        }
    }
    count(ok, 100, worst, "relative slack")
}

fn c11_l_spectrum() -> Outcome {
    let mut ok = 0;
    let mut worst = 0.0f64;
    for seed in 0..50 {
        let run = random_run(1200 + seed);
        let l1 = run.full_spectra.lambda_max();
        let Ok(c) = spectrum_comparison(&run.full_spectra, &run.embedding, &run.model) else {
            continue;
        };
        worst = worst.max(c.l_gamma_defect / l1);
        if c.l_gamma_defect <= 1e-8 * l1 {
            ok += 1;
        }
    }
    count(ok, 50, worst, "relative defect")
}

/// Linear kernel; training points in a 3-d subspace with decaying scales, test
/// points slightly off it in a fourth direction.
fn near_span_run(seed: u64) -> SplitRun {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut point = |offset: f64| -> Vec<f64> {
        let mut p: Vec<f64> = (0..3).map(|j| rng.random_range(-1.0..1.0) * 0.5f64.powi(j)).collect();
        p.push(offset);
        p
    };
    let train = MeasuredSet::uniform((0..6).map(|_| point(0.0)).collect()).unwrap();
    let test = MeasuredSet::uniform((0..2).map(|_| point(0.05)).collect()).unwrap();
    let view = SplitView::from_parts(&train, Some(&test)).unwrap();
    run_split(&view, &KernelSpec::Linear, DEFAULT_RANK_TOL).unwrap()
}

fn c12_perturbation_order() -> Outcome {
    let mut ok = 0;
    let mut used = 0;
    let mut seed = 1300;
    let (mut lo, mut hi) = (f64::INFINITY, 0.0f64);
    while used < 20 {
        let run = near_span_run(seed);
        seed += 1;
        let est = perturbation_estimate(&run.full_spectra, run.residual.projector()).unwrap();
        if !est.degenerate.is_empty() {
            continue;
        }
        used += 1;
        let rep = perturbation_scaling(&run, &[1.0, 0.5, 0.25]).unwrap();
        for r in &rep.ratios {
            lo = lo.min(*r);
            hi = hi.max(*r);
        }
        if rep.ratios.iter().all(|r| (2.5..=5.5).contains(r)) {
            ok += 1;
        }
    }
    let msg = format!("{ok}/20 instances, per-halving ratios in [{lo:.3}, {hi:.3}]");
    if ok == 20 {
        Ok(msg)
    } else {
        Err(msg)
    }
}

fn c13_diffusion_stochastic() -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(13);
    let mut ok = 0;
    let (mut row_err, mut pair_err) = (0.0f64, 0.0f64);
    for _ in 0..100 {
        let n = rng.random_range(2..40);
        let d = rng.random_range(1..6);
        let s = random_set(&mut rng, n, d);
        let m = diffusion_fit(&s, rng.random_range(0.2..3.0), 0.0, DEFAULT_RANK_TOL).unwrap();
        let mu = s.weights();
        let rw = random_walk_kernel(&m);
        let mut re = 0.0f64;
        for i in 0..n {
            let row: f64 = (0..n).map(|j| rw.get(i, j) * mu[j]).sum();
            re = re.max((row - 1.0).abs());
        }
        let k = m.diffusion_kernel();
        let phi0: Vec<f64> = m.densities().iter().map(|v| (v / m.total_mass()).sqrt()).collect();
        let mut pe = (m.spectra().eigenvalues()[0] - 1.0).abs();
        for i in 0..n {
            let kphi: f64 = (0..n).map(|j| k.get(i, j) * phi0[j] * mu[j]).sum();
            pe = pe.max((kphi - phi0[i]).abs());
            pe = pe.max((m.trivial_eigenfunction()[i] - phi0[i]).abs());
        }
        row_err = row_err.max(re);
        pair_err = pair_err.max(pe);
        if re <= 1e-12 && pe <= 1e-8 {
            ok += 1;
        }
    }
    let msg = format!("{ok}/100 instances, worst row-sum error {row_err:e}, worst trivial-pair error {pair_err:e}");
    if ok == 100 {
        Ok(msg)
    } else {
        Err(msg)
    }
}

fn c14_diffusion_extension() -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(14);
    let mut ok = 0;
    let (mut ext_err, mut exch_err) = (0.0f64, 0.0f64);
    for _ in 0..100 {
        let n = rng.random_range(2..20);
        let s = random_set(&mut rng, n, 2);
        let m = diffusion_fit(&s, rng.random_range(0.02..0.2), 0.0, DEFAULT_RANK_TOL).unwrap();
        let e = diffusion_extend(&m, &s).unwrap();
        let ee = (&e.weighted - m.weighted()).amax();
        let r = exchange_identity_check(&m);
        ext_err = ext_err.max(ee);
        exch_err = exch_err.max(r.forward).max(r.converse);
        if ee <= 1e-8 && r.forward <= 1e-8 && r.converse <= 1e-8 {
            ok += 1;
        }
    }
    let msg = format!("{ok}/100 instances, worst extension error {ext_err:e}, worst exchange residual {exch_err:e}");
    if ok == 100 {
        Ok(msg)
    } else {
        Err(msg)
    }
}

// CLI round trips

fn bin() -> &'static str {
    env!("CARGO_BIN_EXE_outsample")
}

fn cli(args: &[&str]) -> Result<String, String> {
    let out = Command::new(bin())
        .args(args)
        .env_clear()
        .output()
        .map_err(|e| e.to_string())?;
    if !out.status.success() {
        return Err(format!("{args:?}: {}", String::from_utf8_lossy(&out.stderr)));
    }
    Ok(String::from_utf8_lossy(&out.stdout).into_owned())
}

fn read_csv(path: &Path) -> (Vec<String>, Vec<Vec<String>>) {
    let mut r = csv::Reader::from_path(path).unwrap();
    let head = r.headers().unwrap().iter().map(str::to_string).collect();
    let rows = r
        .records()
        .map(|rec| rec.unwrap().iter().map(str::to_string).collect())
        .collect();
    (head, rows)
}

fn numeric_block(path: &Path, prefix: &str) -> DMatrix<f64> {
    let (head, rows) = read_csv(path);
    let cols: Vec<usize> = (0..head.len()).filter(|&i| head[i].starts_with(prefix)).collect();
    DMatrix::from_fn(rows.len(), cols.len(), |r, c| rows[r][cols[c]].parse().unwrap())
}

fn report_value(report: &str, key: &str) -> f64 {
    report
        .lines()
        .find_map(|l| l.strip_prefix(&format!("{key}=")))
        .unwrap_or_else(|| panic!("no {key}"))
        .parse()
        .unwrap()
}

fn max_diff(a: &DMatrix<f64>, b: &DMatrix<f64>) -> f64 {
    assert_eq!(a.shape(), b.shape());
    (a - b).amax()
}

fn c15_cli() -> Outcome {
    let dir = tempfile::tempdir().map_err(|e| e.to_string())?;
    let p = |name: &str| -> PathBuf { dir.path().join(name) };
    let s = |path: &PathBuf| path.to_str().unwrap().to_string();
    let mut worst = 0.0f64;
    let mut identical = 0;

    // Every command twice into distinct files; artifacts must match byte for byte.
    let mut runs: Vec<(Vec<String>, Option<&str>)> = Vec::new();
    for tag in ["a", "b"] {
        runs.clear();
        let train = s(&p(&format!("train_{tag}.csv")));
        let test = s(&p(&format!("test_{tag}.csv")));
        let all = s(&p(&format!("all_{tag}.csv")));
        let cmds: Vec<Vec<String>> = vec![
            vec!["synth", "--shape", "swiss-roll", "--n", "60", "--noise", "0.1", "--seed", "4", "--out", &train],
            vec!["synth", "--shape", "swiss-roll", "--n", "12", "--seed", "5", "--out", &test],
            vec!["synth", "--shape", "circles", "--n", "50", "--noise", "0.05", "--seed", "6", "--out", &all],
            vec!["fit", "--data", &train, "--epsilon", "8", "--out", &s(&p(&format!("m_{tag}.json")))],
            vec![
                "extend",
                "--model",
                &s(&p(&format!("m_{tag}.json"))),
                "--data",
                &test,
                "--out",
                &s(&p(&format!("e_{tag}.csv"))),
            ],
            vec![
                "diagnose",
                "--model",
                &s(&p(&format!("m_{tag}.json"))),
                "--data",
                &test,
                "--out",
                &s(&p(&format!("diag_{tag}.txt"))),
            ],
            vec![
                "compare",
                "--data",
                &all,
                "--epsilon",
                "0.5",
                "--seed",
                "9",
                "--out",
                &s(&p(&format!("cmp_{tag}.txt"))),
            ],
            vec!["diffusion-fit", "--data", &train, "--epsilon", "8", "--out", &s(&p(&format!("dm_{tag}.json")))],
            vec![
                "diffusion-extend",
                "--model",
                &s(&p(&format!("dm_{tag}.json"))),
                "--data",
                &train,
                "--out",
                &s(&p(&format!("de_{tag}.csv"))),
            ],
        ]
        .into_iter()
        .map(|v| v.into_iter().map(|x| x.to_string()).collect())
        .collect();
        for c in cmds {
            let args: Vec<&str> = c.iter().map(String::as_str).collect();
            cli(&args)?;
        }
    }
    let artifacts = [
        "train", "test", "all", "m", "e", "diag", "cmp", "dm", "de",
    ];
    let ext = |a: &str| match a {
        "m" | "dm" => "json",
        "diag" | "cmp" => "txt",
        _ => "csv",
    };
    for a in artifacts {
        let x = std::fs::read(p(&format!("{a}_a.{}", ext(a)))).unwrap();
        let y = std::fs::read(p(&format!("{a}_b.{}", ext(a)))).unwrap();
        if x == y {
            identical += 1;
        }
    }

    // In-process equivalence.
    let train = generate(Shape::SwissRoll, 60, 0.1, 4).unwrap();
    let test = generate(Shape::SwissRoll, 12, 0.0, 5).unwrap();
    let all = generate(Shape::Circles, 50, 0.05, 6).unwrap();
    let read_set = |path: PathBuf| {
        let pts = numeric_block(&path, "x");
        (0..pts.nrows()).map(|i| pts.row(i).iter().copied().collect::<Vec<f64>>()).collect::<Vec<_>>()
    };
    for (set, file) in [(&train, "train_a.csv"), (&test, "test_a.csv"), (&all, "all_a.csv")] {
        let pts = read_set(p(file));
        for (a, b) in pts.iter().zip(set.points()) {
            for (x, y) in a.iter().zip(b) {
                worst = worst.max((x - y).abs());
            }
        }
    }

    let spec = KernelSpec::gaussian(8.0, 0.0).unwrap();
    let model = fit(&train, &spec, DEFAULT_RANK_TOL).unwrap();
    let text = std::fs::read_to_string(p("m_a.json")).unwrap();
    let Model::Nystrom(loaded) = from_json(&text).map_err(|e| e.to_string())? else {
        return Err("fit wrote a non-nystrom model".into());
    };
    worst = worst.max(max_diff(loaded.spectra().eigenfunctions(), model.spectra().eigenfunctions()));
    for (a, b) in loaded.spectra().eigenvalues().iter().zip(model.spectra().eigenvalues()) {
        worst = worst.max((a - b).abs());
    }
    let emb = model.embed(test.points()).unwrap();
    worst = worst.max(max_diff(&numeric_block(&p("e_a.csv"), "psi_"), &emb));

    let view = SplitView::from_parts(&train, Some(&test)).unwrap();
    let run = run_split(&view, &spec, DEFAULT_RANK_TOL).unwrap();
    let b = error_bounds(&run.residual, &view).unwrap();
    let diag = std::fs::read_to_string(p("diag_a.txt")).unwrap();
    for (key, v) in [
        ("avg_distance", b.avg_distance),
        ("trace_bound", b.trace_bound),
        ("spectral_bound", b.spectral_bound),
    ] {
        worst = worst.max((report_value(&diag, key) - v).abs());
    }

    let idx = random_test_indices(all.len(), 0.2, 9).unwrap();
    let cview = split(&all, &idx).unwrap();
    let crun = run_split(&cview, &KernelSpec::gaussian(0.5, 0.0).unwrap(), DEFAULT_RANK_TOL).unwrap();
    let cb = error_bounds(&crun.residual, &cview).unwrap();
    let cmp = std::fs::read_to_string(p("cmp_a.txt")).unwrap();
    worst = worst.max((report_value(&cmp, "avg_distance") - cb.avg_distance).abs());
    worst = worst.max((report_value(&cmp, "trace_bound") - cb.trace_bound).abs());

    let dm = diffusion_fit(&train, 8.0, 0.0, DEFAULT_RANK_TOL).unwrap();
    let text = std::fs::read_to_string(p("dm_a.json")).unwrap();
    let Model::Diffusion(dl) = from_json(&text).map_err(|e| e.to_string())? else {
        return Err("diffusion-fit wrote a non-diffusion model".into());
    };
    worst = worst.max(max_diff(dl.standard(), dm.standard()));
    let de = diffusion_extend(&dm, &train).unwrap();
    let de_path = p("de_a.csv");
    worst = worst.max(max_diff(&numeric_block(&de_path, "weighted_"), &de.weighted));
    worst = worst.max(max_diff(&numeric_block(&de_path, "standard_"), &de.standard));
    worst = worst.max(max_diff(&numeric_block(&de_path, "normalized_"), &de.normalized));

    let msg = format!(
        "{identical}/{} artifacts byte-identical across reruns, max CLI vs library difference {worst:e}",
        artifacts.len()
    );
    if identical == artifacts.len() && worst <= 1e-12 {
        Ok(msg)
    } else {
        Err(msg)
    }
}

fn main() {
    let criteria: [Criterion; 15] = [
        ("mercer validation", c1_mercer),
        ("spectral round-trip", c2_roundtrip),
        ("isometry", c3_isometry),
        ("extension consistency", c4_extension_consistency),
        ("residual kernel", c5_residual_kernel),
        ("pythagorean identity", c6_pythagorean),
        ("exactness both directions", c7_exactness),
        ("minimal norm", c8_minimal_norm),
        ("error-bound chain", c9_bound_chain),
        ("eigenvalue gaps", c10_gaps),
        ("spectrum of l equals gamma", c11_l_spectrum),
        ("perturbation order", c12_perturbation_order),
        ("diffusion stochasticity and trivial pair", c13_diffusion_stochastic),
        ("diffusion extension consistency", c14_diffusion_extension),
        ("cli equivalence and determinism", c15_cli),
    ];
    let mut failed = 0;
    for (i, (name, f)) in criteria.iter().enumerate() {
        let outcome = std::panic::catch_unwind(f).unwrap_or_else(|e| {
            let msg = e
                .downcast_ref::<String>()
                .cloned()
                .or_else(|| e.downcast_ref::<&str>().map(|s| s.to_string()))
                .unwrap_or_default();
            Err(format!("panicked: {msg}"))
        });
        match outcome {
            Ok(msg) => println!("PASS {:>2} {name}: {msg}", i + 1),
            Err(msg) => {
                failed += 1;
                println!("FAIL {:>2} {name}: {msg}", i + 1);
            }
        }
    }
    println!("acceptance: {} passed, {failed} failed", criteria.len() - failed);
    if failed > 0 {
        std::process::exit(1);
    }
}
