use kronpcg::problems::{all_problems, gen_problem1, gen_problem2, run_experiment};
use kronpcg::tensor::{frobenius_norm, inner};
use kronpcg::{PrecondConfig, SolverConfig, SolverWarning, SpectrumSource};

fn slice_mean(u: &kronpcg::DenseTensor, i: usize) -> f64 {
    let q = u.shape().dim(1);
    (0..q).map(|j| u.get(&[i, j])).sum::<f64>() / q as f64
}

#[test]
fn band_problem_field_at_right_edge() {
    let (spec, h, _) = gen_problem2().unwrap();
    let runs = run_experiment(
        &spec,
        &h,
        &[PrecondConfig::Pinv],
        &SolverConfig::new(10),
        SpectrumSource::Numeric,
    )
    .unwrap();
    let u = &runs[0].solution;
    let slope = slice_mean(u, 39) - slice_mean(u, 38);
    assert!((slope + 0.5).abs() <= 0.05, "{slope}");
    let rhs = spec.rhs(&h).unwrap();
    assert!(runs[0].log.final_true_residual().unwrap() <= 1e-10 * frobenius_norm(&rhs));
}

#[test]
fn pinv_needs_at_most_three_iterations_on_diagonal_lines() {
    for (n, q) in [(5, 10), (20, 40), (50, 100)] {
        let (spec, h) = gen_problem1(n, q, q).unwrap();
        let runs = run_experiment(
            &spec,
            &h,
            &[PrecondConfig::Pinv],
            &SolverConfig::new(10),
            SpectrumSource::Numeric,
        )
        .unwrap();
        let log = &runs[0].log;
        assert!(log.iterations() <= 10);
        let s = log.iterations_to(1e-10 * frobenius_norm(&h)).unwrap();
        assert!(s <= 3, "{n}x{q}: {s}");
    }
}

#[test]
fn plain_cg_baseline_on_50x100() {
    let (spec, h) = gen_problem1(50, 100, 100).unwrap();
    let runs = run_experiment(
        &spec,
        &h,
        &[PrecondConfig::Identity],
        &SolverConfig::new(500),
        SpectrumSource::Numeric,
    )
    .unwrap();
    let s = runs[0]
        .log
        .iterations_to(1e-8 * frobenius_norm(&h))
        .unwrap();
    // measured baseline: 22
    assert!((15..=40).contains(&s), "{s}");
}

#[test]
fn nine_problem_pinv_sweep() {
    let problems = all_problems(1).unwrap();
    assert_eq!(problems.len(), 9);
    for (spec, h) in &problems {
        let runs = run_experiment(
            spec,
            h,
            &[PrecondConfig::Pinv],
            &SolverConfig::new(10),
            SpectrumSource::Numeric,
        )
        .unwrap();
        let rhs = spec.rhs(h).unwrap();
        let rel = runs[0].log.final_true_residual().unwrap() / frobenius_norm(&rhs);
        assert!(rel <= 1e-9, "{}: {rel:e}", spec.name);
        assert!(runs[0].breakdown.is_none());
    }
}

#[test]
fn low_rank_warnings_track_sign_of_inner_product() {
    let (spec, h) = gen_problem1(50, 100, 100).unwrap();
    let configs: Vec<PrecondConfig> = (1..=4)
        .map(|rank| PrecondConfig::LowRank { rank })
        .collect();
    let runs = run_experiment(
        &spec,
        &h,
        &configs,
        &SolverConfig::new(100),
        SpectrumSource::Numeric,
    )
    .unwrap();
    let op = spec.operator().unwrap();
    for run in &runs {
        for w in &run.log.warnings {
            if let SolverWarning::IndefinitePreconditioner { inner: v, .. } = w {
                assert!(*v <= 0.0);
            }
        }
    }
    // rank one is PSD, so it never warns
    assert!(runs[0]
        .log
        .warnings
        .iter()
        .all(|w| !matches!(w, SolverWarning::IndefinitePreconditioner { .. })));
    let m = kronpcg::Preconditioner::build(&op, &configs[0], SpectrumSource::Numeric).unwrap();
    let z = m.apply(&op, &h).unwrap();
    assert!(inner(&z, &h).unwrap() > 0.0);
}

#[test]
fn preconditioned_runs_beat_plain_cg() {
    let (spec, h) = gen_problem1(50, 100, 100).unwrap();
    let configs = [
        PrecondConfig::Identity,
        PrecondConfig::Jacobi { p: 3, omega: 1.3 },
        PrecondConfig::Pinv,
    ];
    let runs = run_experiment(
        &spec,
        &h,
        &configs,
        &SolverConfig::new(300),
        SpectrumSource::Numeric,
    )
    .unwrap();
    let level = 1e-9 * frobenius_norm(&h);
    let it: Vec<usize> = runs
        .iter()
        .map(|r| r.log.iterations_to(level).unwrap())
        .collect();
    assert!(it[2] < it[1] && it[1] < it[0], "{it:?}");
}
