use std::fs;

use kerf_lab::experiment::{
    dump_partitions, emit_outputs, generate_dataset, read_records_csv, run_sweep, summarize, ExperimentConfig,
    TargetFunction, TargetKind,
};
use kerf_lab::forests::parse_partitions;
use kerf_lab::kernel::kerf_predict_batch;
use kerf_lab::rng::substream;
use kerf_lab::{AnyPartition, CenteredTree, DirectionalSchedule, Flavor};

fn small(kind: TargetKind, seed: u64) -> ExperimentConfig {
    ExperimentConfig {
        n: 120,
        d: 2,
        k: 5,
        m_values: vec![1, 4, 16],
        reps: 3,
        test_fraction: 0.25,
        master_seed: seed,
        target: TargetFunction::benchmark(kind),
        algorithms: Flavor::ALL.to_vec(),
        threads: None,
    }
}

#[test]
fn quadratic_noise_matches_its_law() {
    let target = TargetFunction::benchmark(TargetKind::Quadratic);
    let n = 100_000;
    let data = generate_dataset(&target, n, 2, &mut substream(500, &[])).unwrap();
    let resid: Vec<f64> = data.iter().map(|(x, y)| y - target.mean(x.coords())).collect();
    let mean = resid.iter().sum::<f64>() / n as f64;
    let var = resid.iter().map(|r| (r - mean).powi(2)).sum::<f64>() / (n as f64 - 1.0);
    let sigma2 = target.noise_variance();
    assert!(mean.abs() <= 5.0 * (sigma2 / n as f64).sqrt(), "mean {mean}");
    assert!((var - sigma2).abs() <= 0.05 * sigma2, "variance {var}");
}

#[test]
fn records_are_reproducible_from_public_pieces() {
    // both algorithms of a repetition must see the same data: recompute each
    // record from rep_data and the cell seed
    let config = small(TargetKind::Linear, 77);
    let records = run_sweep(&config).unwrap();
    assert_eq!(records.len(), 3 * 3 * 2);
    for r in &records {
        let (train, test) = config.rep_data(r.rep).unwrap();
        let mi = config.m_values.iter().position(|&m| m == r.m).unwrap();
        let flavor = if r.algorithm == "centered-kerf" { Flavor::Centered } else { Flavor::Directional };
        let seed = config.cell_seed(r.rep, mi, flavor);
        assert_eq!(seed, r.seed);
        let rngs = (0..r.m).map(|t| substream(seed, &[t as u64]));
        let preds = match flavor {
            Flavor::Centered => {
                let f: Vec<_> = rngs.map(|mut g| CenteredTree::sample(config.k, 2, &mut g).unwrap()).collect();
                kerf_predict_batch(&f, &train, test.points()).unwrap()
            }
            Flavor::Directional => {
                let f: Vec<_> = rngs.map(|mut g| DirectionalSchedule::sample(config.k, 2, &mut g).unwrap()).collect();
                kerf_predict_batch(&f, &train, test.points()).unwrap()
            }
        };
        let l2: f64 = preds.iter().zip(test.responses()).map(|(p, y)| (p.value - y).powi(2)).sum();
        assert_eq!(l2, r.l2_sum);
        assert_eq!((r.n_train, r.n_test), (90, 30));
    }
}

#[test]
fn outputs_are_consistent_and_thread_independent() {
    let dir = tempfile::tempdir().unwrap();
    let mut texts = Vec::new();
    for threads in [1, 3] {
        let mut records = Vec::new();
        for kind in [TargetKind::Quadratic, TargetKind::Exp2d] {
            let mut c = small(kind, 5);
            c.threads = Some(threads);
            records.extend(run_sweep(&c).unwrap());
        }
        let summary = summarize(&records).unwrap();
        let out = dir.path().join(format!("t{threads}"));
        let paths = emit_outputs(&records, &summary, &out).unwrap();
        let names: Vec<String> = paths.iter().map(|p| p.file_name().unwrap().to_string_lossy().into()).collect();
        assert!(names.contains(&"records.csv".to_string()));
        assert!(names.contains(&"plot_exp2d_std_mse.csv".to_string()));
        texts.push(paths.iter().map(|p| fs::read(p).unwrap()).collect::<Vec<_>>());

        let back = read_records_csv(&fs::read_to_string(out.join("records.csv")).unwrap()).unwrap();
        assert_eq!(back.len(), records.len());
        let again = summarize(&back).unwrap();
        assert_eq!(again.len(), summary.len());
        for (a, b) in again.iter().zip(&summary) {
            assert_eq!((&a.target, &a.algorithm, a.m, a.reps), (&b.target, &b.algorithm, b.m, b.reps));
            assert!((a.mean_mse - b.mean_mse).abs() <= 1e-12 * b.mean_mse.max(1.0));
            assert!((a.std_mse - b.std_mse).abs() <= 1e-12 * b.std_mse.max(1.0));
        }
    }
    assert_eq!(texts[0], texts[1]);
}

#[test]
fn dumped_partitions_parse_back() {
    let dir = tempfile::tempdir().unwrap();
    let config = small(TargetKind::Linear, 3);
    let paths = dump_partitions(&config, dir.path()).unwrap();
    assert_eq!(paths.len(), 3 * 3 * 2);
    for p in paths {
        let name = p.file_name().unwrap().to_string_lossy().to_string();
        let m: usize = name.split("_M").nth(1).unwrap().split('_').next().unwrap().parse().unwrap();
        let parts = parse_partitions(&fs::read_to_string(&p).unwrap()).unwrap();
        assert_eq!(parts.len(), m, "{name}");
        let centered = name.ends_with("centered-kerf.txt");
        for part in parts {
            assert_eq!(matches!(part, AnyPartition::Centered(_)), centered);
        }
    }
}
