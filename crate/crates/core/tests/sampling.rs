use std::collections::HashMap;

use kerf_lab::rng::substream;
use kerf_lab::{CenteredTree, DirectionalSchedule};

fn chi_square(counts: &HashMap<Vec<u16>, usize>, categories: usize, draws: usize) -> f64 {
    assert_eq!(counts.len(), categories, "some outcome never appeared");
    let expected = draws as f64 / categories as f64;
    counts.values().map(|&c| (c as f64 - expected).powi(2) / expected).sum()
}

#[test]
fn centered_depth_two_trees_are_uniform() {
    let mut rng = substream(100, &[]);
    let draws = 80_000;
    let mut counts = HashMap::new();
    for _ in 0..draws {
        let t = CenteredTree::sample(2, 2, &mut rng).unwrap();
        *counts.entry(t.labels().to_vec()).or_insert(0) += 1;
    }
    // 7 degrees of freedom, 0.1% critical value
    let stat = chi_square(&counts, 8, draws);
    assert!(stat < 24.32, "chi-square {stat}");
}

#[test]
fn centered_root_label_is_uniform() {
    let mut rng = substream(101, &[]);
    let draws = 50_000;
    let mut counts = HashMap::new();
    for _ in 0..draws {
        let t = CenteredTree::sample(1, 5, &mut rng).unwrap();
        *counts.entry(t.labels().to_vec()).or_insert(0) += 1;
    }
    // 4 degrees of freedom, 0.1% critical value
    let stat = chi_square(&counts, 5, draws);
    assert!(stat < 18.47, "chi-square {stat}");
}

fn check_schedule_frequencies(k: u32, d: usize, seed: u64) {
    let draws = 100_000;
    let mut rng = substream(seed, &[]);
    let mut counts: HashMap<Vec<u16>, usize> = HashMap::new();
    for _ in 0..draws {
        let s = DirectionalSchedule::sample(k, d, &mut rng).unwrap();
        *counts.entry(s.sequence().to_vec()).or_insert(0) += 1;
    }
    let outcomes = d.pow(k);
    assert_eq!(counts.len(), outcomes);
    let p = 1.0 / outcomes as f64;
    let se = (p * (1.0 - p) / draws as f64).sqrt();
    for (seq, c) in counts {
        let freq = c as f64 / draws as f64;
        assert!((freq - p).abs() <= 5.0 * se, "{seq:?}: {freq} vs {p}");
    }
}

#[test]
fn directional_schedules_are_uniform() {
    check_schedule_frequencies(3, 2, 102);
    check_schedule_frequencies(2, 3, 103);
    check_schedule_frequencies(0, 4, 104);
}

#[test]
fn sampling_is_deterministic_per_stream() {
    let a = CenteredTree::sample(5, 3, &mut substream(7, &[1])).unwrap();
    let b = CenteredTree::sample(5, 3, &mut substream(7, &[1])).unwrap();
    let c = CenteredTree::sample(5, 3, &mut substream(7, &[2])).unwrap();
    assert_eq!(a, b);
    assert_ne!(a, c);
}
