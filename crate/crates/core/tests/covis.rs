mod common;

use common::{brute_force_covisibility, scene};
use mapfactor::viewgraph::{
    build_adjacency, covisibility, random_walk_sample, Adjacency, CovisGraph,
};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

#[test]
fn covisibility_matches_brute_force_bitwise() {
    let mut partial = 0;
    for seed in 0..20 {
        let (_, s) = scene(100 + seed, 2 + (seed as usize % 5), 40, 32);
        let g = covisibility(&s, 0.05).unwrap();
        let want = brute_force_covisibility(&s, 0.05);
        for (i, (a, b)) in g.fraction.iter().zip(&want).enumerate() {
            for (j, (x, y)) in a.iter().zip(b).enumerate() {
                assert_eq!(
                    x.to_bits(),
                    y.to_bits(),
                    "seed {seed} ({i},{j}): {x} vs {y}"
                );
                partial += (*x > 0.0 && *x < 1.0) as usize;
            }
        }
    }
    assert!(partial > 20, "only {partial} partial overlaps");
}

#[test]
fn tighter_tolerance_never_adds_overlap() {
    let (_, s) = scene(7, 4, 32, 32);
    let loose = covisibility(&s, 0.05).unwrap();
    let tight = covisibility(&s, 0.001).unwrap();
    for (a, b) in tight
        .fraction
        .iter()
        .flatten()
        .zip(loose.fraction.iter().flatten())
    {
        assert!(a <= b);
    }
}

fn random_graph(rng: &mut ChaCha8Rng, n: usize) -> CovisGraph {
    let mut f = vec![vec![0.0; n]; n];
    for (i, row) in f.iter_mut().enumerate() {
        for (j, v) in row.iter_mut().enumerate() {
            *v = if i == j {
                1.0
            } else if rng.gen_bool(0.3) {
                rng.gen_range(0.0..1.0)
            } else {
                0.0
            };
        }
    }
    CovisGraph::new(f).unwrap()
}

#[test]
fn sampled_view_sets_are_connected() {
    let mut rng = ChaCha8Rng::seed_from_u64(0);
    let mut sampled = 0;
    for trial in 0..1000u64 {
        let n = rng.gen_range(4..24);
        let adj = build_adjacency(&random_graph(&mut rng, n), 0.25);
        let k = rng.gen_range(1..=n);
        match random_walk_sample(&adj, k, trial) {
            Ok(views) => {
                sampled += 1;
                assert_eq!(views.len(), k);
                let mut sorted = views.clone();
                sorted.sort_unstable();
                sorted.dedup();
                assert_eq!(sorted.len(), k, "duplicates in {views:?}");
                assert!(adj.is_connected_subset(&views), "trial {trial}: {views:?}");
            }
            Err(e) => {
                let largest = adj.components().iter().map(Vec::len).max().unwrap();
                assert!(largest < k, "trial {trial}: {e}");
            }
        }
    }
    assert!(sampled > 500);
}

#[test]
fn sampling_is_seeded() {
    let adj = Adjacency::from_edges(6, &[(0, 1), (1, 2), (2, 3), (3, 4), (4, 5), (0, 5)]);
    assert_eq!(
        random_walk_sample(&adj, 4, 3).unwrap(),
        random_walk_sample(&adj, 4, 3).unwrap()
    );
}
