mod common;

use std::collections::BTreeSet;

use proptest::prelude::*;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use voxelray::materials::MaterialTable;
use voxelray::simulator::{
    fill_gaps, simulate_heights, traverse, LossModel, PathLossStack, SimConfig,
};
use voxelray::stack::Heatmap;
use voxelray::voxelizer::VoxelGrid;
use voxelray::Vec3;

fn sim(grid: &VoxelGrid, tx: Vec3, heights: Vec<f64>, reflections: bool) -> PathLossStack {
    let cfg = SimConfig {
        heights_m: heights,
        enable_reflections: reflections,
        ..SimConfig::default()
    };
    let model = LossModel::new(&MaterialTable::builtin(), cfg.frequency_hz).unwrap();
    simulate_heights(grid, tx, &cfg, &model).unwrap()
}

fn random_point(rng: &mut ChaCha8Rng, grid: &VoxelGrid) -> Vec3 {
    let b = grid.bounds();
    // stay a hair inside so both endpoints are in the grid
    let mut span = |k: usize| rng.gen_range(b.min[k] + 1e-6..b.max[k] - 1e-6);
    Vec3::new(span(0), span(1), span(2))
}

#[test]
fn traversal_matches_brute_force_on_random_rays() {
    let grid = VoxelGrid::empty(Vec3::new(-0.5, 0.3, 0.1), 0.25, [13, 11, 9]).unwrap();
    let mut rng = ChaCha8Rng::seed_from_u64(11);
    for ray in 0..1500 {
        let (a, b) = (random_point(&mut rng, &grid), random_point(&mut rng, &grid));
        let got: BTreeSet<[usize; 3]> = traverse(&grid, a, b).unwrap().into_iter().collect();
        let want = common::brute_traversal(&grid, a, b);
        assert_eq!(got, want, "ray {ray}: {a:?} -> {b:?}");
    }
}

#[test]
fn traversal_matches_brute_force_on_lattice_rays() {
    // endpoints on voxel faces, edges and corners exercise the tie rules
    let grid = VoxelGrid::empty(Vec3::ZERO, 1.0, [8, 8, 8]).unwrap();
    let mut rng = ChaCha8Rng::seed_from_u64(5);
    for ray in 0..1000 {
        let mut p = || {
            Vec3::new(
                rng.gen_range(0..16) as f64 / 2.0,
                rng.gen_range(0..16) as f64 / 2.0,
                rng.gen_range(0..16) as f64 / 2.0,
            )
        };
        let (a, b) = (p(), p());
        let got: BTreeSet<[usize; 3]> = traverse(&grid, a, b).unwrap().into_iter().collect();
        let want = common::brute_traversal(&grid, a, b);
        assert_eq!(got, want, "ray {ray}: {a:?} -> {b:?}");
    }
}

#[test]
fn traversal_order_is_face_connected() {
    let grid = VoxelGrid::empty(Vec3::ZERO, 0.1, [20, 20, 20]).unwrap();
    let mut rng = ChaCha8Rng::seed_from_u64(3);
    for _ in 0..200 {
        let (a, b) = (random_point(&mut rng, &grid), random_point(&mut rng, &grid));
        let path = traverse(&grid, a, b).unwrap();
        assert_eq!(path.first().copied(), grid.index_of(a));
        assert_eq!(path.last().copied(), grid.index_of(b));
        for w in path.windows(2) {
            let step: i64 = (0..3)
                .map(|k| (w[0][k] as i64 - w[1][k] as i64).abs())
                .sum();
            assert_eq!(step, 1, "{:?} -> {:?}", w[0], w[1]);
        }
    }
}

#[test]
fn empty_grid_reproduces_free_space() {
    let grid = VoxelGrid::empty(Vec3::ZERO, 0.1, [30, 24, 18]).unwrap();
    let heights = voxelray::simulator::height_range(0.6, 1.6, 0.1).unwrap();
    for reflections in [false, true] {
        let s = sim(
            &grid,
            Vec3::new(1.23, 0.91, 1.17),
            heights.clone(),
            reflections,
        );
        assert!(s.valid.iter().all(|&v| v));
        for (l, f) in s.pathloss.values.iter().zip(&s.fspl.values) {
            assert!((l - f).abs() <= 0.1, "{l} vs {f}");
        }
    }
}

#[test]
fn shadowed_cells_pay_one_slab_transmission() {
    let table = MaterialTable::builtin();
    let concrete = table.id_of("concrete").unwrap();
    let tau = table
        .get(concrete)
        .unwrap()
        .fresnel_features(3.5e9)
        .unwrap()
        .tau_db;
    let grid = common::slab_grid([24, 12, 18], 0.1, &[(12, concrete.0)]);
    let s = sim(&grid, Vec3::new(0.35, 0.55, 1.15), vec![0.85, 1.25], false);
    let n = 24 * 12;
    for l in 0..2 {
        for y in 0..12 {
            for x in 13..24 {
                let i = l * n + y * 24 + x;
                assert!(s.valid[i]);
                let want = s.fspl.values[i] + tau.abs();
                assert!(
                    (s.pathloss.values[i] - want).abs() <= 0.01,
                    "({x},{y}) {}",
                    s.pathloss.values[i]
                );
            }
        }
    }
}

#[test]
fn worker_count_does_not_change_results() {
    let grid = common::slab_grid([20, 16, 18], 0.1, &[(6, 1), (13, 3)]);
    let run = |threads: usize| {
        let pool = rayon::ThreadPoolBuilder::new()
            .num_threads(threads)
            .build()
            .unwrap();
        pool.install(|| {
            sim(
                &grid,
                Vec3::new(0.25, 0.75, 1.45),
                vec![0.65, 1.05, 1.55],
                true,
            )
        })
    };
    let one = run(1);
    for threads in [2, 5] {
        let other = run(threads);
        let b = |s: &PathLossStack| {
            s.pathloss
                .values
                .iter()
                .map(|v| v.to_bits())
                .collect::<Vec<_>>()
        };
        assert_eq!(b(&one), b(&other));
        assert_eq!(one.valid, other.valid);
    }
}

fn slab_planes() -> impl Strategy<Value = Vec<(usize, u8)>> {
    // planes sit on multiples of three so a later insertion can never bridge two
    prop::collection::btree_map(1usize..5, 1u8..8, 0..3)
        .prop_map(|m| m.into_iter().map(|(k, mat)| (3 * k, mat)).collect())
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(24))]

    #[test]
    fn reflections_off_only_attenuate(planes in slab_planes(), ty in 0usize..6) {
        let grid = common::slab_grid([16, 6, 6], 0.1, &planes);
        let tx = Vec3::new(0.05, 0.05 + ty as f64 * 0.1, 0.35);
        prop_assume!(!grid.is_occupied(grid.index_of(tx).unwrap()));
        let off = sim(&grid, tx, vec![0.15, 0.45], false);
        let on = sim(&grid, tx, vec![0.15, 0.45], true);
        for i in 0..off.valid.len() {
            if off.valid[i] {
                prop_assert!(off.pathloss.values[i] - off.fspl.values[i] >= -1e-9);
            }
            if off.valid[i] && on.valid[i] {
                prop_assert!(on.pathloss.values[i] <= off.pathloss.values[i] + 1e-9);
            }
        }
    }

    #[test]
    fn extra_slab_never_lowers_shadowed_loss(planes in slab_planes(), extra in 1usize..16, mat in 1u8..8) {
        prop_assume!(planes.iter().all(|&(x, _)| x != extra));
        let before = common::slab_grid([16, 6, 6], 0.1, &planes);
        let mut with: Vec<(usize, u8)> = planes.clone();
        with.push((extra, mat));
        let after = common::slab_grid([16, 6, 6], 0.1, &with);
        let tx = Vec3::new(0.05, 0.25, 0.35);
        let a = sim(&before, tx, vec![0.15, 0.45], false);
        let b = sim(&after, tx, vec![0.15, 0.45], false);
        for l in 0..2 {
            for y in 0..6 {
                for x in extra + 1..16 {
                    let i = l * 96 + y * 16 + x;
                    if a.valid[i] && b.valid[i] {
                        prop_assert!(b.pathloss.values[i] >= a.pathloss.values[i] - 1e-9);
                    }
                }
            }
        }
    }

    #[test]
    fn gap_filling_is_idempotent(
        cells in prop::collection::vec((40.0f64..140.0, any::<bool>()), 1..60),
        nx in 1usize..8,
    ) {
        let ny = cells.len() / nx;
        prop_assume!(ny > 0);
        let cells = &cells[..nx * ny];
        prop_assume!(cells.iter().any(|c| c.1));
        let map = Heatmap::new(nx, ny, cells.iter().map(|c| if c.1 { c.0 } else { f64::NAN }).collect(), cells.iter().map(|c| c.1).collect()).unwrap();
        let once = fill_gaps(&map).unwrap();
        prop_assert!(once.iter().all(|v| v.is_finite()));
        for (i, c) in cells.iter().enumerate() {
            if c.1 {
                prop_assert_eq!(once[i], c.0);
            }
        }
        let again = fill_gaps(&Heatmap::new(nx, ny, once.clone(), vec![true; nx * ny]).unwrap()).unwrap();
        prop_assert_eq!(again, once);
    }
}
