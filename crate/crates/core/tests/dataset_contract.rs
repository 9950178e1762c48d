mod common;

use std::collections::BTreeSet;

use proptest::prelude::*;
use voxelray::dataset::{
    augment, build_sample, read_grid, read_sample, read_samples, rotate_sample, split_scenes,
    write_grid, write_samples, DatasetSample, SplitManifest, SplitOptions, WriteOptions,
    FORMAT_VERSION,
};
use voxelray::materials::{MaterialId, MaterialTable};
use voxelray::simulator::SimConfig;
use voxelray::voxelizer::VoxelGrid;
use voxelray::{Error, Vec3};

fn bits(v: &[f32]) -> Vec<u32> {
    v.iter().map(|x| x.to_bits()).collect()
}

fn assert_bit_equal(a: &DatasetSample, b: &DatasetSample) {
    assert_eq!(a.dims, b.dims);
    assert_eq!(a.occupancy, b.occupancy);
    assert_eq!(bits(&a.reflection_db), bits(&b.reflection_db));
    assert_eq!(bits(&a.transmission_db), bits(&b.transmission_db));
    assert_eq!(bits(&a.distance_m), bits(&b.distance_m));
    assert_eq!(bits(&a.tx_position_m), bits(&b.tx_position_m));
    assert_eq!(bits(&a.fspl_db), bits(&b.fspl_db));
    assert_eq!(bits(&a.pathloss_db), bits(&b.pathloss_db));
    assert_eq!(a.valid_mask, b.valid_mask);
    assert_eq!(a.meta, b.meta);
}

/// A simulated sample on a small room with one concrete wall.
fn simulated_sample() -> DatasetSample {
    let table = MaterialTable::builtin();
    let concrete = table.id_of("concrete").unwrap().0;
    let mut grid = common::slab_grid([14, 9, 18], 0.1, &[(9, concrete)]);
    grid.set([2, 2, 0], Some(MaterialId(concrete)));
    let tx = Vec3::new(0.45, 0.45, 1.25);
    build_sample(
        &grid,
        &grid,
        &table,
        tx,
        &SimConfig::default(),
        "scene_007",
        4,
    )
    .unwrap()
}

#[test]
fn hdf5_round_trip_is_bit_exact() {
    let dir = tempfile::tempdir().unwrap();
    let mut samples = vec![
        common::toy_sample([5, 4, 3], 2, "scene_000", 0),
        common::toy_sample([3, 6, 2], 3, "scene_001", 9),
        simulated_sample(),
    ];
    samples[1].valid_mask = None;
    samples.extend(augment(&samples[2..], &[1, 2, 3]).unwrap());
    for compress in [false, true] {
        let path = dir.path().join(format!("d_{compress}.h5"));
        write_samples(&path, &samples, WriteOptions { compress }).unwrap();
        let back = read_samples(&path).unwrap();
        let mut want = samples.clone();
        want.sort_by_key(DatasetSample::sample_id);
        assert_eq!(back.len(), want.len());
        for (a, b) in want.iter().zip(&back) {
            assert_bit_equal(a, b);
        }
        let one = read_sample(&path, &samples[2].sample_id()).unwrap();
        assert_bit_equal(&samples[2], &one);
    }
}

#[test]
fn missing_pathloss_is_a_format_error_naming_it() {
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("d.h5");
    let s = common::toy_sample([4, 3, 2], 2, "scene_000", 1);
    write_samples(&path, std::slice::from_ref(&s), WriteOptions::default()).unwrap();
    {
        let f = hdf5::File::open_rw(&path).unwrap();
        f.unlink(&format!("samples/{}/pathloss_db", s.sample_id()))
            .unwrap();
    }
    let err = read_sample(&path, &s.sample_id()).unwrap_err();
    assert!(matches!(err, Error::Format(_)), "{err:?}");
    assert!(err.to_string().contains("pathloss_db"), "{err}");
    assert!(err.is_input_error());
}

#[test]
fn other_format_versions_are_rejected() {
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("d.h5");
    let mut s = common::toy_sample([4, 3, 2], 2, "scene_000", 1);
    s.meta.format_version = FORMAT_VERSION + 1;
    write_samples(&path, &[s], WriteOptions::default()).unwrap();
    let err = read_samples(&path).unwrap_err();
    assert!(matches!(err, Error::Format(_)), "{err:?}");
    assert!(err.to_string().contains("format_version"), "{err}");
}

#[test]
fn missing_file_is_an_input_error() {
    let err = read_samples(std::path::Path::new("/nonexistent/d.h5")).unwrap_err();
    assert!(err.is_input_error(), "{err:?}");
}

#[test]
fn grid_round_trip() {
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("g.h5");
    let table = MaterialTable::builtin();
    let mut g = VoxelGrid::empty(Vec3::new(-0.3, 0.2, -0.1), 0.1, [6, 5, 4]).unwrap();
    g.set([1, 2, 3], table.id_of("wood"));
    g.set([5, 4, 0], table.id_of("metal"));
    write_grid(&path, &g, &table).unwrap();
    let (back, t2) = read_grid(&path).unwrap();
    assert_eq!(back, g);
    assert_eq!(t2, table);
}

#[test]
fn augmentation_triples_the_sample_count() {
    let samples: Vec<_> = (0..4)
        .map(|t| common::toy_sample([4, 3, 2], 2, "scene_000", t))
        .collect();
    let rotated = augment(&samples, &[1, 2, 3]).unwrap();
    assert_eq!(rotated.len(), 3 * samples.len());
    let ids: BTreeSet<String> = samples
        .iter()
        .chain(&rotated)
        .map(DatasetSample::sample_id)
        .collect();
    assert_eq!(ids.len(), 4 * samples.len());
}

#[test]
fn rotated_distances_follow_the_rotated_transmitter() {
    let s = simulated_sample();
    for k in 1..=3 {
        let r = rotate_sample(&s, k).unwrap();
        let [nx, ny, nz] = r.dims;
        let o = r.meta.origin_m;
        let vs = r.meta.voxel_size_m;
        let tx = r.tx_position_m.map(|v| v as f64);
        for z in 0..nz {
            for y in 0..ny {
                for x in 0..nx {
                    let c = [x, y, z].map(|i| i as f64 + 0.5);
                    let d = ((o[0] + c[0] * vs - tx[0]).powi(2)
                        + (o[1] + c[1] * vs - tx[1]).powi(2)
                        + (o[2] + c[2] * vs - tx[2]).powi(2))
                    .sqrt()
                    .max(vs / 2.0);
                    let got = r.distance_m[x + nx * (y + ny * z)] as f64;
                    assert!((got - d).abs() < 1e-5, "k={k} ({x},{y},{z}): {got} vs {d}");
                }
            }
        }
    }
}

#[test]
fn split_semantics_hold_for_a_hundred_seeds() {
    let all = common::split_entries(4, 5, 4);
    for seed in 0..100 {
        let m = split_scenes(
            &all,
            &SplitOptions {
                seed,
                ..SplitOptions::default()
            },
        )
        .unwrap();
        common::check_split_semantics(&all, &m);
        assert_eq!(SplitManifest::from_json(&m.to_json()).unwrap(), m);
    }
    let pinned = SplitOptions {
        test_scenes: vec!["scene_002".into()],
        ..SplitOptions::default()
    };
    let m = split_scenes(&all, &pinned).unwrap();
    assert!(m.test.iter().all(|e| e.scene_id == "scene_002"));
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn four_quarter_turns_are_identity(nx in 1usize..7, ny in 1usize..7, nz in 1usize..4, levels in 1usize..4) {
        let s = common::toy_sample([nx, ny, nz], levels, "scene_000", 0);
        let mut r = s.clone();
        for _ in 0..4 {
            r = rotate_sample(&r, 1).unwrap();
        }
        prop_assert_eq!(&r.pathloss_db, &s.pathloss_db);
        prop_assert_eq!(&r.distance_m, &s.distance_m);
        prop_assert_eq!(&r.valid_mask, &s.valid_mask);
        for a in 0..3 {
            prop_assert!((r.tx_position_m[a] - s.tx_position_m[a]).abs() <= 1e-6);
            prop_assert!((r.meta.origin_m[a] - s.meta.origin_m[a]).abs() <= 1e-6);
        }
    }

    #[test]
    fn rotation_permutes_path_loss(nx in 1usize..7, ny in 1usize..7, k in 1u8..4) {
        let s = common::toy_sample([nx, ny, 2], 2, "scene_000", 0);
        let r = rotate_sample(&s, k).unwrap();
        let mut a = bits(&s.pathloss_db);
        let mut b = bits(&r.pathloss_db);
        a.sort_unstable();
        b.sort_unstable();
        prop_assert_eq!(a, b);
        prop_assert_eq!(r.meta.rotation_k, k);
    }

    #[test]
    fn split_semantics_for_random_shapes(scenes in 3usize..7, tx in 2u32..7, seed in any::<u64>()) {
        let all = common::split_entries(scenes, tx, 4);
        let m = split_scenes(&all, &SplitOptions { seed, ..SplitOptions::default() }).unwrap();
        common::check_split_semantics(&all, &m);
    }
}
