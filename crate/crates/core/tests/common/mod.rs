//! Independent oracles and fixtures shared by the integration tests.
#![allow(dead_code)]

use std::collections::{BTreeMap, BTreeSet};

use voxelray::dataset::{DatasetSample, SampleMeta, SplitEntry, SplitManifest, FORMAT_VERSION};
use voxelray::materials::MaterialId;
use voxelray::voxelizer::VoxelGrid;
use voxelray::Vec3;

/// Minimal complex numbers, kept separate from the library's arithmetic.
#[derive(Clone, Copy, Debug)]
pub struct C(pub f64, pub f64);

impl C {
    pub fn add(self, o: C) -> C {
        C(self.0 + o.0, self.1 + o.1)
    }
    pub fn sub(self, o: C) -> C {
        C(self.0 - o.0, self.1 - o.1)
    }
    pub fn div(self, o: C) -> C {
        let den = o.0 * o.0 + o.1 * o.1;
        C(
            (self.0 * o.0 + self.1 * o.1) / den,
            (self.1 * o.0 - self.0 * o.1) / den,
        )
    }
    pub fn abs(self) -> f64 {
        self.0.hypot(self.1)
    }
    /// Principal square root through polar form.
    pub fn sqrt(self) -> C {
        let r = self.abs().sqrt();
        let th = self.1.atan2(self.0) / 2.0;
        C(r * th.cos(), r * th.sin())
    }
}

/// Normal-incidence reflection and transmission in dB from the refractive
/// index n = sqrt(εr′ − jσ/(ωε0)): Γ = (1 − n)/(1 + n), T = 2/(1 + n).
pub fn fresnel_oracle(eps_r: f64, sigma: f64, f_hz: f64) -> (f64, f64) {
    let eps0 = 8.854e-12;
    let omega = 2.0 * std::f64::consts::PI * f_hz;
    let n = C(eps_r, -sigma / (omega * eps0)).sqrt();
    let one = C(1.0, 0.0);
    let gamma = one.sub(n).div(one.add(n));
    let t = C(2.0, 0.0).div(one.add(n));
    (20.0 * gamma.abs().log10(), 20.0 * t.abs().log10())
}

/// Free-space loss from first principles, 20·log10(4πdf/c).
pub fn fspl_oracle(d_m: f64, f_hz: f64) -> f64 {
    20.0 * (4.0 * std::f64::consts::PI * d_m * f_hz / 2.998e8).log10()
}

fn snapped_floor(t: f64) -> i64 {
    let r = t.round();
    if (t - r).abs() < 1e-9 {
        r as i64
    } else {
        t.floor() as i64
    }
}

/// Voxels touched by `a → b`, found by marching in steps of 1/100 voxel and
/// also probing every face-crossing parameter and the midpoints between
/// consecutive crossings, so voxels clipped by less than a step are caught.
pub fn brute_traversal(grid: &VoxelGrid, a: Vec3, b: Vec3) -> BTreeSet<[usize; 3]> {
    let o = grid.origin();
    let vs = grid.voxel_size();
    let ca: Vec<f64> = (0..3).map(|k| (a[k] - o[k]) / vs).collect();
    let cb: Vec<f64> = (0..3).map(|k| (b[k] - o[k]) / vs).collect();
    let mut ts = vec![0.0, 1.0];
    let len = (0..3).map(|k| (cb[k] - ca[k]).powi(2)).sum::<f64>().sqrt();
    let steps = (len * 100.0).ceil() as usize;
    ts.extend((1..steps).map(|i| i as f64 / steps as f64));
    let mut events = vec![0.0, 1.0];
    for k in 0..3 {
        let d = cb[k] - ca[k];
        if d == 0.0 {
            continue;
        }
        let (lo, hi) = (
            ca[k].min(cb[k]).ceil() as i64,
            ca[k].max(cb[k]).floor() as i64,
        );
        for plane in lo..=hi {
            let t = (plane as f64 - ca[k]) / d;
            if (0.0..=1.0).contains(&t) {
                events.push(t);
            }
        }
    }
    events.sort_by(f64::total_cmp);
    for w in events.windows(2) {
        ts.push((w[0] + w[1]) / 2.0);
    }
    ts.extend(events);
    let dims = grid.dims();
    let mut out = BTreeSet::new();
    for t in ts {
        let mut ix = [0usize; 3];
        let mut inside = true;
        for k in 0..3 {
            let i = snapped_floor(ca[k] + t * (cb[k] - ca[k]));
            inside &= i >= 0 && (i as usize) < dims[k];
            ix[k] = i.max(0) as usize;
        }
        if inside {
            out.insert(ix);
        }
    }
    out
}

/// (MAE, RMSE) by the textbook formulas.
pub fn mae_rmse(pred: &[f64], truth: &[f64]) -> (f64, f64) {
    let n = pred.len() as f64;
    let mae = pred
        .iter()
        .zip(truth)
        .map(|(p, t)| (p - t).abs())
        .sum::<f64>()
        / n;
    let mse = pred
        .iter()
        .zip(truth)
        .map(|(p, t)| (p - t).powi(2))
        .sum::<f64>()
        / n;
    (mae, mse.sqrt())
}

/// Grid whose x-planes listed in `planes` are filled with `material`.
pub fn slab_grid(dims: [usize; 3], vs: f64, planes: &[(usize, u8)]) -> VoxelGrid {
    let mut g = VoxelGrid::empty(Vec3::ZERO, vs, dims).unwrap();
    for &(x, m) in planes {
        for z in 0..dims[2] {
            for y in 0..dims[1] {
                g.set([x, y, z], Some(MaterialId(m)));
            }
        }
    }
    g
}

/// Small synthetic sample with distinct values in every array.
pub fn toy_sample(dims: [usize; 3], levels: usize, scene: &str, tx_id: u32) -> DatasetSample {
    let [nx, ny, nz] = dims;
    let vol = nx * ny * nz;
    let st = nx * ny * levels;
    DatasetSample {
        dims,
        occupancy: (0..vol).map(|i| (i % 5 == 0) as u8).collect(),
        reflection_db: (0..vol).map(|i| -(i as f32) * 0.37).collect(),
        transmission_db: (0..vol).map(|i| -(i as f32).sqrt()).collect(),
        distance_m: (0..vol).map(|i| 0.05 + i as f32 * 0.013).collect(),
        tx_position_m: [0.15, 0.25, 0.35],
        fspl_db: (0..st).map(|i| 40.0 + (i as f32) * 0.1).collect(),
        pathloss_db: (0..st)
            .map(|i| 55.0 + (i as f32 * 0.7).sin() * 9.0)
            .collect(),
        valid_mask: Some((0..st).map(|i| (i % 3 != 0) as u8).collect()),
        meta: SampleMeta {
            scene_id: scene.to_string(),
            tx_id,
            voxel_size_m: 0.1,
            frequency_hz: 3.5e9,
            origin_m: [0.0, 0.0, -0.1],
            heights_m: (0..levels).map(|l| 0.1 * (l + 1) as f64).collect(),
            rotation_k: 0,
            format_version: FORMAT_VERSION,
        },
    }
}

/// Held-out scenes only in test; val shares scenes with train but never a
/// transmitter; every rotation of a transmitter sits in one split.
pub fn check_split_semantics(all: &[SplitEntry], m: &SplitManifest) {
    let listed: Vec<&SplitEntry> = m.train.iter().chain(&m.val).chain(&m.test).collect();
    assert_eq!(listed.len(), all.len());
    let ids: BTreeSet<&str> = listed.iter().map(|e| e.sample_id.as_str()).collect();
    assert_eq!(ids.len(), all.len());
    let scenes = |v: &[SplitEntry]| {
        v.iter()
            .map(|e| e.scene_id.clone())
            .collect::<BTreeSet<_>>()
    };
    let txs = |v: &[SplitEntry]| {
        v.iter()
            .map(|e| (e.scene_id.clone(), e.tx_id))
            .collect::<BTreeSet<_>>()
    };
    assert!(!m.train.is_empty() && !m.val.is_empty() && !m.test.is_empty());
    assert!(scenes(&m.test).is_disjoint(&scenes(&m.train)));
    assert!(scenes(&m.test).is_disjoint(&scenes(&m.val)));
    assert!(scenes(&m.val).is_subset(&scenes(&m.train)));
    assert!(txs(&m.val).is_disjoint(&txs(&m.train)));
    let mut home: BTreeMap<(String, u32), usize> = BTreeMap::new();
    for (i, part) in [&m.train, &m.val, &m.test].into_iter().enumerate() {
        for e in part {
            let prev = home.insert((e.scene_id.clone(), e.tx_id), i);
            assert!(
                prev.is_none() || prev == Some(i),
                "rotations of {} split apart",
                e.sample_id
            );
        }
    }
    m.check().unwrap();
}

/// Manifest rows for `scenes × tx × rotations` samples.
pub fn split_entries(scenes: usize, tx: u32, rotations: u8) -> Vec<SplitEntry> {
    let mut out = Vec::new();
    for s in 0..scenes {
        for t in 0..tx {
            for k in 0..rotations {
                let scene_id = format!("scene_{s:03}");
                out.push(SplitEntry {
                    sample_id: voxelray::dataset::sample_id(&scene_id, t, k),
                    scene_id,
                    tx_id: t,
                });
            }
        }
    }
    out
}
