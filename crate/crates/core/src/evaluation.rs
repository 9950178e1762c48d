//! Residual add-back, masked MAE/RMSE, and the material reference report.

use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::dataset::{read_samples, DatasetSample};
use crate::error::{Error, Result};
use crate::materials::MaterialTable;
use crate::stack::Stack;

/// Predicted path loss: the free-space baseline plus the predicted residual.
pub fn reconstruct(residual: &Stack, fspl: &Stack) -> Result<Stack> {
    residual.check_same_shape(fspl, "reconstruct")?;
    fspl.zip_with(residual, |f, r| f + r)
}

/// The residual a predictor should learn: `truth − fspl`.
pub fn residual_target(truth: &Stack, fspl: &Stack) -> Result<Stack> {
    truth.check_same_shape(fspl, "residual_target")?;
    truth.zip_with(fspl, |t, f| t - f)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct HeightError {
    pub height_m: f64,
    pub mae: f64,
    pub rmse: f64,
    pub n: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EvalReport {
    pub mae: f64,
    pub rmse: f64,
    /// Number of scored cells.
    pub n: usize,
    /// Levels without scored cells are omitted.
    pub per_height: Vec<HeightError>,
}

impl EvalReport {
    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("report serializes")
    }

    /// `height_m,mae,rmse,n` rows, one per level.
    pub fn to_csv(&self) -> String {
        let mut out = String::from("height_m,mae,rmse,n\n");
        for h in &self.per_height {
            out.push_str(&format!("{},{},{},{}\n", h.height_m, h.mae, h.rmse, h.n));
        }
        out
    }
}

#[derive(Default, Clone, Copy)]
struct Acc {
    abs: f64,
    sq: f64,
    n: usize,
}

impl Acc {
    fn add(&mut self, e: f64) {
        self.abs += e.abs();
        self.sq += e * e;
        self.n += 1;
    }

    fn merge(&mut self, o: Acc) {
        self.abs += o.abs;
        self.sq += o.sq;
        self.n += o.n;
    }

    fn mae(&self) -> f64 {
        self.abs / self.n as f64
    }

    fn rmse(&self) -> f64 {
        // RMSE ≥ MAE holds mathematically; guard the last ulp against rounding
        (self.sq / self.n as f64).sqrt().max(self.mae())
    }
}

/// Scores several aligned (prediction, truth, mask) triples together.
/// Stacks must share heights; `None` masks score every cell.
pub fn metrics_many(items: &[(&Stack, &Stack, Option<&[bool]>)]) -> Result<EvalReport> {
    let Some(first) = items.first() else {
        return Err(Error::Argument("nothing to evaluate".into()));
    };
    let heights = first.1.heights_m.clone();
    let mut levels = vec![Acc::default(); heights.len()];
    for (pred, truth, mask) in items {
        pred.check_same_shape(truth, "metrics")?;
        if truth.heights_m.len() != heights.len() {
            return Err(Error::Argument(
                "stacks with different level counts cannot be pooled".into(),
            ));
        }
        if let Some(m) = mask {
            if m.len() != truth.values.len() {
                return Err(Error::Argument(format!(
                    "mask has {} entries for {} cells",
                    m.len(),
                    truth.values.len()
                )));
            }
        }
        let n = truth.cells_per_level();
        for (l, acc) in levels.iter_mut().enumerate() {
            for i in l * n..(l + 1) * n {
                if mask.is_none_or(|m| m[i]) {
                    acc.add(pred.values[i] - truth.values[i]);
                }
            }
        }
    }
    let mut total = Acc::default();
    for a in &levels {
        total.merge(*a);
    }
    if total.n == 0 {
        return Err(Error::Argument("the mask selects no cells".into()));
    }
    if !(total.abs.is_finite() && total.sq.is_finite()) {
        return Err(Error::Domain(
            "non-finite values inside the evaluated cells".into(),
        ));
    }
    Ok(EvalReport {
        mae: total.mae(),
        rmse: total.rmse(),
        n: total.n,
        per_height: heights
            .iter()
            .zip(&levels)
            .filter(|(_, a)| a.n > 0)
            .map(|(&h, a)| HeightError {
                height_m: h,
                mae: a.mae(),
                rmse: a.rmse(),
                n: a.n,
            })
            .collect(),
    })
}

/// MAE and RMSE of `pred` against `truth` over the cells `mask` selects.
pub fn metrics(pred: &Stack, truth: &Stack, mask: Option<&[bool]>) -> Result<EvalReport> {
    metrics_many(&[(pred, truth, mask)])
}

/// Which cells of a sample are scored.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum MaskMode {
    /// Every cell of the gap-filled maps.
    #[default]
    All,
    /// Only cells the oracle resolved before gap filling.
    OracleValid,
}

fn pathloss_stack(s: &DatasetSample) -> Stack {
    let [nx, ny, _] = s.dims;
    Stack {
        nx,
        ny,
        heights_m: s.meta.heights_m.clone(),
        values: s.pathloss_db.iter().map(|&v| v as f64).collect(),
    }
}

/// Compares `pathloss_db` of every truth sample with the same-id sample in
/// the prediction file.
pub fn evaluate_files(pred: &Path, truth: &Path, mode: MaskMode) -> Result<EvalReport> {
    let preds = read_samples(pred)?;
    let truths = read_samples(truth)?;
    let mut stacks = Vec::new();
    for t in &truths {
        let id = t.sample_id();
        let Some(p) = preds.iter().find(|p| p.sample_id() == id) else {
            return Err(Error::Format(format!(
                "prediction file lacks sample `{id}`"
            )));
        };
        let mask = match mode {
            MaskMode::All => None,
            MaskMode::OracleValid => Some(
                t.valid_mask
                    .as_ref()
                    .ok_or_else(|| Error::Format(format!("sample `{id}` has no valid_mask")))?
                    .iter()
                    .map(|&v| v != 0)
                    .collect::<Vec<bool>>(),
            ),
        };
        stacks.push((pathloss_stack(p), pathloss_stack(t), mask));
    }
    let items: Vec<_> = stacks
        .iter()
        .map(|(p, t, m)| (p, t, m.as_deref()))
        .collect();
    metrics_many(&items)
}

/// Published reference row: name, εr′, σ (S/m), ρ and τ (dB) at 3.5 GHz.
/// Infinite entries are `None`.
pub const REFERENCE_3_5_GHZ: &[(&str, f64, f64, Option<f64>, Option<f64>)] = &[
    ("vacuum", 1.000, 0.00000, None, Some(0.00)),
    ("concrete", 5.240, 0.12309, Some(-7.49), Some(-10.36)),
    ("brick", 3.910, 0.02908, Some(-6.66), Some(-3.77)),
    ("plasterboard", 2.730, 0.02758, Some(-14.12), Some(-3.07)),
    ("wood", 1.990, 0.01799, Some(-13.30), Some(-2.41)),
    ("ceiling_board", 1.480, 0.00423, Some(-21.00), Some(-0.61)),
    ("marble", 7.074, 0.01755, Some(-5.78), Some(-2.86)),
    ("metal", 1.000, 107.000, Some(0.00), None),
];

/// Relative tolerance for εr′ and σ against the reference.
pub const PARAMETER_TOLERANCE: f64 = 1e-3;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ReferenceRow {
    pub material: String,
    pub eps_r_prime: f64,
    pub eps_r_prime_reference: f64,
    pub eps_r_prime_rel_delta: f64,
    pub sigma: f64,
    pub sigma_reference: f64,
    /// Relative delta, or absolute when the reference is zero.
    pub sigma_rel_delta: f64,
    /// dB; `None` stands for −∞.
    pub rho_db: Option<f64>,
    pub rho_db_reference: Option<f64>,
    /// `None` when exactly one side is infinite.
    pub rho_db_delta: Option<f64>,
    pub tau_db: Option<f64>,
    pub tau_db_reference: Option<f64>,
    pub tau_db_delta: Option<f64>,
    /// εr′ and σ agree within [`PARAMETER_TOLERANCE`].
    pub parameters_match: bool,
}

fn finite(v: f64) -> Option<f64> {
    v.is_finite().then_some(v)
}

fn db_delta(ours: Option<f64>, reference: Option<f64>) -> Option<f64> {
    match (ours, reference) {
        (Some(a), Some(b)) => Some(a - b),
        (None, None) => Some(0.0),
        _ => None,
    }
}

fn rel_delta(ours: f64, reference: f64) -> f64 {
    if reference == 0.0 {
        (ours - reference).abs()
    } else {
        ((ours - reference) / reference).abs()
    }
}

/// Evaluates every reference material present in `table` at `f_ghz` and
/// lists the deltas. ρ/τ deltas are informational.
pub fn reference_report(table: &MaterialTable, f_ghz: f64) -> Result<Vec<ReferenceRow>> {
    let mut rows = Vec::new();
    for &(name, eps_ref, sigma_ref, rho_ref, tau_ref) in REFERENCE_3_5_GHZ {
        let Some(id) = table.id_of(name) else {
            continue;
        };
        let spec = table.get(id).expect("id from table");
        let f = spec.fresnel_features(f_ghz * 1e9)?;
        let (rho, tau) = (finite(f.rho_db), finite(f.tau_db));
        let eps_d = rel_delta(f.eps_r_prime, eps_ref);
        let sigma_d = rel_delta(f.sigma, sigma_ref);
        rows.push(ReferenceRow {
            material: name.to_string(),
            eps_r_prime: f.eps_r_prime,
            eps_r_prime_reference: eps_ref,
            eps_r_prime_rel_delta: eps_d,
            sigma: f.sigma,
            sigma_reference: sigma_ref,
            sigma_rel_delta: sigma_d,
            rho_db: rho,
            rho_db_reference: rho_ref,
            rho_db_delta: db_delta(rho, rho_ref),
            tau_db: tau,
            tau_db_reference: tau_ref,
            tau_db_delta: db_delta(tau, tau_ref),
            parameters_match: eps_d <= PARAMETER_TOLERANCE && sigma_d <= PARAMETER_TOLERANCE,
        });
    }
    Ok(rows)
}

/// Plain-text rendering of [`reference_report`].
pub fn format_reference_report(rows: &[ReferenceRow]) -> String {
    let db = |v: Option<f64>| v.map_or("-inf".to_string(), |x| format!("{x:.2}"));
    let delta = |v: Option<f64>| v.map_or("n/a".to_string(), |x| format!("{x:+.2}"));
    let mut out = format!(
        "{:<14} {:>8} {:>10} {:>8} {:>8} {:>8} {:>8} {:>8} {:>8}  ok\n",
        "material", "eps_r", "sigma", "rho", "rho_ref", "d_rho", "tau", "tau_ref", "d_tau"
    );
    for r in rows {
        out.push_str(&format!(
            "{:<14} {:>8.3} {:>10.5} {:>8} {:>8} {:>8} {:>8} {:>8} {:>8}  {}\n",
            r.material,
            r.eps_r_prime,
            r.sigma,
            db(r.rho_db),
            db(r.rho_db_reference),
            delta(r.rho_db_delta),
            db(r.tau_db),
            db(r.tau_db_reference),
            delta(r.tau_db_delta),
            if r.parameters_match { "yes" } else { "NO" }
        ));
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;

    fn stack(values: Vec<f64>, nx: usize, ny: usize) -> Stack {
        let levels = values.len() / (nx * ny);
        Stack::new(
            nx,
            ny,
            (0..levels).map(|l| 0.6 + 0.1 * l as f64).collect(),
            values,
        )
        .unwrap()
    }

    #[test]
    fn two_cell_example() {
        let truth = stack(vec![50.0, 60.0], 2, 1);
        let pred = stack(vec![50.0, 64.0], 2, 1);
        let r = metrics(&pred, &truth, None).unwrap();
        assert_abs_diff_eq!(r.mae, 2.0);
        assert_abs_diff_eq!(r.rmse, 8f64.sqrt());
        assert_eq!(r.n, 2);
    }

    #[test]
    fn constant_offset() {
        let truth = stack((0..12).map(f64::from).collect(), 3, 2);
        let pred = truth.zip_with(&truth, |a, _| a + 2.0).unwrap();
        let r = metrics(&pred, &truth, None).unwrap();
        assert_abs_diff_eq!(r.mae, 2.0, epsilon = 1e-12);
        assert_abs_diff_eq!(r.rmse, 2.0, epsilon = 1e-12);
        assert_eq!(r.per_height.len(), 2);
    }

    #[test]
    fn mask_selects_cells() {
        let truth = stack(vec![0.0, 0.0, 0.0], 3, 1);
        let pred = stack(vec![1.0, 100.0, 1.0], 3, 1);
        let r = metrics(&pred, &truth, Some(&[true, false, true])).unwrap();
        assert_eq!(r.mae, 1.0);
        assert!(metrics(&pred, &truth, Some(&[false; 3])).is_err());
    }

    #[test]
    fn add_back() {
        let fspl = stack(vec![40.0, 41.0, 42.0, 43.0], 2, 2);
        let zero = stack(vec![0.0; 4], 2, 2);
        assert_eq!(reconstruct(&zero, &fspl).unwrap(), fspl);
        let ten = stack(vec![10.0; 4], 2, 2);
        assert_eq!(
            reconstruct(&ten, &fspl).unwrap().values,
            vec![50.0, 51.0, 52.0, 53.0]
        );
        assert!(reconstruct(&stack(vec![0.0; 2], 2, 1), &fspl).is_err());
    }

    #[test]
    fn csv_has_header_and_rows() {
        let truth = stack(vec![1.0; 8], 2, 2);
        let csv = metrics(&truth, &truth, None).unwrap().to_csv();
        assert_eq!(csv.lines().count(), 3);
        assert!(csv.starts_with("height_m,mae,rmse,n"));
    }

    #[test]
    fn reference_rows() {
        let rows = reference_report(&MaterialTable::builtin(), 3.5).unwrap();
        assert_eq!(rows.len(), 8);
        let concrete = rows.iter().find(|r| r.material == "concrete").unwrap();
        assert_eq!(concrete.eps_r_prime_rel_delta, 0.0);
        // the closed-form τ sits about 6 dB above the published value
        assert!((concrete.tau_db_delta.unwrap() - 6.0).abs() < 0.5);
        let vacuum = &rows[0];
        assert_eq!(vacuum.rho_db, None);
        assert_eq!(vacuum.tau_db_delta, Some(0.0));
        assert!(rows.iter().all(|r| r.parameters_match));
        assert!(format_reference_report(&rows).contains("concrete"));
    }
}
