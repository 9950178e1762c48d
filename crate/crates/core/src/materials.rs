//! Frequency-dependent material parameters and their normal-incidence
//! reflection/transmission features.
//!
//! Each material is described by four empirical constants `(a, b, c, d)`:
//! relative permittivity `εr′ = a·f^b` and conductivity `σ = c·f^d`, with `f`
//! in GHz. From those the complex wave impedance of the medium is
//!
//! ```text
//! η = sqrt(jωμ0 / (σ + jωεr′ε0))
//! ```
//!
//! and the single-interface Fresnel coefficients against free space are
//! `Γ = (η − η0)/(η + η0)` and `T = 2η/(η + η0)`. The voxel features are their
//! magnitudes in dB: `ρ = 20·log10|Γ|`, `τ = 20·log10|T|`.

use std::collections::BTreeMap;
use std::f64::consts::PI;
use std::path::Path;

use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Free-space wave impedance, ohms.
pub const ETA0: f64 = 376.730;
/// Vacuum permittivity, F/m.
pub const EPS0: f64 = 8.854e-12;
/// Vacuum permeability, H/m.
pub const MU0: f64 = 4.0 * PI * 1e-7;
/// Speed of light, m/s.
pub const SPEED_OF_LIGHT: f64 = 2.998e8;

/// Finite stand-in for −∞ dB in numeric feature channels (vacuum ρ, metal τ).
pub const DB_FLOOR: f64 = -100.0;

/// Short-circuit behaviour of a material row.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum MaterialKind {
    General,
    Vacuum,
    PerfectConductor,
}

/// ITU-style material parameterization.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MaterialSpec {
    pub name: String,
    pub a: f64,
    pub b: f64,
    pub c: f64,
    pub d: f64,
    pub kind: MaterialKind,
}

/// Derived electromagnetic properties of a material at one frequency.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct MaterialFeatures {
    pub eps_r_prime: f64,
    /// Conductivity, S/m.
    pub sigma: f64,
    /// Wave impedance, ohms.
    pub eta: Complex64,
    /// |Γ|
    pub reflection_magnitude: f64,
    /// |T|
    pub transmission_magnitude: f64,
    /// 20·log10|Γ|, may be −∞.
    pub rho_db: f64,
    /// 20·log10|T|, may be −∞.
    pub tau_db: f64,
}

impl MaterialFeatures {
    /// ρ with −∞ replaced by `floor`.
    pub fn rho_db_clamped(&self, floor: f64) -> f64 {
        self.rho_db.max(floor)
    }

    /// τ with −∞ replaced by `floor`.
    pub fn tau_db_clamped(&self, floor: f64) -> f64 {
        self.tau_db.max(floor)
    }

    /// Loss in dB added by one specular bounce (non-negative).
    pub fn reflection_loss_db(&self) -> f64 {
        -self.rho_db_clamped(DB_FLOOR)
    }

    /// Loss in dB added by crossing one slab of this material (non-negative).
    pub fn transmission_loss_db(&self) -> f64 {
        -self.tau_db_clamped(DB_FLOOR)
    }
}

fn check_frequency(f: f64, unit: &str) -> Result<()> {
    if f.is_finite() && f > 0.0 {
        Ok(())
    } else {
        Err(Error::Domain(format!(
            "frequency must be positive and finite, got {f} {unit}"
        )))
    }
}

impl MaterialSpec {
    pub fn new(
        name: impl Into<String>,
        a: f64,
        b: f64,
        c: f64,
        d: f64,
        kind: MaterialKind,
    ) -> Result<Self> {
        let spec = MaterialSpec {
            name: name.into(),
            a,
            b,
            c,
            d,
            kind,
        };
        spec.validate()?;
        Ok(spec)
    }

    pub fn general(name: impl Into<String>, a: f64, b: f64, c: f64, d: f64) -> Result<Self> {
        Self::new(name, a, b, c, d, MaterialKind::General)
    }

    pub fn validate(&self) -> Result<()> {
        let name = &self.name;
        if ![self.a, self.b, self.c, self.d]
            .iter()
            .all(|v| v.is_finite())
        {
            return Err(Error::Validation(format!(
                "material `{name}` has non-finite constants"
            )));
        }
        if self.a < 1.0 {
            return Err(Error::Validation(format!(
                "material `{name}`: a = {} < 1 is not a passive permittivity",
                self.a
            )));
        }
        if self.c < 0.0 {
            return Err(Error::Validation(format!(
                "material `{name}`: conductivity coefficient c = {} is negative",
                self.c
            )));
        }
        let is_vacuum_tuple = (self.a, self.b, self.c, self.d) == (1.0, 0.0, 0.0, 0.0);
        match self.kind {
            MaterialKind::Vacuum if !is_vacuum_tuple => Err(Error::Validation(format!(
                "material `{name}` is marked vacuum but constants are not (1, 0, 0, 0)"
            ))),
            MaterialKind::General | MaterialKind::PerfectConductor if is_vacuum_tuple => {
                Err(Error::Validation(format!(
                    "material `{name}` has vacuum constants but is not marked vacuum"
                )))
            }
            _ => Ok(()),
        }
    }

    /// Relative permittivity and conductivity (S/m) at `f_ghz`.
    pub fn eval_itu(&self, f_ghz: f64) -> Result<(f64, f64)> {
        check_frequency(f_ghz, "GHz")?;
        Ok((self.a * f_ghz.powf(self.b), self.c * f_ghz.powf(self.d)))
    }

    /// Normal-incidence Fresnel features at `f_hz`.
    pub fn fresnel_features(&self, f_hz: f64) -> Result<MaterialFeatures> {
        check_frequency(f_hz, "Hz")?;
        let (eps_r_prime, sigma) = self.eval_itu(f_hz * 1e-9)?;
        let (eta, gamma, trans) = match self.kind {
            MaterialKind::Vacuum => (Complex64::new(ETA0, 0.0), 0.0, 1.0),
            MaterialKind::PerfectConductor => (Complex64::new(0.0, 0.0), 1.0, 0.0),
            MaterialKind::General => {
                let omega = 2.0 * PI * f_hz;
                // sqrt(jωμ0 / (σ + jωε′ε0)) written against η0, so the
                // lossless εr′ = 1 limit lands exactly on free space;
                // principal branch, Re(η) ≥ 0 for passive media
                let eps_complex = Complex64::new(eps_r_prime, -sigma / (omega * EPS0));
                let eta = ETA0 / eps_complex.sqrt();
                let gamma = (eta - ETA0) / (eta + ETA0);
                let trans = 2.0 * eta / (eta + ETA0);
                (eta, gamma.norm(), trans.norm())
            }
        };
        Ok(MaterialFeatures {
            eps_r_prime,
            sigma,
            eta,
            reflection_magnitude: gamma,
            transmission_magnitude: trans,
            rho_db: 20.0 * gamma.log10(),
            tau_db: 20.0 * trans.log10(),
        })
    }
}

/// Index of a material inside a [`MaterialTable`].
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub struct MaterialId(pub u8);

impl MaterialId {
    pub fn index(self) -> usize {
        self.0 as usize
    }
}

/// Result of resolving a semantic label.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Lookup<'a> {
    pub id: MaterialId,
    pub spec: &'a MaterialSpec,
    /// True when the label was unknown and the default material was used.
    pub fallback: bool,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
struct MaterialEntry {
    #[serde(flatten)]
    spec: MaterialSpec,
    #[serde(default)]
    labels: Vec<String>,
    /// Marks the material used for unknown labels.
    #[serde(default, skip_serializing_if = "std::ops::Not::not")]
    default: bool,
}

/// Semantic label → material mapping.
#[derive(Debug, Clone, PartialEq)]
pub struct MaterialTable {
    materials: Vec<MaterialSpec>,
    labels: BTreeMap<String, MaterialId>,
    default: MaterialId,
}

const BUILTIN: &[(&str, f64, f64, f64, f64, MaterialKind, &[&str])] = &[
    (
        "vacuum",
        1.0,
        0.0,
        0.0,
        0.0,
        MaterialKind::Vacuum,
        &["air", "void"],
    ),
    (
        "concrete",
        5.24,
        0.0,
        0.0462,
        0.7822,
        MaterialKind::General,
        &["wall", "floor", "column"],
    ),
    (
        "brick",
        3.91,
        0.0,
        0.0238,
        0.16,
        MaterialKind::General,
        &["brick_wall", "fireplace"],
    ),
    (
        "plasterboard",
        2.73,
        0.0,
        0.0085,
        0.9395,
        MaterialKind::General,
        &["partition"],
    ),
    (
        "wood",
        1.99,
        0.0,
        0.0047,
        1.0718,
        MaterialKind::General,
        &[
            "bed", "table", "desk", "chair", "cabinet", "wardrobe", "shelf", "sofa", "door",
        ],
    ),
    (
        "ceiling_board",
        1.48,
        0.0,
        0.0011,
        1.075,
        MaterialKind::General,
        &["ceiling"],
    ),
    (
        "marble",
        7.074,
        0.0,
        0.0055,
        0.9262,
        MaterialKind::General,
        &["counter", "countertop"],
    ),
    (
        "metal",
        1.0,
        0.0,
        107.0,
        0.0,
        MaterialKind::PerfectConductor,
        &["fridge", "appliance", "radiator"],
    ),
];

impl Default for MaterialTable {
    fn default() -> Self {
        Self::builtin()
    }
}

impl MaterialTable {
    /// The eight reference materials with the default label vocabulary.
    pub fn builtin() -> Self {
        let entries = BUILTIN
            .iter()
            .map(|&(name, a, b, c, d, kind, labels)| MaterialEntry {
                spec: MaterialSpec {
                    name: name.to_string(),
                    a,
                    b,
                    c,
                    d,
                    kind,
                },
                labels: labels.iter().map(|s| s.to_string()).collect(),
                default: name == "concrete",
            })
            .collect();
        Self::from_entries(entries).expect("builtin material table is valid")
    }

    fn from_entries(entries: Vec<MaterialEntry>) -> Result<Self> {
        if entries.is_empty() {
            return Err(Error::Validation("material table is empty".into()));
        }
        if entries.len() > u8::MAX as usize + 1 {
            return Err(Error::Validation(
                "material table exceeds 256 entries".into(),
            ));
        }
        let mut materials = Vec::with_capacity(entries.len());
        let mut labels = BTreeMap::new();
        let mut default = None;
        for (i, entry) in entries.into_iter().enumerate() {
            entry.spec.validate()?;
            if materials
                .iter()
                .any(|m: &MaterialSpec| m.name == entry.spec.name)
            {
                return Err(Error::Validation(format!(
                    "duplicate material `{}`",
                    entry.spec.name
                )));
            }
            let id = MaterialId(i as u8);
            if entry.default && default.replace(id).is_some() {
                return Err(Error::Validation(
                    "more than one material is marked default".into(),
                ));
            }
            // a material's own name is always a valid label for it
            for label in std::iter::once(entry.spec.name.clone()).chain(entry.labels) {
                if let Some(prev) = labels.insert(label.clone(), id) {
                    if prev != id {
                        return Err(Error::Validation(format!(
                            "label `{label}` maps to more than one material"
                        )));
                    }
                }
            }
            materials.push(entry.spec);
        }
        let default = default
            .or_else(|| labels.get("concrete").copied())
            .unwrap_or(MaterialId(0));
        Ok(MaterialTable {
            materials,
            labels,
            default,
        })
    }

    /// Parse the JSON table format: an array of
    /// `{name, a, b, c, d, kind, labels: [...]}`. At most one entry may carry
    /// `"default": true`; without one, unknown labels fall back to concrete
    /// if present and the first material otherwise.
    pub fn from_json(text: &str) -> Result<Self> {
        let entries: Vec<MaterialEntry> = serde_json::from_str(text)?;
        Self::from_entries(entries)
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        Self::from_json(&text)
    }

    pub fn to_json(&self) -> String {
        let entries: Vec<MaterialEntry> = self
            .materials
            .iter()
            .enumerate()
            .map(|(i, spec)| MaterialEntry {
                spec: spec.clone(),
                labels: self
                    .labels
                    .iter()
                    .filter(|(l, id)| id.index() == i && **l != spec.name)
                    .map(|(l, _)| l.clone())
                    .collect(),
                default: i == self.default.index(),
            })
            .collect();
        serde_json::to_string_pretty(&entries).expect("material table serializes")
    }

    /// Change the material used for unknown labels.
    pub fn with_default(mut self, material: &str) -> Result<Self> {
        self.default = self
            .materials
            .iter()
            .position(|m| m.name == material)
            .map(|i| MaterialId(i as u8))
            .ok_or_else(|| Error::Argument(format!("no material named `{material}`")))?;
        Ok(self)
    }

    pub fn default_id(&self) -> MaterialId {
        self.default
    }

    pub fn len(&self) -> usize {
        self.materials.len()
    }

    pub fn is_empty(&self) -> bool {
        self.materials.is_empty()
    }

    pub fn materials(&self) -> &[MaterialSpec] {
        &self.materials
    }

    pub fn get(&self, id: MaterialId) -> Option<&MaterialSpec> {
        self.materials.get(id.index())
    }

    pub fn id_of(&self, material: &str) -> Option<MaterialId> {
        self.materials
            .iter()
            .position(|m| m.name == material)
            .map(|i| MaterialId(i as u8))
    }

    pub fn contains_label(&self, label: &str) -> bool {
        self.labels.contains_key(label)
    }

    pub fn labels(&self) -> impl Iterator<Item = &str> {
        self.labels.keys().map(String::as_str)
    }

    /// Resolve a semantic label. Unknown labels fall back to the default
    /// material and log a warning.
    pub fn lookup(&self, label: &str) -> Lookup<'_> {
        match self.labels.get(label) {
            Some(&id) => Lookup {
                id,
                spec: &self.materials[id.index()],
                fallback: false,
            },
            None => {
                log::warn!(
                    "unknown semantic label `{label}`, using `{}`",
                    self.materials[self.default.index()].name
                );
                Lookup {
                    id: self.default,
                    spec: &self.materials[self.default.index()],
                    fallback: true,
                }
            }
        }
    }

    /// Features of every material at `f_hz`, indexed by [`MaterialId`].
    pub fn features_at(&self, f_hz: f64) -> Result<Vec<MaterialFeatures>> {
        self.materials
            .iter()
            .map(|m| m.fresnel_features(f_hz))
            .collect()
    }
}
