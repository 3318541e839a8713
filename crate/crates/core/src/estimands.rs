//! Targets of estimation and the frames they resolve to.
//!
//! An [`EstimandSpec`] names a contrast, an exposure and the setting of the
//! upstream exposures ("world"). [`resolve`] turns a spec plus a [`Dataset`]
//! into the rows, outcome, exposure and adjustment design an estimator needs.

use std::collections::BTreeMap;
use std::fmt;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::numkit::{DesignMatrix, NumError};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "UPPERCASE")]
pub enum Contrast {
    Ate,
    Att,
    Atnt,
    Cace,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "UPPERCASE")]
pub enum Exposure {
    A1,
    A2,
    A3,
    A4,
}

impl Exposure {
    pub fn column(self) -> &'static str {
        match self {
            Exposure::A1 => "a1",
            Exposure::A2 => "a2",
            Exposure::A3 => "a3",
            Exposure::A4 => "a4",
        }
    }
}

/// Setting of the exposures upstream of the one being contrasted.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum World {
    /// Upstream exposures left at their natural values.
    Natural,
    /// Offer set to 0 or 1.
    Offer(bool),
    /// Everyone follows the programme.
    Followed,
    /// Everyone starts breastfeeding.
    Started,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub struct EstimandSpec {
    pub contrast: Contrast,
    pub exposure: Exposure,
    pub world: World,
    /// Restrict to one education level (0 low, 1 intermediate, 2 high).
    pub education: Option<u8>,
}

impl EstimandSpec {
    pub fn new(contrast: Contrast, exposure: Exposure) -> Self {
        Self {
            contrast,
            exposure,
            world: World::Natural,
            education: None,
        }
    }

    pub fn in_world(mut self, world: World) -> Self {
        self.world = world;
        self
    }

    pub fn for_education(mut self, level: u8) -> Self {
        self.education = Some(level);
        self
    }

    /// Checks chain-order rules that do not depend on data.
    pub fn check(&self) -> Result<(), FrameError> {
        let illegal = |why: &str| Err(FrameError::IllegalWorld(format!("{self}: {why}")));
        match (self.exposure, self.world) {
            (Exposure::A1, World::Natural) | (Exposure::A2, World::Natural) => {}
            (Exposure::A1 | Exposure::A2, _) => return illegal("no upstream exposure to set"),
            (Exposure::A3, World::Offer(_) | World::Followed) => {}
            (Exposure::A3, _) => return illegal("set the offer or uptake before contrasting breastfeeding initiation"),
            (Exposure::A4, World::Started) => {}
            (Exposure::A4, _) => return illegal("full-duration breastfeeding only has support among initiators"),
        }
        if self.contrast == Contrast::Cace && self.exposure != Exposure::A2 {
            return illegal("complier effects need the offer as instrument, which is valid only for uptake");
        }
        if let Some(e) = self.education {
            if e > 2 {
                return illegal("education level must be 0, 1 or 2");
            }
        }
        Ok(())
    }
}

impl fmt::Display for EstimandSpec {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let c = match self.contrast {
            Contrast::Ate => "ATE",
            Contrast::Att => "ATT",
            Contrast::Atnt => "ATNT",
            Contrast::Cace => "CACE",
        };
        write!(f, "{c}({:?}", self.exposure)?;
        match self.world {
            World::Natural => {}
            World::Offer(a) => write!(f, " | a1={}", u8::from(a))?,
            World::Followed => write!(f, " | a2=1")?,
            World::Started => write!(f, " | a3=1")?,
        }
        if let Some(e) = self.education {
            write!(f, ", edu={e}")?;
        }
        write!(f, ")")
    }
}

#[derive(Debug, Error, Clone, PartialEq)]
pub enum FrameError {
    #[error("dataset is missing column `{0}`")]
    MissingColumn(String),
    #[error("illegal estimand: {0}")]
    IllegalWorld(String),
    #[error("estimand {0} selects no rows")]
    EmptyFrame(String),
    #[error("column `{column}` must be 0/1, found {value} at row {row}")]
    NotBinary { column: String, row: usize, value: f64 },
    #[error(transparent)]
    Numeric(#[from] NumError),
}

/// Column-oriented table keyed by the CSV column names. Flags are 0/1.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct Dataset {
    n: usize,
    columns: BTreeMap<String, Vec<f64>>,
    order: Vec<String>,
}

impl Dataset {
    pub fn new(n: usize) -> Self {
        Self {
            n,
            ..Self::default()
        }
    }

    /// Adds or replaces a column; panics if its length differs from `rows()`.
    pub fn insert(&mut self, name: &str, values: Vec<f64>) {
        assert_eq!(values.len(), self.n, "column `{name}` has wrong length");
        if self.columns.insert(name.to_string(), values).is_none() {
            self.order.push(name.to_string());
        }
    }

    pub fn rows(&self) -> usize {
        self.n
    }

    pub fn column(&self, name: &str) -> Result<&[f64], FrameError> {
        self.columns
            .get(name)
            .map(|v| v.as_slice())
            .ok_or_else(|| FrameError::MissingColumn(name.to_string()))
    }

    pub fn has_column(&self, name: &str) -> bool {
        self.columns.contains_key(name)
    }

    /// Column names in insertion order.
    pub fn names(&self) -> &[String] {
        &self.order
    }

    /// New dataset holding the given rows (repeats allowed).
    pub fn select_rows(&self, rows: &[usize]) -> Self {
        let mut out = Self::new(rows.len());
        for name in &self.order {
            let col = &self.columns[name];
            out.insert(name, rows.iter().map(|&i| col[i]).collect());
        }
        out
    }
}

/// A named adjustment term, expanded to one or more design columns.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Term {
    Age,
    AgeSquared,
    /// Intermediate and high education indicators (low is the reference).
    Education,
    Allergy,
    Smoke,
    /// Urban living and eastern region.
    Residence,
    Female,
    Bweight,
    BweightSquared,
    Caesar,
    Uptake,
}

impl Term {
    fn expand(self, data: &Dataset) -> Result<Vec<(String, Vec<f64>)>, FrameError> {
        let col = |name: &str| data.column(name).map(|c| c.to_vec());
        Ok(match self {
            Term::Age => vec![("age".into(), col("age")?)],
            Term::AgeSquared => vec![("age^2".into(), col("age")?.iter().map(|v| v * v).collect())],
            Term::Education => {
                let edu = data.column("edu")?;
                vec![
                    ("edu_int".into(), edu.iter().map(|&e| f64::from(e == 1.0)).collect()),
                    ("edu_high".into(), edu.iter().map(|&e| f64::from(e == 2.0)).collect()),
                ]
            }
            Term::Allergy => vec![("allergy".into(), col("allergy")?)],
            Term::Smoke => vec![("smoke".into(), col("smoke")?)],
            Term::Residence => vec![("urban".into(), col("urban")?), ("east".into(), col("east")?)],
            Term::Female => vec![("female".into(), col("female")?)],
            // kilograms keep the quadratic on a sane scale
            Term::Bweight => vec![("bweight".into(), col("bweight")?.iter().map(|v| v / 1000.0).collect())],
            Term::BweightSquared => vec![(
                "bweight^2".into(),
                col("bweight")?.iter().map(|v| (v / 1000.0).powi(2)).collect(),
            )],
            Term::Caesar => vec![("caesar".into(), col("caesar")?)],
            Term::Uptake => vec![("a2".into(), col("a2")?)],
        })
    }
}

pub const UPTAKE_CONFOUNDERS: &[Term] = &[
    Term::Age,
    Term::AgeSquared,
    Term::Education,
    Term::Allergy,
    Term::Smoke,
    Term::Residence,
];

pub const INITIATION_CONFOUNDERS: &[Term] = &[
    Term::Age,
    Term::AgeSquared,
    Term::Education,
    Term::Allergy,
    Term::Smoke,
    Term::Residence,
    Term::Female,
    Term::Bweight,
    Term::BweightSquared,
    Term::Caesar,
];

/// Default adjustment set for a spec: none for the randomised offer, the
/// uptake set for A2, and the initiation set (plus uptake when the offer is
/// set to 1) for A3 and A4.
pub fn default_terms(spec: &EstimandSpec) -> Vec<Term> {
    match spec.exposure {
        Exposure::A1 => vec![],
        Exposure::A2 => UPTAKE_CONFOUNDERS.to_vec(),
        Exposure::A3 | Exposure::A4 => {
            let mut t = INITIATION_CONFOUNDERS.to_vec();
            if matches!(spec.world, World::Offer(true)) || matches!(spec.exposure, Exposure::A4) {
                t.push(Term::Uptake);
            }
            t
        }
    }
}

/// Outcome, binary exposure and adjustment columns over the selected rows.
#[derive(Debug, Clone, PartialEq)]
pub struct AnalysisFrame {
    pub spec: EstimandSpec,
    /// Indices into the source dataset.
    pub rows: Vec<usize>,
    pub y: Vec<f64>,
    pub a: Vec<f64>,
    pub confounders: Vec<(String, Vec<f64>)>,
}

impl AnalysisFrame {
    /// Builds a frame directly from vectors (fixtures, external data).
    pub fn from_parts(spec: EstimandSpec, y: Vec<f64>, a: Vec<f64>, confounders: Vec<(String, Vec<f64>)>) -> Self {
        assert_eq!(y.len(), a.len());
        for (_, c) in &confounders {
            assert_eq!(c.len(), y.len());
        }
        Self {
            spec,
            rows: (0..y.len()).collect(),
            y,
            a,
            confounders,
        }
    }

    pub fn len(&self) -> usize {
        self.y.len()
    }

    pub fn is_empty(&self) -> bool {
        self.y.is_empty()
    }

    pub fn n_treated(&self) -> usize {
        self.a.iter().filter(|&&a| a == 1.0).count()
    }

    pub fn confounder_labels(&self) -> Vec<String> {
        self.confounders.iter().map(|(l, _)| l.clone()).collect()
    }

    /// Intercept plus confounders.
    pub fn confounder_design(&self) -> Result<DesignMatrix, NumError> {
        let cols: Vec<&[f64]> = self.confounders.iter().map(|(_, c)| c.as_slice()).collect();
        DesignMatrix::with_intercept_rows(self.len(), self.confounder_labels(), &cols)
    }

    /// Frame on a resample of its own rows (indices into this frame).
    pub fn resample(&self, idx: &[usize]) -> Self {
        Self {
            spec: self.spec,
            rows: idx.iter().map(|&i| self.rows[i]).collect(),
            y: idx.iter().map(|&i| self.y[i]).collect(),
            a: idx.iter().map(|&i| self.a[i]).collect(),
            confounders: self
                .confounders
                .iter()
                .map(|(l, c)| (l.clone(), idx.iter().map(|&i| c[i]).collect()))
                .collect(),
        }
    }

    /// Copy without the adjustment columns whose label starts with any prefix.
    pub fn without(&self, prefixes: &[&str]) -> Self {
        let mut out = self.clone();
        out.confounders.retain(|(l, _)| !prefixes.iter().any(|p| l.starts_with(p)));
        out
    }
}

/// Instrument, exposure, outcome and optional covariates.
#[derive(Debug, Clone, PartialEq)]
pub struct IvFrame {
    pub spec: EstimandSpec,
    pub rows: Vec<usize>,
    pub y: Vec<f64>,
    pub a: Vec<f64>,
    pub z: Vec<f64>,
    pub covariates: Vec<(String, Vec<f64>)>,
}

impl IvFrame {
    pub fn from_parts(y: Vec<f64>, a: Vec<f64>, z: Vec<f64>) -> Self {
        assert!(y.len() == a.len() && a.len() == z.len());
        Self {
            spec: EstimandSpec::new(Contrast::Cace, Exposure::A2),
            rows: (0..y.len()).collect(),
            y,
            a,
            z,
            covariates: vec![],
        }
    }

    pub fn len(&self) -> usize {
        self.y.len()
    }

    pub fn is_empty(&self) -> bool {
        self.y.is_empty()
    }

    pub fn resample(&self, idx: &[usize]) -> Self {
        let pick = |v: &Vec<f64>| idx.iter().map(|&i| v[i]).collect::<Vec<f64>>();
        Self {
            spec: self.spec,
            rows: idx.iter().map(|&i| self.rows[i]).collect(),
            y: pick(&self.y),
            a: pick(&self.a),
            z: pick(&self.z),
            covariates: self.covariates.iter().map(|(l, c)| (l.clone(), pick(c))).collect(),
        }
    }
}

/// Resolves a spec against data with the default adjustment set.
pub fn resolve(spec: &EstimandSpec, data: &Dataset) -> Result<AnalysisFrame, FrameError> {
    resolve_with_terms(spec, data, &default_terms(spec))
}

pub fn resolve_with_terms(spec: &EstimandSpec, data: &Dataset, terms: &[Term]) -> Result<AnalysisFrame, FrameError> {
    spec.check()?;
    if spec.contrast == Contrast::Cace {
        return Err(FrameError::IllegalWorld(format!(
            "{spec}: complier effects are estimated from an instrument frame"
        )));
    }
    if spec.world == World::Followed {
        return Err(FrameError::IllegalWorld(format!(
            "{spec}: nobody without the offer follows the programme, so this world has no observational analogue"
        )));
    }
    let y = data.column("y")?;
    let a = binary(data, spec.exposure.column())?;
    let mut keep: Vec<bool> = vec![true; data.rows()];
    match spec.world {
        World::Offer(v) => restrict(&mut keep, binary(data, "a1")?, f64::from(u8::from(v))),
        World::Started => restrict(&mut keep, binary(data, "a3")?, 1.0),
        _ => {}
    }
    if spec.exposure == Exposure::A2 && spec.contrast == Contrast::Atnt {
        // the untreated who could have been treated are the offered non-takers
        restrict(&mut keep, binary(data, "a1")?, 1.0);
    }
    if let Some(level) = spec.education {
        restrict(&mut keep, data.column("edu")?, f64::from(level));
    }
    let rows: Vec<usize> = (0..data.rows()).filter(|&i| keep[i]).collect();
    if rows.is_empty() {
        return Err(FrameError::EmptyFrame(spec.to_string()));
    }
    let mut confounders = Vec::new();
    for term in terms {
        if spec.education.is_some() && *term == Term::Education {
            continue;
        }
        for (label, col) in term.expand(data)? {
            confounders.push((label, rows.iter().map(|&i| col[i]).collect()));
        }
    }
    Ok(AnalysisFrame {
        spec: *spec,
        y: rows.iter().map(|&i| y[i]).collect(),
        a: rows.iter().map(|&i| a[i]).collect(),
        rows,
        confounders,
    })
}

/// Instrument frame with the offer as instrument for uptake. Covariates are
/// the uptake adjustment set when `with_covariates` is set.
pub fn resolve_iv(spec: &EstimandSpec, data: &Dataset, with_covariates: bool) -> Result<IvFrame, FrameError> {
    spec.check()?;
    if spec.exposure != Exposure::A2 {
        return Err(FrameError::IllegalWorld(format!(
            "{spec}: the offer affects the outcome through uptake as well, so it is not an instrument for {:?}",
            spec.exposure
        )));
    }
    let y = data.column("y")?.to_vec();
    let a = binary(data, "a2")?.to_vec();
    let z = binary(data, "a1")?.to_vec();
    let mut covariates = Vec::new();
    if with_covariates {
        for term in UPTAKE_CONFOUNDERS {
            covariates.extend(term.expand(data)?);
        }
    }
    Ok(IvFrame {
        spec: *spec,
        rows: (0..data.rows()).collect(),
        y,
        a,
        z,
        covariates,
    })
}

fn binary<'a>(data: &'a Dataset, name: &str) -> Result<&'a [f64], FrameError> {
    let col = data.column(name)?;
    if let Some((row, &value)) = col.iter().enumerate().find(|(_, v)| **v != 0.0 && **v != 1.0) {
        return Err(FrameError::NotBinary {
            column: name.to_string(),
            row,
            value,
        });
    }
    Ok(col)
}

fn restrict(keep: &mut [bool], col: &[f64], value: f64) {
    for (k, v) in keep.iter_mut().zip(col) {
        *k &= *v == value;
    }
}

/// How a reported standard error was obtained.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SeMethod {
    Model,
    Bootstrap,
    Sandwich,
    DeltaMethod,
    AbadieImbens,
    None,
}

impl SeMethod {
    pub fn label(self) -> &'static str {
        match self {
            SeMethod::Model => "model",
            SeMethod::Bootstrap => "bootstrap",
            SeMethod::Sandwich => "sandwich",
            SeMethod::DeltaMethod => "delta",
            SeMethod::AbadieImbens => "abadie-imbens",
            SeMethod::None => "none",
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum CiKind {
    /// estimate +/- 1.96 se
    Normal,
    /// 2.5% and 97.5% bootstrap quantiles
    Percentile,
}

#[derive(Debug, Clone, PartialEq)]
pub struct EstimateReport {
    pub spec: EstimandSpec,
    pub method: String,
    pub estimate: f64,
    pub se: f64,
    pub se_method: SeMethod,
    pub ci95: (f64, f64),
    pub ci_kind: CiKind,
    pub diagnostics: BTreeMap<String, f64>,
    pub warnings: Vec<String>,
}

impl EstimateReport {
    /// Report with a normal-approximation interval.
    pub fn new(spec: EstimandSpec, method: &str, estimate: f64, se: f64, se_method: SeMethod) -> Self {
        let se = if se.is_nan() { se } else { se.max(0.0) };
        Self {
            spec,
            method: method.to_string(),
            estimate,
            se,
            se_method,
            ci95: (estimate - 1.96 * se, estimate + 1.96 * se),
            ci_kind: CiKind::Normal,
            diagnostics: BTreeMap::new(),
            warnings: Vec::new(),
        }
    }

    pub fn with_diagnostic(mut self, key: &str, value: f64) -> Self {
        self.diagnostics.insert(key.to_string(), value);
        self
    }

    pub fn with_warning(mut self, warning: impl Into<String>) -> Self {
        self.warnings.push(warning.into());
        self
    }

    /// Replaces the standard error and interval with resampling results.
    pub fn with_bootstrap(mut self, se: f64, ci: (f64, f64)) -> Self {
        self.se = se;
        self.se_method = SeMethod::Bootstrap;
        self.ci95 = ci;
        self.ci_kind = CiKind::Percentile;
        self
    }

    /// Replaces the standard error, keeping a normal interval.
    pub fn with_se(mut self, se: f64, method: SeMethod) -> Self {
        self.se = se;
        self.se_method = method;
        self.ci95 = (self.estimate - 1.96 * se, self.estimate + 1.96 * se);
        self.ci_kind = CiKind::Normal;
        self
    }
}
